"""
Number Estimator - Hardy and Bergman numbers from radial profiles
Fits decay exponents of omega(R) (harmonic measure of the outer circle) and psi(r)
(circle integral of the Green function), classifies the Littlewood-Paley-type radial
integrals, and holds the exact inclusion calculus among H^q and A^p_alpha.
"""

import math
from enum import Enum
from numbers import Real
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from core.config import FitConfig, HardyScopeConfig, WalkConfig
from core.domain_geometry import (
    DomainSpec,
    class_d_check,
    is_simply_connected,
    largest_inscribed_radius,
)
from core.errors import ProfileExhaustedError
from core.walk_engine import RadialProfile, WalkEngine
from utils.helpers import DataFormatter, LogHelper, ValidationHelper

logger = LogHelper.get_logger("NumberEstimator")

DEFAULT_GRID = tuple(2.0 ** k for k in range(2, 10))


class WindowSlope(BaseModel):
    r_low: float
    r_high: float
    slope: float
    stderr: float


class GlobalFit(BaseModel):
    slope: float
    intercept: float
    r_squared: float


class ExponentEstimate(BaseModel):
    """Decay exponent of a radial profile; exponent is +inf when infinite is set"""

    exponent: float
    infinite: bool = False
    stderr: float = 0.0
    method: str = "Profile"
    window_slopes: List[WindowSlope] = []
    pairwise_slopes: List[float] = []
    global_fit: Optional[GlobalFit] = None
    dropped_radii: List[float] = []
    raw_exponent: Optional[float] = None
    note: str = ""
    profile: Optional[RadialProfile] = None


class Trend(str, Enum):
    CONVERGENT = "ConvergentTrend"
    DIVERGENT = "DivergentTrend"
    INCONCLUSIVE = "Inconclusive"


class IntegralTrend(BaseModel):
    """Tail behaviour of r^(p-1) * psi(r)^power on a radius grid"""

    verdict: Trend
    growth_exponent: Optional[float]
    radii: List[float]
    partial_sums: List[float]
    p: float
    power: float


class NumberReport(BaseModel):
    label: str
    h: ExponentEstimate
    h_cross: Optional[ExponentEstimate] = None
    method_gap: Optional[float] = None
    is_bloch: bool
    simply_connected: bool
    class_d: bool
    b_reported: Optional[float] = None
    b_interval: Optional[Tuple[float, float]] = None
    b_alpha_reported: Dict[float, Optional[float]] = {}
    inequality_violations: List[str] = []

    def rows(self) -> List[dict]:
        row = {
            "label": self.label,
            "h": self.h.exponent,
            "h_stderr": self.h.stderr,
            "h_method": self.h.method,
            "h_cross": self.h_cross.exponent if self.h_cross else None,
            "method_gap": self.method_gap,
            "bloch": self.is_bloch,
            "simply_connected": self.simply_connected,
            "class_d": self.class_d,
            "b": self.b_reported,
            "violations": len(self.inequality_violations),
        }
        for alpha, value in self.b_alpha_reported.items():
            row[f"b_alpha_{alpha:g}"] = value
        return [row]

    def text(self) -> str:
        fmt = DataFormatter.format_number
        lines = [f"domain: {self.label}", f"h ({self.h.method}): {fmt(self.h.exponent)} +/- {fmt(self.h.stderr)}"]
        if self.h_cross is not None:
            lines.append(f"h ({self.h_cross.method}): {fmt(self.h_cross.exponent)}; gap {fmt(self.method_gap)}")
        if self.h.note:
            lines.append(f"note: {self.h.note}")
        b = fmt(self.b_reported) if self.b_interval is None else f"[{fmt(self.b_interval[0])}, {fmt(self.b_interval[1])}]"
        lines.append(f"Bloch: {DataFormatter.format_bool(self.is_bloch)}; b={b}")
        for alpha, value in self.b_alpha_reported.items():
            lines.append(f"b_{alpha:g} = {fmt(value)}")
        lines.extend(f"violation: {v}" for v in self.inequality_violations)
        return "\n".join(lines)


def _window_fit(x: np.ndarray, y: np.ndarray, rel: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope and its standard error from per-point relative errors"""
    fit = stats.linregress(x, y)
    weights = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    return float(fit.slope), float(np.sqrt(np.sum((weights * rel) ** 2)))


def fit_exponent(profile: RadialProfile, cfg: Optional[FitConfig] = None, method: str = "Profile") -> ExponentEstimate:
    """liminf of -log(value)/log(r): minimum over the tail windows of the sliding least-squares slope, clamped at 0"""
    cfg = cfg or FitConfig()
    radii, means, errs = profile.radii, profile.means, profile.stderrs
    if radii.size < max(cfg.min_entries, cfg.window):
        raise ValueError(f"profile needs at least {max(cfg.min_entries, cfg.window)} entries, got {radii.size}")
    keep = means > cfg.drop_sigma * errs
    dropped = [float(r) for r in radii[~keep]]
    if np.count_nonzero(keep) < cfg.window:
        raise ProfileExhaustedError(int(np.count_nonzero(keep)), cfg.window)
    x = np.log(radii[keep])
    y = -np.log(means[keep])
    rel = errs[keep] / means[keep]
    r = radii[keep]

    pairwise = [float(v) for v in np.diff(y) / np.diff(x)]
    windows = []
    for i in range(x.size - cfg.window + 1):
        part = slice(i, i + cfg.window)
        slope, stderr = _window_fit(x[part], y[part], rel[part])
        windows.append(WindowSlope(r_low=float(r[i]), r_high=float(r[i + cfg.window - 1]), slope=slope, stderr=stderr))

    tail = windows[-math.ceil(len(windows) / 2):]
    lowest = min(tail, key=lambda w: w.slope)
    slopes = np.array([w.slope for w in windows])
    infinite = bool(np.all(slopes > cfg.threshold_infinite) and np.all(np.diff(slopes) > 0))

    half = x.size // 2
    fit = stats.linregress(x[half:], y[half:])
    global_fit = GlobalFit(slope=float(fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue ** 2))

    note = f"dropped {len(dropped)} statistically zero entries" if dropped else ""
    estimate = ExponentEstimate(
        exponent=math.inf if infinite else max(0.0, lowest.slope),
        infinite=infinite,
        stderr=lowest.stderr,
        method=method,
        window_slopes=windows,
        pairwise_slopes=pairwise,
        global_fit=global_fit,
        dropped_radii=dropped,
        raw_exponent=lowest.slope,
        note=note,
        profile=profile,
    )
    logger.debug("%s exponent %.4f from %d windows", method, estimate.exponent, len(windows))
    return estimate


def _positive(value: Real, name: str) -> Real:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def _weight(value: Real, name: str) -> Real:
    if not value > -1:
        raise ValueError(f"{name} must be greater than -1, got {value!r}")
    return value


def inclusion_hardy(q: Real, p: Real) -> bool:
    """H^q is contained in H^p"""
    return _positive(p, "p") <= _positive(q, "q")


def inclusion_hardy_in_bergman(q: Real, p: Real, alpha: Real) -> bool:
    """H^q is contained in A^p_alpha when q >= p/(alpha+2)"""
    _positive(q, "q")
    _positive(p, "p")
    _weight(alpha, "alpha")
    return q >= p / (alpha + 2)


def inclusion_bergman(p: Real, alpha: Real, q: Real, beta: Real) -> bool:
    """A^p_alpha is contained in A^q_beta; exact for Fraction arguments"""
    _positive(p, "p")
    _positive(q, "q")
    _weight(alpha, "alpha")
    _weight(beta, "beta")
    if p == q:
        return alpha <= beta
    if p > q:
        return (alpha + 1) / p < (beta + 1) / q
    return (alpha + 2) / p <= (beta + 2) / q


def consistency_report(h: Optional[float], b: Optional[float], b_alpha: Dict[float, Optional[float]],
                       tol: float = 0.1) -> List[str]:
    """Check h <= b, h <= b_alpha/(alpha+2) <= b up to tol; unknown values are skipped"""
    violations = []
    if h is not None and b is not None and not h <= b + tol:
        violations.append(f"h = {h:g} exceeds b = {b:g}")
    for alpha, value in sorted(b_alpha.items()):
        if value is None:
            continue
        scaled = value / (alpha + 2)
        if h is not None and not h <= scaled + tol:
            violations.append(f"h = {h:g} exceeds b_{alpha:g}/({alpha:g}+2) = {scaled:g}")
        if b is not None and not scaled <= b + tol:
            violations.append(f"b_{alpha:g}/({alpha:g}+2) = {scaled:g} exceeds b = {b:g}")
    return violations


class NumberEstimator:
    """Runs the walker estimators and turns their profiles into numbers"""

    def __init__(self, config: Optional[HardyScopeConfig] = None, engine: Optional[WalkEngine] = None):
        self.config = config or HardyScopeConfig()
        self.engine = engine or WalkEngine(self.config.walk)

    def _shortcut(self, spec: DomainSpec, method: str) -> Optional[ExponentEstimate]:
        if spec.base_enclosed:
            return ExponentEstimate(exponent=math.inf, infinite=True, method=method,
                                    note="bounded domain: every map into it is bounded")
        if not spec.nonpolar:
            return ExponentEstimate(exponent=0.0, method=method, note="polar complement: h = h(C) = 0")
        if not spec.has_unbounded_nonpolar:
            return ExponentEstimate(exponent=0.0, method=method, note="bounded complement: h <= b = 0")
        return None

    def _with_probe(self, shortcut: ExponentEstimate, fit) -> ExponentEstimate:
        try:
            raw = fit()
        except ProfileExhaustedError as exc:
            logger.warning("probe fit skipped: %s", exc)
            return shortcut
        return shortcut.model_copy(update={"raw_exponent": raw.raw_exponent, "profile": raw.profile,
                                           "window_slopes": raw.window_slopes, "global_fit": raw.global_fit})

    def hardy_eks(self, spec: DomainSpec, cfg: Optional[WalkConfig] = None,
                  R_grid: Sequence[float] = DEFAULT_GRID, probe: bool = False) -> ExponentEstimate:
        """h(D) as the decay exponent of omega(base, C_R, D_R)"""

        def fit():
            profile = self.engine.omega_profile(spec, R_grid, cfg=cfg)
            return fit_exponent(profile, self.config.fit, method="EKS")

        shortcut = self._shortcut(spec, "EKS")
        if shortcut is not None:
            return self._with_probe(shortcut, fit) if probe and not shortcut.infinite and spec.nonpolar else shortcut
        estimate = fit()
        logger.info("h_EKS(%s) = %s", spec.label, DataFormatter.format_number(estimate.exponent))
        return estimate

    def hardy_green(self, spec: DomainSpec, cfg: Optional[WalkConfig] = None,
                    r_grid: Sequence[float] = DEFAULT_GRID, probe: bool = False) -> ExponentEstimate:
        """h(D) as the decay exponent of psi(r)"""

        def fit():
            profile = self.engine.psi_profile(spec, r_grid, cfg=cfg)
            return fit_exponent(profile, self.config.fit, method="GreenProfile")

        shortcut = self._shortcut(spec, "GreenProfile")
        if shortcut is not None:
            return self._with_probe(shortcut, fit) if probe and not shortcut.infinite and spec.nonpolar else shortcut
        estimate = fit()
        logger.info("h_Green(%s) = %s", spec.label, DataFormatter.format_number(estimate.exponent))
        return estimate

    def integral_trend(self, spec: Optional[DomainSpec], p: float, cfg: Optional[WalkConfig] = None,
                       r_grid: Sequence[float] = DEFAULT_GRID, power: float = 1.0,
                       profile: Optional[RadialProfile] = None) -> IntegralTrend:
        """Classify the tail of r^(p-1) psi(r)^power: log-log slope below -1 means a finite integral"""
        ValidationHelper.validate_positive(p, "p")
        if profile is None:
            profile = self.engine.psi_profile(spec, r_grid, cfg=cfg)
        fit_cfg = self.config.fit
        radii, means, errs = profile.radii, profile.means, profile.stderrs
        keep = means > fit_cfg.drop_sigma * errs
        values = np.where(keep, radii ** (p - 1.0) * np.abs(means) ** power, 0.0)
        partial = cumulative_trapezoid(values, radii, initial=0.0)
        kept = np.flatnonzero(keep)
        growth = None
        verdict = Trend.INCONCLUSIVE
        if kept.size >= fit_cfg.window:
            tail = kept[-max(fit_cfg.window, kept.size // 2):]
            # log-value errors grow with r on Monte Carlo profiles; weight by their inverse
            sigma = power * errs[tail] / means[tail]
            weights = 1.0 / sigma if np.all(sigma > 0) else None
            growth = float(np.polyfit(np.log(radii[tail]), np.log(values[tail]), 1, w=weights)[0])
            if growth + 1.0 < -fit_cfg.trend_margin:
                verdict = Trend.CONVERGENT
            elif growth + 1.0 > fit_cfg.trend_margin:
                verdict = Trend.DIVERGENT
        logger.debug("trend p=%g power=%g: growth %s -> %s", p, power, growth, verdict.value)
        return IntegralTrend(verdict=verdict, growth_exponent=growth, radii=[float(r) for r in radii],
                             partial_sums=[float(s) for s in partial], p=p, power=power)

    def hardy_integral_diagnostic(self, spec: Optional[DomainSpec], p: float, cfg: Optional[WalkConfig] = None,
                                  r_grid: Sequence[float] = DEFAULT_GRID,
                                  profile: Optional[RadialProfile] = None) -> Trend:
        return self.integral_trend(spec, p, cfg, r_grid, 1.0, profile).verdict

    def bergman_alpha_profile(self, spec: Optional[DomainSpec], p: float, alpha: float,
                              cfg: Optional[WalkConfig] = None, r_grid: Sequence[float] = DEFAULT_GRID,
                              profile: Optional[RadialProfile] = None) -> Trend:
        """Necessary-condition diagnostic for A^p_alpha membership: trend of r^(p-1) psi^(alpha+2)"""
        alpha = ValidationHelper.validate_weight(alpha)
        return self.integral_trend(spec, p, cfg, r_grid, alpha + 2.0, profile).verdict

    def bloch_test(self, spec: DomainSpec) -> bool:
        """No arbitrarily large disks in D"""
        scan = self.config.scan
        found = largest_inscribed_radius(spec, scan.bloch_search_radius * spec.scale_hint,
                                         scan.bloch_grid_step * spec.scale_hint)
        return not found.unbounded_hint

    def number_report(self, spec: DomainSpec, cfg: Optional[WalkConfig] = None,
                      R_grid: Sequence[float] = DEFAULT_GRID, r_grid: Sequence[float] = DEFAULT_GRID,
                      alphas: Sequence[float] = (0.0, 1.0), method: str = "both") -> NumberReport:
        """h by one or both methods, the Bloch and structure tests, the b rules and the inequality check"""
        if method not in ("eks", "green", "both"):
            raise ValueError(f"method must be eks, green or both, got {method!r}")
        if method == "green":
            h, cross = self.hardy_green(spec, cfg, r_grid, probe=True), None
        else:
            h = self.hardy_eks(spec, cfg, R_grid, probe=True)
            cross = self.hardy_green(spec, cfg, r_grid, probe=True) if method == "both" else None
        gap = abs(h.exponent - cross.exponent) if cross is not None and not (h.infinite and cross.infinite) else None
        if cross is not None and h.infinite and cross.infinite:
            gap = 0.0

        scan = self.config.scan
        bloch = self.bloch_test(spec)
        simply = is_simply_connected(spec, scan.contact_samples)
        low, high = scan.class_d_powers
        radii = [spec.scale_hint * 2.0 ** k for k in range(low, high + 1)]
        class_d = class_d_check(spec, radii, scan.angular_resolution, scan.contact_samples).is_class_d

        b_interval = None
        if bloch:
            b = math.inf
            b_alpha = {float(a): math.inf for a in alphas}
        elif simply or class_d:
            b = h.exponent
            b_alpha = {float(a): (a + 2.0) * h.exponent for a in alphas}
        else:
            b = None
            b_interval = (h.exponent, math.inf)
            b_alpha = {float(a): None for a in alphas}

        violations = consistency_report(h.exponent, b, b_alpha, self.config.fit.consistency_tol)
        if violations:
            logger.warning("%s: %d inequality violations", spec.label, len(violations))
        return NumberReport(
            label=spec.label,
            h=h,
            h_cross=cross,
            method_gap=gap,
            is_bloch=bloch,
            simply_connected=simply,
            class_d=class_d,
            b_reported=b,
            b_interval=b_interval,
            b_alpha_reported=b_alpha,
            inequality_violations=violations,
        )
