"""
Analytic Catalog - explicit holomorphic maps on the unit disk
Littlewood-Paley quadrature for H^p and A^p_alpha membership, transition brackets
for h(f) and b_alpha(f), and closed-form domains (Riemann map onto the disk) for
the Green function / hyperbolic distance identities.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import special

from core.config import QuadratureConfig, WalkConfig, thread_count
from core.domain_geometry import DomainSpec, disk, half_plane, sector, slit_plane
from core.errors import BracketError
from core.walk_engine import Estimate, WalkEngine
from utils.helpers import LogHelper, ValidationHelper

logger = LogHelper.get_logger("AnalyticCatalog")

ComplexFn = Callable[[np.ndarray], np.ndarray]
LOG2_HALF = 0.5 * math.log(2.0)


def _log_abs(fn: ComplexFn) -> ComplexFn:
    return lambda z: np.log(np.abs(fn(z)))


@dataclass(frozen=True)
class AnalyticMap:
    """Holomorphic f on the unit disk with its derivative; zeros are only supported at the origin"""

    label: str
    f: ComplexFn
    df: ComplexFn
    known_h: Optional[float] = None
    known_target: Optional[str] = None
    zero_order: int = 0
    zero_coefficient: complex = 0j
    singular_angles: Tuple[float, ...] = ()
    log_abs_f: Optional[ComplexFn] = None
    log_abs_df: Optional[ComplexFn] = None

    def eval(self, z):
        return self.f(np.asarray(z, dtype=complex))

    def deriv(self, z):
        return self.df(np.asarray(z, dtype=complex))

    def log_moduli(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(log|f|, log|f'|), overflow-free where the map supplies them"""
        lf = (self.log_abs_f or _log_abs(self.f))(z)
        ldf = (self.log_abs_df or _log_abs(self.df))(z)
        return lf, ldf

    def rotated(self, phi: float) -> "AnalyticMap":
        """z -> f(e^{i phi} z)"""
        u = complex(math.cos(phi), math.sin(phi))
        f, df = self.f, self.df
        lf, ldf = self.log_abs_f, self.log_abs_df
        return replace(
            self,
            label=f"{self.label}@{phi:.6g}",
            f=lambda z: f(u * z),
            df=lambda z: u * df(u * z),
            zero_coefficient=self.zero_coefficient * u ** self.zero_order,
            singular_angles=tuple((a - phi) % (2 * math.pi) for a in self.singular_angles),
            log_abs_f=None if lf is None else (lambda z: lf(u * z)),
            log_abs_df=None if ldf is None else (lambda z: ldf(u * z)),
        )


def _cayley(z):
    return (1 + z) / (1 - z)


def identity_map() -> AnalyticMap:
    return AnalyticMap("identity", lambda z: z, lambda z: np.ones_like(z), known_h=math.inf,
                       zero_order=1, zero_coefficient=1.0)


def koebe_map() -> AnalyticMap:
    return AnalyticMap("koebe", lambda z: z / (1 - z) ** 2, lambda z: (1 + z) / (1 - z) ** 3,
                       known_h=0.5, known_target="slit-plane", zero_order=1, zero_coefficient=1.0,
                       singular_angles=(0.0,))


def half_plane_map() -> AnalyticMap:
    return AnalyticMap("half_plane", _cayley, lambda z: 2 / (1 - z) ** 2, known_h=1.0,
                       known_target="half-plane", singular_angles=(0.0, math.pi))


def sector_map(opening: float = math.pi / 2) -> AnalyticMap:
    """Onto {|arg w| < opening/2}; h = pi/opening"""
    if not 0 < opening < 2 * math.pi:
        raise ValueError(f"opening must lie in (0, 2*pi), got {opening!r}")
    k = opening / math.pi
    return AnalyticMap(f"sector({opening:.6g})", lambda z: _cayley(z) ** k,
                       lambda z: k * _cayley(z) ** (k - 1) * 2 / (1 - z) ** 2,
                       known_h=math.pi / opening, known_target="sector", singular_angles=(0.0, math.pi))


def strip_map() -> AnalyticMap:
    return AnalyticMap("strip", lambda z: np.log(_cayley(z)), lambda z: 2 / (1 - z ** 2), known_h=math.inf,
                       zero_order=1, zero_coefficient=2.0, singular_angles=(0.0, math.pi))


def exp_poisson_map() -> AnalyticMap:
    """exp((1+z)/(1-z)); in no H^p"""
    return AnalyticMap(
        "exp_poisson",
        lambda z: np.exp(_cayley(z)),
        lambda z: np.exp(_cayley(z)) * 2 / (1 - z) ** 2,
        known_h=0.0,
        singular_angles=(0.0,),
        log_abs_f=lambda z: _cayley(z).real,
        log_abs_df=lambda z: _cayley(z).real + np.log(2 / np.abs(1 - z) ** 2),
    )


MAP_FACTORIES: Dict[str, Callable[[], AnalyticMap]] = {
    "identity": identity_map,
    "koebe": koebe_map,
    "half_plane": half_plane_map,
    "sector": sector_map,
    "strip": strip_map,
    "exp_poisson": exp_poisson_map,
}


def get_map(label: str) -> AnalyticMap:
    try:
        return MAP_FACTORIES[label]()
    except KeyError:
        raise ValueError(f"unknown map {label!r}; known: {', '.join(MAP_FACTORIES)}")


class Verdict(str, Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


class Classification(BaseModel):
    label: str
    p: float
    alpha: Optional[float]
    verdict: Verdict
    ladder: List[float]
    ratios: List[float]


class TransitionEstimate(BaseModel):
    """Certified bracket: p_low classified convergent, p_high divergent (or p_max when upper_found is false)"""

    p_low: float
    p_high: float
    bracket_width: float
    upper_found: bool = True
    probes: List[Tuple[float, Verdict]] = []


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _map_rule(a: float, b: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = _gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


class LittlewoodPaleyIntegrator:
    """Polar tensor quadrature of |f|^(p-2) |f'|^2 log(1/|z|)^beta over |z| < r"""

    def __init__(self, cfg: Optional[QuadratureConfig] = None, threads: Optional[int] = None):
        self.cfg = cfg or QuadratureConfig()
        self.threads = threads or thread_count()

    def radial_edges(self, r_trunc: float) -> List[float]:
        """Geometric from the excision radius up to 1/2, then 1 - 2^-k; r_trunc is always an edge"""
        delta = self.cfg.zero_excision_radius
        edges = [0.0, delta]
        while edges[-1] * 2 < 0.5:
            edges.append(edges[-1] * 2)
        edges.append(0.5)
        k = 2
        while 1.0 - 2.0 ** -k < r_trunc:
            edges.append(1.0 - 2.0 ** -k)
            k += 1
        edges = [e for e in edges if e < r_trunc]
        edges.append(r_trunc)
        return edges

    def angular_rule(self, singular: Sequence[float], gap: float) -> Tuple[np.ndarray, np.ndarray]:
        """Uniform rule, or composite Gauss-Legendre panels graded toward each singular angle down to gap/8"""
        if not singular:
            n = self.cfg.angular_nodes
            return np.arange(n) * (2 * math.pi / n), np.full(n, 2 * math.pi / n)
        angles = np.sort(np.mod(np.asarray(singular, dtype=float), 2 * math.pi))
        bounds = np.append(angles, angles[0] + 2 * math.pi)
        nodes, weights = [], []
        n = self.cfg.angular_gauss_nodes
        finest = max(gap / 8.0, 1e-15)
        for left, right in zip(bounds[:-1], bounds[1:]):
            middle = 0.5 * (right - left)
            offsets = [0.0]
            while offsets[-1] < middle:
                offsets.append(min(middle, finest if offsets[-1] == 0.0 else 2 * offsets[-1]))
            for a, b in zip(offsets[:-1], offsets[1:]):
                for lo, hi in ((left + a, left + b), (right - b, right - a)):
                    x, w = _map_rule(lo, hi, n)
                    nodes.append(x)
                    weights.append(w)
        return np.concatenate(nodes), np.concatenate(weights)

    def _zero_model(self, fmap: AnalyticMap, p: float, beta: float) -> float:
        """Integral over |z| < delta of the local model |c z^m|^(p-2) |m c z^(m-1)|^2 log(1/|z|)^beta"""
        m, c = fmap.zero_order, abs(fmap.zero_coefficient)
        a = m * p
        L = math.log(1.0 / self.cfg.zero_excision_radius)
        upper = special.gammaincc(beta + 1, a * L) * special.gamma(beta + 1)
        return 2 * math.pi * m * m * c ** p * a ** (-beta - 1) * upper

    def _panel(self, fmap: AnalyticMap, p: float, beta: float, lo: float, hi: float) -> float:
        r, wr = _map_rule(lo, hi, self.cfg.radial_gauss_nodes)
        theta, wt = self.angular_rule(fmap.singular_angles, 1.0 - hi)
        z = r[:, None] * np.exp(1j * theta[None, :])
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            lf, ldf = fmap.log_moduli(z)
            values = np.exp((p - 2.0) * lf + 2.0 * ldf) * np.log(1.0 / r)[:, None] ** beta
            cell = values * (r * wr)[:, None] * wt[None, :]
        if not np.all(np.isfinite(cell)):
            return math.inf
        return math.fsum(cell.ravel())

    def _panel_sums(self, fmap: AnalyticMap, p: float, beta: float, edges: Sequence[float]) -> List[float]:
        ValidationHelper.validate_positive(p, "p")
        if fmap.zero_order < 0:
            raise ValueError("zero order must be non-negative")
        pieces = list(zip(edges[:-1], edges[1:]))
        if fmap.zero_order > 0:
            pieces = pieces[1:]

        def work(piece):
            return self._panel(fmap, p, beta, *piece)

        if self.threads > 1 and len(pieces) > 1:
            with ThreadPoolExecutor(max_workers=min(self.threads, len(pieces))) as pool:
                sums = list(pool.map(work, pieces))
        else:
            sums = [work(piece) for piece in pieces]
        if fmap.zero_order > 0:
            sums.insert(0, self._zero_model(fmap, p, beta))
        return sums

    def integral(self, fmap: AnalyticMap, p: float, beta: float, r_trunc: float) -> float:
        if not 0 < r_trunc < 1:
            raise ValueError(f"r_trunc must lie in (0, 1), got {r_trunc!r}")
        if r_trunc <= self.cfg.zero_excision_radius and fmap.zero_order > 0:
            raise ValueError("r_trunc must exceed the zero excision radius")
        return math.fsum(self._panel_sums(fmap, p, beta, self.radial_edges(r_trunc)))

    def lp_hardy_integral(self, fmap: AnalyticMap, p: float, r_trunc: float) -> float:
        """Finite as r_trunc -> 1 iff f is in H^p"""
        return self.integral(fmap, p, 1.0, r_trunc)

    def lp_bergman_integral(self, fmap: AnalyticMap, p: float, alpha: float, r_trunc: float) -> float:
        """Finite as r_trunc -> 1 iff f is in A^p_alpha"""
        alpha = ValidationHelper.validate_weight(alpha)
        return self.integral(fmap, p, alpha + 2.0, r_trunc)

    def ladder(self, fmap: AnalyticMap, p: float, beta: float) -> List[float]:
        """I(1 - 2^-k) for k = ladder_k_min..ladder_k_max from one pass over the radial panels"""
        top = 1.0 - 2.0 ** -self.cfg.ladder_k_max
        edges = self.radial_edges(top)
        sums = self._panel_sums(fmap, p, beta, edges)
        running, totals = [], {}
        for edge, value in zip(edges[1:], sums):
            running.append(value)
            totals[edge] = math.fsum(running)
        return [totals[1.0 - 2.0 ** -k] for k in range(self.cfg.ladder_k_min, self.cfg.ladder_k_max + 1)]

    def classify_detail(self, fmap: AnalyticMap, p: float, alpha: Optional[float] = None) -> Classification:
        cfg = self.cfg
        beta = 1.0 if alpha is None else ValidationHelper.validate_weight(alpha) + 2.0
        values = self.ladder(fmap, p, beta)
        increments = np.diff(values)
        ratios: List[float] = []
        if not np.all(np.isfinite(values)):
            verdict = Verdict.DIVERGENT
        elif np.all(increments[-cfg.consecutive - 1:] == 0):
            verdict = Verdict.CONVERGENT
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = [float(v) for v in increments[1:] / increments[:-1]]
            tail = np.array(ratios[-cfg.consecutive:])
            if np.all(tail >= cfg.divergent_ratio):
                verdict = Verdict.DIVERGENT
            elif np.all(tail <= cfg.convergent_ratio):
                verdict = Verdict.CONVERGENT
            else:
                verdict = Verdict.INCONCLUSIVE
        logger.debug("%s p=%g alpha=%s: %s", fmap.label, p, alpha, verdict.value)
        return Classification(label=fmap.label, p=p, alpha=alpha, verdict=verdict,
                              ladder=[float(v) for v in values], ratios=ratios)

    def classify(self, fmap: AnalyticMap, p: float, alpha: Optional[float] = None) -> Verdict:
        return self.classify_detail(fmap, p, alpha).verdict

    def _transition(self, fmap: AnalyticMap, bracket: Tuple[float, float], iterations: int,
                    alpha: Optional[float]) -> TransitionEstimate:
        lo, hi = float(bracket[0]), float(bracket[1])
        if not 0 < lo < hi:
            raise BracketError(f"bracket must satisfy 0 < p_min < p_max, got {bracket!r}")
        probes: List[Tuple[float, Verdict]] = []

        def probe(p: float) -> Verdict:
            verdict = self.classify(fmap, p, alpha)
            probes.append((p, verdict))
            return verdict

        if probe(lo) != Verdict.CONVERGENT:
            raise BracketError(f"{fmap.label}: p_min = {lo:g} is not classified convergent")
        if probe(hi) != Verdict.DIVERGENT:
            logger.info("%s: no divergence up to p = %g", fmap.label, hi)
            return TransitionEstimate(p_low=lo, p_high=hi, bracket_width=hi - lo, upper_found=False, probes=probes)
        # zone spans the inconclusive probes; each side is bisected toward it on its own
        zone: Optional[List[float]] = None
        for _ in range(iterations):
            if zone is None:
                mid = 0.5 * (lo + hi)
                verdict = probe(mid)
                if verdict == Verdict.CONVERGENT:
                    lo = mid
                elif verdict == Verdict.DIVERGENT:
                    hi = mid
                else:
                    zone = [mid, mid]
                continue
            left, right = 0.5 * (lo + zone[0]), 0.5 * (zone[1] + hi)
            verdict = probe(left)
            if verdict == Verdict.CONVERGENT:
                lo = left
            elif verdict == Verdict.INCONCLUSIVE:
                zone[0] = left
            else:
                hi, zone = left, None
                continue
            verdict = probe(right)
            if verdict == Verdict.DIVERGENT:
                hi = right
            elif verdict == Verdict.INCONCLUSIVE:
                zone[1] = right
            else:
                lo, zone = right, None
        logger.info("%s: transition in [%.4f, %.4f]", fmap.label, lo, hi)
        return TransitionEstimate(p_low=lo, p_high=hi, bracket_width=hi - lo, probes=probes)

    def estimate_h_of_map(self, fmap: AnalyticMap, bracket: Tuple[float, float] = (0.1, 4.0),
                          iterations: int = 12) -> TransitionEstimate:
        """Bisection on classify; inconclusive midpoints never move the certified bounds"""
        return self._transition(fmap, bracket, iterations, None)

    def estimate_b_alpha_of_map(self, fmap: AnalyticMap, alpha: float, bracket: Tuple[float, float] = (0.1, 8.0),
                                iterations: int = 12) -> TransitionEstimate:
        return self._transition(fmap, bracket, iterations, ValidationHelper.validate_weight(alpha))


def hyperbolic_distance_disk(z1, z2) -> float:
    """rho(z1, z2) = artanh(|z1 - z2| / |1 - conj(z1) z2|), curvature -4"""
    z1 = ValidationHelper.validate_point(z1, "z1")
    z2 = ValidationHelper.validate_point(z2, "z2")
    if abs(z1) >= 1 or abs(z2) >= 1:
        raise ValueError("points must lie in the open unit disk")
    sigma = abs(z1 - z2) / abs(1 - z1.conjugate() * z2)
    return float(np.arctanh(sigma))


@dataclass(frozen=True)
class ClosedFormDomain:
    """Domain with an explicit Riemann map onto the unit disk"""

    label: str
    to_disk: Callable[[complex], complex]
    spec: DomainSpec

    def pseudo_distance(self, z, w) -> float:
        a, b = self.to_disk(z), self.to_disk(w)
        return abs(a - b) / abs(1 - a.conjugate() * b)


def _slit_to_disk(z: complex) -> complex:
    s = np.sqrt(complex(1 + z))
    return complex((s - 1) / (s + 1))


def _sector_to_disk(opening: float, a: float) -> Callable[[complex], complex]:
    def to_disk(z: complex) -> complex:
        s = complex(((z + a) / a) ** (math.pi / opening))
        return (s - 1) / (s + 1)

    return to_disk


def closed_form_domain(label: str, radius: float = 1.0, opening: float = math.pi / 2,
                       apex_shift: float = 1.0) -> ClosedFormDomain:
    """disk (|z| < radius), half_plane (Re z > -1), slit_plane (C minus (-inf, -1]), sector (|arg(z + a)| < opening/2)"""
    if label == "disk":
        return ClosedFormDomain("disk", lambda z: complex(z) / radius, disk(radius))
    if label == "half_plane":
        return ClosedFormDomain("half_plane", lambda z: complex(z) / (complex(z) + 2), half_plane(-1.0))
    if label == "slit_plane":
        return ClosedFormDomain("slit_plane", _slit_to_disk, slit_plane(-1.0))
    if label == "sector":
        spec = sector(opening, apex=-apex_shift, base_point=(0.0, 0.0), label="sector")
        return ClosedFormDomain("sector", _sector_to_disk(opening, apex_shift), spec)
    raise ValueError(f"unknown closed-form domain {label!r}")


CLOSED_FORM_LABELS = ("disk", "half_plane", "slit_plane", "sector")


def hyperbolic_distance(domain: ClosedFormDomain, z, w) -> float:
    return float(np.arctanh(domain.pseudo_distance(complex(z), complex(w))))


def green_closed_form(domain: ClosedFormDomain, z, w) -> float:
    """g_D(z, w) = -log of the pseudo-hyperbolic distance"""
    return -math.log(domain.pseudo_distance(complex(z), complex(w)))


class GreenCheckRow(BaseModel):
    z: Tuple[float, float]
    w: Tuple[float, float]
    rho: float
    green: float
    identity_error: float
    lower_ok: bool
    upper_ok: Optional[bool]
    estimate: Optional[Estimate] = None
    within_3_sigma: Optional[bool] = None


class GreenCheckReport(BaseModel):
    domain: str
    rows: List[GreenCheckRow]

    @property
    def passed(self) -> bool:
        return all(
            r.identity_error < 1e-9 and r.lower_ok and r.upper_ok is not False and r.within_3_sigma is not False
            for r in self.rows
        )


def green_vs_hyperbolic_check(domain: ClosedFormDomain, pairs: Sequence[Tuple[complex, complex]],
                              engine: Optional[WalkEngine] = None, cfg: Optional[WalkConfig] = None) -> GreenCheckReport:
    """g = log((1+e^-2rho)/(1-e^-2rho)), e^-2rho <= g always, g <= 4 e^-2rho once rho >= log(2)/2;
    with an engine the walker's estimate is compared to the closed form"""
    rows = []
    for index, (z, w) in enumerate(pairs):
        z, w = complex(z), complex(w)
        rho = hyperbolic_distance(domain, z, w)
        g = green_closed_form(domain, z, w)
        x = math.exp(-2 * rho)
        identity = math.log((1 + x) / (1 - x))
        row = GreenCheckRow(
            z=(z.real, z.imag),
            w=(w.real, w.imag),
            rho=rho,
            green=g,
            identity_error=abs(identity - g),
            lower_ok=x <= g * (1 + 1e-12),
            upper_ok=g <= 4 * x * (1 + 1e-12) if rho >= LOG2_HALF else None,
        )
        if engine is not None:
            est = engine.green(domain.spec, z, w, cfg=cfg, stream=index)
            guard = 3 * est.stderr + est.bias_bound
            row = row.model_copy(update={"estimate": est, "within_3_sigma": abs(est.mean - g) <= guard})
        rows.append(row)
    return GreenCheckReport(domain=domain.label, rows=rows)
