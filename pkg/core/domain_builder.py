"""
Domain Builder - constructed domains and their certificates
Grid-punctured domains, the slit-plane-with-arc-rings domain built stage by stage with
Monte Carlo certificates, class-D constants, and two harmonic-measure rate checks.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, computed_field, model_validator
from scipy import stats

from core.analytic_catalog import closed_form_domain, hyperbolic_distance
from core.config import HardyScopeConfig, WalkConfig
from core.domain_geometry import (
    Arc,
    ClosedDisk,
    DomainSpec,
    HalfLine,
    PolarPoints,
    class_d_check,
    omega_hull,
    slit_plane,
)
from core.errors import ConstantsSearchError, StageFailure
from core.walk_engine import Estimate, WalkEngine, circle_target
from utils.helpers import DataFormatter, LogHelper, ValidationHelper

logger = LogHelper.get_logger("DomainBuilder")

QUARTER = 0.25
LOG2_HALF = 0.5 * math.log(2.0)


class ArcDomainParams(BaseModel):
    """Half-widths alpha_n of the arcs on ring n = 1..n_max"""

    alphas: List[float] = []
    A_constant: float

    @computed_field
    @property
    def n_max(self) -> int:
        return len(self.alphas)

    @model_validator(mode="after")
    def _no_overlap(self):
        if not self.A_constant > 0:
            raise ValueError("A_constant must be positive")
        for n, alpha in enumerate(self.alphas, start=1):
            if not 0 < alpha < math.pi / (2 * n):
                raise ValueError(f"ring {n}: half-width {alpha!r} must lie in (0, pi/{2 * n}) so arcs do not overlap")
        return self


class Certificate(BaseModel):
    radius: float
    omega: Estimate
    target: float
    guard_sigma: float = 3.0

    @computed_field
    @property
    def satisfied(self) -> bool:
        return self.omega.mean - self.guard_sigma * self.omega.stderr >= self.target


class ClassDConstants(BaseModel):
    R: float
    rho: float
    sigma: float
    reference: Optional[Estimate] = None
    spot_checks: List[Estimate] = []
    spot_ok: bool = True

    @model_validator(mode="after")
    def _ordered(self):
        if not 0 < self.R < self.rho < self.sigma:
            raise ValueError("class-D constants must satisfy 0 < R < rho < sigma")
        return self


class RateReport(BaseModel):
    R1: float
    R: float
    estimates: List[Tuple[float, Estimate]]
    exponent: Optional[float]
    constant: float
    consistent: bool


class RatioReport(BaseModel):
    a: Tuple[float, float]
    radii: List[float]
    ratios: List[Optional[float]]
    median: Optional[float]
    maximum: Optional[float]
    bounded: bool


def arc_domain_spec(params: ArcDomainParams, label: str = "arc-domain") -> DomainSpec:
    """Slit (-inf, -1] plus 2n arcs of radius n centred at angles pi*j/n, half-width alpha_n"""
    obstacles = [HalfLine(anchor=(-1.0, 0.0), direction=(-1.0, 0.0))]
    for n, alpha in enumerate(params.alphas, start=1):
        obstacles.extend(
            Arc(center=(0.0, 0.0), radius=float(n), mid=math.pi * j / n, half=alpha)
            for j in range(2 * n)
        )
    return DomainSpec(label=label, obstacles=tuple(obstacles))


def certificate_target(A: float, r: float) -> float:
    """A / (2 sqrt(r) log r)"""
    return A / (2.0 * math.sqrt(r) * math.log(r))


def symmetrized_reference_spec(R: float) -> DomainSpec:
    """C minus the closed disk of radius R and the ray (-inf, -R]"""
    ValidationHelper.validate_positive(R, "R")
    return DomainSpec(
        label=f"symmetrized-{R:g}",
        obstacles=(
            ClosedDisk(center=(0.0, 0.0), radius=R),
            HalfLine(anchor=(-R, 0.0), direction=(-1.0, 0.0)),
        ),
        scale_hint=R,
        base_point=(2.0 * R, 0.0),
    )


def slit_annulus_spec(R1: float, R2: Optional[float] = None, base_radius: Optional[float] = None) -> DomainSpec:
    """{R1 < |z| < R2} minus the segment (-R2, -R1); without R2 the outer circle is left to a truncation"""
    ValidationHelper.validate_positive(R1, "R1")
    base = base_radius if base_radius is not None else 2.0 * R1
    obstacles = [
        ClosedDisk(center=(0.0, 0.0), radius=R1),
        HalfLine(anchor=(-R1, 0.0), direction=(-1.0, 0.0)),
    ]
    if R2 is not None:
        if not R2 > base > R1:
            raise ValueError("need R1 < base radius < R2")
        obstacles.append(Arc(center=(0.0, 0.0), radius=R2, mid=0.0, half=math.pi))
    return DomainSpec(label="slit-annulus", obstacles=tuple(obstacles), scale_hint=R1, base_point=(0.0, base))


def grid_puncture(spec: DomainSpec, spacing: float = 1.0, origin: Optional[Tuple[float, float]] = None) -> DomainSpec:
    """Append the lattice origin + spacing * (Z + iZ); the default origin is the cell centre"""
    spacing = ValidationHelper.validate_positive(spacing, "spacing")
    origin = origin if origin is not None else (0.5 * spacing, 0.5 * spacing)
    lattice = PolarPoints(origin=origin, basis1=(spacing, 0.0), basis2=(0.0, spacing))
    return spec.with_obstacles(list(spec.obstacles) + [lattice], label=f"{spec.label}-grid")


class DomainBuilder:
    """Builds constructed domains and certifies them with the walk engine"""

    def __init__(self, config: Optional[HardyScopeConfig] = None, engine: Optional[WalkEngine] = None):
        self.config = config or HardyScopeConfig()
        self.engine = engine or WalkEngine(self.config.walk)

    def _omega(self, spec: DomainSpec, R: float, cfg: Optional[WalkConfig], stream: int) -> Estimate:
        return self.engine.harmonic_measure_circle(spec, R, cfg=cfg, stream=stream)

    def calibrate_A(self, cfg: Optional[WalkConfig] = None) -> Tuple[float, Estimate]:
        """A = omega(0, C_2, slit plane cut at 2) * sqrt(2) * log 2"""
        omega = self._omega(slit_plane(-1.0), 2.0, cfg, stream=0)
        A = omega.mean * math.sqrt(2.0) * math.log(2.0)
        logger.info("calibrated A = %.5f", A)
        return A, omega

    def _certify(self, spec: DomainSpec, A: float, R: float, cfg: Optional[WalkConfig], stream: int) -> Certificate:
        return Certificate(radius=R, omega=self._omega(spec, R, cfg, stream), target=certificate_target(A, R),
                           guard_sigma=self.config.search.guard_sigma)

    def search_arc_widths(self, A: float, n_target: int, cfg: Optional[WalkConfig] = None,
                          fixed_fraction: Optional[float] = None) -> Tuple[ArcDomainParams, List[Certificate]]:
        """Stage by stage: find a doubling checkpoint R where the current domain has omega >= A/(sqrt(R) log R),
        add the rings below R and narrow them from the overlap bound until the certificate at R holds"""
        ValidationHelper.validate_positive(A, "A")
        if n_target < 0:
            raise ValueError(f"n_target must be non-negative, got {n_target!r}")
        if fixed_fraction is not None and not 0 < fixed_fraction < 1:
            raise ValueError("fixed_fraction must lie in (0, 1)")
        search = self.config.search
        alphas: List[float] = []
        base = self._certify(slit_plane(-1.0, label="arc-domain"), A, 2.0, cfg, stream=0)
        certificates = [base]
        if not base.satisfied:
            raise StageFailure(0, base)

        R = 2.0
        stage = 0
        while len(alphas) < n_target:
            stage += 1
            current = arc_domain_spec(ArcDomainParams(alphas=alphas, A_constant=A))
            R = max(2.0 * R, len(alphas) + 2.0)
            for _ in range(search.max_doublings):
                reach = self._omega(current, R, cfg, stream=stage)
                if reach.mean - search.guard_sigma * reach.stderr >= 2.0 * certificate_target(A, R):
                    break
                R *= 2.0
            else:
                raise StageFailure(stage, Certificate(radius=R, omega=reach, target=2.0 * certificate_target(A, R),
                                                      guard_sigma=search.guard_sigma))
            m = min(math.ceil(R) - 1, n_target)
            new_rings = range(len(alphas) + 1, m + 1)

            def widths(t: float) -> List[float]:
                return alphas + [t * math.pi / (2 * k) for k in new_rings]

            def certify(t: float) -> Certificate:
                spec = arc_domain_spec(ArcDomainParams(alphas=widths(t), A_constant=A))
                return self._certify(spec, A, R, cfg, stream=stage)

            if fixed_fraction is not None:
                t, cert = fixed_fraction, certify(fixed_fraction)
                if not cert.satisfied:
                    raise StageFailure(stage, cert)
            else:
                t, cert = self._width_search(certify, stage)
            alphas = widths(t)
            certificates.append(cert)
            logger.info("stage %d: rings %d..%d at width fraction %.4f, checkpoint R=%g", stage,
                        new_rings.start, m, t, R)
        params = ArcDomainParams(alphas=alphas, A_constant=A)
        return params, certificates

    def _width_search(self, certify, stage: int) -> Tuple[float, Certificate]:
        """Largest width fraction t in (0, 1) with a satisfied certificate, to the configured resolution"""
        resolution = self.config.search.width_resolution
        lo, hi = 0.0, 1.0
        best: Optional[Certificate] = None
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            cert = certify(mid)
            if cert.satisfied:
                lo, best = mid, cert
            else:
                hi = mid
        if best is None:
            cert = certify(resolution)
            if not cert.satisfied:
                raise StageFailure(stage, cert)
            return resolution, cert
        return lo, best

    def symmetrized_reference_measure(self, r: float, R: float, cfg: Optional[WalkConfig] = None,
                                      stream: int = 0) -> Estimate:
        """omega(r, {|z| = R}, C minus (closed disk R and (-inf, -R])); escaped walks count as misses"""
        if not r > R > 0:
            raise ValueError("need r > R > 0")
        spec = symmetrized_reference_spec(R)
        return self.engine.harmonic_measure_set(spec, circle_target(R), z0=(r, 0.0), cfg=cfg, stream=stream)

    def class_d_constants(self, spec: DomainSpec, cfg: Optional[WalkConfig] = None,
                          R: Optional[float] = None) -> ClassDConstants:
        """R from the class-D scan, rho from the symmetrized reference domain, sigma from the slit-plane
        hyperbolic distance, and Monte Carlo spot checks of omega(a, A_R, D_R) < 1/4 on |a| = rho"""
        search = self.config.search
        scan = self.config.scan
        if not spec.has_unbounded_nonpolar:
            raise ValueError("class-D constants need an unbounded hull complement")
        if R is None:
            low, high = scan.class_d_powers
            radii = [spec.scale_hint * 2.0 ** k for k in range(low, high + 1)]
            report = class_d_check(spec, radii, scan.angular_resolution, scan.contact_samples)
            if not report.is_class_d:
                raise ValueError(f"{spec.label} failed the class-D check: {report.failures[:3]}")
            R = report.R_constant
        cap = 2.0 ** search.constants_max_power * R

        rho = 2.0 * R
        stream = 0
        while True:
            if rho > cap:
                raise ConstantsSearchError(f"rho search passed {cap:g}")
            reference = self.symmetrized_reference_measure(rho, R, cfg, stream=stream)
            escaped = reference.n_escaped / max(reference.n_used + reference.n_escaped, 1)
            if reference.mean + search.guard_sigma * reference.stderr + escaped < QUARTER:
                break
            rho *= 2.0
            stream += 1

        slit = closed_form_domain("slit_plane")
        sigma = 2.0 * rho
        while hyperbolic_distance(slit, rho / R, sigma / R) <= LOG2_HALF:
            sigma *= 2.0
            if sigma > cap:
                raise ConstantsSearchError(f"sigma search passed {cap:g}")

        spots = []
        count = search.spot_checks
        for j in range(count):
            a = rho * np.exp(2j * math.pi * (j + 0.5) / count)
            if not spec.in_domain(np.array([a]))[0]:
                continue
            spots.append(self.engine.harmonic_measure_set(spec, circle_target(R), z0=a, cfg=cfg,
                                                          inner_radius=R, stream=j))
        spot_ok = all(s.mean < QUARTER + search.guard_sigma * s.stderr for s in spots)
        if not spot_ok:
            logger.warning("%s: spot check above 1/4 on |a| = %g", spec.label, rho)
        logger.info("class-D constants of %s: R=%g rho=%g sigma=%g", spec.label, R, rho, sigma)
        return ClassDConstants(R=R, rho=rho, sigma=sigma, reference=reference, spot_checks=spots, spot_ok=spot_ok)

    def rate_bound_check(self, R1: float, R: float, R2_grid: Sequence[float],
                         cfg: Optional[WalkConfig] = None) -> RateReport:
        """omega(iR, outer circle, slit annulus) for each R2; decay should be no faster than R2^(-1/2)"""
        radii = ValidationHelper.validate_radii(R2_grid, "R2_grid")
        if not 0 < R1 < R < radii[0]:
            raise ValueError("need 0 < R1 < R < min(R2_grid)")
        spec = slit_annulus_spec(R1, base_radius=R)
        estimates = [(R2, self._omega(spec, R2, cfg, stream=i)) for i, R2 in enumerate(radii)]
        usable = [(r, e) for r, e in estimates if e.mean > 2.0 * e.stderr]
        exponent = None
        if len(usable) >= 2:
            x = np.log([r for r, _ in usable])
            y = -np.log([e.mean for _, e in usable])
            exponent = float(stats.linregress(x, y).slope)
        constant = min(e.mean * math.sqrt(r) for r, e in estimates)
        consistent = exponent is not None and exponent <= 0.6
        logger.info("rate check: exponent %s, C = %.4g", DataFormatter.format_number(exponent), constant)
        return RateReport(R1=R1, R=R, estimates=estimates, exponent=exponent, constant=constant, consistent=consistent)

    def green_ratio_diagnostic(self, spec: DomainSpec, constants: ClassDConstants, cfg: Optional[WalkConfig] = None,
                               points: int = 16) -> RatioReport:
        """g_Omega(a, w) / g_{D_R}(a, w) for w in D_sigma on the positive axis, a = rho; bounded when the
        largest ratio is within 10 times the median"""
        hull = omega_hull(spec, self.config.scan.contact_samples)
        a = complex(constants.rho, 0.0)
        radii = [constants.sigma * 2.0 ** (j / 8.0) for j in range(points)]
        ratios: List[Optional[float]] = []
        for j, r in enumerate(radii):
            w = complex(r, 0.0)
            if not spec.in_domain(np.array([a, w])).all():
                ratios.append(None)
                continue
            outer = self.engine.green(hull, a, w, cfg=cfg, stream=j)
            inner = self.engine.green(spec, a, w, cfg=cfg, inner_radius=constants.R, stream=j)
            if inner.mean <= 2.0 * inner.stderr:
                ratios.append(None)
                continue
            ratios.append(outer.mean / inner.mean)
        values = [v for v in ratios if v is not None]
        median = float(np.median(values)) if values else None
        maximum = max(values) if values else None
        bounded = bool(values) and maximum <= 10.0 * median
        return RatioReport(a=(a.real, a.imag), radii=radii, ratios=ratios, median=median, maximum=maximum,
                           bounded=bounded)
