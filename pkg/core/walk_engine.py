"""
Walk Engine - walk-on-spheres Monte Carlo over a DomainSpec

A walk jumps to a uniform point on the largest circle about its position that avoids
the complement, until it is within eps_boundary of the complement (Absorbed; the exit
point is the nearest complement point), beyond r_escape (Escaped) or out of steps
(StepLimit, discarded and counted).

Green functions: for bounded D, u(z) = g_D(z, w) + log|z - w| is harmonic with boundary
values log|zeta - w|, hence g_D(z, w) = E_z[log|zeta - w|] - log|z - w| with zeta the
exit point. For unbounded D the walk runs in D cut at |z| = r_escape and escaped walks
carry log(r_escape): the result is the Green function of the cut domain, which
increases to g_D as r_escape grows. The escaped share is reported as bias_bound.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from core.config import WalkConfig, thread_count
from core.domain_geometry import DistanceField, DomainSpec, Pair
from utils.helpers import ExportHelper, LogHelper, ValidationHelper

logger = LogHelper.get_logger("WalkEngine")

ABSORBED, ESCAPED, STEP_LIMIT = 0, 1, 2
NO_FEATURE, OBSTACLE, OUTER, INNER = -1, 0, 1, 2

PROFILE_COLUMNS = ["radius", "mean", "stderr", "n_used", "n_escaped", "n_steplimit", "seed"]

PointTarget = Callable[[np.ndarray], np.ndarray]


class ExitStatus(str, Enum):
    ABSORBED = "Absorbed"
    ESCAPED = "Escaped"
    STEP_LIMIT = "StepLimit"


_STATUS_NAMES = {ABSORBED: ExitStatus.ABSORBED, ESCAPED: ExitStatus.ESCAPED, STEP_LIMIT: ExitStatus.STEP_LIMIT}


class ExitSample(BaseModel):
    """One boundary hit"""

    exit_point: Pair
    steps: int
    status: ExitStatus

    @property
    def z(self) -> complex:
        return complex(*self.exit_point)


class Estimate(BaseModel):
    """Monte Carlo mean; counts add up to the walks launched"""

    mean: float
    stderr: float = Field(ge=0)
    n_used: int = Field(ge=0)
    n_escaped: int = Field(0, ge=0)
    n_steplimit: int = Field(0, ge=0)
    n_outside: int = Field(0, ge=0, description="Profile starts outside D, contributing 0")
    bias_bound: float = Field(0.0, ge=0, description="Weight carried by the escape truncation")
    seed: Optional[int] = None

    @property
    def n_samples(self) -> int:
        return self.n_used + self.n_escaped + self.n_steplimit + self.n_outside


class ProfileEntry(BaseModel):
    radius: float = Field(gt=0)
    estimate: Estimate


class RadialProfile(BaseModel):
    """omega(R) or psi(r) on a radius grid"""

    kind: Literal["OmegaEKS", "PsiGreen", "Synthetic"]
    entries: List[ProfileEntry]

    @model_validator(mode="after")
    def _increasing(self):
        radii = [e.radius for e in self.entries]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("profile radii must be strictly increasing")
        return self

    @property
    def radii(self) -> np.ndarray:
        return np.array([e.radius for e in self.entries])

    @property
    def means(self) -> np.ndarray:
        return np.array([e.estimate.mean for e in self.entries])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.estimate.stderr for e in self.entries])

    @classmethod
    def synthetic(cls, radii: Sequence[float], values: Sequence[float],
                  stderrs: Optional[Sequence[float]] = None) -> "RadialProfile":
        """Profile from known values, e.g. a closed-form curve"""
        stderrs = stderrs if stderrs is not None else [0.0] * len(values)
        return cls(kind="Synthetic", entries=[
            ProfileEntry(radius=r, estimate=Estimate(mean=v, stderr=s, n_used=1))
            for r, v, s in zip(radii, values, stderrs)
        ])

    def rows(self) -> List[dict]:
        return [
            {
                "radius": e.radius,
                "mean": e.estimate.mean,
                "stderr": e.estimate.stderr,
                "n_used": e.estimate.n_used,
                "n_escaped": e.estimate.n_escaped,
                "n_steplimit": e.estimate.n_steplimit,
                "seed": e.estimate.seed,
            }
            for e in self.entries
        ]


def write_profile_csv(profile: RadialProfile, path: Union[str, Path]) -> Path:
    return ExportHelper.to_csv(profile.rows(), path, columns=PROFILE_COLUMNS)


def read_profile_csv(path: Union[str, Path], kind: str = "PsiGreen") -> RadialProfile:
    frame = pd.read_csv(path)
    missing = [c for c in PROFILE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing profile columns {missing}")
    entries = []
    for row in frame.itertuples(index=False):
        seed = None if pd.isna(row.seed) else int(row.seed)
        entries.append(ProfileEntry(radius=float(row.radius), estimate=Estimate(
            mean=float(row.mean), stderr=float(row.stderr), n_used=int(row.n_used),
            n_escaped=int(row.n_escaped), n_steplimit=int(row.n_steplimit), seed=seed,
        )))
    return RadialProfile(kind=kind, entries=entries)


def circle_target(radius: float, start: Optional[float] = None, end: Optional[float] = None,
                  rtol: float = 1e-9) -> PointTarget:
    """Exit points on |z| = radius, optionally restricted to angles swept ccw from start to end"""

    def target(points: np.ndarray) -> np.ndarray:
        on_circle = np.abs(np.abs(points) - radius) <= rtol * radius
        if start is None:
            return on_circle
        sweep = (end - start) % (2 * math.pi)
        return on_circle & ((np.angle(points) - start) % (2 * math.pi) <= sweep)

    return target


def everything(points: np.ndarray) -> np.ndarray:
    return np.ones(points.shape, dtype=bool)


@dataclass
class _WalkBatch:
    points: np.ndarray
    status: np.ndarray
    feature: np.ndarray
    steps: np.ndarray

    @staticmethod
    def concat(parts: List["_WalkBatch"]) -> "_WalkBatch":
        return _WalkBatch(
            points=np.concatenate([p.points for p in parts]),
            status=np.concatenate([p.status for p in parts]),
            feature=np.concatenate([p.feature for p in parts]),
            steps=np.concatenate([p.steps for p in parts]),
        )

    @property
    def absorbed(self) -> np.ndarray:
        return self.status == ABSORBED

    @property
    def escaped(self) -> np.ndarray:
        return self.status == ESCAPED

    def estimate(self, values: np.ndarray, include_escaped: bool, seed: Optional[int]) -> Estimate:
        """Mean of values over absorbed (and optionally escaped) walks"""
        mask = self.absorbed | self.escaped if include_escaped else self.absorbed
        return _summarize(values[mask], self, seed)


def _summarize(sample: np.ndarray, batch: _WalkBatch, seed: Optional[int], scale: float = 1.0,
               n_outside: int = 0) -> Estimate:
    n = sample.size
    if n == 0:
        mean, stderr = math.nan, math.inf
    else:
        mean = float(scale * sample.mean())
        stderr = float(scale * sample.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return Estimate(
        mean=mean,
        stderr=stderr,
        n_used=int(np.count_nonzero(batch.absorbed)),
        n_escaped=int(np.count_nonzero(batch.escaped)),
        n_steplimit=int(np.count_nonzero(batch.status == STEP_LIMIT)),
        n_outside=n_outside,
        seed=seed,
    )


def _radial(z: np.ndarray, modulus: np.ndarray, radius: float) -> np.ndarray:
    return np.where(modulus > 0, radius * z / np.maximum(modulus, 1e-300), radius)


def _walk(field: DistanceField, starts: np.ndarray, eps: float, r_escape: float, max_steps: int,
          rng: np.random.Generator, outer: Optional[float] = None, inner: Optional[float] = None) -> _WalkBatch:
    """Vectorized walk-on-spheres; truncation circles act as extra absorbing features, ties go to the obstacles"""
    n = starts.size
    z = starts.astype(complex)
    points = z.copy()
    status = np.full(n, STEP_LIMIT, dtype=np.int8)
    feature = np.full(n, NO_FEATURE, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    for _ in range(max_steps):
        if alive.size == 0:
            break
        za = z[alive]
        dist, near = field.nearest(za)
        feat = np.full(alive.size, OBSTACLE, dtype=np.int8)
        modulus = np.abs(za)
        if outer is not None:
            gap = outer - modulus
            closer = gap < dist
            dist = np.where(closer, gap, dist)
            near = np.where(closer, _radial(za, modulus, outer), near)
            feat[closer] = OUTER
        if inner is not None:
            gap = modulus - inner
            closer = gap < dist
            dist = np.where(closer, gap, dist)
            near = np.where(closer, _radial(za, modulus, inner), near)
            feat[closer] = INNER
        hit = dist < eps
        gone = ~hit & ((modulus > r_escape) | ~np.isfinite(dist))
        if hit.any():
            idx = alive[hit]
            points[idx] = near[hit]
            status[idx] = ABSORBED
            feature[idx] = feat[hit]
        if gone.any():
            idx = alive[gone]
            points[idx] = za[gone]
            status[idx] = ESCAPED
        move = ~(hit | gone)
        alive = alive[move]
        angle = rng.uniform(0.0, 2.0 * math.pi, alive.size)
        z[alive] = za[move] + dist[move] * np.exp(1j * angle)
        steps[alive] += 1
    points[alive] = z[alive]
    return _WalkBatch(points=points, status=status, feature=feature, steps=steps)


class WalkEngine:
    """Walk-on-spheres estimators for harmonic measure, Green functions and the radial profile"""

    def __init__(self, cfg: Optional[WalkConfig] = None, threads: Optional[int] = None):
        self.cfg = cfg or WalkConfig()
        self.threads = threads or thread_count()

    def _resolve(self, spec: DomainSpec, cfg: Optional[WalkConfig]) -> Tuple[WalkConfig, float]:
        cfg = cfg or self.cfg
        eps = cfg.boundary_eps(spec.scale_hint)
        if eps >= spec.scale_hint:
            raise ValueError(f"eps_boundary {eps:g} must be smaller than scale_hint {spec.scale_hint:g}")
        return cfg, eps

    def _run(self, field: DistanceField, starts: np.ndarray, cfg: WalkConfig, eps: float, r_escape: float,
             stream: int, phase: int = 0, outer: Optional[float] = None,
             inner: Optional[float] = None) -> _WalkBatch:
        """Fixed partition into batches; batch i draws from SeedSequence(seed, (stream, phase, i))"""
        starts = np.asarray(starts, dtype=complex)
        size = cfg.batch_size
        chunks = [starts[i:i + size] for i in range(0, starts.size, size)] or [starts]

        def work(index: int) -> _WalkBatch:
            seq = np.random.SeedSequence(cfg.seed, spawn_key=(stream, phase, index))
            return _walk(field, chunks[index], eps, r_escape, cfg.max_steps,
                         np.random.default_rng(seq), outer, inner)

        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=min(self.threads, len(chunks))) as pool:
                parts = list(pool.map(work, range(len(chunks))))
        else:
            parts = [work(i) for i in range(len(chunks))]
        return _WalkBatch.concat(parts)

    def _start(self, spec: DomainSpec, z0) -> complex:
        z0 = spec.base if z0 is None else ValidationHelper.validate_point(z0, "z0")
        if not spec.contains(np.array([z0]))[0]:
            raise ValueError(f"start point {z0} is not in the domain")
        return z0

    def sample_exit(self, spec: DomainSpec, z0, cfg: Optional[WalkConfig] = None,
                    stream: Optional[np.random.Generator] = None) -> ExitSample:
        """One walk from z0 in the untruncated domain"""
        cfg, eps = self._resolve(spec, cfg)
        z0 = self._start(spec, z0)
        rng = stream if stream is not None else np.random.default_rng(cfg.seed)
        r_escape = cfg.escape_radius(abs(z0), spec.scale_hint)
        batch = _walk(spec.field, np.array([z0]), eps, r_escape, cfg.max_steps, rng)
        p = complex(batch.points[0])
        return ExitSample(exit_point=(p.real, p.imag), steps=int(batch.steps[0]),
                          status=_STATUS_NAMES[int(batch.status[0])])

    def harmonic_measure_circle(self, spec: DomainSpec, R: float, z0=None, cfg: Optional[WalkConfig] = None,
                                stream: int = 0) -> Estimate:
        """omega(z0, C_R, D_R): share of walks in D cut by |z| = R that end on the circle"""
        cfg, eps = self._resolve(spec, cfg)
        z0 = self._start(spec, z0)
        ValidationHelper.validate_positive(R, "R")
        if abs(z0) >= R:
            raise ValueError(f"start point {z0} must lie inside |z| < {R:g}")
        r_escape = cfg.escape_radius(R, spec.scale_hint)
        if r_escape <= R:
            raise ValueError(f"r_escape {r_escape:g} must exceed the truncation radius {R:g}")
        if R < float(spec.distance(np.array([z0]))[0]) + eps:
            logger.warning("degenerate truncation: no obstacle meets |z| < %g", R)
        batch = self._run(spec.field, np.full(cfg.n_samples, z0), cfg, eps, r_escape, stream, outer=R)
        hits = (batch.absorbed & (batch.feature == OUTER)).astype(float)
        estimate = batch.estimate(hits, include_escaped=False, seed=cfg.seed)
        logger.debug("omega(R=%g) = %.5g +/- %.2g", R, estimate.mean, estimate.stderr)
        return estimate

    def harmonic_measure_set(self, spec: DomainSpec, target: PointTarget, z0=None,
                             cfg: Optional[WalkConfig] = None, outer_radius: Optional[float] = None,
                             inner_radius: Optional[float] = None, stream: int = 0) -> Estimate:
        """Share of walks absorbed at a target point; escaped walks count as misses"""
        cfg, eps = self._resolve(spec, cfg)
        z0 = self._start(spec, z0)
        if outer_radius is not None and abs(z0) >= outer_radius:
            raise ValueError("start point must lie inside the outer truncation circle")
        if inner_radius is not None and abs(z0) <= inner_radius:
            raise ValueError("start point must lie outside the inner truncation circle")
        r_escape = cfg.escape_radius(abs(z0), spec.scale_hint, outer_radius or 0.0)
        batch = self._run(spec.field, np.full(cfg.n_samples, z0), cfg, eps, r_escape, stream,
                          outer=outer_radius, inner=inner_radius)
        hits = np.zeros(batch.points.size)
        absorbed = batch.absorbed
        if absorbed.any():
            hits[absorbed] = np.asarray(target(batch.points[absorbed]), dtype=bool)
        return batch.estimate(hits, include_escaped=True, seed=cfg.seed)

    def harmonic_measure_two_stage(self, spec: DomainSpec, R1: float, R2: float, target: PointTarget, z0=None,
                                   cfg: Optional[WalkConfig] = None, stream: int = 0) -> Estimate:
        """omega(z0, E, D_R2) through the circle C_R1: restart from resampled first-stage exits.
        Counts describe the second stage."""
        cfg, eps = self._resolve(spec, cfg)
        z0 = self._start(spec, z0)
        if not abs(z0) < R1 < R2:
            raise ValueError("need |z0| < R1 < R2")
        r_escape = cfg.escape_radius(R2, spec.scale_hint)
        first = self._run(spec.field, np.full(cfg.n_samples, z0), cfg, eps, r_escape, stream, phase=0, outer=R1)
        reached = first.absorbed & (first.feature == OUTER)
        p1 = first.estimate(reached.astype(float), include_escaped=False, seed=cfg.seed)
        exits = first.points[reached]
        if exits.size == 0:
            return p1.model_copy(update={"mean": 0.0})
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(stream, 1)))
        starts = rng.choice(exits, size=cfg.n_samples, replace=True)
        second = self._run(spec.field, starts, cfg, eps, r_escape, stream, phase=2, outer=R2)
        hits = np.zeros(starts.size)
        absorbed = second.absorbed
        if absorbed.any():
            hits[absorbed] = np.asarray(target(second.points[absorbed]), dtype=bool)
        p2 = second.estimate(hits, include_escaped=True, seed=cfg.seed)
        # resampling from a finite exit set adds at most p(1-p)/n_exits
        s2 = math.sqrt(p2.stderr ** 2 + p2.mean * (1.0 - p2.mean) / exits.size)
        return p2.model_copy(update={
            "mean": p1.mean * p2.mean,
            "stderr": math.hypot(p2.mean * p1.stderr, p1.mean * s2),
        })

    def green(self, spec: DomainSpec, z, w, cfg: Optional[WalkConfig] = None,
              inner_radius: Optional[float] = None, stream: int = 0) -> Estimate:
        """g_D(z, w) = E_z[log|zeta - w|] - log|z - w|; inner_radius cuts D to {|z| > inner_radius}"""
        cfg, eps = self._resolve(spec, cfg)
        z = ValidationHelper.validate_point(z, "z")
        w = ValidationHelper.validate_point(w, "w")
        if z == w:
            raise ValueError("z = w is the pole of the Green function")
        if not spec.contains(np.array([z, w])).all():
            raise ValueError("z and w must both lie in the domain")
        if not spec.same_component(np.array([z]), w)[0]:
            raise ValueError("z and w lie in different components")
        if inner_radius is not None and min(abs(z), abs(w)) <= inner_radius:
            raise ValueError("z and w must lie outside the inner truncation circle")
        r_escape = cfg.escape_radius(abs(z), abs(w), spec.scale_hint)
        batch = self._run(spec.field, np.full(cfg.n_samples, z), cfg, eps, r_escape, stream, inner=inner_radius)
        offset = math.log(abs(z - w))
        values = np.zeros(batch.points.size)
        absorbed, escaped = batch.absorbed, batch.escaped
        values[absorbed] = np.log(np.abs(batch.points[absorbed] - w)) - offset
        values[escaped] = math.log(r_escape) - offset
        estimate = batch.estimate(values, include_escaped=True, seed=cfg.seed)
        counted = estimate.n_used + estimate.n_escaped
        bias = estimate.n_escaped / counted * abs(math.log(r_escape) - offset) if counted else 0.0
        return estimate.model_copy(update={"bias_bound": bias})

    def omega_profile(self, spec: DomainSpec, R_grid: Sequence[float], z0=None,
                      cfg: Optional[WalkConfig] = None) -> RadialProfile:
        """omega(R) on a grid; radius i uses stream i"""
        radii = ValidationHelper.validate_radii(R_grid, "R_grid")
        entries = [
            ProfileEntry(radius=R, estimate=self.harmonic_measure_circle(spec, R, z0, cfg, stream=i))
            for i, R in enumerate(radii)
        ]
        logger.info("omega profile of %s over %d radii", spec.label, len(entries))
        return RadialProfile(kind="OmegaEKS", entries=entries)

    def psi_profile(self, spec: DomainSpec, r_grid: Sequence[float], cfg: Optional[WalkConfig] = None) -> RadialProfile:
        """psi(r) = integral over theta of g_D(r e^{i theta}, w), w the base point; circles are centred at 0.
        One walk per stratified angle; starts outside D contribute 0."""
        cfg, eps = self._resolve(spec, cfg)
        radii = ValidationHelper.validate_radii(r_grid, "r_grid")
        w = spec.base
        r0 = radii[0]
        entries = []
        for index, r in enumerate(radii):
            n = max(2, int(round(cfg.n_samples * (1.0 + math.log2(r / r0)))))
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index, 1)))
            theta = 2.0 * math.pi * (np.arange(n) + rng.random(n)) / n
            starts = r * np.exp(1j * theta)
            inside = spec.in_domain(starts) & (starts != w)
            r_escape = cfg.escape_radius(r, abs(w), spec.scale_hint)
            batch = self._run(spec.field, starts[inside], cfg, eps, r_escape, stream=index)
            offset = np.log(np.abs(starts[inside] - w))
            walked = np.zeros(batch.points.size)
            absorbed, escaped = batch.absorbed, batch.escaped
            walked[absorbed] = np.log(np.abs(batch.points[absorbed] - w)) - offset[absorbed]
            walked[escaped] = math.log(r_escape) - offset[escaped]
            values = np.zeros(n)
            values[inside] = walked
            kept = np.ones(n, dtype=bool)
            kept[np.flatnonzero(inside)[batch.status == STEP_LIMIT]] = False
            estimate = _summarize(values[kept], batch, cfg.seed, scale=2.0 * math.pi,
                                  n_outside=int(n - np.count_nonzero(inside)))
            entries.append(ProfileEntry(radius=r, estimate=estimate))
            logger.debug("psi(r=%g) = %.5g +/- %.2g", r, estimate.mean, estimate.stderr)
        logger.info("psi profile of %s over %d radii", spec.label, len(entries))
        return RadialProfile(kind="PsiGreen", entries=entries)
