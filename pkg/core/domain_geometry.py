"""
Domain Geometry - planar domains as the plane minus closed obstacles
Answers containment, distance-to-complement and structural queries (Bloch radius,
class-D slices, simply connected hull). Points are Python complex numbers; obstacle
coordinates are stored as (x, y) pairs so specs serialize to plain JSON.
"""

import math
from functools import cached_property
from typing import Annotated, ClassVar, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.errors import SpecError
from utils.helpers import LogHelper, ValidationHelper

TWO_PI = 2.0 * math.pi
Pair = Tuple[float, float]
GRID_CHUNK = 65536

logger = LogHelper.get_logger("DomainGeometry")


def _finite_pair(value: Pair) -> Pair:
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"coordinates must be finite, got {value!r}")
    return (x, y)


def _c(pair: Pair) -> complex:
    return complex(pair[0], pair[1])


def _wrap(angle: np.ndarray) -> np.ndarray:
    """Angles into [-pi, pi)"""
    return (angle + math.pi) % TWO_PI - math.pi


def _arc_project(z: np.ndarray, center: complex, radius: float, mid, half: float) -> np.ndarray:
    """Nearest points on arcs sharing center, radius and half-width; mid may vary per point"""
    w = z - center
    ang = np.angle(w)
    on_circle = np.where(w == 0, center + radius * np.exp(1j * mid), center + radius * np.exp(1j * ang))
    if half >= math.pi:
        return on_circle
    offset = _wrap(ang - mid)
    e1 = center + radius * np.exp(1j * (mid - half))
    e2 = center + radius * np.exp(1j * (mid + half))
    endpoint = np.where(np.abs(z - e1) <= np.abs(z - e2), e1, e2)
    return np.where(np.abs(offset) <= half, on_circle, endpoint)


def _ray_project(z: np.ndarray, anchor: complex, unit: complex) -> np.ndarray:
    t = np.maximum(0.0, ((z - anchor) * np.conj(unit)).real)
    return anchor + t * unit


class _Primitive(BaseModel):
    """Closed planar set with a vectorized nearest-point map"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    polar: ClassVar[bool] = False

    @property
    def bounded(self) -> bool:
        return True

    def project(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.project(z))

    def radius_bound(self) -> float:
        """Largest modulus of a point of the obstacle"""
        return math.inf

    def sample(self, count: int) -> np.ndarray:
        """Points of the obstacle used by the contact tests of the hull"""
        raise NotImplementedError

    def sample_spacing(self, count: int) -> float:
        return math.inf


class Segment(_Primitive):
    """Closed segment [a, b]"""

    kind: Literal["segment"] = "segment"
    a: Pair
    b: Pair

    _check_a = field_validator("a", "b")(_finite_pair)

    @model_validator(mode="after")
    def _non_degenerate(self):
        if self.a == self.b:
            raise ValueError("segment endpoints coincide (a single point is polar; use PolarPoints)")
        return self

    def project(self, z):
        a, b = _c(self.a), _c(self.b)
        d = b - a
        t = np.clip(((z - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
        return a + t * d

    def radius_bound(self):
        return max(abs(_c(self.a)), abs(_c(self.b)))

    def sample(self, count):
        a, b = _c(self.a), _c(self.b)
        return a + np.linspace(0.0, 1.0, count) * (b - a)

    def sample_spacing(self, count):
        return abs(_c(self.b) - _c(self.a)) / max(count - 1, 1)


class HalfLine(_Primitive):
    """Closed ray {anchor + t * direction : t >= 0}; direction is stored normalized"""

    kind: Literal["half_line"] = "half_line"
    anchor: Pair
    direction: Pair

    _check_anchor = field_validator("anchor")(_finite_pair)

    @field_validator("direction")
    @classmethod
    def _unit(cls, value: Pair) -> Pair:
        x, y = _finite_pair(value)
        norm = math.hypot(x, y)
        if norm == 0.0:
            raise ValueError("half-line direction must be non-zero")
        return (x / norm, y / norm)

    @property
    def bounded(self):
        return False

    def project(self, z):
        return _ray_project(z, _c(self.anchor), _c(self.direction))


class Arc(_Primitive):
    """Closed circular arc; half-width pi is the full circle"""

    kind: Literal["arc"] = "arc"
    center: Pair
    radius: float = Field(gt=0)
    mid: float
    half: float = Field(gt=0, le=math.pi)

    _check_center = field_validator("center")(_finite_pair)

    @property
    def full_circle(self) -> bool:
        return self.half >= math.pi

    def project(self, z):
        return _arc_project(z, _c(self.center), self.radius, self.mid, self.half)

    def radius_bound(self):
        return abs(_c(self.center)) + self.radius

    def sample(self, count):
        theta = self.mid + np.linspace(-self.half, self.half, count)
        return _c(self.center) + self.radius * np.exp(1j * theta)

    def sample_spacing(self, count):
        return 2.0 * self.half * self.radius / max(count - 1, 1)


class ClosedDisk(_Primitive):
    kind: Literal["disk"] = "disk"
    center: Pair
    radius: float = Field(gt=0)

    _check_center = field_validator("center")(_finite_pair)

    def project(self, z):
        c = _c(self.center)
        w = z - c
        m = np.abs(w)
        scale = np.where(m > self.radius, self.radius / np.maximum(m, 1e-300), 1.0)
        return c + w * scale

    def radius_bound(self):
        return abs(_c(self.center)) + self.radius

    def sample(self, count):
        theta = np.linspace(0.0, TWO_PI, count, endpoint=False)
        return _c(self.center) + self.radius * np.exp(1j * theta)

    def sample_spacing(self, count):
        return TWO_PI * self.radius / count


class ClosedWedge(_Primitive):
    """Closed angular region swept counter-clockwise from start to end; may be reflex"""

    kind: Literal["wedge"] = "wedge"
    apex: Pair
    start: float
    end: float

    _check_apex = field_validator("apex")(_finite_pair)

    @model_validator(mode="after")
    def _proper_opening(self):
        opening = (self.end - self.start) % TWO_PI
        if opening <= 0.0 or opening >= TWO_PI:
            raise ValueError("wedge opening must lie strictly between 0 and 2*pi")
        return self

    @property
    def opening(self) -> float:
        return (self.end - self.start) % TWO_PI

    @property
    def bounded(self):
        return False

    def project(self, z):
        a = _c(self.apex)
        w = z - a
        phi = (np.angle(w) - self.start) % TWO_PI
        inside = (phi <= self.opening) | (w == 0)
        p1 = _ray_project(z, a, complex(math.cos(self.start), math.sin(self.start)))
        p2 = _ray_project(z, a, complex(math.cos(self.end), math.sin(self.end)))
        edge = np.where(np.abs(z - p1) <= np.abs(z - p2), p1, p2)
        return np.where(inside, z, edge)


class PolarPoints(_Primitive):
    """Zero-capacity point set: an explicit list, or a lattice origin + Z*basis1 + Z*basis2 cut to |z| <= bound"""

    kind: Literal["polar"] = "polar"
    points: Optional[Tuple[Pair, ...]] = None
    origin: Optional[Pair] = None
    basis1: Optional[Pair] = None
    basis2: Optional[Pair] = None
    bound: Optional[float] = Field(None, gt=0)

    polar: ClassVar[bool] = True

    @field_validator("points")
    @classmethod
    def _finite_points(cls, value):
        if value is None:
            return value
        if len(value) == 0:
            raise ValueError("explicit point list must not be empty")
        return tuple(_finite_pair(p) for p in value)

    @model_validator(mode="after")
    def _one_form(self):
        lattice = (self.origin, self.basis1, self.basis2)
        if self.points is not None:
            if any(v is not None for v in lattice) or self.bound is not None:
                raise ValueError("give either points or a lattice, not both")
            return self
        if any(v is None for v in lattice):
            raise ValueError("lattice needs origin, basis1 and basis2")
        for v in lattice:
            _finite_pair(v)
        if abs(np.linalg.det(self._basis_matrix())) < 1e-12:
            raise ValueError("lattice basis vectors are linearly dependent")
        return self

    def _basis_matrix(self) -> np.ndarray:
        return np.array([[self.basis1[0], self.basis2[0]], [self.basis1[1], self.basis2[1]]], dtype=float)

    @property
    def is_lattice(self) -> bool:
        return self.points is None

    @property
    def bounded(self):
        return self.points is not None or self.bound is not None

    @cached_property
    def finite_points(self) -> Optional[np.ndarray]:
        if self.points is not None:
            return np.array([_c(p) for p in self.points])
        if self.bound is None:
            return None
        basis = self._basis_matrix()
        smallest = np.linalg.svd(basis, compute_uv=False).min()
        reach = int(math.ceil((self.bound + abs(_c(self.origin))) / smallest)) + 1
        m, n = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
        pts = _c(self.origin) + m.ravel() * _c(self.basis1) + n.ravel() * _c(self.basis2)
        pts = pts[np.abs(pts) <= self.bound]
        if pts.size == 0:
            raise ValueError("bounded lattice contains no points")
        return pts

    def project(self, z):
        z = np.asarray(z, dtype=complex)
        finite = self.finite_points
        if finite is not None:
            gaps = np.abs(z[..., None] - finite)
            return finite[np.argmin(gaps, axis=-1)]
        inverse = np.linalg.inv(self._basis_matrix())
        w = z - _c(self.origin)
        u = inverse[0, 0] * w.real + inverse[0, 1] * w.imag
        v = inverse[1, 0] * w.real + inverse[1, 1] * w.imag
        base_u, base_v = np.rint(u), np.rint(v)
        b1, b2 = _c(self.basis1), _c(self.basis2)
        best = np.full(z.shape, np.inf)
        nearest = np.zeros(z.shape, dtype=complex)
        for du in (-1.0, 0.0, 1.0):
            for dv in (-1.0, 0.0, 1.0):
                candidate = _c(self.origin) + (base_u + du) * b1 + (base_v + dv) * b2
                gap = np.abs(z - candidate)
                closer = gap < best
                best = np.where(closer, gap, best)
                nearest = np.where(closer, candidate, nearest)
        return nearest

    def radius_bound(self):
        finite = self.finite_points
        return math.inf if finite is None else float(np.abs(finite).max())

    def sample(self, count):
        finite = self.finite_points
        if finite is None:
            raise ValueError("unbounded lattice cannot be sampled")
        return finite


Obstacle = Annotated[
    Union[Segment, HalfLine, Arc, ClosedDisk, ClosedWedge, PolarPoints],
    Field(discriminator="kind"),
]


class _ArcRing:
    """k equal arcs on one circle with equally spaced mid-angles; nearest arc is the angularly nearest mid"""

    def __init__(self, center: complex, radius: float, half: float, mid0: float, count: int):
        self.center = center
        self.radius = radius
        self.half = half
        self.mid0 = mid0
        self.count = count
        self.step = TWO_PI / count

    def project(self, z):
        ang = np.angle(z - self.center)
        j = np.rint((ang - self.mid0) / self.step) % self.count
        return _arc_project(z, self.center, self.radius, self.mid0 + j * self.step, self.half)


def _group_rings(arcs: List[Arc]) -> Tuple[List[_ArcRing], List[Arc]]:
    groups: Dict[Tuple, List[Arc]] = {}
    for arc in arcs:
        groups.setdefault((arc.center, arc.radius, arc.half), []).append(arc)
    rings, single = [], []
    for (center, radius, half), members in groups.items():
        count = len(members)
        if count < 2:
            single.extend(members)
            continue
        mids = np.sort(np.array([m.mid for m in members]) % TWO_PI)
        gaps = np.diff(np.append(mids, mids[0] + TWO_PI))
        if np.allclose(gaps, TWO_PI / count, rtol=0.0, atol=1e-12):
            rings.append(_ArcRing(_c(center), radius, half, float(mids[0]), count))
        else:
            single.extend(members)
    return rings, single


class DistanceField:
    """Vectorized distance to a union of obstacles"""

    def __init__(self, obstacles: Sequence[_Primitive]):
        arcs = [o for o in obstacles if isinstance(o, Arc)]
        rings, single_arcs = _group_rings(arcs)
        self._projectors = [o for o in obstacles if not isinstance(o, Arc)] + single_arcs + rings

    @property
    def empty(self) -> bool:
        return not self._projectors

    def nearest(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(distance, nearest complement point) per query point; inf and z itself when empty"""
        z = np.asarray(z, dtype=complex)
        best = np.full(z.shape, np.inf)
        point = z.copy()
        for projector in self._projectors:
            p = projector.project(z)
            gap = np.abs(z - p)
            closer = gap < best
            best = np.where(closer, gap, best)
            point = np.where(closer, p, point)
        return best, point

    def distance(self, z: np.ndarray) -> np.ndarray:
        return self.nearest(z)[0]


class DomainSpec(BaseModel):
    """D = C minus the union of the obstacles, taken as the component of the base point"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str = "domain"
    obstacles: Tuple[Obstacle, ...] = ()
    scale_hint: float = Field(1.0, gt=0)
    base_point: Pair = (0.0, 0.0)

    _check_base = field_validator("base_point")(_finite_pair)

    @model_validator(mode="after")
    def _base_point_free(self):
        base = np.array([_c(self.base_point)])
        for index, obstacle in enumerate(self.obstacles):
            if obstacle.distance(base)[0] <= 0.0:
                raise SpecError("covers the base point", index)
        return self

    @property
    def base(self) -> complex:
        return _c(self.base_point)

    @cached_property
    def field(self) -> DistanceField:
        """Polar-blind distance field used by the walker"""
        return DistanceField([o for o in self.obstacles if not o.polar])

    @cached_property
    def strict_field(self) -> DistanceField:
        return DistanceField(list(self.obstacles))

    @cached_property
    def enclosing_circles(self) -> List[Tuple[complex, float]]:
        return [(_c(o.center), o.radius) for o in self.obstacles if isinstance(o, Arc) and o.full_circle]

    def distance(self, z, strict: bool = False) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (self.strict_field if strict else self.field).distance(z)

    def contains(self, z, strict: bool = False) -> np.ndarray:
        return self.distance(z, strict) > 0.0

    def same_component(self, z, reference: Optional[complex] = None) -> np.ndarray:
        """False where a full circle separates z from the reference point (default: base point).
        Enclosures built from several obstacles are not detected."""
        z = np.asarray(z, dtype=complex)
        reference = self.base if reference is None else reference
        same = np.ones(z.shape, dtype=bool)
        for center, radius in self.enclosing_circles:
            same &= (np.abs(z - center) < radius) == (abs(reference - center) < radius)
        return same

    def in_domain(self, z) -> np.ndarray:
        """contains() restricted to the base component"""
        return self.contains(z) & self.same_component(z)

    @property
    def nonpolar(self) -> List[_Primitive]:
        return [o for o in self.obstacles if not o.polar]

    @property
    def has_unbounded_nonpolar(self) -> bool:
        return any(not o.bounded for o in self.nonpolar)

    @property
    def base_enclosed(self) -> bool:
        """Base point inside a full circle, so D is bounded"""
        return any(abs(self.base - c) < r for c, r in self.enclosing_circles)

    def with_obstacles(self, obstacles: Sequence[_Primitive], label: Optional[str] = None) -> "DomainSpec":
        return DomainSpec(
            label=label or self.label,
            obstacles=tuple(obstacles),
            scale_hint=self.scale_hint,
            base_point=self.base_point,
        )


class InscribedRadius(BaseModel):
    value: float
    unbounded_hint: bool
    doublings: List[float]


class ClassDReport(BaseModel):
    is_class_d: bool
    R_constant: Optional[float] = None
    failures: List[Tuple[float, int]] = []
    counts: List[Tuple[float, int]] = []
    hole_radius: float = 0.0
    note: str = ""


def distance_to_complement(spec: DomainSpec, z, strict: bool = False) -> float:
    """Radius of the largest open disk about z inside D; polar obstacles only count when strict"""
    z = ValidationHelper.validate_point(z, "z")
    return float(spec.distance(np.array([z]), strict)[0])


def contains(spec: DomainSpec, z, strict: bool = False) -> bool:
    return distance_to_complement(spec, z, strict) > 0.0


def _max_strict_distance(spec: DomainSpec, radius: float, step: float) -> float:
    axis = np.arange(-radius, radius + 0.5 * step, step)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    grid = (xs + 1j * ys).ravel()
    grid = grid[(np.abs(grid) <= radius) & spec.same_component(grid)]
    best = 0.0
    for start in range(0, grid.size, GRID_CHUNK):
        chunk = spec.distance(grid[start:start + GRID_CHUNK], strict=True)
        best = max(best, float(chunk.max()))
    return best


def largest_inscribed_radius(spec: DomainSpec, search_radius: float, grid_step: float) -> InscribedRadius:
    """Grid maximum of the strict distance over |z| <= search_radius, with three internal doublings"""
    if grid_step <= 0:
        raise ValueError(f"grid_step must be positive, got {grid_step!r}")
    ValidationHelper.validate_positive(search_radius, "search_radius")
    if grid_step >= search_radius:
        raise ValueError("grid_step must be smaller than search_radius")
    values = [_max_strict_distance(spec, search_radius * 2 ** k, grid_step * 2 ** k) for k in range(4)]
    if math.isinf(values[0]):
        unbounded = True
    else:
        unbounded = all(later >= 1.5 * earlier for earlier, later in zip(values, values[1:]))
    logger.debug("inscribed radius %s over doublings %s", values[0], values)
    return InscribedRadius(value=values[0], unbounded_hint=unbounded, doublings=values)


def circle_slice(spec: DomainSpec, r: float, resolution: int = 4096) -> np.ndarray:
    """contains() at resolution equally spaced angles on |z| = r"""
    theta = np.arange(resolution) * (TWO_PI / resolution)
    return spec.contains(r * np.exp(1j * theta))


def count_arcs(inside: np.ndarray) -> int:
    """Connected runs of True on a cyclic scan"""
    if inside.all():
        return 1
    return int(np.count_nonzero(inside & ~np.roll(inside, 1)))


def _touching(bounded: _Primitive, other: _Primitive, samples: int) -> bool:
    pts = bounded.sample(samples)
    if float(other.distance(pts).min()) <= bounded.sample_spacing(samples):
        return True
    if other.bounded:
        pts = other.sample(samples)
        return float(bounded.distance(pts).min()) <= other.sample_spacing(samples)
    return False


def _hull_indices(spec: DomainSpec, samples: int) -> List[int]:
    """Indices of the obstacles joined to infinity through touching non-polar obstacles"""
    obstacles = list(spec.obstacles)
    candidates = [i for i, o in enumerate(obstacles) if not o.polar]
    kept = {i for i in candidates if not obstacles[i].bounded}
    frontier = list(kept)
    while frontier:
        k = frontier.pop()
        for j in candidates:
            if j in kept or not obstacles[j].bounded:
                continue
            if _touching(obstacles[j], obstacles[k], samples):
                kept.add(j)
                frontier.append(j)
    return sorted(kept)


def omega_hull(spec: DomainSpec, samples: int = 4096) -> DomainSpec:
    """Keep only the obstacles of the unbounded complement component; polar sets always go"""
    kept = _hull_indices(spec, samples)
    if not kept:
        raise SpecError("no unbounded obstacle: the hull is the whole plane (h = b = 0)")
    hull = [spec.obstacles[i] for i in kept]
    logger.debug("hull keeps %d of %d obstacles", len(hull), len(spec.obstacles))
    return spec.with_obstacles(hull, label=f"{spec.label}-hull")


def class_d_check(spec: DomainSpec, r_grid: Sequence[float], resolution: int = 4096,
                  samples: int = 4096) -> ClassDReport:
    """Scan circle slices of the hull; report the smallest probed R beyond which each slice is one arc"""
    radii = ValidationHelper.validate_radii(r_grid, "r_grid")
    if not spec.obstacles:
        return ClassDReport(is_class_d=False, note="empty obstacle list: the domain is the whole plane")
    if spec.base_enclosed:
        return ClassDReport(is_class_d=False, note="bounded domain: the base point is enclosed by a full circle")
    if any(o.polar and not o.bounded for o in spec.obstacles):
        return ClassDReport(is_class_d=False, note="unbounded polar lattice: the hole union is unbounded")
    kept = set(_hull_indices(spec, samples))
    hull = spec.with_obstacles([spec.obstacles[i] for i in sorted(kept)]) if kept else None
    holes = [o for i, o in enumerate(spec.obstacles) if i not in kept]
    hole_radius = max((o.radius_bound() for o in holes), default=0.0)

    counts = []
    for r in radii:
        count = 1 if hull is None else count_arcs(circle_slice(hull, r, resolution))
        counts.append((r, count))
    failures = [(r, c) for r, c in counts if c != 1]

    R_constant = None
    for index in range(len(counts) - 1, -1, -1):
        r, c = counts[index]
        if c != 1:
            break
        if r > hole_radius + 1.0:
            R_constant = r
    note = "bounded complement: the hull is the whole plane" if hull is None else ""
    return ClassDReport(
        is_class_d=R_constant is not None,
        R_constant=R_constant,
        failures=failures,
        counts=counts,
        hole_radius=hole_radius,
        note=note,
    )


def is_simply_connected(spec: DomainSpec, samples: int = 4096) -> bool:
    """Complement connected in the extended plane, with no polar holes"""
    if any(o.polar for o in spec.obstacles):
        return False
    if not spec.obstacles:
        return True
    if spec.base_enclosed:
        c, r = min(((c, r) for c, r in spec.enclosing_circles if abs(spec.base - c) < r), key=lambda cr: cr[1])
        for o in spec.obstacles:
            if isinstance(o, Arc) and o.full_circle and _c(o.center) == c and o.radius == r:
                continue
            if not o.bounded:
                pts = o.project(np.array([c]))
                if abs(pts[0] - c) < r:
                    return False
                continue
            if (np.abs(o.sample(samples) - c) < r).any():
                return False
        return True
    if not spec.has_unbounded_nonpolar:
        return False
    return len(omega_hull(spec, samples).obstacles) == len(spec.obstacles)


# Shape factories for the closed-form catalog domains

def slit_plane(tip: float = -1.0, shift: complex = 0j, label: str = "slit-plane") -> DomainSpec:
    """C minus (-inf, tip], translated by shift"""
    return DomainSpec(
        label=label,
        obstacles=(HalfLine(anchor=(tip + shift.real, shift.imag), direction=(-1.0, 0.0)),),
    )


def half_plane(edge: float = -1.0) -> DomainSpec:
    """{Re z > edge}"""
    return DomainSpec(
        label="half-plane",
        obstacles=(ClosedWedge(apex=(edge, 0.0), start=math.pi / 2, end=3 * math.pi / 2),),
        scale_hint=max(abs(edge), 1.0),
    )


def sector(opening: float, apex: float = 0.0, base_point: Optional[Pair] = None, label: Optional[str] = None) -> DomainSpec:
    """{|arg(z - apex)| < opening / 2}"""
    if not 0 < opening < TWO_PI:
        raise ValueError(f"opening must lie in (0, 2*pi), got {opening!r}")
    base = base_point if base_point is not None else (apex + 1.0, 0.0)
    return DomainSpec(
        label=label or f"sector-{opening:.6g}",
        obstacles=(ClosedWedge(apex=(apex, 0.0), start=opening / 2, end=TWO_PI - opening / 2),),
        base_point=base,
    )


def disk(radius: float = 1.0) -> DomainSpec:
    """Open disk about 0, cut out by a full-circle arc"""
    return DomainSpec(
        label="disk",
        obstacles=(Arc(center=(0.0, 0.0), radius=radius, mid=0.0, half=math.pi),),
        scale_hint=radius,
    )


def plane_minus_disk(center: Pair = (-2.0, 0.0), radius: float = 1.0) -> DomainSpec:
    return DomainSpec(
        label="plane-minus-disk",
        obstacles=(ClosedDisk(center=center, radius=radius),),
        scale_hint=radius,
    )
