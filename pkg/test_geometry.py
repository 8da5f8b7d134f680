import math

import numpy as np
import pytest

from core.domain_geometry import (
    Arc,
    ClosedDisk,
    ClosedWedge,
    DistanceField,
    DomainSpec,
    HalfLine,
    PolarPoints,
    Segment,
    circle_slice,
    class_d_check,
    contains,
    count_arcs,
    disk,
    distance_to_complement,
    half_plane,
    is_simply_connected,
    largest_inscribed_radius,
    omega_hull,
    plane_minus_disk,
    sector,
)
from core.errors import SpecError
from core.spec_store import SpecStore


def wedge_two_disks(domains_dir):
    return SpecStore.load(domains_dir / "wedge_two_disks.dom")


def test_slit_plane_distances(slit):
    assert distance_to_complement(slit, 0) == pytest.approx(1.0)
    assert distance_to_complement(slit, (-2.0, 1.0)) == pytest.approx(1.0)
    assert distance_to_complement(slit, 3.0) == pytest.approx(4.0)
    assert not contains(slit, -5.0)
    assert contains(slit, (-5.0, 1e-3))


def test_primitive_projections():
    z = np.array([2 + 1j, -1 + 0j, 0.5 + 3j])
    seg = Segment(a=(0.0, 0.0), b=(1.0, 0.0))
    np.testing.assert_allclose(seg.distance(z), [math.hypot(1, 1), 1.0, 3.0])
    ray = HalfLine(anchor=(0.0, 0.0), direction=(0.0, 5.0))
    assert ray.direction == (0.0, 1.0)
    np.testing.assert_allclose(ray.distance(z), [2.0, 1.0, 0.5])
    blob = ClosedDisk(center=(0.0, 0.0), radius=1.0)
    np.testing.assert_allclose(blob.distance(z), [math.sqrt(5) - 1, 0.0, abs(0.5 + 3j) - 1])


def test_arc_projection_uses_endpoints_outside_the_sweep():
    arc = Arc(center=(0.0, 0.0), radius=1.0, mid=0.0, half=math.pi / 4)
    assert arc.distance(np.array([2.0 + 0j]))[0] == pytest.approx(1.0)
    end = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    assert arc.distance(np.array([0j + 1j * 2]))[0] == pytest.approx(abs(2j - end))
    assert arc.distance(np.array([-3.0 + 0j]))[0] == pytest.approx(abs(-3 - end))


def test_half_plane_and_sector():
    hp = half_plane(-1.0)
    assert distance_to_complement(hp, 0) == pytest.approx(1.0)
    assert not contains(hp, -3.0)
    wedge = sector(math.pi / 2)
    assert wedge.base == 1 + 0j
    assert distance_to_complement(wedge, 1.0) == pytest.approx(math.sqrt(0.5))
    assert not contains(wedge, -1.0)


def test_lattice_is_invisible_unless_strict():
    grid = PolarPoints(origin=(0.5, 0.5), basis1=(1.0, 0.0), basis2=(0.0, 1.0))
    spec = DomainSpec(label="plane-grid", obstacles=(grid,))
    assert math.isinf(distance_to_complement(spec, 0))
    assert distance_to_complement(spec, 0, strict=True) == pytest.approx(math.sqrt(0.5))
    assert distance_to_complement(spec, (10.5, -3.5), strict=True) == pytest.approx(0.0, abs=1e-12)


def test_bounded_lattice_enumerates_points():
    grid = PolarPoints(origin=(0.0, 0.0), basis1=(1.0, 0.0), basis2=(0.0, 1.0), bound=2.0)
    assert grid.bounded
    assert grid.finite_points.size == 13
    assert grid.radius_bound() == pytest.approx(2.0)


def test_empty_field_is_infinitely_far():
    dist, point = DistanceField([]).nearest(np.array([1 + 1j]))
    assert math.isinf(dist[0])
    assert point[0] == 1 + 1j


@pytest.mark.parametrize(
    "document",
    [
        {"kind": "arc", "center": [0, 0], "radius": 1, "mid": 0, "half": 4.0},
        {"kind": "segment", "a": [1, 1], "b": [1, 1]},
        {"kind": "half_line", "anchor": [1, 1], "direction": [0, 0]},
        {"kind": "wedge", "apex": [1, 1], "start": 0.0, "end": 0.0},
        {"kind": "polar", "origin": [0.5, 0.5], "basis1": [1, 0], "basis2": [2, 0]},
    ],
)
def test_invalid_obstacles_are_rejected(document):
    with pytest.raises(SpecError) as err:
        SpecStore.from_document({"obstacles": [{"kind": "disk", "center": [5, 5], "radius": 1}, document]})
    assert err.value.obstacle_index == 1


def test_base_point_must_be_free():
    with pytest.raises(ValueError, match="covers the base point"):
        DomainSpec(obstacles=(ClosedDisk(center=(0.0, 0.0), radius=1.0),))


def test_arc_ring_matches_brute_force():
    arcs = [Arc(center=(0.0, 0.0), radius=3.0, mid=math.pi * j / 3, half=0.2) for j in range(6)]
    field = DistanceField(arcs)
    rng = np.random.default_rng(3)
    z = rng.uniform(-5, 5, 500) + 1j * rng.uniform(-5, 5, 500)
    brute = np.min([a.distance(z) for a in arcs], axis=0)
    np.testing.assert_allclose(field.distance(z), brute, rtol=0, atol=1e-12)


def test_largest_inscribed_radius_separates_bloch_domains(slit):
    assert largest_inscribed_radius(slit, 16.0, 0.25).unbounded_hint
    grid = PolarPoints(origin=(1.0, 1.0), basis1=(2.0, 0.0), basis2=(0.0, 2.0))
    spec = DomainSpec(label="plane-grid-2", obstacles=(grid,))
    found = largest_inscribed_radius(spec, 16.0, 0.25)
    assert not found.unbounded_hint
    assert found.value == pytest.approx(math.sqrt(2.0), abs=0.05)


def test_count_arcs_is_cyclic():
    assert count_arcs(np.array([True, True, True])) == 1
    assert count_arcs(np.array([True, False, True, True, False])) == 2
    assert count_arcs(np.array([True, False, False, True])) == 1
    assert count_arcs(np.array([False, False])) == 0


def test_circle_slice_of_a_sector():
    inside = circle_slice(sector(math.pi / 2), 4.0, 1024)
    assert count_arcs(inside) == 1
    assert not inside.all()
    assert inside.mean() == pytest.approx(0.25, abs=0.01)


def test_class_d_wedge_with_two_disks(domains_dir):
    spec = wedge_two_disks(domains_dir)
    report = class_d_check(spec, [2.0 ** k for k in range(0, 8)])
    assert report.is_class_d
    assert report.hole_radius == pytest.approx(abs(5 - 0.5j) + 0.25)
    assert report.R_constant == 8.0
    hull = omega_hull(spec)
    assert len(hull.obstacles) == 1
    assert isinstance(hull.obstacles[0], ClosedWedge)


def test_class_d_edge_cases(slit):
    assert not class_d_check(DomainSpec(), [1.0, 2.0]).is_class_d
    grid = PolarPoints(origin=(0.5, 0.5), basis1=(1.0, 0.0), basis2=(0.0, 1.0))
    assert not class_d_check(slit.with_obstacles(list(slit.obstacles) + [grid]), [1.0, 2.0]).is_class_d
    bounded = class_d_check(plane_minus_disk(), [1.0, 2.0, 4.0, 8.0])
    assert bounded.is_class_d and bounded.R_constant == 8.0
    assert "bounded complement" in bounded.note


def test_bounded_domain_is_not_class_d():
    report = class_d_check(disk(1.0), [1.0, 2.0, 4.0, 8.0])
    assert not report.is_class_d
    assert report.R_constant is None
    assert "bounded domain" in report.note
    ring = Arc(center=(0.0, 0.0), radius=3.0, mid=0.0, half=math.pi)
    assert not class_d_check(DomainSpec(obstacles=(ring,)), [4.0, 8.0]).is_class_d


def test_hull_touching_obstacles_stay(slit):
    touching = ClosedDisk(center=(-3.0, 1.0), radius=1.0)
    spec = slit.with_obstacles(list(slit.obstacles) + [touching])
    assert len(omega_hull(spec).obstacles) == 2
    with pytest.raises(SpecError):
        omega_hull(plane_minus_disk())


def test_simple_connectivity(slit, domains_dir):
    assert is_simply_connected(slit)
    assert is_simply_connected(disk(1.0))
    assert not is_simply_connected(plane_minus_disk())
    assert not is_simply_connected(wedge_two_disks(domains_dir))
    assert not is_simply_connected(SpecStore.load(domains_dir / "grid_slit.dom"))


def test_components_of_a_disk():
    spec = disk(1.0)
    assert spec.base_enclosed
    inside = spec.in_domain(np.array([0.5 + 0j, 2.0 + 0j]))
    np.testing.assert_array_equal(inside, [True, False])
    assert contains(spec, 2.0)
