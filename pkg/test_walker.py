import math

import numpy as np
import pytest

from conftest import within_guard
from core.config import WalkConfig
from core.domain_geometry import DomainSpec, disk
from core.walk_engine import (
    ExitStatus,
    WalkEngine,
    circle_target,
    read_profile_csv,
    write_profile_csv,
)


def slit_green(z, w):
    """Closed-form Green function of C minus (-inf, -1]"""
    def to_disk(x):
        s = np.sqrt(1 + np.asarray(x, dtype=complex))
        return (s - 1) / (s + 1)

    a, b = to_disk(z), to_disk(w)
    return -np.log(np.abs((a - b) / (1 - np.conj(b) * a)))


def test_circle_without_obstacles_is_always_hit(engine, caplog):
    est = engine.harmonic_measure_circle(DomainSpec(), 4.0)
    assert est.mean == 1.0
    assert est.stderr == 0.0
    assert est.n_used == est.n_samples == 4000
    assert "degenerate truncation" in caplog.text


def test_sample_exit_lands_on_the_unit_circle(engine):
    sample = engine.sample_exit(disk(1.0), 0.3 + 0.1j)
    assert sample.status == ExitStatus.ABSORBED
    assert sample.steps >= 1
    assert abs(sample.z) == pytest.approx(1.0, abs=1e-9)


def test_results_do_not_depend_on_thread_count(slit):
    cfg = WalkConfig(n_samples=2000, batch_size=500, seed=11)
    one = WalkEngine(cfg, threads=1).harmonic_measure_circle(slit, 8.0)
    many = WalkEngine(cfg, threads=3).harmonic_measure_circle(slit, 8.0)
    assert one == many
    other = WalkEngine(cfg.model_copy(update={"seed": 12}), threads=1).harmonic_measure_circle(slit, 8.0)
    assert other.mean != one.mean


def test_disk_green_matches_closed_form():
    engine = WalkEngine(WalkConfig(n_samples=2000, seed=5), threads=2)
    rng = np.random.default_rng(17)
    spec = disk(1.0)
    values, stderrs, truths = [], [], []
    while len(truths) < 100:
        z, w = 0.8 * np.sqrt(rng.random(2)) * np.exp(2j * np.pi * rng.random(2))
        if abs(z - w) < 0.05:
            continue
        est = engine.green(spec, z, w, stream=len(truths))
        values.append(est.mean)
        stderrs.append(est.stderr)
        truths.append(math.log(abs(1 - np.conj(w) * z) / abs(z - w)))
        assert est.n_escaped == 0
    assert within_guard(values, stderrs, truths)


def test_slit_green_is_log_two(engine, slit):
    est = engine.green(slit, 0, 8)
    assert float(slit_green(0, 8)) == pytest.approx(math.log(2))
    assert abs(est.mean - math.log(2)) <= 3 * est.stderr + est.bias_bound


def test_green_is_symmetric(engine, slit):
    z, w = 0.5 + 0.5j, 2.0 - 1.0j
    forward = engine.green(slit, z, w)
    backward = engine.green(slit, w, z)
    spread = 4 * math.hypot(forward.stderr, backward.stderr) + forward.bias_bound + backward.bias_bound
    assert abs(forward.mean - backward.mean) <= spread
    assert forward.mean == pytest.approx(float(slit_green(z, w)), abs=spread)


def test_psi_profile_decreases_like_the_closed_form(engine, slit):
    radii = [2.0, 4.0, 8.0]
    profile = engine.psi_profile(slit, radii)
    means = profile.means
    assert np.all(np.diff(means) < 0)
    theta = 2 * np.pi * (np.arange(4096) + 0.5) / 4096
    exact = [2 * np.pi * slit_green(r * np.exp(1j * theta), 0).mean() for r in radii]
    np.testing.assert_allclose(means, exact, rtol=0.1)
    assert [e.estimate.n_samples for e in profile.entries] == [4000, 8000, 12000]


def test_psi_profile_skips_starts_outside_the_domain(engine):
    spec = disk(1.0)
    profile = engine.psi_profile(spec, [0.5, 2.0])
    assert profile.entries[0].estimate.n_outside == 0
    outside = profile.entries[1].estimate
    assert outside.n_outside == outside.n_samples
    assert outside.n_used == 0


def test_two_stage_agrees_with_direct(engine, slit):
    direct = engine.harmonic_measure_circle(slit, 8.0)
    staged = engine.harmonic_measure_two_stage(slit, 2.0, 8.0, circle_target(8.0), stream=1)
    assert abs(direct.mean - staged.mean) <= 4 * math.hypot(direct.stderr, staged.stderr)


def test_upper_half_carries_half_the_measure(engine, slit):
    R = 8.0
    full = engine.harmonic_measure_circle(slit, R)
    upper = engine.harmonic_measure_set(slit, circle_target(R, 0.0, math.pi), outer_radius=R)
    assert upper.mean <= full.mean
    assert upper.mean >= 0.5 * full.mean - 3 * upper.stderr
    assert abs(upper.mean - 0.5 * full.mean) <= 4 * upper.stderr


def test_reflected_start_sees_more_of_the_upper_target(engine, slit):
    # slit plane and target are symmetric about the real axis; the target sits in the upper half
    R = 8.0
    target = circle_target(R, 0.0, math.pi)
    lower = engine.harmonic_measure_set(slit, target, z0=2.0 - 2.0j, outer_radius=R)
    upper = engine.harmonic_measure_set(slit, target, z0=2.0 + 2.0j, outer_radius=R)
    assert lower.mean <= upper.mean + 3 * math.hypot(lower.stderr, upper.stderr)
    assert lower.mean < upper.mean


def test_walker_preconditions(engine, slit):
    with pytest.raises(ValueError, match="pole"):
        engine.green(slit, 1.0, 1.0)
    with pytest.raises(ValueError, match="domain"):
        engine.green(slit, -2.0, 1.0)
    with pytest.raises(ValueError, match="components"):
        engine.green(disk(1.0), 0.5, 2.0)
    with pytest.raises(ValueError):
        engine.harmonic_measure_circle(slit, 0.5, z0=1.0)
    with pytest.raises(ValueError, match="eps_boundary"):
        engine.harmonic_measure_circle(slit, 8.0, cfg=WalkConfig(eps_boundary=2.0))
    with pytest.raises(ValueError, match="increasing"):
        engine.omega_profile(slit, [4.0, 2.0])


def test_step_limit_walks_are_counted(slit):
    engine = WalkEngine(WalkConfig(n_samples=300, max_steps=1), threads=1)
    est = engine.harmonic_measure_circle(slit, 8.0)
    assert est.n_steplimit == 300
    assert est.n_used == 0
    assert est.n_samples == 300
    assert math.isnan(est.mean)


def test_profile_csv_round_trip(tmp_path, slit):
    engine = WalkEngine(WalkConfig(n_samples=500, seed=3), threads=1)
    profile = engine.omega_profile(slit, [2.0, 4.0])
    path = write_profile_csv(profile, tmp_path / "omega.csv")
    again = read_profile_csv(path, kind="OmegaEKS")
    np.testing.assert_array_equal(again.radii, profile.radii)
    np.testing.assert_array_equal(again.means, profile.means)
    np.testing.assert_array_equal(again.stderrs, profile.stderrs)
    assert again.entries[0].estimate.seed == 3
