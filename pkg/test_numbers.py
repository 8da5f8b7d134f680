import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from core.config import HardyScopeConfig, WalkConfig
from core.domain_geometry import (
    DomainSpec,
    PolarPoints,
    class_d_check,
    disk,
    omega_hull,
    plane_minus_disk,
    slit_plane,
)
from core.errors import ProfileExhaustedError
from core.number_estimator import (
    DEFAULT_GRID,
    NumberEstimator,
    Trend,
    consistency_report,
    fit_exponent,
    inclusion_bergman,
    inclusion_hardy,
    inclusion_hardy_in_bergman,
)
from core.spec_store import SpecStore
from core.walk_engine import RadialProfile, WalkEngine

RADII = np.array(DEFAULT_GRID)


def power_profile(exponent, scale=1.0, radii=RADII, rel=0.0):
    values = scale * radii ** -exponent
    return RadialProfile.synthetic(radii, values, rel * values)


def test_exact_power_law():
    est = fit_exponent(power_profile(0.5))
    assert est.exponent == pytest.approx(0.5, abs=1e-12)
    assert not est.infinite
    assert len(est.window_slopes) == 5
    assert len(est.pairwise_slopes) == 7
    assert est.global_fit.r_squared == pytest.approx(1.0)


def test_constant_profile_has_exponent_zero():
    est = fit_exponent(RadialProfile.synthetic(RADII, np.full(RADII.size, 0.3)))
    assert est.exponent == pytest.approx(0.0, abs=1e-12)


def test_growing_profile_is_clamped_at_zero():
    est = fit_exponent(power_profile(-0.5))
    assert est.exponent == 0.0
    assert est.raw_exponent == pytest.approx(-0.5)


def test_noisy_power_law():
    rng = np.random.default_rng(2)
    values = RADII ** -0.5 * (1 + 0.02 * rng.standard_normal(RADII.size))
    est = fit_exponent(RadialProfile.synthetic(RADII, values, 0.02 * RADII ** -0.5))
    assert 0.4 <= est.exponent <= 0.6
    assert est.stderr > 0


def test_scale_and_dilation_invariance():
    base = fit_exponent(power_profile(1.5)).exponent
    assert fit_exponent(power_profile(1.5, scale=7.0)).exponent == pytest.approx(base)
    stretched = 3.0 * RADII
    dilated = RadialProfile.synthetic(stretched, (stretched / 3.0) ** -1.5)
    assert fit_exponent(dilated).exponent == pytest.approx(base)


def test_liminf_takes_the_smallest_tail_window():
    # slope 2 up to r = 32, slope 0.5 afterwards
    values = np.where(RADII <= 32, RADII ** -2.0, 32.0 ** -1.5 * RADII ** -0.5)
    est = fit_exponent(RadialProfile.synthetic(RADII, values))
    assert est.exponent == pytest.approx(0.5, abs=1e-9)


def test_statistical_zeros_are_dropped():
    values = RADII ** -0.5
    errs = np.full(RADII.size, 1e-4)
    values[-2:] = 1e-5
    est = fit_exponent(RadialProfile.synthetic(RADII, values, errs))
    assert est.dropped_radii == [256.0, 512.0]
    assert "dropped 2" in est.note
    assert est.exponent == pytest.approx(0.5, abs=1e-9)


def test_exhausted_profile():
    values = np.zeros(RADII.size)
    values[:3] = 1.0
    with pytest.raises(ProfileExhaustedError) as err:
        fit_exponent(RadialProfile.synthetic(RADII, values, np.full(RADII.size, 0.01)))
    assert err.value.kept == 3
    assert err.value.required == 4


def test_short_profiles_are_rejected():
    with pytest.raises(ValueError, match="at least 6 entries"):
        fit_exponent(power_profile(0.5, radii=RADII[:5]))
    est = fit_exponent(power_profile(0.5, radii=RADII[:6]))
    assert est.exponent == pytest.approx(0.5, abs=1e-12)


def test_super_polynomial_decay_is_infinite():
    est = fit_exponent(RadialProfile.synthetic(RADII, np.exp(-RADII)))
    assert est.infinite
    assert math.isinf(est.exponent)


def test_inclusion_examples():
    assert inclusion_hardy(2, 1)
    assert not inclusion_hardy(1, 2)
    assert inclusion_hardy_in_bergman(1, 2, 0)
    assert not inclusion_hardy_in_bergman(1, 3, 0)
    assert inclusion_bergman(2, 0, 1, 0)
    assert inclusion_bergman(1, 0, 2, 2)
    assert not inclusion_bergman(1, 0, 2, 1)
    assert not inclusion_bergman(5, 2, 2, 0)
    with pytest.raises(ValueError):
        inclusion_hardy(0, 1)
    with pytest.raises(ValueError):
        inclusion_bergman(1, -1, 1, 0)


def test_inclusion_bergman_truth_table():
    exponents = [Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)]
    weights = [Fraction(-1, 2), Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)]
    cases = list(itertools.product(exponents, weights, exponents, weights))
    assert len(cases) == 576
    for p, alpha, q, beta in cases:
        if p == q:
            expected = alpha <= beta
        elif p > q:
            expected = (alpha + 1) * q < (beta + 1) * p
        else:
            expected = (alpha + 2) * q <= (beta + 2) * p
        assert inclusion_bergman(p, alpha, q, beta) == expected, (p, alpha, q, beta)
    for p, alpha in itertools.product(exponents, weights):
        assert inclusion_bergman(p, alpha, p, alpha)


def test_consistency_report():
    assert consistency_report(1.0, 0.5, {}) == ["h = 1 exceeds b = 0.5"]
    assert consistency_report(0.5, 0.5, {0.0: 1.0, 1.0: 1.5}) == []
    assert len(consistency_report(0.5, 0.5, {0.0: 0.5})) == 1
    assert consistency_report(None, None, {0.0: None}) == []
    assert consistency_report(0.5, 0.55, {}, tol=0.0) == []


@pytest.fixture
def estimator():
    cfg = HardyScopeConfig()
    return NumberEstimator(cfg, WalkEngine(WalkConfig(n_samples=500, seed=1), threads=2))


@pytest.mark.parametrize(
    "p, power, expected",
    [
        (0.25, 1.0, Trend.CONVERGENT),
        (1.0, 1.0, Trend.DIVERGENT),
        (0.5, 1.0, Trend.INCONCLUSIVE),
        (0.5, 2.0, Trend.CONVERGENT),
        (1.5, 2.0, Trend.DIVERGENT),
    ],
)
def test_integral_trend_on_power_laws(estimator, p, power, expected):
    profile = power_profile(0.5, scale=2.0)
    trend = estimator.integral_trend(None, p, power=power, profile=profile)
    assert trend.verdict == expected
    assert trend.growth_exponent == pytest.approx((p - 1) - 0.5 * power)
    assert np.all(np.diff(trend.partial_sums) > 0)


def test_diagnostic_wrappers(estimator):
    profile = power_profile(0.5)
    assert estimator.hardy_integral_diagnostic(None, 0.25, profile=profile) == Trend.CONVERGENT
    assert estimator.bergman_alpha_profile(None, 1.5, 0.0, profile=profile) == Trend.DIVERGENT
    with pytest.raises(ValueError):
        estimator.bergman_alpha_profile(None, 1.0, -1.0, profile=profile)


def test_structural_shortcuts(estimator):
    assert estimator.hardy_eks(disk(1.0)).infinite
    assert estimator.hardy_green(disk(1.0)).infinite
    empty = estimator.hardy_eks(DomainSpec())
    assert empty.exponent == 0.0 and "polar" in empty.note
    lattice = DomainSpec(obstacles=(PolarPoints(origin=(0.5, 0.5), basis1=(1.0, 0.0), basis2=(0.0, 1.0)),))
    assert estimator.hardy_green(lattice).exponent == 0.0
    bounded = estimator.hardy_eks(plane_minus_disk())
    assert bounded.exponent == 0.0 and "bounded complement" in bounded.note
    assert bounded.profile is None


def test_bloch_test(estimator, domains_dir, slit):
    assert estimator.bloch_test(SpecStore.load(domains_dir / "grid_slit.dom"))
    assert not estimator.bloch_test(slit)


def test_report_for_a_bounded_complement(estimator):
    report = estimator.number_report(plane_minus_disk(), R_grid=[2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
                                     r_grid=[2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    assert report.h.exponent == 0.0
    assert report.class_d and not report.simply_connected and not report.is_bloch
    assert report.b_reported == 0.0
    assert report.b_alpha_reported == {0.0: 0.0, 1.0: 0.0}
    assert report.inequality_violations == []
    assert report.method_gap == 0.0
    assert "Bloch: false; b=0.0000" in report.text()
    assert report.rows()[0]["b_alpha_1"] == 0.0


def test_report_for_a_bounded_domain(estimator):
    report = estimator.number_report(disk(1.0), method="eks")
    assert report.h.infinite
    assert report.is_bloch
    assert not report.class_d
    assert math.isinf(report.b_reported)
    assert report.h_cross is None


def test_report_rejects_unknown_method(estimator, slit):
    with pytest.raises(ValueError, match="method"):
        estimator.number_report(slit, method="fast")


@pytest.mark.slow
def test_slit_plane_hardy_number_by_harmonic_measure(slit):
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=100_000, seed=21)))
    est = estimator.hardy_eks(slit)
    assert est.exponent == pytest.approx(0.5, abs=0.05)


@pytest.mark.slow
def test_slit_plane_hardy_number_by_green_profile(slit):
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=20_000, seed=22)))
    est = estimator.hardy_green(slit)
    assert est.exponent == pytest.approx(0.5, abs=0.1)


@pytest.mark.slow
def test_quarter_wedge_hardy_number(domains_dir):
    spec = SpecStore.load(domains_dir / "wedge_quarter.dom")
    grid = [2.0 ** (k / 2) for k in range(2, 8)]
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=60_000, seed=23)))
    est = estimator.hardy_eks(spec, R_grid=grid)
    assert est.exponent == pytest.approx(2.0, abs=0.2)


@pytest.mark.slow
def test_slit_plane_methods_agree(slit):
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=100_000, seed=25)))
    eks = estimator.hardy_eks(slit)
    green = estimator.hardy_green(slit, r_grid=[2.0 ** (k / 2) for k in range(4, 12)])
    assert abs(green.exponent - eks.exponent) <= 0.1


@pytest.mark.slow
def test_quarter_wedge_methods_agree(domains_dir):
    spec = SpecStore.load(domains_dir / "wedge_quarter.dom")
    grid = [2.0 ** (k / 2) for k in range(2, 8)]
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=200_000, seed=26)))
    eks = estimator.hardy_eks(spec, R_grid=grid)
    green = estimator.hardy_green(spec, r_grid=grid)
    assert abs(green.exponent - eks.exponent) <= 0.1


@pytest.mark.slow
def test_translated_slit_plane_has_the_same_hardy_number(slit):
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=50_000, seed=27)))
    shifted = slit_plane(-1.0, shift=1j)
    assert shifted.contains(np.array([0j]))[0]
    assert abs(estimator.hardy_eks(shifted).exponent - estimator.hardy_eks(slit).exponent) <= 0.1


@pytest.mark.slow
def test_disks_inside_the_wedge_keep_the_hull_exponent(domains_dir):
    spec = SpecStore.load(domains_dir / "wedge_two_disks.dom")
    assert class_d_check(spec, [2.0 ** k for k in range(8)]).is_class_d
    # every radius lies beyond both disks
    grid = [2.0 ** (k / 2) for k in range(5, 11)]
    estimator = NumberEstimator(engine=WalkEngine(WalkConfig(n_samples=400_000, seed=28)))
    with_disks = estimator.hardy_eks(spec, R_grid=grid)
    hull = estimator.hardy_eks(omega_hull(spec), R_grid=grid)
    assert abs(with_disks.exponent - hull.exponent) <= 0.2


@pytest.mark.slow
def test_slit_plane_bergman_trend_turns_at_p_one(slit):
    engine = WalkEngine(WalkConfig(n_samples=60_000, seed=24))
    estimator = NumberEstimator(engine=engine)
    profile = engine.psi_profile(slit, [2.0 ** (1 + k / 2) for k in range(15)])
    verdicts = {p: estimator.bergman_alpha_profile(None, p, 0.0, profile=profile) for p in (0.5, 0.8, 1.2, 1.5)}
    assert verdicts == {
        0.5: Trend.CONVERGENT,
        0.8: Trend.CONVERGENT,
        1.2: Trend.DIVERGENT,
        1.5: Trend.DIVERGENT,
    }
