import numpy as np
import pytest

from maxreg.discretization import DiscreteOperator, assemble_operator, constant_field
from maxreg.grids import SpaceGrid, TimeGrid
from maxreg.operator_calculus import (
    OperatorFamily,
    RegularityCertificate,
    drift_kernel,
    frac_power,
    kernel_norm_profile,
    propagation_kernel,
    sectoriality_report,
    semigroup,
    theta_norm,
    theta_stability_constant,
)

SG1 = SpaceGrid.uniform(0.0, 1.0, 1)
SG2 = SpaceGrid.uniform(0.0, 1.0, 2)


def op(matrix, grid=None):
    matrix = np.asarray(matrix, dtype=float)
    grid = grid or SpaceGrid.uniform(0.0, 1.0, matrix.shape[0])
    return DiscreteOperator(matrix, grid)


def random_spd(rng, n, shift=None):
    m = rng.standard_normal((n, n))
    return m @ m.T + (shift if shift is not None else n) * np.eye(n)


# -- semigroup ------------------------------------------------------------------


def test_semigroup_at_zero_is_identity():
    a = op(np.diag([1.0, 2.0]))
    assert np.array_equal(semigroup(a, 0.0), np.eye(2))


def test_semigroup_scalar_value():
    assert np.isclose(semigroup(op([[1.0]]), 1.0)[0, 0], np.exp(-1.0))


def test_semigroup_property_random_spd(rng):
    for n in (5, 20, 50):
        a = op(random_spd(rng, n))
        s, t = 0.37, 0.81
        lhs = semigroup(a, s) @ semigroup(a, t)
        rhs = semigroup(a, s + t)
        assert np.abs(lhs - rhs).max() <= 1e-10


def test_semigroup_rejects_negative_time_and_nan():
    a = op(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        semigroup(a, -0.5)
    with pytest.raises(ValueError):
        semigroup(op([[np.nan]]), 1.0)


# -- fractional powers -------------------------------------------------------------


def test_frac_power_identity_and_self():
    a = op(np.diag([4.0, 9.0]))
    assert np.array_equal(frac_power(a, 0.0), np.eye(2))
    assert np.array_equal(frac_power(a, 1.0), a.matrix)


def test_frac_power_square_root_of_diagonal():
    a = op(np.diag([4.0, 9.0]))
    assert np.allclose(frac_power(a, 0.5), np.diag([2.0, 3.0]))


def test_frac_power_additivity_and_inverse(rng):
    a = op(random_spd(rng, 12))
    for t1, t2 in ((0.3, 0.45), (0.5, 0.5), (-0.5, 0.5), (0.25, -0.75)):
        prod = frac_power(a, t1) @ frac_power(a, t2)
        assert np.abs(prod - frac_power(a, t1 + t2)).max() <= 1e-9 * np.abs(prod).max()
    assert np.abs(frac_power(a, 0.5) @ frac_power(a, 0.5) - a.matrix).max() <= 1e-9 * np.abs(a.matrix).max()


def test_frac_power_rejects_bad_spectrum():
    with pytest.raises(ValueError):
        frac_power(op(np.diag([0.0, 1.0])), 0.5)
    with pytest.raises(ValueError):
        frac_power(op(np.diag([-1.0, 1.0])), 0.5)
    with pytest.raises(ValueError):
        frac_power(op(np.diag([1.0, 2.0])), 1.5)


def test_theta_norm_examples():
    assert theta_norm(op(np.diag([4.0, 9.0])), 0.0, np.array([3.0, 4.0])) == 5.0
    assert np.isclose(theta_norm(op([[4.0]]), 0.5, np.array([1.0])), 2.0)
    assert np.isclose(theta_norm(op([[4.0]]), -1.0, np.array([1.0])), 0.25)


# -- sectoriality -------------------------------------------------------------------


def test_sector_report_matches_dense_scalar_oracle():
    a = op(np.diag([1.0, 2.0]))
    report = sectoriality_report(a, np.pi / 4, 400)
    # oracle: same sampling geometry at 50x density, scalar resolvent formula
    magnitudes = np.geomspace(1e-3, 1e6, 20001)
    oracle = 0.0
    for ray in (np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4), -1.0):
        lam = magnitudes * ray
        values = (np.abs(lam) + 1) / np.minimum(np.abs(lam - 1.0), np.abs(lam - 2.0))
        oracle = max(oracle, values.max())
    assert report.spectrum_in_sector
    assert report.resolvent_bound <= oracle * (1 + 1e-9)
    assert report.resolvent_bound >= 0.97 * oracle


def test_sector_flag_false_for_negative_eigenvalue():
    report = sectoriality_report(op(np.diag([-1.0, 2.0])), np.pi / 3, 40)
    assert not report.spectrum_in_sector


def test_sector_bound_identity_matrix_formula():
    report = sectoriality_report(op(np.eye(3)), np.pi / 4, 100)
    magnitudes = np.geomspace(1e-3, 1e6, 100)
    expected = 0.0
    for ray in (np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4), -1.0):
        lam = magnitudes * ray
        expected = max(expected, ((np.abs(lam) + 1) / np.abs(lam - 1.0)).max())
    assert np.isclose(report.resolvent_bound, expected, rtol=1e-12)


def test_uniform_sectoriality_under_refinement():
    tg = TimeGrid.uniform(1.0, 2)
    bounds = []
    for n in (15, 31, 63):
        sg = SpaceGrid.uniform(0.0, 1.0, n)
        a = assemble_operator(constant_field(1.0, tg, sg), 0, sg)
        bounds.append(sectoriality_report(a, np.pi / 4, 120).resolvent_bound)
    assert max(bounds) / min(bounds) < 1.10


# -- families ------------------------------------------------------------------------


def test_theta_stability_scalar_factor_family(scalar_family):
    tg = TimeGrid.uniform(1.0, 8)
    fam = scalar_family(lambda t: 2.0 * (1.0 + t), tg)
    assert np.isclose(theta_stability_constant(fam, 1.0), 2.0)
    assert np.isclose(theta_stability_constant(fam, 0.5), np.sqrt(2.0))
    const = scalar_family(lambda t: 3.0, tg)
    assert np.isclose(theta_stability_constant(const, 1.0), 1.0)
    assert np.isclose(const.measure_theta_stability(0.5), 1.0)


def test_family_requires_shared_grid():
    tg = TimeGrid.uniform(1.0, 1)
    mismatch = [op([[1.0]], SG1), op(np.diag([1.0, 2.0]), SG2)]
    with pytest.raises(ValueError):
        OperatorFamily(tg, mismatch)


# -- kernels --------------------------------------------------------------------------


def test_drift_kernel_vanishes_for_autonomous_family(scalar_family):
    tg = TimeGrid.uniform(1.0, 8)
    fam = scalar_family(lambda t: 2.0, tg)
    snap = drift_kernel(fam, 5, 2, 0.5)
    assert np.all(snap.matrix == 0.0)
    assert snap.scale_norm == 0.0


def test_drift_kernel_scalar_closed_form(scalar_family):
    tg = TimeGrid.uniform(1.0, 8)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    snap = drift_kernel(fam, 8, 4, 0.5)  # t = 1, s = 0.5
    assert np.isclose(snap.matrix[0, 0], np.exp(-1.0) * 0.5)
    assert np.isclose(snap.scale_norm, np.exp(-1.0) * 0.5 * (2.0 / 1.5) ** 0.5)


def test_propagation_kernel_approaches_identity(scalar_family):
    tg = TimeGrid.uniform(1.0, 512)
    fam = scalar_family(lambda t: 2.0, tg)
    snap = propagation_kernel(fam, 1, 0, 0.5)
    assert np.abs(snap.matrix - np.eye(1)).max() <= 2.0 * tg.steps[0]


def test_kernel_requires_causal_ordering(scalar_family):
    tg = TimeGrid.uniform(1.0, 4)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    with pytest.raises(ValueError):
        drift_kernel(fam, 2, 2, 0.5)
    with pytest.raises(ValueError):
        propagation_kernel(fam, 1, 3, 0.5)


def test_kernel_profile_slopes_track_estimates():
    # Hoelder-alpha family: drift norm ~ h^{alpha-1}, propagation ~ h^{-theta},
    # fitted inside the resolved singular window
    from maxreg.discretization import rough_field

    tg = TimeGrid.uniform(1.0, 256)
    sg = SpaceGrid.uniform(0.0, 1.0, 15)
    fam = OperatorFamily.from_field(rough_field(0.7, tg, sg))
    lags = [1, 2, 4, 8]
    h1, g1 = kernel_norm_profile(fam, 0.5, "drift", lags=lags)
    h2, g2 = kernel_norm_profile(fam, 0.5, "propagation", lags=lags)
    slope1 = np.polyfit(np.log(h1), np.log(g1), 1)[0]
    slope2 = np.polyfit(np.log(h2), np.log(g2), 1)[0]
    assert slope1 >= 0.7 - 1.0 - 0.15
    assert slope2 >= -0.5 - 0.15
