import numpy as np
import pytest
import scipy.linalg

from maxreg.discretization import DiscreteOperator, lipschitz_demo_field
from maxreg.grids import SpaceGrid, TimeGrid
from maxreg.norms import Trajectory, bochner_norm
from maxreg.operator_calculus import OperatorFamily
from maxreg.volterra import (
    QuadratureRule,
    VolterraSystem,
    apply_drift,
    apply_propagation,
    extend_initial_value,
    solve_integral_equation,
    solve_timestepper,
    solve_with_initial_value,
)


def ones_forcing(tg, n=1):
    return Trajectory(tg, np.ones((tg.times.size, n)))


# -- the history operator -----------------------------------------------------------


def test_drift_vanishes_for_autonomous_family(scalar_family):
    tg = TimeGrid.uniform(1.0, 64)
    fam = scalar_family(lambda t: 1.0, tg)
    system = VolterraSystem(fam, ones_forcing(tg))
    out = apply_drift(system, ones_forcing(tg))
    assert np.all(out.values == 0.0)


def test_drift_zero_input_gives_zero(scalar_family):
    tg = TimeGrid.uniform(1.0, 32)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    system = VolterraSystem(fam, ones_forcing(tg))
    out = apply_drift(system, Trajectory.zeros(tg, 1))
    assert np.all(out.values == 0.0)


def test_drift_scalar_closed_form(scalar_family):
    # A(t) = 1 + t on constant input: int_0^1 exp(-(1-s) 2)(1-s) ds = (1 - 3 e^{-2})/4
    tg = TimeGrid.uniform(1.0, 512)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    system = VolterraSystem(fam, ones_forcing(tg))
    out = apply_drift(system, ones_forcing(tg))
    assert abs(out.values[-1, 0] - 0.25 * (1.0 - 3.0 * np.exp(-2.0))) <= 1e-5


def test_drift_fallback_without_certificate():
    tg = TimeGrid.uniform(1.0, 64)
    grid = SpaceGrid.uniform(0.0, 1.0, 1)
    ops = [DiscreteOperator(np.array([[1.0 + t]]), grid) for t in tg.times]
    fam = OperatorFamily(tg, ops, certificate=None)
    system = VolterraSystem(fam, ones_forcing(tg))
    out = apply_drift(system, ones_forcing(tg))
    assert out.meta.get("quadrature") == "left-rectangle-fallback"
    assert abs(out.values[-1, 0] - 0.25 * (1.0 - 3.0 * np.exp(-2.0))) <= 0.05


# -- the forcing operator ------------------------------------------------------------


def test_propagation_zero_forcing(scalar_family):
    tg = TimeGrid.uniform(1.0, 16)
    fam = scalar_family(lambda t: 1.0, tg)
    out = apply_propagation(VolterraSystem(fam, Trajectory.zeros(tg, 1)))
    assert np.all(out.values == 0.0)


def test_propagation_scalar_closed_form(scalar_family):
    tg = TimeGrid.uniform(1.0, 256)
    fam = scalar_family(lambda t: 1.0, tg)
    out = apply_propagation(VolterraSystem(fam, ones_forcing(tg)))
    expected = 1.0 - np.exp(-tg.times)
    assert np.abs(out.values[:, 0] - expected).max() <= 1e-12


def test_propagation_matrix_closed_form(rng):
    n = 4
    m = rng.standard_normal((n, n))
    s = m @ m.T + n * np.eye(n)
    grid = SpaceGrid.uniform(0.0, 1.0, n)
    tg = TimeGrid.uniform(0.5, 64)
    fam = OperatorFamily.autonomous(DiscreteOperator(s, grid), tg)
    f0 = rng.standard_normal(n)
    out = apply_propagation(VolterraSystem(fam, Trajectory(tg, np.tile(f0, (65, 1)))))
    exact = np.linalg.solve(s, (np.eye(n) - scipy.linalg.expm(-0.5 * s)) @ f0)
    assert np.abs(out.values[-1] - exact).max() <= 1e-12


def test_propagation_graded_rule_stays_consistent(scalar_family):
    tg = TimeGrid.uniform(1.0, 512)
    fam = scalar_family(lambda t: 1.0, tg)
    rule = QuadratureRule(propagation_rule="graded", propagation_exponent=-0.5)
    out = apply_propagation(VolterraSystem(fam, ones_forcing(tg), quadrature=rule))
    expected = 1.0 - np.exp(-tg.times)
    assert np.abs(out.values[:, 0] - expected).max() <= 5e-3


# -- the integral-identity solve -------------------------------------------------------


def test_solve_zero_forcing_gives_zero(scalar_family):
    tg = TimeGrid.uniform(1.0, 32)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    u = solve_integral_equation(VolterraSystem(fam, Trajectory.zeros(tg, 1)))
    assert np.all(u.values == 0.0)


def test_solve_autonomous_scalar_closed_form(scalar_family):
    tg = TimeGrid.uniform(1.0, 1000)
    fam = scalar_family(lambda t: 1.0, tg)
    u = solve_integral_equation(VolterraSystem(fam, ones_forcing(tg)))
    expected = 1.0 - np.exp(-tg.times)
    assert np.abs(u.values[:, 0] - expected).max() <= 1e-6
    assert u.meta["residual"] <= 1e-10


def test_solve_nonautonomous_vs_fine_timestepping_oracle(scalar_family):
    tg = TimeGrid.uniform(1.0, 64)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    u = solve_integral_equation(VolterraSystem(fam, ones_forcing(tg)))
    fine = TimeGrid.uniform(1.0, 6400)
    fam_fine = scalar_family(lambda t: 1.0 + t, fine)
    oracle = solve_timestepper(fam_fine, ones_forcing(fine), None)
    rel = abs(u.values[-1, 0] - oracle.values[-1, 0]) / abs(oracle.values[-1, 0])
    assert rel <= 1e-3


def test_solve_causality_is_bit_exact(scalar_family):
    tg = TimeGrid.uniform(1.0, 64)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    f1 = np.ones(65)
    f2 = f1.copy()
    f2[33:] = 7.0  # change forcing strictly after t* = t_32
    u1 = solve_integral_equation(VolterraSystem(fam, Trajectory(tg, f1)), check_residual=False)
    u2 = solve_integral_equation(VolterraSystem(fam, Trajectory(tg, f2)), check_residual=False)
    assert np.array_equal(u1.values[:33], u2.values[:33])
    assert not np.array_equal(u1.values[33:], u2.values[33:])


def test_solve_linearity(scalar_family):
    tg = TimeGrid.uniform(1.0, 48)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    fa = np.sin(2 * np.pi * tg.times)
    fb = tg.times**2
    ua = solve_integral_equation(VolterraSystem(fam, Trajectory(tg, fa)), check_residual=False)
    ub = solve_integral_equation(VolterraSystem(fam, Trajectory(tg, fb)), check_residual=False)
    uab = solve_integral_equation(VolterraSystem(fam, Trajectory(tg, fa + fb)), check_residual=False)
    assert np.abs(uab.values - ua.values - ub.values).max() <= 1e-12


def test_solve_neumann_matches_direct(scalar_family):
    tg = TimeGrid.uniform(1.0, 64)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    system = VolterraSystem(fam, ones_forcing(tg))
    direct = solve_integral_equation(system, method="direct", check_residual=False)
    neumann = solve_integral_equation(system, method="neumann", check_residual=False)
    assert np.abs(direct.values - neumann.values).max() <= 1e-11
    assert "neumann" in neumann.meta


def test_route_equivalence_rate_on_refinement():
    # integral-identity and implicit-midpoint solutions converge to each other
    # at first order or better for a Lipschitz family
    n = 15
    sg = SpaceGrid.uniform(0.0, 1.0, n)
    diffs = []
    for m in (16, 32, 64):
        tg = TimeGrid.uniform(1.0, m)
        fam = OperatorFamily.from_field(lipschitz_demo_field(tg, sg))
        f = Trajectory(tg, np.tile(np.sin(np.pi * sg.interior), (m + 1, 1)))
        ui = solve_integral_equation(VolterraSystem(fam, f), check_residual=False)
        um = solve_timestepper(fam, f, None)
        diffs.append(bochner_norm(Trajectory(tg, ui.values - um.values), 2.0))
    orders = [np.log2(diffs[i] / diffs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.0


# -- one-step schemes ---------------------------------------------------------------------


def test_timestepper_zero_operator_keeps_initial_value():
    tg = TimeGrid.uniform(1.0, 16)
    grid = SpaceGrid.uniform(0.0, 1.0, 2)
    zero = DiscreteOperator(np.zeros((2, 2)), grid)
    fam = OperatorFamily.autonomous(zero, tg)
    u0 = np.array([1.5, -2.0])
    for scheme in ("backward-euler", "implicit-midpoint"):
        u = solve_timestepper(fam, None, u0, scheme)
        assert np.allclose(u.values, u0)


@pytest.mark.parametrize(
    "scheme, expected_order", [("backward-euler", 1.0), ("implicit-midpoint", 2.0)]
)
def test_timestepper_observed_orders(scalar_family, scheme, expected_order):
    errors = []
    for m in (50, 100, 200):
        tg = TimeGrid.uniform(1.0, m)
        fam = scalar_family(lambda t: 1.0, tg)
        u = solve_timestepper(fam, None, np.array([1.0]), scheme)
        errors.append(np.abs(u.values[:, 0] - np.exp(-tg.times)).max())
    orders = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert all(abs(o - expected_order) < 0.3 for o in orders)


def test_timestepper_manufactured_solution_second_order(scalar_family):
    # u*(t) = sin(t) + 2, f = u*' + (1+t) u*
    star = lambda t: np.sin(t) + 2.0
    forcing_fn = lambda t: np.cos(t) + (1.0 + t) * star(t)
    errors = []
    for m in (40, 80, 160):
        tg = TimeGrid.uniform(1.0, m)
        fam = scalar_family(lambda t: 1.0 + t, tg)
        f = Trajectory(tg, forcing_fn(tg.times), midpoint_values=forcing_fn(tg.midpoints))
        u = solve_timestepper(fam, f, np.array([star(0.0)]))
        errors.append(np.abs(u.values[:, 0] - star(tg.times)).max())
    orders = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert min(orders) >= 1.7


# -- initial values via the extension ---------------------------------------------------


def test_extension_family_structure(scalar_family):
    tg = TimeGrid.uniform(1.0, 8)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    ext = extend_initial_value(fam, np.array([1.0]), 2.0)
    m = tg.m_steps
    mats = [ext.family.matrix(i)[0, 0] for i in range(len(ext.family))]
    assert all(v == mats[0] for v in mats[: m + 1])  # first third constant A(0)
    assert all(v == mats[-1] for v in mats[2 * m :])  # last third constant A(T)
    assert mats[m + 3] == fam.matrix(3)[0, 0]  # middle third shifts the original
    assert np.isclose(ext.trace, 1.0 + np.sqrt(0.5))
    # lift endpoints: v(0) = 0, v(T) = u0
    assert np.all(ext.lift.values[0] == 0.0)
    assert np.allclose(ext.lift.values[-1], [1.0])


def test_extension_zero_initial_value_matches_plain_solve(scalar_family):
    tg = TimeGrid.uniform(1.0, 32)
    fam = scalar_family(lambda t: 1.0 + t, tg)
    f = Trajectory(tg, np.cos(tg.times), midpoint_values=np.cos(tg.midpoints))
    direct = solve_timestepper(fam, f, None)
    via_extension = solve_with_initial_value(fam, f, np.zeros(1), p=2.0)
    assert np.array_equal(direct.values, via_extension.values)


def test_extension_reproduces_scalar_decay(scalar_family):
    tg = TimeGrid.uniform(1.0, 200)
    fam = scalar_family(lambda t: 1.0, tg)
    sol = solve_with_initial_value(fam, None, np.array([1.0]), p=2.0)
    assert np.abs(sol.values[:, 0] - np.exp(-tg.times)).max() <= 5e-5
    assert np.isclose(sol.meta["trace"], 1.0 + np.sqrt(0.5))


def test_extension_rejects_invalid_route(scalar_family):
    tg = TimeGrid.uniform(1.0, 4)
    fam = scalar_family(lambda t: 1.0, tg)
    with pytest.raises(ValueError):
        solve_with_initial_value(fam, None, np.array([1.0]), route="bogus")


def test_system_validation(scalar_family):
    tg = TimeGrid.uniform(1.0, 8)
    other = TimeGrid.uniform(1.0, 9)
    fam = scalar_family(lambda t: 1.0, tg)
    with pytest.raises(ValueError):
        VolterraSystem(fam, ones_forcing(other))
    with pytest.raises(ValueError):
        VolterraSystem(fam, ones_forcing(tg), theta=0.0)
