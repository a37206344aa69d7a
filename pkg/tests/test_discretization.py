import numpy as np
import pytest

from maxreg.discretization import (
    CoefficientField,
    assemble_operator,
    constant_field,
    ellipticity_check,
    field_from_callable,
    field_from_csv,
    field_to_csv,
    lipschitz_demo_field,
    rough_field,
    vmo_modulus,
)
from maxreg.grids import SpaceGrid, TimeGrid
from maxreg.norms import holder_modulus

TG = TimeGrid.uniform(1.0, 4)


def test_single_interior_node_matrix_by_hand():
    # a = 1 on (0, 1) with one interior node: h = 1/2, matrix 2/h^2 = 8
    sg = SpaceGrid.uniform(0.0, 1.0, 1)
    op = assemble_operator(constant_field(1.0, TG, sg), 0, sg)
    assert np.allclose(op.matrix, [[8.0]])


def test_constant_coefficient_gives_classical_tridiagonal():
    sg = SpaceGrid.uniform(0.0, 1.0, 5)
    op = assemble_operator(constant_field(1.0, TG, sg), 0, sg)
    h = 1.0 / 6.0
    expected = (np.diag(2 * np.ones(5)) - np.diag(np.ones(4), 1) - np.diag(np.ones(4), -1)) / h**2
    assert np.allclose(op.matrix, expected)


def test_coefficient_linearity():
    sg = SpaceGrid.uniform(0.0, 1.0, 7)
    base = assemble_operator(constant_field(1.0, TG, sg), 0, sg)
    scaled = assemble_operator(constant_field(3.5, TG, sg), 0, sg)
    assert np.allclose(scaled.matrix, 3.5 * base.matrix)


def test_shift_adds_identity():
    sg = SpaceGrid.uniform(0.0, 1.0, 5)
    field = constant_field(1.0, TG, sg)
    plain = assemble_operator(field, 0, sg)
    shifted = assemble_operator(field, 0, sg, shift=2.5)
    assert np.allclose(shifted.matrix, plain.matrix + 2.5 * np.eye(5))


def test_dirichlet_laplacian_eigenvalues_closed_form():
    n = 31
    sg = SpaceGrid.uniform(0.0, 1.0, n)
    c = 2.5
    op = assemble_operator(constant_field(c, TG, sg), 0, sg)
    h = 1.0 / (n + 1)
    k = np.arange(1, n + 1)
    exact = c * (2.0 / h**2) * (1.0 - np.cos(k * np.pi * h))
    computed = np.sort(np.linalg.eigvalsh(op.matrix))
    assert np.abs(computed - exact).max() <= 1e-10 * exact.max()


def test_variable_coefficient_consistency_order():
    # applying the matrix to samples of a smooth Dirichlet function converges
    # to -(a v')' at second order on uniform grids
    def a(t, x):
        return 2.0 + np.sin(np.pi * x) + 0.0 * t

    def v(x):
        return np.sin(np.pi * x) * x

    def continuum(x):
        # -(a v')' expanded with a(x) = 2 + sin(pi x)
        ax = np.pi * np.cos(np.pi * x)
        vx = np.sin(np.pi * x) + np.pi * x * np.cos(np.pi * x)
        vxx = 2 * np.pi * np.cos(np.pi * x) - np.pi**2 * x * np.sin(np.pi * x)
        return -(ax * vx + (2.0 + np.sin(np.pi * x)) * vxx)

    errors = []
    for n in (32, 64, 128):
        sg = SpaceGrid.uniform(0.0, 1.0, n - 1)
        field = field_from_callable(a, TG, sg)
        op = assemble_operator(field, 0, sg)
        x = sg.interior
        errors.append(np.abs(op.matrix @ v(x) - continuum(x)).max())
    order = np.log2(errors[0] / errors[1]), np.log2(errors[1] / errors[2])
    assert min(order) >= 1.9


def test_similar_to_spd_on_nonuniform_grid():
    sg = SpaceGrid.geometric(0.0, 1.0, 20, ratio=0.85, toward="left")
    field = field_from_callable(lambda t, x: 1.0 + x + 0.0 * t, TG, sg)
    op = assemble_operator(field, 0, sg)
    eigs = np.linalg.eigvals(op.matrix)
    assert np.abs(eigs.imag).max() <= 1e-10 * np.abs(eigs.real).max()
    assert eigs.real.min() > 0


def test_assemble_rejects_mismatched_grid():
    sg = SpaceGrid.uniform(0.0, 1.0, 5)
    other = SpaceGrid.uniform(0.0, 1.0, 6)
    field = constant_field(1.0, TG, sg)
    with pytest.raises(ValueError):
        assemble_operator(field, 0, other)


def test_ellipticity_check_reports_minimum():
    sg = SpaceGrid.uniform(0.0, 1.0, 15)
    field = field_from_callable(lambda t, x: 2.0 + np.sin(x) + 0.0 * t, TG, sg)
    report = ellipticity_check(field)
    assert np.isclose(report.delta_observed, (2.0 + np.sin(sg.nodes)).min())
    assert report.passed

    bad = CoefficientField(TG, sg, np.full((5, 17), 0.1), delta=0.5)
    assert not ellipticity_check(bad).passed
    assert np.isclose(ellipticity_check(bad).delta_observed, 0.1)

    unit = constant_field(1.0, TG, sg)
    rep = ellipticity_check(unit)
    assert rep.delta_observed == 1.0 and rep.passed


def test_sup_norm_is_exact_max():
    sg = SpaceGrid.uniform(0.0, 1.0, 5)
    samples = np.linspace(1.0, 2.0, 5 * 7).reshape(5, 7)
    field = CoefficientField(TG, sg, samples, delta=1.0)
    assert field.sup_norm == samples.max()


# -- mean oscillation -------------------------------------------------------------


def test_vmo_constant_is_exactly_zero():
    sg = SpaceGrid.uniform(0.0, 1.0, 99)
    eta = vmo_modulus(np.full(101, 3.7), sg, [0.1, 0.5, 1.0])
    assert np.all(eta == 0.0)


def test_vmo_jump_saturates_near_one():
    # continuum modulus of sign(x - 1/2) is 1 for every r; the sampled modulus
    # reaches it up to the dual-cell resolution around the jump
    sg = SpaceGrid.uniform(0.0, 1.0, 199)
    eta = vmo_modulus(np.sign(sg.nodes - 0.5), sg, [0.05, 0.1, 0.4, 0.9])
    assert np.all(eta >= 0.9)
    assert np.all(eta <= 1.0 + 1e-12)
    assert np.all(np.diff(eta) >= -1e-15)


def test_vmo_linear_decays_at_rate_r():
    # RMS oscillation of x over a ball of diameter d is d / (2 sqrt(3))
    sg = SpaceGrid.uniform(0.0, 1.0, 199)
    radii = np.array([0.025, 0.05, 0.1, 0.2, 0.4])
    eta = vmo_modulus(sg.nodes.copy(), sg, radii)
    ratios = eta / radii
    assert np.all(np.abs(ratios - 1.0 / (2.0 * np.sqrt(3.0))) < 0.02)


def test_vmo_monotone_in_radius():
    sg = SpaceGrid.uniform(0.0, 1.0, 120)
    f = np.sin(13 * sg.nodes) + 0.3 * np.sign(sg.nodes - 0.37)
    radii = np.linspace(0.01, 1.0, 23)
    eta = vmo_modulus(f, sg, radii)
    assert np.all(np.diff(eta) >= -1e-14)


def test_vmo_rejects_bad_radii():
    sg = SpaceGrid.uniform(0.0, 1.0, 9)
    f = sg.nodes.copy()
    with pytest.raises(ValueError):
        vmo_modulus(f, sg, [])
    with pytest.raises(ValueError):
        vmo_modulus(f, sg, [-0.1])
    with pytest.raises(ValueError):
        vmo_modulus(f, sg, [1.5])


# -- generators and CSV ------------------------------------------------------------


def test_rough_field_respects_declared_floor_and_exponent():
    tg = TimeGrid.uniform(1.0, 256)
    sg = SpaceGrid.uniform(0.0, 1.0, 15)
    for alpha in (0.3, 0.7):
        field = rough_field(alpha, tg, sg)
        assert np.real(field.samples).min() >= field.delta - 1e-12
        # measured Hoelder exponent of the sup-in-x increments tracks alpha
        sup_traj = np.abs(field.samples).max(axis=1)[:, None]
        fit = holder_modulus(field.samples, tg)
        assert abs(fit.alpha - alpha) < 0.15


def test_lipschitz_demo_field_values():
    tg = TimeGrid.uniform(1.0, 2)
    sg = SpaceGrid.uniform(0.0, 1.0, 3)
    field = lipschitz_demo_field(tg, sg)
    expected = 2.0 + tg.times[:, None] * np.sin(np.pi * sg.nodes[None, :])
    assert np.allclose(field.samples, expected)


def test_csv_round_trip_is_exact():
    tg = TimeGrid.uniform(1.0, 3)
    sg = SpaceGrid.uniform(0.0, 1.0, 4)
    field = field_from_callable(lambda t, x: 1.5 + t * x, tg, sg)
    text = field_to_csv(field)
    back = field_from_csv(text)
    assert np.array_equal(back.samples, field.samples)
    assert np.array_equal(back.time_grid.times, tg.times)
    assert np.array_equal(back.space_grid.nodes, sg.nodes)


def test_csv_rejects_bad_header_and_partial_grid():
    with pytest.raises(ValueError):
        field_from_csv("a,b,c,d\n1,2,3,4\n")
    with pytest.raises(ValueError):
        field_from_csv("t,x,re,im\n0,0,1,0\n0,1,1,0\n1,0,1,0\n")
