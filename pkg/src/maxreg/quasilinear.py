"""Frozen-coefficient fixed-point solver for the quasilinear problem.

The nonlinear diffusion ``du/dt - (a(u) u')' = f`` is solved by damped Picard
iteration: freeze the coefficient at the current iterate, solve the linear
problem, mix, repeat.  Existence is only guaranteed for small data, so
non-convergence is a reported outcome rather than an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .discretization import CoefficientField
from .grids import SpaceGrid, TimeGrid
from .norms import Trajectory, bochner_norm, frac_sobolev_norm, trace_norm
from .operator_calculus import OperatorFamily
from .volterra import solve_timestepper

__all__ = [
    "CoefficientMap",
    "QlpProblem",
    "QlpDomainError",
    "QlpSolution",
    "composition_regularity",
    "solve_qlp",
    "small_data_threshold",
]


class QlpDomainError(RuntimeError):
    """An iterate left the coefficient map's declared state bounds."""


@dataclass(frozen=True)
class CoefficientMap:
    """State-dependent scalar diffusion coefficient with declared regularity.

    ``fn`` is clipped to ``[floor, ceiling]`` so the ellipticity constant of
    every frozen problem is the single number ``floor``.  ``beta`` and
    ``holder_constant`` certify ``|a(u) - a(v)| <= C |u - v|^beta``;
    ``state_bound`` is the largest |u| the certification was probed at.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    beta: float
    holder_constant: float
    floor: float
    ceiling: float
    state_bound: float = math.inf
    label: str = "coefficient"

    def __post_init__(self) -> None:
        if not 0.5 < self.beta <= 1.0:
            raise ValueError("state Hoelder exponent must lie in (1/2, 1]")
        if not 0.0 < self.floor <= self.ceiling:
            raise ValueError("need 0 < floor <= ceiling")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(self.fn(u), dtype=float), self.floor, self.ceiling)


@dataclass
class QlpProblem:
    coefficient: CoefficientMap
    forcing: Trajectory
    u0: np.ndarray
    p: float = 2.0
    q: float = 2.0
    space_grid: SpaceGrid = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))
        if self.space_grid is None:
            raise ValueError("space grid required")
        if self.u0.size != self.space_grid.n_interior:
            raise ValueError("initial value must live on the interior nodes")
        if self.forcing.dimension != self.space_grid.n_interior:
            raise ValueError("forcing must live on the interior nodes")

    @property
    def time_grid(self) -> TimeGrid:
        return self.forcing.time_grid

    def exponents_admissible(self) -> bool:
        """Check ``q > n`` and ``beta > q/(2q - n)`` (here n = 1), exactly when rational."""
        q = Fraction(self.q).limit_denominator(10**6)
        beta = Fraction(self.coefficient.beta).limit_denominator(10**6)
        return q > 1 and beta > q / (2 * q - 1)


def composition_regularity(
    v: Trajectory,
    coefficient: CoefficientMap,
    order: float,
    p: float,
) -> dict:
    """Both sides of the composition estimate in the sup-norm scale.

    Left side: the fractional seminorm of ``t -> a(v(t, .))`` of order
    ``order`` with exponent p.  Right side: the certified bound
    ``C ||v||^beta`` in the rescaled seminorm of order ``order/beta`` with
    exponent ``beta p``.
    """
    beta = coefficient.beta
    if not order / beta < 1.0:
        raise ValueError("rescaled order must stay below one; lower the order")
    sup_norm = lambda row: float(np.abs(row).max())
    composed = np.apply_along_axis(coefficient, 1, v.values)
    lhs_detail = frac_sobolev_norm(
        composed, v.time_grid, alpha=order, p=p, norm=sup_norm, return_details=True
    )
    rhs_detail = frac_sobolev_norm(
        v.values, v.time_grid, alpha=order / beta, p=beta * p, norm=sup_norm,
        return_details=True,
    )
    rhs = coefficient.holder_constant * rhs_detail.value**beta
    return {
        "lhs": lhs_detail.value,
        "rhs": rhs,
        "ratio": lhs_detail.value / rhs if rhs > 0 else (0.0 if lhs_detail.value == 0 else math.inf),
        "flagged": not (lhs_detail.reliable and rhs_detail.reliable),
    }


@dataclass
class QlpSolution:
    trajectory: Trajectory
    iterations: int
    converged: bool
    residuals: list[float]
    ball_warning: bool
    mr_parts: dict


def _frozen_family(problem: QlpProblem, state: Trajectory) -> OperatorFamily:
    a_samples = problem.coefficient(_pad_boundary(state.values))
    coeff = CoefficientField(
        problem.time_grid,
        problem.space_grid,
        a_samples,
        delta=problem.coefficient.floor,
        holder_alpha=min(1.0, problem.coefficient.beta),
        holder_constant=problem.coefficient.holder_constant,
    )
    return OperatorFamily.from_field(coeff)


def _pad_boundary(values: np.ndarray) -> np.ndarray:
    m = values.shape[0]
    return np.hstack([np.zeros((m, 1)), values, np.zeros((m, 1))])


def _check_state_bound(problem: QlpProblem, state: Trajectory) -> None:
    bound = problem.coefficient.state_bound
    if not math.isfinite(bound):
        return
    magnitude = np.abs(state.values)
    if magnitude.max() <= bound:
        return
    i, j = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    t = problem.time_grid.times[i]
    x = problem.space_grid.interior[j]
    raise QlpDomainError(
        f"iterate exceeded the probed state bound {bound} at t={t:.6g}, x={x:.6g}, "
        f"value={state.values[i, j]:.6g}"
    )


def solve_qlp(
    problem: QlpProblem,
    tol: float = 1e-8,
    max_iter: int = 50,
    damping: float = 1.0,
) -> QlpSolution:
    """Damped Picard iteration on the frozen-coefficient linear solver.

    The seed iterate solves the linear problem with the coefficient frozen at
    the initial state, so a state-independent coefficient converges in exactly
    one iteration.  Convergence is declared when the sup distance between an
    iterate and its linear update falls below ``tol`` and is recertified by
    one extra application of the map.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    tg = problem.time_grid
    constant_state = Trajectory(tg, np.tile(problem.u0, (tg.times.size, 1)))

    def apply_solver(state: Trajectory) -> Trajectory:
        _check_state_bound(problem, state)
        family = _frozen_family(problem, state)
        return solve_timestepper(family, problem.forcing, problem.u0)

    current = apply_solver(constant_state)
    residuals: list[float] = []
    converged = False
    iterations = 0
    ball_history: list[float] = []
    ball_warning = False
    for iterations in range(1, max_iter + 1):
        update = apply_solver(current)
        residual = float(np.abs(update.values - current.values).max())
        residuals.append(residual)
        mixed = (1.0 - damping) * current.values + damping * update.values
        next_state = Trajectory(tg, mixed)
        ball_history.append(_sup_scale_norm(next_state))
        if len(ball_history) >= 5 and all(
            b > a for a, b in zip(ball_history[-5:], ball_history[-4:])
        ):
            ball_warning = True
        if residual < tol:
            converged = True
            current = next_state
            break
        current = next_state

    if converged:
        recheck = apply_solver(current)
        converged = float(np.abs(recheck.values - current.values).max()) < tol

    family = _frozen_family(problem, current)
    mr_parts = _mr_parts(problem, family, current)
    return QlpSolution(current, iterations, converged, residuals, ball_warning, mr_parts)


def _sup_scale_norm(state: Trajectory) -> float:
    return float(np.abs(state.values).max())


def _mr_parts(problem: QlpProblem, family: OperatorFamily, u: Trajectory) -> dict:
    p = problem.p
    graph = Trajectory(
        u.time_grid,
        np.stack([family.matrix(i) @ u.values[i] for i in range(u.values.shape[0])]),
    )
    du = Trajectory(u.time_grid, problem.forcing.values - graph.values)
    trace = trace_norm(family.operators[0], problem.u0, p) if np.any(problem.u0) else 0.0
    return {
        "state_lp": bochner_norm(u, p),
        "derivative_lp": bochner_norm(du, p),
        "graph_lp": bochner_norm(graph, p),
        "forcing_lp": bochner_norm(problem.forcing, p),
        "trace": trace,
    }


def small_data_threshold(
    problem: QlpProblem,
    scales: Sequence[float],
    tol: float = 1e-8,
    max_iter: int = 50,
    damping: float = 1.0,
    bisection_steps: int = 12,
) -> dict:
    """Largest data scale at which the fixed-point iteration still converges.

    The scale grid is swept first; if everything converges the largest scale
    is reported as a cap.  Otherwise the boundary is refined by bisection
    between the last convergent and first divergent grid points.
    """
    scales = sorted(float(s) for s in scales)
    table: list[dict] = []

    def run(scale: float) -> bool:
        scaled = QlpProblem(
            problem.coefficient,
            Trajectory(
                problem.time_grid,
                scale * problem.forcing.values,
                midpoint_values=None
                if problem.forcing.midpoint_values is None
                else scale * problem.forcing.midpoint_values,
            ),
            scale * problem.u0,
            problem.p,
            problem.q,
            problem.space_grid,
        )
        try:
            outcome = solve_qlp(scaled, tol=tol, max_iter=max_iter, damping=damping)
        except QlpDomainError:
            return False
        return outcome.converged

    for s in scales:
        table.append({"scale": s, "converged": run(s)})

    converged_scales = [row["scale"] for row in table if row["converged"]]
    diverged_scales = [row["scale"] for row in table if not row["converged"]]
    if not diverged_scales:
        return {"threshold": scales[-1], "capped": True, "table": table}
    if not converged_scales:
        return {"threshold": 0.0, "capped": False, "table": table}

    lo = max(converged_scales)
    above = [s for s in diverged_scales if s > lo]
    if not above:  # non-monotone table; report the grid answer without refining
        return {"threshold": lo, "capped": False, "table": table}
    hi = min(above)
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi)
        if run(mid):
            lo = mid
        else:
            hi = mid
    return {"threshold": lo, "capped": False, "table": table}
