"""Subcommand execution: build problems from config, run, collect artifacts.

Each runner returns a :class:`RunResult` with a JSON-ready report (schema
``maxreg/1``, resolved config embedded) and a dict of CSV artifacts keyed by
file name.  Reports are scanned for non-finite values before leaving; a hit
raises :class:`NumericalFailure` naming the offending stage.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import counterexample as cx
from .config import RunConfig, SUBCOMMANDS
from .discretization import (
    CoefficientField,
    DiscreteOperator,
    assemble_operator,
    ellipticity_check,
    field_from_callable,
    field_from_csv,
    lipschitz_demo_field,
    rough_field,
    vmo_modulus,
)
from .exponents import ExponentQuery, bootstrap_ladder, mr_admissible
from .expressions import lambdify_expression, manufactured_problem
from .grids import SpaceGrid, TimeGrid
from .mr_diagnostics import critical_sweep, kato_ratio, mr_constant
from .norms import Trajectory, trajectory_to_csv
from .operator_calculus import (
    OperatorFamily,
    RegularityCertificate,
    sectoriality_report,
)
from .quasilinear import CoefficientMap, QlpProblem, small_data_threshold, solve_qlp
from .volterra import (
    VolterraSystem,
    solve_integral_equation,
    solve_timestepper,
    solve_with_initial_value,
)

logger = logging.getLogger("maxreg")

SCHEMA = "maxreg/1"


class NumericalFailure(RuntimeError):
    def __init__(self, stage: str, message: str = "non-finite value in report"):
        super().__init__(f"{message} (stage: {stage})")
        self.stage = stage


@dataclass
class RunResult:
    report: dict
    files: dict[str, str]


def run(subcommand: str, config: RunConfig) -> RunResult:
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    runner = _RUNNERS[subcommand]
    results, files = runner(config)
    report = {
        "schema": SCHEMA,
        "subcommand": subcommand,
        "seed": config.seed,
        "config": config.model_dump(mode="json"),
        "results": results,
    }
    _assert_finite(results, stage=subcommand)
    return RunResult(report, files)


def _assert_finite(node, stage: str, path: str = "results") -> None:
    if isinstance(node, dict):
        for k, v in node.items():
            _assert_finite(v, stage, f"{path}.{k}")
    elif isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            _assert_finite(v, stage, f"{path}[{i}]")
    elif isinstance(node, float) and not math.isfinite(node):
        raise NumericalFailure(f"{stage}:{path}")


# -- shared builders -----------------------------------------------------------------


def _build_grids(section) -> tuple[TimeGrid, SpaceGrid]:
    g = section.grid
    tg = TimeGrid.uniform(g.horizon, g.m_steps)
    if g.grading == "uniform":
        sg = SpaceGrid.uniform(g.left, g.right, g.n_interior)
    else:
        toward = "left" if g.grading.endswith("left") else "right"
        sg = SpaceGrid.geometric(g.left, g.right, g.n_interior, g.ratio or 0.9, toward)
    return tg, sg


def _build_field(section, tg: TimeGrid, sg: SpaceGrid) -> CoefficientField:
    gen = section.generator
    if gen.name == "constant":
        return field_from_callable(
            lambda t, x: gen.value + 0.0 * t * x, tg, sg,
            delta=gen.delta or gen.value, holder_alpha=1.0, holder_constant=0.0,
        )
    if gen.name == "lipschitz":
        return lipschitz_demo_field(tg, sg)
    if gen.name == "rough":
        return rough_field(
            gen.alpha, tg, sg, levels=gen.levels, amplitude=gen.amplitude,
            base=gen.base, profile=gen.profile,
        )
    if gen.name == "csv":
        if not gen.path:
            raise ValueError("csv generator requires a path")
        with open(gen.path, "r", encoding="utf-8") as handle:
            return field_from_csv(handle.read(), delta=gen.delta)
    if gen.name == "expression":
        if not gen.expression:
            raise ValueError("expression generator requires an expression")
        fn = lambdify_expression(gen.expression, ("t", "x"))
        return field_from_callable(fn, tg, sg, delta=gen.delta)
    raise ValueError(f"unknown generator {gen.name!r}")


def _build_family(section, tg: TimeGrid, sg: SpaceGrid) -> OperatorFamily:
    op = section.operator
    if op.kind == "scalar":
        value = lambdify_expression(op.expression, ("t",))
        grid = SpaceGrid.uniform(0.0, 1.0, 1)
        ops = [
            DiscreteOperator(np.array([[float(value(t))]]) + op.shift * np.eye(1), grid)
            for t in tg.times
        ]
        cert = RegularityCertificate("holder", op.alpha, op.holder_constant)
        return OperatorFamily(tg, ops, cert)
    field = _build_field(section, tg, sg)
    fam = OperatorFamily.from_field(field, shift=op.shift)
    return fam


def _sample_forcing(section, tg: TimeGrid, family: OperatorFamily) -> Trajectory:
    fn = lambdify_expression(section.forcing, ("t", "x"))
    if section.operator.kind == "scalar":
        nodes = np.array([0.5])
    else:
        nodes = family.space_grid.interior
    values = fn(tg.times[:, None], nodes[None, :])
    midpoints = fn(tg.midpoints[:, None], nodes[None, :])
    return Trajectory(tg, values, midpoint_values=midpoints)


def _sample_initial(section, family: OperatorFamily) -> np.ndarray:
    fn = lambdify_expression(section.u0, ("x",))
    if section.operator.kind == "scalar":
        nodes = np.array([0.5])
    else:
        nodes = family.space_grid.interior
    return np.asarray(fn(nodes), dtype=float)


def _rational(text: str, name: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"{name} must be a rational like '3/5', got {text!r}") from exc


# -- runners ---------------------------------------------------------------------------


def _run_solve(config: RunConfig):
    section = config.solve
    tg, sg = _build_grids(section)
    family = _build_family(section, tg, sg)
    forcing = _sample_forcing(section, tg, family)
    u0 = _sample_initial(section, family)
    theta = section.theta
    zero_init = not np.any(u0)

    if section.route == "integral":
        if not zero_init:
            raise ValueError("integral route requires u0 = 0; use route='extension'")
        system = VolterraSystem(family, forcing, theta=theta)
        method = "neumann" if section.neumann else "direct"
        u = solve_integral_equation(system, method=method)
    elif section.route == "extension":
        u = solve_with_initial_value(family, forcing, u0, p=float(_rational(section.p, "p")))
    else:
        u = solve_timestepper(family, forcing, u0 if not zero_init else None, section.route)

    results = {
        "final_time": float(tg.horizon),
        "u_final": [float(v) for v in u.values[-1]],
        "sup_norm": float(np.abs(u.values).max()),
        "meta": {k: v for k, v in u.meta.items()},
    }
    files = {"solution.csv": trajectory_to_csv(u)}
    return results, files


def _run_diagnose(config: RunConfig):
    section = config.diagnose
    tg, sg = _build_grids(section)
    family = _build_family(section, tg, sg)
    forcing = _sample_forcing(section, tg, family)
    u0 = _sample_initial(section, family)
    p = float(_rational(section.p, "p"))
    route = "auto" if section.route == "integral" else section.route
    report = mr_constant(family, forcing, u0 if np.any(u0) else None, p,
                         theta=section.theta, route=route)

    angle = section.sector_angle_fraction * math.pi
    sector = sectoriality_report(family.operators[0], angle, section.lambda_samples)
    results = {
        "mr_constant": report.constant,
        "parts": {
            "sobolev_norm": report.sobolev_norm,
            "graph_norm": report.graph_norm,
            "forcing_norm": report.forcing_norm,
            "trace": report.trace,
        },
        "sector": {
            "angle": sector.angle,
            "resolvent_bound": sector.resolvent_bound,
            "spectrum_in_sector": sector.spectrum_in_sector,
        },
    }
    if section.operator.kind == "divergence":
        field = _build_field(section, tg, sg)
        kato = kato_ratio(family.operators[0], n_random=section.kato_vectors,
                          seed=config.seed)
        eta = vmo_modulus(np.real(field.samples[-1]), sg, section.vmo_radii)
        ell = ellipticity_check(field)
        results["kato"] = {"min_ratio": kato.min_ratio, "max_ratio": kato.max_ratio}
        results["vmo_modulus"] = {str(r): float(v) for r, v in zip(section.vmo_radii, eta)}
        results["ellipticity"] = {"delta_observed": ell.delta_observed, "passed": ell.passed}
    files = {"solution.csv": trajectory_to_csv(report.solution)}
    return results, files


def _run_sweep(config: RunConfig):
    section = config.sweep
    table = critical_sweep(
        section.alphas,
        levels=section.levels,
        p=section.p,
        theta=section.theta,
        n_interior=section.n_interior,
        base_m=section.base_m,
        horizon=section.horizon,
        amplitude=section.amplitude,
        route=section.route,
    )
    rows = table.rows()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "dt", "C_p", "verdict"])
    for row in rows:
        writer.writerow(
            [format(row["alpha"], ".17g"), format(row["dt"], ".17g"),
             format(row["C_p"], ".17g"), row["verdict"]]
        )
    results = {
        "verdicts": {str(a): v for a, v in table.verdicts.items()},
        "cells": [
            {"alpha": r["alpha"], "dt": r["dt"], "C_p": _nan_to_none(r["C_p"]),
             "verdict": r["verdict"]}
            for r in rows
        ],
    }
    return results, {"sweep.csv": buf.getvalue()}


def _nan_to_none(value: float):
    return None if isinstance(value, float) and math.isnan(value) else value


def _run_plan(config: RunConfig):
    section = config.plan
    theta = _rational(section.theta, "theta")
    p = _rational(section.p, "p")
    alpha = _rational(section.alpha, "alpha")
    if section.mode == "ladder":
        plan = bootstrap_ladder(theta, p, alpha)
    else:
        q = _rational(section.q, "q") if section.q else None
        plan = mr_admissible(ExponentQuery(theta, p, alpha, q))
    return {"plan": plan.to_dict()}, {}


def _run_qlp(config: RunConfig):
    section = config.qlp
    tg, sg = _type_grids_qlp(section)
    coefficient_fn = lambdify_expression(section.coefficient, ("u",))
    amap = CoefficientMap(
        coefficient_fn,
        beta=section.beta,
        holder_constant=section.holder_constant,
        floor=section.floor,
        ceiling=section.ceiling,
        state_bound=section.state_bound if section.state_bound is not None else math.inf,
    )

    if section.manufactured:
        problem_data = manufactured_problem(section.manufactured, section.coefficient)
        tt, xx = tg.times[:, None], sg.interior[None, :]
        forcing = Trajectory(
            tg,
            problem_data.forcing(tt, xx),
            midpoint_values=problem_data.forcing(tg.midpoints[:, None], xx),
        )
        u0 = problem_data.solution(np.array(0.0), sg.interior)
        target = problem_data.solution(tt, xx)
    else:
        forcing_fn = lambdify_expression(section.forcing, ("t", "x"))
        forcing = Trajectory(
            tg,
            forcing_fn(tg.times[:, None], sg.interior[None, :]),
            midpoint_values=forcing_fn(tg.midpoints[:, None], sg.interior[None, :]),
        )
        u0_fn = lambdify_expression(section.u0, ("x",))
        u0 = np.asarray(u0_fn(sg.interior), dtype=float)
        target = None

    problem = QlpProblem(amap, forcing, u0, section.p, section.q, sg)
    if section.mode == "threshold":
        outcome = small_data_threshold(
            problem, section.scales, tol=section.tol,
            max_iter=section.max_iter, damping=section.damping,
        )
        return {"threshold": outcome}, {}

    solution = solve_qlp(problem, tol=section.tol, max_iter=section.max_iter,
                         damping=section.damping)
    results = {
        "iterations": solution.iterations,
        "converged": solution.converged,
        "residuals": solution.residuals,
        "ball_warning": solution.ball_warning,
        "mr_parts": solution.mr_parts,
        "exponents_admissible": problem.exponents_admissible(),
    }
    if target is not None:
        results["target_error_sup"] = float(
            np.abs(solution.trajectory.values - target).max()
        )
    files = {"solution.csv": trajectory_to_csv(solution.trajectory)}
    return results, files


def _type_grids_qlp(section) -> tuple[TimeGrid, SpaceGrid]:
    g = section.grid
    tg = TimeGrid.uniform(g.horizon, g.m_steps)
    sg = SpaceGrid.uniform(g.left, g.right, g.n_interior)
    return tg, sg


def _run_counterexample(config: RunConfig):
    section = config.counterexample
    example = cx.CriticalExample(
        offset=section.offset, eps=section.eps,
        n_space=section.n_space, horizon=section.horizon,
    )
    derivative_rows = cx.truncated_derivative_norm(example, section.eps_values)
    bound_check = cx.sin_increment_bound_check(example, seed=config.seed)

    norm_rows = []
    for q in section.q_values:
        res = cx.critical_frac_norm(example, q, cutoffs=section.cutoffs)
        for cutoff, value in res["per_cutoff"].items():
            norm_rows.append(
                {"q": q, "norm": value, "cutoff": cutoff,
                 "regime1_share": res["regime1_share"],
                 "regime2_share": res["regime2_share"],
                 "flagged": res["flagged"]}
            )

    buf1 = io.StringIO()
    w1 = csv.writer(buf1, lineterminator="\n")
    w1.writerow(["q", "norm", "cutoff", "regime1_share", "regime2_share"])
    for row in norm_rows:
        w1.writerow([format(row[k], ".17g") for k in
                     ("q", "norm", "cutoff", "regime1_share", "regime2_share")])

    buf2 = io.StringIO()
    w2 = csv.writer(buf2, lineterminator="\n")
    w2.writerow(["epsilon", "I", "closed_form"])
    for row in derivative_rows:
        w2.writerow([format(row["eps"], ".17g"), format(row["value"], ".17g"),
                     format(row["closed_form"], ".17g")])

    results = {
        "derivative_energy": derivative_rows,
        "increment_bound": bound_check,
        "critical_norms": norm_rows,
    }
    files = {"critical_norms.csv": buf1.getvalue(), "derivative_energy.csv": buf2.getvalue()}
    return results, files


_RUNNERS = {
    "solve": _run_solve,
    "diagnose": _run_diagnose,
    "sweep": _run_sweep,
    "plan": _run_plan,
    "qlp": _run_qlp,
    "counterexample": _run_counterexample,
}
