"""Coefficient fields, divergence-form assembly and spatial hypothesis checks.

Everything here is the 1D scalar case: operators realize ``-(a(t, x) u')' + shift*u``
on an interval with homogeneous Dirichlet conditions, discretized by a
conservative second-order finite difference with coefficient values averaged
onto the cell midpoints.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grids import SpaceGrid, TimeGrid

__all__ = [
    "CoefficientField",
    "DiscreteOperator",
    "EllipticityReport",
    "assemble_operator",
    "ellipticity_check",
    "vmo_modulus",
    "constant_field",
    "field_from_callable",
    "lipschitz_demo_field",
    "rough_field",
    "field_from_csv",
    "field_to_csv",
    "make_generator",
]


@dataclass(frozen=True)
class CoefficientField:
    """Samples ``a(t_i, x_j)`` of a scalar diffusion coefficient.

    ``samples`` has shape ``(m_steps + 1, n_nodes)`` covering every node of the
    space grid including the boundary.  ``delta`` is the declared ellipticity
    constant; whether the samples actually honor it is the job of
    :func:`ellipticity_check`.
    """

    time_grid: TimeGrid
    space_grid: SpaceGrid
    samples: np.ndarray
    delta: float
    holder_alpha: float | None = None
    holder_constant: float | None = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples)
        if not np.iscomplexobj(samples):
            samples = samples.astype(float)
        object.__setattr__(self, "samples", samples)
        expected = (self.time_grid.times.size, self.space_grid.nodes.size)
        if samples.shape != expected:
            raise ValueError(
                f"samples shape {samples.shape} does not match grids {expected}"
            )
        if not self.delta > 0:
            raise ValueError("declared ellipticity constant must be positive")

    @property
    def sup_norm(self) -> float:
        """Exact max of the sampled magnitudes."""
        return float(np.abs(self.samples).max())

    def at_time(self, index: int) -> np.ndarray:
        return self.samples[index]


@dataclass(frozen=True)
class DiscreteOperator:
    """Dense matrix realization of ``-(a u')' + shift*u`` on interior nodes."""

    matrix: np.ndarray
    grid: SpaceGrid
    shift: float = 0.0

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix)
        object.__setattr__(self, "matrix", matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("operator matrix must be square")
        if matrix.shape[0] != self.grid.n_interior:
            raise ValueError("matrix order must equal the number of interior nodes")
        if self.shift < 0:
            raise ValueError("shift must be nonnegative")

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


@dataclass(frozen=True)
class EllipticityReport:
    delta_observed: float
    passed: bool


def assemble_operator(
    field: CoefficientField,
    time_index: int,
    grid: SpaceGrid,
    shift: float = 0.0,
    midpoint_rule: str = "arithmetic",
) -> DiscreteOperator:
    """Assemble the conservative finite-difference matrix at one time sample.

    Row ``j`` encodes
    ``-[a_{j+1/2}(u_{j+1}-u_j)/h_{j+1/2} - a_{j-1/2}(u_j-u_{j-1})/h_{j-1/2}]/hhat_j
    + shift*u_j`` with the midpoint coefficient obtained by averaging the two
    neighboring samples (arithmetic by default, harmonic on request).
    """
    if grid is not field.space_grid and not np.array_equal(
        grid.nodes, field.space_grid.nodes
    ):
        raise ValueError("field is not sampled on the requested grid")
    if not field.delta > 0:
        raise ValueError("ellipticity constant must be positive")
    if not 0 <= time_index < field.time_grid.times.size:
        raise IndexError("time index out of range")
    if shift < 0:
        raise ValueError("shift must be nonnegative")

    a = field.at_time(time_index)
    if midpoint_rule == "arithmetic":
        a_mid = 0.5 * (a[:-1] + a[1:])
    elif midpoint_rule == "harmonic":
        a_mid = 2.0 / (1.0 / a[:-1] + 1.0 / a[1:])
    else:
        raise ValueError(f"unknown midpoint rule {midpoint_rule!r}")

    h = grid.cell_widths
    hhat = grid.dual_widths
    n = grid.n_interior
    flux = a_mid / h  # a_{j+1/2} / h_{j+1/2}, one entry per cell

    dtype = complex if np.iscomplexobj(a_mid) else float
    matrix = np.zeros((n, n), dtype=dtype)
    diag = (flux[:-1] + flux[1:]) / hhat + shift
    matrix[np.arange(n), np.arange(n)] = diag
    if n > 1:
        lower = -flux[1:-1] / hhat[1:]
        upper = -flux[1:-1] / hhat[:-1]
        matrix[np.arange(1, n), np.arange(n - 1)] = lower
        matrix[np.arange(n - 1), np.arange(1, n)] = upper
    return DiscreteOperator(matrix, grid, shift)


def ellipticity_check(field: CoefficientField) -> EllipticityReport:
    """Observed ellipticity floor: min over samples of the real part."""
    if field.samples.size == 0:
        raise ValueError("field has no samples")
    delta_observed = float(np.real(field.samples).min())
    return EllipticityReport(delta_observed, delta_observed >= field.delta)


# -- mean oscillation ---------------------------------------------------------


def _dual_boundaries(grid: SpaceGrid) -> np.ndarray:
    nodes = grid.nodes
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    return np.concatenate(([nodes[0]], mids, [nodes[-1]]))


def vmo_modulus(
    f: np.ndarray,
    grid: SpaceGrid,
    radii: Sequence[float],
    n_diameters: int = 48,
) -> np.ndarray:
    """Discrete mean-oscillation modulus over balls centered at grid nodes.

    For each requested r the supremum runs over all grid nodes as centers and
    a fixed master list of sampled diameters ``<= r`` (so the result is
    nondecreasing in r by construction).  The node samples are interpreted as
    a step function on the dual cells and integrated exactly over the clipped
    ball.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise ValueError("radii list must be nonempty")
    if (radii <= 0).any():
        raise ValueError("radii must be positive")
    if (radii > grid.diameter * (1 + 1e-12)).any():
        raise ValueError("radii must not exceed the domain diameter")
    f = np.asarray(f)
    if f.shape != grid.nodes.shape:
        raise ValueError("sample count must match the grid nodes")

    bounds = _dual_boundaries(grid)
    widths = np.diff(bounds)
    # oscillation is shift invariant; centering makes constants exactly zero
    f = f - np.mean(f)
    # cumulative integrals of the step reconstruction of f and |f|^2
    cum_f = np.concatenate(([0.0], np.cumsum(widths * f)))
    cum_f2 = np.concatenate(([0.0], np.cumsum(widths * np.abs(f) ** 2)))

    def integral(cum: np.ndarray, values: np.ndarray, a: float, b: float):
        ia = np.searchsorted(bounds, a, side="right") - 1
        ib = np.searchsorted(bounds, b, side="right") - 1
        ia = min(max(ia, 0), widths.size - 1)
        ib = min(max(ib, 0), widths.size - 1)
        if ia == ib:
            return (b - a) * values[ia]
        head = (bounds[ia + 1] - a) * values[ia]
        tail = (b - bounds[ib]) * values[ib]
        return head + tail + (cum[ib] - cum[ia + 1])

    smallest = max(widths.min(), 1e-3 * grid.diameter / n_diameters)
    master = np.geomspace(smallest, grid.diameter, n_diameters)
    master = np.unique(np.concatenate((master, radii)))

    f2 = np.abs(f) ** 2
    osc_by_diameter = np.zeros(master.size)
    for k, d in enumerate(master):
        worst = 0.0
        for c in grid.nodes:
            a = max(c - d / 2, grid.left)
            b = min(c + d / 2, grid.right)
            if b <= a:
                continue
            length = b - a
            mean = integral(cum_f, f, a, b) / length
            second = integral(cum_f2, f2, a, b) / length
            var = second - np.abs(mean) ** 2
            worst = max(worst, float(np.sqrt(max(var.real, 0.0))))
        osc_by_diameter[k] = worst

    running = np.maximum.accumulate(osc_by_diameter)
    out = np.empty(radii.size)
    for i, r in enumerate(radii):
        idx = np.searchsorted(master, r * (1 + 1e-12), side="right") - 1
        out[i] = running[idx] if idx >= 0 else 0.0
    return out


# -- generators ----------------------------------------------------------------


def field_from_callable(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    time_grid: TimeGrid,
    space_grid: SpaceGrid,
    delta: float | None = None,
    holder_alpha: float | None = None,
    holder_constant: float | None = None,
) -> CoefficientField:
    """Sample ``fn(t, x)`` on the tensor grid; ``fn`` must broadcast."""
    tt = time_grid.times[:, None]
    xx = space_grid.nodes[None, :]
    samples = np.asarray(fn(tt, xx)) + np.zeros((tt.size, xx.size))
    if delta is None:
        delta = float(np.real(samples).min())
        if delta <= 0:
            raise ValueError("sampled coefficient is not elliptic; pass delta explicitly")
    return CoefficientField(
        time_grid, space_grid, samples, delta, holder_alpha, holder_constant
    )


def constant_field(
    value: float, time_grid: TimeGrid, space_grid: SpaceGrid
) -> CoefficientField:
    if not np.real(value) > 0:
        raise ValueError("constant coefficient must have positive real part")
    return field_from_callable(
        lambda t, x: value + 0.0 * t * x,
        time_grid,
        space_grid,
        delta=float(np.real(value)),
        holder_alpha=1.0,
        holder_constant=0.0,
    )


def lipschitz_demo_field(time_grid: TimeGrid, space_grid: SpaceGrid) -> CoefficientField:
    """The smooth benchmark coefficient ``a(t, x) = 2 + t sin(pi x)``."""
    return field_from_callable(
        lambda t, x: 2.0 + t * np.sin(np.pi * x),
        time_grid,
        space_grid,
        delta=1.0,
        holder_alpha=1.0,
        holder_constant=1.0,
    )


def rough_field(
    alpha: float,
    time_grid: TimeGrid,
    space_grid: SpaceGrid,
    levels: int = 22,
    amplitude: float = 0.9,
    base: float = 2.0,
    profile: str = "resonant",
) -> CoefficientField:
    """Coefficient with prescribed time-Hoelder exponent ``alpha``.

    A lacunary cosine series ``sum_k 2^{-alpha k} cos(2^k pi t) phi_k(x)`` with
    bounded smooth spatial profiles, normalized so the fluctuation never
    exceeds ``amplitude``.  The ellipticity floor ``base - amplitude`` holds at
    every resolution because the normalization uses the analytic bound
    ``sum_k 2^{-alpha k}`` rather than the sampled maximum.

    The default "resonant" profiles pair the temporal frequency ``2^k`` with
    the spatial mode whose Dirichlet eigenvalue matches it, the coupling that
    drives time-derivative growth below the critical regularity; "low-mode"
    cycles through the three lowest modes instead.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0 < amplitude < base:
        raise ValueError("amplitude must lie in (0, base)")
    k = np.arange(levels + 1)
    decay = 2.0 ** (-alpha * k)
    bound = decay.sum()
    if profile == "resonant":
        modes = np.maximum(1, np.round(2.0 ** (k / 2.0))).astype(int)
    elif profile == "low-mode":
        modes = 1 + k % 3
    else:
        raise ValueError(f"unknown profile {profile!r}")

    def fn(t, x):
        out = np.zeros(np.broadcast_shapes(t.shape, x.shape))
        for dk, freq, mode in zip(decay, 2.0**k, modes):
            out = out + dk * np.cos(freq * np.pi * t) * np.sin(mode * np.pi * x)
        return base + amplitude * out / bound

    return field_from_callable(
        fn,
        time_grid,
        space_grid,
        delta=base - amplitude,
        holder_alpha=alpha,
        holder_constant=2.0 * amplitude,
    )


def make_generator(name: str, **params) -> Callable[[TimeGrid, SpaceGrid], CoefficientField]:
    """Named coefficient generators used by config files."""
    if name == "constant":
        value = params.pop("value", 1.0)
        _reject_extra(params)
        return lambda tg, sg: constant_field(value, tg, sg)
    if name == "lipschitz":
        _reject_extra(params)
        return lipschitz_demo_field
    if name == "rough":
        alpha = params.pop("alpha")
        rest = dict(params)
        return lambda tg, sg: rough_field(alpha, tg, sg, **rest)
    raise ValueError(f"unknown generator {name!r}")


def _reject_extra(params: dict) -> None:
    if params:
        raise ValueError(f"unexpected generator parameters: {sorted(params)}")


# -- CSV interchange -----------------------------------------------------------


def field_to_csv(field: CoefficientField) -> str:
    """Serialize to the ``t,x,re,im`` interchange format."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "x", "re", "im"])
    for i, t in enumerate(field.time_grid.times):
        for j, x in enumerate(field.space_grid.nodes):
            v = complex(field.samples[i, j])
            writer.writerow(
                [format(t, ".17g"), format(x, ".17g"), format(v.real, ".17g"), format(v.imag, ".17g")]
            )
    return buf.getvalue()


def field_from_csv(text: str, delta: float | None = None) -> CoefficientField:
    """Load a coefficient field from ``t,x,re,im`` rows (full tensor grid)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["t", "x", "re", "im"]:
        raise ValueError("expected header row 't,x,re,im'")
    rows = [(float(t), float(x), float(re), float(im)) for t, x, re, im in reader]
    if not rows:
        raise ValueError("no samples in CSV")
    times = np.unique([r[0] for r in rows])
    nodes = np.unique([r[1] for r in rows])
    if times.size * nodes.size != len(rows):
        raise ValueError("CSV rows do not form a full time x space tensor grid")
    samples = np.zeros((times.size, nodes.size), dtype=complex)
    t_index = {t: i for i, t in enumerate(times)}
    x_index = {x: j for j, x in enumerate(nodes)}
    for t, x, re, im in rows:
        samples[t_index[t], x_index[x]] = re + 1j * im
    if np.allclose(samples.imag, 0.0):
        samples = samples.real
    tg = TimeGrid(float(times[-1]), times)
    sg = SpaceGrid(float(nodes[0]), float(nodes[-1]), nodes)
    if delta is None:
        delta = float(np.real(samples).min())
        if delta <= 0:
            raise ValueError("CSV coefficient is not elliptic; pass delta explicitly")
    return CoefficientField(tg, sg, samples, delta)
