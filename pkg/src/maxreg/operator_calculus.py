"""Matrix-function engine: semigroups, fractional powers and sector diagnostics.

The interpolation/extrapolation scale of a positive operator is realized at
finite dimension through fractional powers: the theta-scale norm of x is
``||A^theta x||_2``.  Eigendecomposition is the default backend, with a
conditioning check and a scaling-and-squaring fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .discretization import CoefficientField, DiscreteOperator, assemble_operator
from .grids import SpaceGrid, TimeGrid

__all__ = [
    "Decomposition",
    "decompose",
    "semigroup",
    "frac_power",
    "theta_norm",
    "SectorReport",
    "sectoriality_report",
    "RegularityCertificate",
    "OperatorFamily",
    "theta_stability_constant",
    "KernelSnapshot",
    "drift_kernel",
    "propagation_kernel",
    "kernel_norm_profile",
]

_COND_LIMIT = 1e8


@dataclass(frozen=True)
class Decomposition:
    """Spectral factorization ``M = V diag(eigenvalues) Vinv``."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    inverse_vectors: np.ndarray
    condition: float
    real_input: bool = True

    def apply_function(self, fn, real_output: bool) -> np.ndarray:
        out = (self.vectors * fn(self.eigenvalues)) @ self.inverse_vectors
        return out.real if real_output and np.iscomplexobj(out) else out

    def propagate(self, tau: float | np.ndarray, block: np.ndarray) -> np.ndarray:
        """Apply ``exp(-tau M)`` columnwise; ``tau`` may vary per column."""
        coeff = self.inverse_vectors @ block
        decay = np.exp(-np.multiply.outer(self.eigenvalues, tau))
        if decay.ndim == 1:
            decay = decay[:, None]
        out = self.vectors @ (decay * coeff)
        if self.real_input and not np.iscomplexobj(block) and np.iscomplexobj(out):
            out = out.real
        return out


def _as_matrix(operator) -> np.ndarray:
    if isinstance(operator, DiscreteOperator):
        return operator.matrix
    return np.asarray(operator)


def _weights(operator) -> np.ndarray | None:
    if isinstance(operator, DiscreteOperator):
        return operator.grid.dual_widths
    return None


def decompose(operator) -> Decomposition:
    """Eigendecomposition with a conditioning guard.

    Real matrices that are symmetrizable by the dual-cell weights (the shape
    produced by the conservative assembly on nonuniform grids) are routed
    through a Hermitian solve for perfectly conditioned eigenvectors.
    """
    matrix = _as_matrix(operator)
    real = not np.iscomplexobj(matrix)
    if np.isnan(matrix).any():
        raise ValueError("operator matrix contains NaN entries")
    herm = np.allclose(matrix, matrix.conj().T, rtol=1e-12, atol=1e-12)
    if herm:
        w, q = np.linalg.eigh(matrix)
        return Decomposition(w, q, q.conj().T, 1.0, real)
    weights = _weights(operator)
    if weights is not None and real:
        # conservative assembly on a nonuniform grid: similar to a symmetric
        # matrix via the dual-cell weights
        d = np.sqrt(weights)
        sym = matrix * (d[:, None] / d[None, :])
        if np.allclose(sym, sym.T, rtol=1e-10, atol=1e-12):
            w, q = np.linalg.eigh(0.5 * (sym + sym.T))
            vectors = q / d[:, None]
            inverse = q.T * d[None, :]
            return Decomposition(w, vectors, inverse, float(np.linalg.cond(vectors)), real)
    w, v = np.linalg.eig(matrix)
    cond = float(np.linalg.cond(v))
    if cond >= _COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"eigenvector condition {cond:.3g} exceeds the backend limit"
        )
    return Decomposition(w, v, np.linalg.inv(v), cond, real)


def semigroup(operator, tau: float) -> np.ndarray:
    """Evaluate ``exp(-tau A)`` for ``tau >= 0``."""
    if tau < 0:
        raise ValueError("semigroup parameter must be nonnegative")
    matrix = _as_matrix(operator)
    if np.isnan(matrix).any():
        raise ValueError("operator matrix contains NaN entries")
    if tau == 0:
        return np.eye(matrix.shape[0], dtype=matrix.dtype)
    try:
        dec = decompose(operator)
    except np.linalg.LinAlgError:
        return scipy.linalg.expm(-tau * matrix)
    return dec.apply_function(
        lambda w: np.exp(-tau * w), real_output=not np.iscomplexobj(matrix)
    )


def frac_power(operator, theta: float) -> np.ndarray:
    """Principal fractional power ``A^theta`` for ``theta`` in [-1, 1].

    Requires an invertible operator whose spectrum avoids the closed negative
    real axis.
    """
    if not -1.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [-1, 1]")
    matrix = _as_matrix(operator)
    n = matrix.shape[0]
    if theta == 0:
        return np.eye(n, dtype=matrix.dtype)
    if theta == 1:
        return matrix.copy()
    try:
        dec = decompose(operator)
    except np.linalg.LinAlgError:
        return scipy.linalg.fractional_matrix_power(matrix, theta)
    w = dec.eigenvalues
    scale = np.abs(w).max()
    if np.abs(w).min() <= 1e-14 * scale:
        raise ValueError("operator is singular; fractional powers undefined")
    on_negative_axis = (np.real(w) <= 0) & (np.abs(np.imag(w)) <= 1e-14 * scale)
    if on_negative_axis.any():
        raise ValueError("spectrum touches the closed negative real axis")
    # principal powers preserve conjugate symmetry, so a real input yields a
    # real power even with complex eigenvalue pairs
    return dec.apply_function(
        lambda ev: np.power(ev.astype(complex), theta),
        real_output=not np.iscomplexobj(matrix),
    )


def theta_norm(operator, theta: float, x: np.ndarray) -> float:
    """The scale norm ``||A^theta x||_2`` realizing the theta-space norm."""
    x = np.asarray(x)
    if theta == 0:
        return float(np.linalg.norm(x))
    return float(np.linalg.norm(frac_power(operator, theta) @ x))


# -- sectoriality ---------------------------------------------------------------


@dataclass(frozen=True)
class SectorReport:
    """Sampled resolvent bound outside a sector of the given angle.

    ``resolvent_bound`` is the max over sampled lambda of
    ``(|lambda| + 1) ||(lambda I - A)^{-1}||_2``; sampling runs over both
    boundary rays and the negative real axis, so it is a lower bound on the
    true supremum.  On finite-dimensional spaces the same number serves as the
    R-sectoriality constant (R-bounds reduce to uniform bounds there).
    """

    angle: float
    resolvent_bound: float
    spectrum_in_sector: bool
    n_samples: int


def sectoriality_report(operator, angle: float, lambda_samples: int = 200) -> SectorReport:
    if not 0.0 < angle < np.pi:
        raise ValueError("sector angle must lie in (0, pi)")
    matrix = _as_matrix(operator)
    n = matrix.shape[0]
    eye = np.eye(n)
    magnitudes = np.geomspace(1e-3, 1e6, lambda_samples)
    rays = [np.exp(1j * angle), np.exp(-1j * angle), -1.0]
    bound = 0.0
    for direction in rays:
        for m in magnitudes:
            lam = m * direction
            try:
                res = np.linalg.inv(lam * eye - matrix)
            except np.linalg.LinAlgError:
                bound = np.inf
                continue
            value = (abs(lam) + 1.0) * np.linalg.norm(res, 2)
            if not np.isfinite(value):
                bound = np.inf
            else:
                bound = max(bound, float(value))
    eigs = np.linalg.eigvals(matrix)
    in_sector = bool(np.all(np.abs(np.angle(eigs)) <= angle + 1e-12) and np.isfinite(bound))
    return SectorReport(angle, bound, in_sector, lambda_samples)


# -- time-indexed families -------------------------------------------------------


@dataclass(frozen=True)
class RegularityCertificate:
    """Declared time regularity of a coefficient family."""

    kind: str  # "holder" or "frac-sobolev"
    alpha: float
    constant: float | None = None
    exponent: float | None = None  # integrability exponent for frac-sobolev

    def __post_init__(self) -> None:
        if self.kind not in ("holder", "frac-sobolev"):
            raise ValueError("certificate kind must be 'holder' or 'frac-sobolev'")
        if not 0 < self.alpha <= 1:
            raise ValueError("certificate exponent must lie in (0, 1]")


class OperatorFamily:
    """Time-indexed discrete operators sharing one space grid.

    Stores one matrix per time node plus optional cell-midpoint matrices for
    the one-step schemes.  Spectral factorizations are cached per index.
    """

    def __init__(
        self,
        time_grid: TimeGrid,
        operators: Sequence[DiscreteOperator],
        certificate: RegularityCertificate | None = None,
        midpoint_operators: Sequence[DiscreteOperator] | None = None,
    ) -> None:
        if len(operators) != time_grid.times.size:
            raise ValueError("need one operator per time node")
        grid = operators[0].grid
        for op in operators:
            if op.grid is not grid and not np.array_equal(op.grid.nodes, grid.nodes):
                raise ValueError("all operators must share one space grid")
        if midpoint_operators is not None and len(midpoint_operators) != time_grid.m_steps:
            raise ValueError("need one midpoint operator per time cell")
        self.time_grid = time_grid
        self.operators = list(operators)
        self.certificate = certificate
        self.midpoint_operators = list(midpoint_operators) if midpoint_operators else None
        self.stability_constant: float | None = None
        self._decompositions: dict[int, Decomposition] = {}
        self._powers: dict[tuple[int, float], np.ndarray] = {}

    @classmethod
    def from_field(
        cls,
        coefficients: CoefficientField,
        shift: float = 0.0,
        certificate: RegularityCertificate | None = None,
    ) -> "OperatorFamily":
        ops = [
            assemble_operator(coefficients, i, coefficients.space_grid, shift)
            for i in range(coefficients.time_grid.times.size)
        ]
        if certificate is None and coefficients.holder_alpha is not None:
            certificate = RegularityCertificate(
                "holder", coefficients.holder_alpha, coefficients.holder_constant
            )
        return cls(coefficients.time_grid, ops, certificate)

    @classmethod
    def autonomous(cls, operator: DiscreteOperator, time_grid: TimeGrid) -> "OperatorFamily":
        ops = [operator] * time_grid.times.size
        cert = RegularityCertificate("holder", 1.0, 0.0)
        return cls(time_grid, ops, cert, midpoint_operators=[operator] * time_grid.m_steps)

    def __len__(self) -> int:
        return len(self.operators)

    @property
    def space_grid(self) -> SpaceGrid:
        return self.operators[0].grid

    @property
    def order(self) -> int:
        return self.operators[0].order

    def matrix(self, index: int) -> np.ndarray:
        return self.operators[index].matrix

    def decomposition(self, index: int) -> Decomposition:
        if index not in self._decompositions:
            self._decompositions[index] = decompose(self.operators[index])
        return self._decompositions[index]

    def power(self, index: int, theta: float) -> np.ndarray:
        key = (index, float(theta))
        if key not in self._powers:
            self._powers[key] = frac_power(self.operators[index], theta)
        return self._powers[key]

    def midpoint_matrix(self, cell: int) -> np.ndarray:
        if self.midpoint_operators is not None:
            return self.midpoint_operators[cell].matrix
        return 0.5 * (self.matrix(cell) + self.matrix(cell + 1))

    def is_autonomous(self, tol: float = 0.0) -> bool:
        ref = self.matrix(0)
        return all(
            np.allclose(self.matrix(i), ref, rtol=tol, atol=tol)
            for i in range(1, len(self))
        )

    def measure_theta_stability(self, theta: float) -> float:
        """Store and return the constant covering both theta and theta - 1."""
        k = max(
            theta_stability_constant(self, theta),
            theta_stability_constant(self, theta - 1.0),
        )
        self.stability_constant = k
        return k


def theta_stability_constant(family: OperatorFamily, theta: float, reference: int = 0) -> float:
    """Uniform equivalence constant of the theta-scale norms along the family.

    With A := A(t_reference), the constant is
    ``max_t max(||A(t)^theta A^{-theta}||, ||A^theta A(t)^{-theta}||)``.
    """
    if len(family) == 0:
        raise ValueError("family is empty")
    ref_plus = family.power(reference, theta)
    ref_minus = family.power(reference, -theta)
    k = 1.0
    for i in range(len(family)):
        if i == reference:
            continue
        forward = np.linalg.norm(family.power(i, theta) @ ref_minus, 2)
        backward = np.linalg.norm(ref_plus @ family.power(i, -theta), 2)
        k = max(k, float(forward), float(backward))
    return k


# -- the two Volterra kernels ----------------------------------------------------


@dataclass(frozen=True)
class KernelSnapshot:
    """One kernel evaluation together with its scale-norm measurement."""

    matrix: np.ndarray
    scale_norm: float
    t: float
    s: float


def _indices(family: OperatorFamily, t_index: int, s_index: int) -> tuple[float, float]:
    times = family.time_grid.times
    if not 0 <= s_index < times.size or not 0 <= t_index < times.size:
        raise IndexError("kernel indices out of range")
    if s_index >= t_index:
        raise ValueError("kernel requires s < t")
    return float(times[t_index]), float(times[s_index])


def drift_kernel(
    family: OperatorFamily, t_index: int, s_index: int, theta: float
) -> KernelSnapshot:
    """``exp(-(t-s)A(t)) (A(t) - A(s))`` with its theta-scale operator norm.

    The reported norm is ``||A(t)^theta K A(s)^{-theta}||_2``, the discrete
    realization of the scale norm from the theta-space into itself.
    """
    t, s = _indices(family, t_index, s_index)
    diff = family.matrix(t_index) - family.matrix(s_index)
    dec = family.decomposition(t_index)
    kernel = dec.propagate(t - s, diff)
    norm = np.linalg.norm(
        family.power(t_index, theta) @ kernel @ family.power(s_index, -theta), 2
    )
    return KernelSnapshot(kernel, float(norm), t, s)


def propagation_kernel(
    family: OperatorFamily, t_index: int, s_index: int, theta: float
) -> KernelSnapshot:
    """``exp(-(t-s)A(t))`` with the norm ``||A(t)^theta K||_2`` (state into scale)."""
    t, s = _indices(family, t_index, s_index)
    dec = family.decomposition(t_index)
    kernel = dec.propagate(t - s, np.eye(family.order))
    norm = np.linalg.norm(family.power(t_index, theta) @ kernel, 2)
    return KernelSnapshot(kernel, float(norm), t, s)


def kernel_norm_profile(
    family: OperatorFamily,
    theta: float,
    kind: str = "drift",
    lags: Iterable[int] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sup of the kernel scale-norm over pairs at each time lag.

    Returns ``(h, g)`` with ``g(h) = sup_{t - s = h} ||K(t, s)||`` on the
    requested dyadic lags, ready for a log-log slope fit against the singular
    kernel estimates.
    """
    m = family.time_grid.m_steps
    if lags is None:
        lags = []
        k = 1
        while k <= m:
            lags.append(k)
            k *= 2
    fn = drift_kernel if kind == "drift" else propagation_kernel
    hs, sups = [], []
    dt = family.time_grid.times
    for k in lags:
        best = 0.0
        for i in range(k, m + 1):
            best = max(best, fn(family, i, i - k, theta).scale_norm)
        hs.append(dt[k] - dt[0])
        sups.append(best)
    return np.asarray(hs), np.asarray(sups)
