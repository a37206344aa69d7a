"""Spatial and temporal grids for the one-dimensional Dirichlet setting.

Space grids live on an interval (left, right).  The two boundary nodes carry
homogeneous Dirichlet data and are excluded from the unknown vector, so a grid
with ``n_interior`` unknowns stores ``n_interior + 2`` node coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_UNIFORM_RTOL = 1e-12


@dataclass(frozen=True)
class SpaceGrid:
    """Interval grid with Dirichlet boundary nodes.

    Attributes
    ----------
    left, right:
        Domain endpoints, ``left < right``.
    nodes:
        All node coordinates including both endpoints, strictly increasing.
    grading:
        ``"uniform"``, ``"geometric-left"`` or ``"geometric-right"``.
    ratio:
        Cell-width ratio in (0, 1) for geometric gradings, ``None`` otherwise.
    """

    left: float
    right: float
    nodes: np.ndarray
    grading: str = "uniform"
    ratio: float | None = None

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if not self.left < self.right:
            raise ValueError("domain endpoints must satisfy left < right")
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("need at least one interior node")
        if not (np.diff(nodes) > 0).all():
            raise ValueError("nodes must be strictly increasing")
        if not (np.isclose(nodes[0], self.left) and np.isclose(nodes[-1], self.right)):
            raise ValueError("first/last node must coincide with the endpoints")
        if self.grading == "uniform":
            h = np.diff(nodes)
            if np.ptp(h) > _UNIFORM_RTOL * h.max():
                raise ValueError("uniform grading requires equal spacing")
        elif self.grading in ("geometric-left", "geometric-right"):
            if self.ratio is None or not 0.0 < self.ratio < 1.0:
                raise ValueError("geometric grading ratio must lie in (0, 1)")
        else:
            raise ValueError(f"unknown grading {self.grading!r}")

    @classmethod
    def uniform(cls, left: float, right: float, n_interior: int) -> "SpaceGrid":
        nodes = np.linspace(left, right, n_interior + 2)
        return cls(left, right, nodes)

    @classmethod
    def geometric(
        cls,
        left: float,
        right: float,
        n_interior: int,
        ratio: float,
        toward: str = "left",
    ) -> "SpaceGrid":
        """Grid whose cell widths shrink geometrically toward one endpoint."""
        if not 0.0 < ratio < 1.0:
            raise ValueError("geometric grading ratio must lie in (0, 1)")
        m = n_interior + 1  # number of cells
        widths = ratio ** np.arange(m, dtype=float)
        if toward == "left":
            widths = widths[::-1]
        elif toward != "right":
            raise ValueError("toward must be 'left' or 'right'")
        widths *= (right - left) / widths.sum()
        nodes = left + np.concatenate(([0.0], np.cumsum(widths)))
        nodes[-1] = right
        return cls(left, right, nodes, grading=f"geometric-{toward}", ratio=ratio)

    @property
    def n_interior(self) -> int:
        return self.nodes.size - 2

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def cell_widths(self) -> np.ndarray:
        """Widths of the n_interior + 1 cells between consecutive nodes."""
        return np.diff(self.nodes)

    @property
    def dual_widths(self) -> np.ndarray:
        """Control-volume widths around the interior nodes."""
        return 0.5 * (self.nodes[2:] - self.nodes[:-2])

    @property
    def diameter(self) -> float:
        return self.right - self.left


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = t_0 < t_1 < ... < t_m = T of the time horizon."""

    horizon: float
    times: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("need at least one time step")
        if not (np.diff(times) > 0).all():
            raise ValueError("times must be strictly increasing")
        if times[0] != 0.0:
            raise ValueError("time grid must start at zero")
        if not np.isclose(times[-1], self.horizon):
            raise ValueError("last node must equal the horizon")

    @classmethod
    def uniform(cls, horizon: float, m_steps: int) -> "TimeGrid":
        return cls(horizon, np.linspace(0.0, horizon, m_steps + 1))

    @property
    def m_steps(self) -> int:
        return self.times.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def is_uniform(self) -> bool:
        h = self.steps
        return bool(np.ptp(h) <= _UNIFORM_RTOL * h.max())

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.times[:-1] + self.times[1:])
