"""Grid, topography sampling and the state containers shared by every step."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class PositivityError(ValueError):
    """Raised when a water depth is not strictly positive."""

    def __init__(self, cell: int, value: float):
        super().__init__(f"non-positive water depth h={value!r} in cell {cell}")
        self.cell = cell
        self.value = value


class TopographyError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_cells: int
    z: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("n_cells must be positive")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        z = np.asarray(self.z, dtype=np.float64)
        if z.shape != (self.n_cells,):
            raise ValueError(f"z must have shape ({self.n_cells},), got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise TopographyError("topography contains non-finite values")
        object.__setattr__(self, "z", z)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def cell_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_cells: int


def sample_topography(grid_spec: GridSpec, z_function: Callable[[np.ndarray], np.ndarray]) -> Grid1D:
    """Build a grid whose bathymetry is ``z_function`` evaluated at cell centers."""
    probe = Grid1D(grid_spec.x_min, grid_spec.x_max, grid_spec.n_cells, np.zeros(grid_spec.n_cells))
    z = np.asarray(z_function(probe.cell_centers), dtype=np.float64)
    z = np.broadcast_to(z, (grid_spec.n_cells,)).copy()
    bad = np.flatnonzero(~np.isfinite(z))
    if bad.size:
        raise TopographyError(f"z_function is not finite at x={probe.cell_centers[bad[0]]!r}")
    return Grid1D(grid_spec.x_min, grid_spec.x_max, grid_spec.n_cells, z)


def check_positive(h: np.ndarray) -> None:
    bad = np.flatnonzero(~(h > 0.0))
    if bad.size:
        j = int(bad[0])
        raise PositivityError(j, float(h[j]))


@dataclass
class FlowState:
    """Conserved variables per cell: depth ``h`` and discharge ``hu``."""

    h: np.ndarray
    hu: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.hu = np.asarray(self.hu, dtype=np.float64)
        if self.h.shape != self.hu.shape or self.h.ndim != 1:
            raise ValueError("h and hu must be 1D arrays of equal length")

    @property
    def n_cells(self) -> int:
        return self.h.size

    @property
    def u(self) -> np.ndarray:
        return self.hu / self.h

    def validate(self) -> None:
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.hu))):
            raise FloatingPointError("state contains non-finite values")
        check_positive(self.h)

    def copy(self) -> FlowState:
        return FlowState(self.h.copy(), self.hu.copy(), self.time)

    @classmethod
    def from_primitives(cls, h, u, time: float = 0.0) -> FlowState:
        h = np.asarray(h, dtype=np.float64)
        return cls(h, h * np.asarray(u, dtype=np.float64), time)


@dataclass
class RelaxedState:
    """Lagrangian variables (tau, u, pi, z) used inside the acoustic step."""

    tau: np.ndarray
    u: np.ndarray
    pi: np.ndarray
    z: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return 1.0 / self.tau


@dataclass
class MassIncrements:
    dm: np.ndarray
    dm_half: np.ndarray


def primitives_from_conserved(state: FlowState, z: np.ndarray | None = None, g: float = 9.81) -> RelaxedState:
    """Equilibrium reset: tau = 1/h, u = hu/h and pi = g h^2 / 2."""
    check_positive(state.h)
    h = state.h
    if z is None:
        z = np.zeros_like(h)
    return RelaxedState(tau=1.0 / h, u=state.hu / h, pi=0.5 * g * h * h, z=np.array(z, dtype=np.float64))


def conserved_from_primitives(relaxed: RelaxedState, time: float = 0.0) -> FlowState:
    h = 1.0 / relaxed.tau
    return FlowState(h, h * relaxed.u, time)


def mass_increments(state: FlowState, grid: Grid1D, bc=None) -> MassIncrements:
    """Cell masses ``dx h`` and their interface averages.

    The interface array has ``n_cells + 1`` entries; the two boundary entries use
    ghost values filled according to ``bc`` (zero-gradient when omitted).
    """
    from .boundary import BoundaryPolicy, extend_state

    check_positive(state.h)
    bc = bc if bc is not None else BoundaryPolicy.neumann()
    h_ext, _, _ = extend_state(state.h, state.hu, grid.z, bc)
    dm_ext = grid.dx * h_ext
    return MassIncrements(dm=dm_ext[1:-1].copy(), dm_half=0.5 * (dm_ext[:-1] + dm_ext[1:]))
