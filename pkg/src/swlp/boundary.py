"""Boundary policies realized through one layer of ghost cells on each side."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Neumann:
    """Zero-gradient copy of depth and discharge."""


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class DirichletDischarge:
    """Prescribed discharge at the boundary interface, zero-gradient depth."""

    q: float


@dataclass(frozen=True)
class DirichletDepth:
    """Prescribed depth at the boundary interface, zero-gradient discharge."""

    h: float


Side = Union[Neumann, Periodic, DirichletDischarge, DirichletDepth]


@dataclass(frozen=True)
class BoundaryPolicy:
    left: Side
    right: Side

    def __post_init__(self):
        if isinstance(self.left, Periodic) != isinstance(self.right, Periodic):
            raise ValueError("periodic boundaries must be set on both sides")

    @classmethod
    def neumann(cls) -> BoundaryPolicy:
        return cls(Neumann(), Neumann())

    @classmethod
    def periodic(cls) -> BoundaryPolicy:
        return cls(Periodic(), Periodic())

    @property
    def is_periodic(self) -> bool:
        return isinstance(self.left, Periodic)

    def describe(self) -> str:
        return f"{_side_name(self.left)}|{_side_name(self.right)}"


def _side_name(side: Side) -> str:
    if isinstance(side, DirichletDischarge):
        return f"q={side.q!r}"
    if isinstance(side, DirichletDepth):
        return f"h={side.h!r}"
    return type(side).__name__.lower()


def _ghost_pair(side: Side, h_b: float, hu_b: float, h_wrap: float, hu_wrap: float) -> tuple[float, float]:
    if isinstance(side, Neumann):
        return h_b, hu_b
    if isinstance(side, Periodic):
        return h_wrap, hu_wrap
    if isinstance(side, DirichletDischarge):
        return h_b, 2.0 * side.q - hu_b
    if isinstance(side, DirichletDepth):
        h_g = 2.0 * side.h - h_b
        # the mirrored value can go dry when the interior is far from the target
        return (h_g if h_g > 0.0 else side.h), hu_b
    raise TypeError(f"unknown boundary side {side!r}")


def extend_state(h: np.ndarray, hu: np.ndarray, z: np.ndarray, bc: BoundaryPolicy):
    """Return ``(h, hu, z)`` padded with one ghost cell on each side."""
    n = h.size
    h_ext = np.empty(n + 2)
    hu_ext = np.empty(n + 2)
    z_ext = np.empty(n + 2)
    h_ext[1:-1] = h
    hu_ext[1:-1] = hu
    z_ext[1:-1] = z
    h_ext[0], hu_ext[0] = _ghost_pair(bc.left, h[0], hu[0], h[-1], hu[-1])
    h_ext[-1], hu_ext[-1] = _ghost_pair(bc.right, h[-1], hu[-1], h[0], hu[0])
    if bc.is_periodic:
        z_ext[0], z_ext[-1] = z[-1], z[0]
    else:
        z_ext[0], z_ext[-1] = z[0], z[-1]
    return h_ext, hu_ext, z_ext


def implicit_ghost_mode(side: Side) -> str:
    """How a side closes the implicit acoustic system.

    ``copy``: the ghost mirrors the adjacent unknown; ``periodic``: wraps around;
    ``frozen``: the ghost keeps its time-t^n value and moves to the right-hand side.
    """
    if isinstance(side, Neumann):
        return "copy"
    if isinstance(side, Periodic):
        return "periodic"
    return "frozen"


def extend_implicit(values: np.ndarray, frozen_ext: np.ndarray, bc: BoundaryPolicy) -> np.ndarray:
    """Pad a solved cell field using the implicit closure of each side."""
    out = np.empty(values.size + 2)
    out[1:-1] = values
    for idx, side, inner, wrap in ((0, bc.left, values[0], values[-1]), (-1, bc.right, values[-1], values[0])):
        mode = implicit_ghost_mode(side)
        if mode == "copy":
            out[idx] = inner
        elif mode == "periodic":
            out[idx] = wrap
        else:
            out[idx] = frozen_ext[idx]
    return out
