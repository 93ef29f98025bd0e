"""Explicit upwind transport (projection) step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryPolicy, extend_state
from .lagrangian_explicit import CFLViolation
from .mesh_state import FlowState, Grid1D

TRANSPORT_SAFETY = 0.999


@dataclass
class TransportInput:
    h_minus: np.ndarray
    hu_minus: np.ndarray
    u_star: np.ndarray
    L: np.ndarray


@dataclass
class TransportResult:
    state: FlowState
    h_minus_ext: np.ndarray
    hu_minus_ext: np.ndarray
    mass_flux: np.ndarray  # u* h_upwind at every interface
    momentum_flux: np.ndarray  # u* (hu)_upwind, pressure excluded


def upwind(values_ext: np.ndarray, u_star: np.ndarray) -> np.ndarray:
    """Interface trace: left value when u* >= 0, right value otherwise."""
    return np.where(u_star >= 0.0, values_ext[:-1], values_ext[1:])


def transport_courant(u_star: np.ndarray) -> np.ndarray:
    """Per-cell (u*_{j-1/2})^+ - (u*_{j+1/2})^-."""
    return np.maximum(u_star[:-1], 0.0) - np.minimum(u_star[1:], 0.0)


def transport_cfl_dt(u_star: np.ndarray, grid: Grid1D) -> float:
    """Largest admissible dt for the transport step, or ``inf`` when u* vanishes."""
    rate = transport_courant(u_star).max()
    if rate <= 0.0:
        return float("inf")
    return TRANSPORT_SAFETY * grid.dx / rate


def check_transport_cfl(u_star: np.ndarray, dx: float, dt: float) -> None:
    nu = dt / dx * transport_courant(u_star)
    j = int(np.argmax(nu))
    # equality still yields a convex combination (zero weight on the cell itself)
    if nu[j] > 1.0 + 1e-12:
        raise CFLViolation(f"transport Courant number {nu[j]!r} > 1 in cell {j}", cell=j)


def transport_step(inp: TransportInput, grid: Grid1D, dt: float, bc: BoundaryPolicy,
                   time: float = 0.0) -> TransportResult:
    """phi^{n+1} = phi^{n+1-} L_j - dt/dx (u* phi_up |_{j+1/2} - u* phi_up |_{j-1/2})."""
    if np.any(~(inp.L > 0.0)):
        j = int(np.argmin(inp.L))
        raise CFLViolation(f"L_j = {inp.L[j]!r} <= 0 in cell {j}", cell=j)
    check_transport_cfl(inp.u_star, grid.dx, dt)
    h_ext, hu_ext, _ = extend_state(inp.h_minus, inp.hu_minus, grid.z, bc)
    mass_flux = inp.u_star * upwind(h_ext, inp.u_star)
    momentum_flux = inp.u_star * upwind(hu_ext, inp.u_star)
    lam = dt / grid.dx
    h_new = inp.h_minus * inp.L - lam * (mass_flux[1:] - mass_flux[:-1])
    hu_new = inp.hu_minus * inp.L - lam * (momentum_flux[1:] - momentum_flux[:-1])
    return TransportResult(FlowState(h_new, hu_new, time), h_ext, hu_ext, mass_flux, momentum_flux)


def conservative_update(h_n, hu_n, h_minus_ext, hu_minus_ext, u_star, pi_star, source_cell, dt, dx):
    """One-shot conservative form of acoustic + transport.

    h^{n+1}  = h^n  - dt/dx [u* h_up]_{j-1/2}^{j+1/2}
    hu^{n+1} = hu^n - dt/dx [u* hu_up + pi*]_{j-1/2}^{j+1/2} - dt h^n {g/tau dz/dm}_j
    """
    fh = u_star * upwind(h_minus_ext, u_star)
    fq = u_star * upwind(hu_minus_ext, u_star) + pi_star
    lam = dt / dx
    h_new = h_n - lam * (fh[1:] - fh[:-1])
    hu_new = hu_n - lam * (fq[1:] - fq[:-1]) - dt * h_n * source_cell
    return h_new, hu_new
