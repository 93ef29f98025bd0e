"""Time-explicit Godunov update of the acoustic (Lagrangian) step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustic_riemann import interface_fluxes, topography_jump
from .boundary import BoundaryPolicy, extend_state
from .mesh_state import FlowState, Grid1D, RelaxedState, check_positive
from .relaxation import InterfaceSpeeds


class CFLViolation(RuntimeError):
    def __init__(self, message: str, cell: int | None = None):
        super().__init__(message)
        self.cell = cell


@dataclass
class AcousticContext:
    """Time-t^n data shared by the explicit and implicit acoustic steps.

    Arrays suffixed ``_ext`` carry one ghost cell per side (length n + 2);
    interface arrays have length n + 1, entry i sitting between extended
    cells i and i + 1.
    """

    h_ext: np.ndarray
    hu_ext: np.ndarray
    z_ext: np.ndarray
    u_ext: np.ndarray
    pi_ext: np.ndarray
    dm: np.ndarray
    dm_half: np.ndarray
    m_jump: np.ndarray
    bracket: np.ndarray
    source_cell: np.ndarray
    dx: float
    g: float

    @property
    def n(self) -> int:
        return self.dm.size


def acoustic_context(state: FlowState, grid: Grid1D, g: float, bc: BoundaryPolicy) -> AcousticContext:
    check_positive(state.h)
    h_ext, hu_ext, z_ext = extend_state(state.h, state.hu, grid.z, bc)
    dx = grid.dx
    dm_ext = dx * h_ext
    dm = dm_ext[1:-1]
    dm_half = (dm_ext[:-1] + dm_ext[1:]) / 2
    m_jump = topography_jump(h_ext[:-1], h_ext[1:], z_ext[:-1], z_ext[1:], g)
    bracket = m_jump / dm_half
    # dm-weighted average of the two interface brackets
    source_cell = 0.5 * (dm_half[1:] / dm * bracket[1:] + dm_half[:-1] / dm * bracket[:-1])
    return AcousticContext(
        h_ext=h_ext,
        hu_ext=hu_ext,
        z_ext=z_ext,
        u_ext=hu_ext / h_ext,
        pi_ext=0.5 * g * h_ext * h_ext,
        dm=dm,
        dm_half=dm_half,
        m_jump=m_jump,
        bracket=bracket,
        source_cell=source_cell,
        dx=dx,
        g=g,
    )


def explicit_interface_fluxes(ctx: AcousticContext, a: np.ndarray):
    """(u*, pi*) at every interface from time-t^n states."""
    return interface_fluxes(ctx.u_ext[:-1], ctx.u_ext[1:], ctx.pi_ext[:-1], ctx.pi_ext[1:], a, ctx.m_jump)


@dataclass
class AcousticStepOutput:
    state_minus: RelaxedState
    u_star: np.ndarray
    pi_star: np.ndarray
    L: np.ndarray
    source_cell: np.ndarray
    h_minus: np.ndarray
    hu_minus: np.ndarray
    speeds: InterfaceSpeeds
    context: AcousticContext
    # characteristic variables at the flux-evaluation time (t^n explicit, t^{n+1-} implicit)
    w_plus: np.ndarray
    w_minus: np.ndarray
    implicit: bool = False


def _finish(ctx: AcousticContext, speeds: InterfaceSpeeds, dt: float, u_star, pi_star,
            u_minus, pi_minus, w_plus, w_minus, implicit: bool) -> AcousticStepOutput:
    du = u_star[1:] - u_star[:-1]
    h_n = ctx.h_ext[1:-1]
    tau_minus = 1.0 / h_n + dt / ctx.dm * du
    L = 1.0 + dt / ctx.dx * du
    h_minus = h_n / L
    state_minus = RelaxedState(tau=tau_minus, u=u_minus, pi=pi_minus, z=ctx.z_ext[1:-1].copy())
    out = AcousticStepOutput(
        state_minus=state_minus,
        u_star=u_star,
        pi_star=pi_star,
        L=L,
        source_cell=ctx.source_cell,
        h_minus=h_minus,
        hu_minus=h_minus * u_minus,
        speeds=speeds,
        context=ctx,
        w_plus=w_plus,
        w_minus=w_minus,
        implicit=implicit,
    )
    for name in ("u_star", "pi_star", "L", "h_minus", "hu_minus"):
        if not np.all(np.isfinite(getattr(out, name))):
            raise FloatingPointError(f"non-finite {name} in acoustic step")
    return out


def check_L(L: np.ndarray) -> None:
    bad = np.flatnonzero(~(L > 0.0))
    if bad.size:
        j = int(bad[np.argmin(L[bad])])
        raise CFLViolation(f"L_j = {L[j]!r} <= 0 in cell {j}", cell=j)


def explicit_acoustic_step(state: FlowState, grid: Grid1D, speeds: InterfaceSpeeds, dt: float,
                           g: float, bc: BoundaryPolicy, ctx: AcousticContext | None = None) -> AcousticStepOutput:
    """Advance (tau, u, pi) from t^n to t^{n+1-} with fluxes evaluated at t^n."""
    if ctx is None:
        ctx = acoustic_context(state, grid, g, bc)
    a = speeds.a
    u_star, pi_star = explicit_interface_fluxes(ctx, a)
    a_cell = speeds.cell_speed()
    u_n = ctx.u_ext[1:-1]
    pi_n = ctx.pi_ext[1:-1]
    du = u_star[1:] - u_star[:-1]
    u_minus = u_n - dt / ctx.dm * (pi_star[1:] - pi_star[:-1]) - dt * ctx.source_cell
    pi_minus = pi_n - dt / ctx.dm * a_cell**2 * du
    out = _finish(ctx, speeds, dt, u_star, pi_star, u_minus, pi_minus,
                  pi_n + a_cell * u_n, pi_n - a_cell * u_n, implicit=False)
    check_L(out.L)
    return out


def acoustic_cfl_dt(state: FlowState, grid: Grid1D, speeds: InterfaceSpeeds) -> float:
    """Largest dt with dt / (h_j dx) <= 1 / (2 a_j) in every cell."""
    a_cell = speeds.cell_speed()
    return float(np.min(state.h * grid.dx / (2.0 * a_cell)))
