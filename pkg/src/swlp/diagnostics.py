"""Audits: discrete entropy inequality, lake-at-rest residual, conservation ledgers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lagrangian_explicit import AcousticStepOutput
from .mesh_state import FlowState, Grid1D
from .transport import TransportResult, upwind


class AuditUnavailable(RuntimeError):
    pass


@dataclass
class StepData:
    """Step internals retained for audits."""

    state_n: FlowState
    state_next: FlowState
    acoustic: AcousticStepOutput
    transport: TransportResult
    dt: float
    dx: float
    g: float


def entropy(h, hu, g):
    """U = (hu)^2 / (2h) + g h^2 / 2."""
    return hu * hu / (2 * h) + 0.5 * g * h * h


@dataclass
class EntropyAudit:
    U_n: np.ndarray
    U_next: np.ndarray
    flux: np.ndarray
    source: np.ndarray
    residual: np.ndarray
    tol: float

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol


def entropy_tolerance(state: FlowState, g: float, rel: float = 1e-10) -> float:
    h_max = float(state.h.max())
    return rel * g * h_max * h_max * float(np.sqrt(g * h_max))


def entropy_audit(data: StepData | None, rel_tol: float = 1e-10) -> EntropyAudit:
    """Per-cell residual of the discrete entropy inequality (should be <= tol).

    Flux F = pi* u~* + u* U^{n+1-}_up, with u~* = u* + M / (2a) the
    bracket-free interface velocity, and source
    {hu dz} = (w+_j M_{j-1/2} - w-_j M_{j+1/2}) / (2 a g dx), where M is the
    topography pressure jump and w+- the characteristic values at the
    flux-evaluation time.
    """
    if data is None:
        raise AuditUnavailable("step internals were not retained")
    ac = data.acoustic
    if not ac.speeds.uniform:
        raise AuditUnavailable("entropy audit needs a single relaxation speed (glob variants)")
    a = float(ac.speeds.a[0])
    g, dt, dx = data.g, data.dt, data.dx
    m = ac.context.m_jump
    u_tilde = ac.u_star + m / (2 * a)
    tr = data.transport
    U_minus_ext = entropy(tr.h_minus_ext, tr.hu_minus_ext, g)
    flux = ac.pi_star * u_tilde + ac.u_star * upwind(U_minus_ext, ac.u_star)
    source = (ac.w_plus * m[:-1] - ac.w_minus * m[1:]) / (2 * a * g * dx)
    U_n = entropy(data.state_n.h, data.state_n.hu, g)
    U_next = entropy(data.state_next.h, data.state_next.hu, g)
    residual = (U_next - U_n) / dt + (flux[1:] - flux[:-1]) / dx + g * source
    return EntropyAudit(U_n, U_next, flux, source, residual, entropy_tolerance(data.state_n, g, rel_tol))


@dataclass
class AuxEntropyQuantities:
    eta: np.ndarray  # per cell, (w-^2 + w+^2) / 2
    q: np.ndarray  # per interface, (w+_j^2 - w-_{j+1}^2) / (4a)
    I: np.ndarray  # pi + a^2 tau
    E: np.ndarray  # u^2 / 2 + e(tau)


def aux_entropy_quantities(tau_ext, u_ext, pi_ext, a: float, g: float) -> AuxEntropyQuantities:
    """Lagrangian entropy bookkeeping on ghost-extended relaxed states."""
    w_plus = pi_ext + a * u_ext
    w_minus = pi_ext - a * u_ext
    inner = slice(1, -1)
    eta = 0.5 * (w_minus[inner] ** 2 + w_plus[inner] ** 2)
    q = (w_plus[:-1] ** 2 - w_minus[1:] ** 2) / (4 * a)
    tau = tau_ext[inner]
    return AuxEntropyQuantities(eta=eta, q=q, I=pi_ext[inner] + a * a * tau,
                                E=0.5 * u_ext[inner] ** 2 + g / (2 * tau))


def wellbalanced_residual(state: FlowState, grid: Grid1D) -> tuple[float, float]:
    """(max |u|, max(h+z) - min(h+z))."""
    eta = state.h + grid.z
    return float(np.abs(state.u).max()), float(eta.max() - eta.min())


@dataclass
class ConservationReport:
    n_steps: int
    mass_drift: float  # |M_end - M_0| / M_0, no boundary correction
    mass_imbalance: float  # worst per-step |dM - inflow| / M_0
    momentum_drift: float  # |P_end - P_0| / scale
    momentum_imbalance: float  # worst per-step |dP - inflow - source| / scale
    momentum_scale: float
    min_h: float

    def ok(self, tol: float = 1e-12) -> bool:
        return self.mass_imbalance <= tol and self.momentum_imbalance <= tol


def conservation_ledger(records: Sequence, initial_mass: float, initial_momentum: float,
                        momentum_scale: float | None = None) -> ConservationReport:
    """Mass and momentum balances from step records.

    ``momentum_scale`` defaults to ``|P_0|``; callers with
    sign-changing discharge should pass the total absolute momentum instead.
    """
    if momentum_scale is None:
        momentum_scale = max(abs(initial_momentum), 1e-300)
    mass_prev, mom_prev = initial_mass, initial_momentum
    worst_m = worst_p = 0.0
    min_h = float("inf")
    for r in records:
        dm = r.total_mass - mass_prev
        dp = r.total_momentum - mom_prev
        worst_m = max(worst_m, abs(dm - r.mass_inflow))
        worst_p = max(worst_p, abs(dp - r.momentum_inflow - r.momentum_source))
        mass_prev, mom_prev = r.total_mass, r.total_momentum
        min_h = min(min_h, r.min_h)
    return ConservationReport(
        n_steps=len(records),
        mass_drift=abs(mass_prev - initial_mass) / initial_mass,
        mass_imbalance=worst_m / initial_mass,
        momentum_drift=abs(mom_prev - initial_momentum) / momentum_scale,
        momentum_imbalance=worst_p / momentum_scale,
        momentum_scale=momentum_scale,
        min_h=min_h,
    )
