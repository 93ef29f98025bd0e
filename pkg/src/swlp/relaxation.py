"""Equation of state, relaxation speed selection and the Whitham audit."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryPolicy, extend_state
from .mesh_state import FlowState, check_positive

DEFAULT_KAPPA = 1.01


class SpeedMode(enum.Enum):
    LOCAL = "local"
    GLOBAL = "global"


@dataclass(frozen=True)
class RelaxSpeedPolicy:
    mode: SpeedMode = SpeedMode.LOCAL
    kappa: float = DEFAULT_KAPPA
    allow_subunit_kappa: bool = False  # test hook for deliberately unstable speeds

    def __post_init__(self):
        if not self.kappa > 1.0 and not self.allow_subunit_kappa:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")


@dataclass
class InterfaceSpeeds:
    a: np.ndarray  # one entry per interface, n_cells + 1

    @property
    def uniform(self) -> bool:
        return bool(np.all(self.a == self.a[0]))

    def cell_speed(self) -> np.ndarray:
        """Speed used for per-cell quantities: the larger of the two bounding interfaces."""
        return np.maximum(self.a[:-1], self.a[1:])


def _check_depth(h):
    if np.any(np.asarray(h) <= 0.0):
        raise ValueError("water depth must be positive")


def pressure(h, g):
    _check_depth(h)
    return 0.5 * g * np.asarray(h) * h


def sound_speed(h, g):
    _check_depth(h)
    return np.sqrt(g * np.asarray(h))


def lagrangian_sound_speed(h, g):
    """h * c, the sound speed in mass coordinates."""
    return h * np.sqrt(g * h)


def compute_interface_speeds(state: FlowState, policy: RelaxSpeedPolicy, g: float,
                             bc: BoundaryPolicy | None = None) -> InterfaceSpeeds:
    check_positive(state.h)
    bc = bc if bc is not None else BoundaryPolicy.neumann()
    h_ext, _, _ = extend_state(state.h, state.hu, np.zeros_like(state.h), bc)
    hc = lagrangian_sound_speed(h_ext, g)
    if policy.mode is SpeedMode.LOCAL:
        a = policy.kappa * np.maximum(hc[:-1], hc[1:])
    else:
        a = np.full(state.n_cells + 1, policy.kappa * hc.max())
    return InterfaceSpeeds(a)


@dataclass
class WhithamReport:
    margin_n: np.ndarray
    margin_minus: np.ndarray | None

    @property
    def violations(self) -> int:
        bad = self.margin_n <= 0.0
        if self.margin_minus is not None:
            bad = bad | (self.margin_minus <= 0.0)
        return int(np.count_nonzero(bad))

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _margin(a: np.ndarray, h: np.ndarray, hu: np.ndarray, g: float, bc: BoundaryPolicy) -> np.ndarray:
    h_ext, _, _ = extend_state(h, hu, np.zeros_like(h), bc)
    hc = lagrangian_sound_speed(h_ext, g)
    return a - np.maximum(hc[:-1], hc[1:])


def check_whitham(speeds: InterfaceSpeeds, state_n: FlowState, state_minus: FlowState | None = None,
                  g: float = 9.81, bc: BoundaryPolicy | None = None) -> WhithamReport:
    """Margins of the subcharacteristic condition at t^n and, if given, at t^{n+1-}.

    Diagnostic only; a negative margin is reported, never raised.
    """
    bc = bc if bc is not None else BoundaryPolicy.neumann()
    m_n = _margin(speeds.a, state_n.h, state_n.hu, g, bc)
    m_minus = None
    if state_minus is not None:
        m_minus = _margin(speeds.a, state_minus.h, state_minus.hu, g, bc)
    return WhithamReport(m_n, m_minus)
