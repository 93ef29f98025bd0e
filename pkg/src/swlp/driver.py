"""Time loop: equilibrium reset, relaxation speeds, acoustic step, transport step."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .boundary import BoundaryPolicy
from .diagnostics import StepData, entropy_audit
from .lagrangian_explicit import (AcousticStepOutput, CFLViolation, acoustic_context,
                                  explicit_acoustic_step, explicit_interface_fluxes)
from .lagrangian_implicit import implicit_acoustic_step
from .mesh_state import FlowState, Grid1D
from .relaxation import (DEFAULT_KAPPA, InterfaceSpeeds, RelaxSpeedPolicy, SpeedMode, check_whitham,
                         compute_interface_speeds)
from .transport import TransportInput, transport_cfl_dt, transport_step

log = logging.getLogger(__name__)


class Variant(enum.Enum):
    EXEX_LOC = "exex-loc"
    EXEX_GLOB = "exex-glob"
    IMEX_LOC = "imex-loc"
    IMEX_GLOB = "imex-glob"

    @property
    def implicit(self) -> bool:
        return self in (Variant.IMEX_LOC, Variant.IMEX_GLOB)

    @property
    def speed_mode(self) -> SpeedMode:
        return SpeedMode.LOCAL if self in (Variant.EXEX_LOC, Variant.IMEX_LOC) else SpeedMode.GLOBAL


class RunawayError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    variant: Variant = Variant.EXEX_LOC
    kappa: float = DEFAULT_KAPPA
    cfl_factor: float = 0.5
    dt_limit_factor: float | None = None  # implicit dt := min(factor * dt_exp, dt_imp)
    g: float = 9.81
    t_end: float = 1.0
    bc: BoundaryPolicy = field(default_factory=BoundaryPolicy.neumann)
    max_steps: int = 10**7
    implicit_backend: str = "auto"
    max_halvings: int = 10
    # below this fraction of the largest sound speed the implicit dt formula is treated as 0/0
    zero_velocity_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.cfl_factor <= 1.0:
            raise ValueError(f"cfl_factor must lie in (0, 1], got {self.cfl_factor}")
        if self.dt_limit_factor is not None and not self.dt_limit_factor > 0.0:
            raise ValueError("dt_limit_factor must be positive")
        if not self.g > 0.0:
            raise ValueError("g must be positive")
        if self.t_end < 0.0:
            raise ValueError("t_end must be non-negative")
        self.policy  # validates kappa

    @property
    def policy(self) -> RelaxSpeedPolicy:
        return RelaxSpeedPolicy(self.variant.speed_mode, self.kappa)

    def with_(self, **changes) -> SchemeConfig:
        return replace(self, **changes)


@dataclass
class StepRecord:
    t: float
    dt: float
    dt_explicit_formula: float
    dt_implicit_formula: float
    total_mass: float
    total_momentum: float
    min_h: float
    max_entropy_residual: float
    whitham_violations: int
    mass_inflow: float  # dt * (boundary flux in - out)
    momentum_inflow: float
    momentum_source: float  # -dt * sum_j h_j^n {g/tau dz/dm}_j dx
    halvings: int = 0
    fallback: bool = False

    FIELDS = ("t", "dt", "dt_explicit_formula", "dt_implicit_formula", "total_mass", "total_momentum",
              "min_h", "max_entropy_residual", "whitham_violations", "mass_inflow", "momentum_inflow",
              "momentum_source", "halvings", "fallback")


@dataclass
class DtChoice:
    dt: float
    dt_explicit: float
    dt_implicit: float
    fallback: bool


def practical_dt(state: FlowState, u_star_prev: np.ndarray, speeds: InterfaceSpeeds, config: SchemeConfig,
                 grid: Grid1D, t_stop: float | None = None) -> DtChoice:
    """Time step from t^n data.

    explicit: cfl dx / max(sqrt(g h), |u*|); implicit: cfl dx / max |u*|, then the
    optional limit min(factor dt_exp, dt_imp), the transport bound and the stop time.
    Explicit steps are also kept within cfl dx / max(a_j / (kappa h_j)): this
    equals the sqrt(g h) formula for local speeds on smooth data, but binds when a
    single global speed makes a / h large in shallow cells.
    """
    dx = grid.dx
    c_max = float(np.sqrt(config.g * state.h.max()))
    u_max = float(np.abs(u_star_prev).max())
    dt_exp = config.cfl_factor * dx / max(c_max, u_max)
    fallback = False
    if u_max > config.zero_velocity_tol * c_max:
        dt_imp = config.cfl_factor * dx / u_max
    else:
        dt_imp = float("inf")
    if config.variant.implicit:
        if np.isinf(dt_imp) and config.dt_limit_factor is None:
            log.debug("vanishing interface velocities at t=%g, using the explicit dt formula", state.time)
            fallback = True
            dt = dt_exp
        elif config.dt_limit_factor is not None:
            dt = min(config.dt_limit_factor * dt_exp, dt_imp)
        else:
            dt = dt_imp
    else:
        eulerian_speed = speeds.cell_speed() / (config.kappa * state.h)
        dt = min(dt_exp, config.cfl_factor * dx / float(eulerian_speed.max()))
    dt = min(dt, transport_cfl_dt(u_star_prev, grid))
    stop = config.t_end if t_stop is None else t_stop
    dt = min(dt, stop - state.time)
    return DtChoice(dt, dt_exp, dt_imp, fallback)


def _acoustic(state, grid, speeds, dt, config, ctx) -> AcousticStepOutput:
    if config.variant.implicit:
        return implicit_acoustic_step(state, grid, speeds, dt, config.g, config.bc, ctx=ctx,
                                      backend=config.implicit_backend)
    return explicit_acoustic_step(state, grid, speeds, dt, config.g, config.bc, ctx=ctx)


def advance(state: FlowState, grid: Grid1D, config: SchemeConfig, t_stop: float | None = None,
            audit_entropy: bool = False, retain: bool = False):
    """One full Lagrange-Projection step.

    Returns ``(new_state, record, step_data)``; ``step_data`` is only built when
    ``retain`` or ``audit_entropy`` is requested.
    """
    state.validate()
    ctx = acoustic_context(state, grid, config.g, config.bc)
    speeds = compute_interface_speeds(state, config.policy, config.g, config.bc)
    u_star_prev, _ = explicit_interface_fluxes(ctx, speeds.a)
    choice = practical_dt(state, u_star_prev, speeds, config, grid, t_stop)
    dt = choice.dt
    if not dt > 0.0:
        raise ValueError(f"non-positive time step {dt!r} at t={state.time!r}")
    stop = config.t_end if t_stop is None else t_stop
    clamped = dt == stop - state.time
    halvings = 0
    while True:
        try:
            acoustic = _acoustic(state, grid, speeds, dt, config, ctx)
            new_time = stop if clamped else state.time + dt
            moved = transport_step(TransportInput(acoustic.h_minus, acoustic.hu_minus, acoustic.u_star, acoustic.L),
                                   grid, dt, config.bc, time=new_time)
            break
        except CFLViolation as err:
            if not config.variant.implicit or halvings >= config.max_halvings:
                raise
            halvings += 1
            clamped = False
            dt *= 0.5
            log.debug("step rejected at t=%g (%s), retrying with dt=%g", state.time, err, dt)
    new_state = moved.state
    new_state.validate()

    dx = grid.dx
    minus_state = FlowState(acoustic.h_minus, acoustic.hu_minus, state.time)
    whitham = check_whitham(speeds, state, minus_state, config.g, config.bc)
    mom_flux = moved.momentum_flux + acoustic.pi_star
    data = None
    max_res = float("nan")
    if retain or audit_entropy:
        data = StepData(state_n=state, state_next=new_state, acoustic=acoustic, transport=moved, dt=dt, dx=dx,
                        g=config.g)
        if audit_entropy and speeds.uniform:
            max_res = float(entropy_audit(data).residual.max())
    record = StepRecord(
        t=new_state.time,
        dt=dt,
        dt_explicit_formula=choice.dt_explicit,
        dt_implicit_formula=choice.dt_implicit,
        total_mass=float(new_state.h.sum() * dx),
        total_momentum=float(new_state.hu.sum() * dx),
        min_h=float(new_state.h.min()),
        max_entropy_residual=max_res,
        whitham_violations=whitham.violations,
        mass_inflow=dt * (moved.mass_flux[0] - moved.mass_flux[-1]),
        momentum_inflow=dt * (mom_flux[0] - mom_flux[-1]),
        momentum_source=-dt * float(np.sum(state.h * acoustic.source_cell)) * dx,
        halvings=halvings,
        fallback=choice.fallback,
    )
    return new_state, record, data


class Observer:
    """Hooks called by :func:`run_to`; subclasses override what they need."""

    def on_step(self, state: FlowState, record: StepRecord, data: StepData | None) -> None:
        pass

    def on_snapshot(self, state: FlowState) -> None:
        pass


@dataclass
class RunResult:
    state: FlowState
    records: list[StepRecord]

    @property
    def n_steps(self) -> int:
        return len(self.records)

    @property
    def mean_dt(self) -> float:
        return float(np.mean([r.dt for r in self.records])) if self.records else float("nan")


def run_to(state0: FlowState, grid: Grid1D, config: SchemeConfig, observers: Iterable[Observer] = (),
           snapshot_times: Sequence[float] = (), audit_entropy: bool = False,
           retain: bool = False) -> RunResult:
    """Advance until ``config.t_end``, landing exactly on every snapshot time."""
    observers = list(observers)
    stops = sorted({float(t) for t in snapshot_times if state0.time <= t <= config.t_end})
    state = state0.copy()
    records: list[StepRecord] = []
    if stops and stops[0] == state.time:
        for obs in observers:
            obs.on_snapshot(state)
        stops.pop(0)
    while state.time < config.t_end:
        if len(records) >= config.max_steps:
            raise RunawayError(f"exceeded {config.max_steps} steps at t={state.time!r}")
        t_stop = stops[0] if stops else config.t_end
        state, record, data = advance(state, grid, config, t_stop=t_stop, audit_entropy=audit_entropy,
                                      retain=retain)
        records.append(record)
        for obs in observers:
            obs.on_step(state, record, data)
        if stops and state.time >= stops[0]:
            stops.pop(0)
            for obs in observers:
                obs.on_snapshot(state)
    return RunResult(state, records)
