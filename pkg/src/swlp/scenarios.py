"""Benchmark scenario catalogue and the moving-water equilibrium solver."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boundary import BoundaryPolicy, DirichletDepth, DirichletDischarge
from .driver import SchemeConfig, Variant
from .mesh_state import FlowState, Grid1D, GridSpec, sample_topography

DEFAULT_G = 9.81


class Branch(enum.Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"


class NoEquilibriumError(ValueError):
    pass


@dataclass(frozen=True)
class EquilibriumSpec:
    K1: float  # discharge hu
    K2: float  # Bernoulli constant u^2/2 + g (h + z)
    branch: Branch = Branch.SUBCRITICAL


def critical_depth(K1: float, g: float) -> float:
    return (K1 * K1 / g) ** (1.0 / 3.0)


def bernoulli_residual(h, K1, K2, z, g):
    """f(h) = K1^2 / (2 h^2) + g (h + z) - K2."""
    return K1 * K1 / (2 * h * h) + g * (h + z) - K2


def equilibrium_depth(spec: EquilibriumSpec, z_value: float, g: float = DEFAULT_G, rtol: float = 1e-13,
                      max_iter: int = 200) -> float:
    """Depth h with hu = K1 and u^2/2 + g(h + z) = K2 on the requested branch.

    Safeguarded Newton: every iterate stays inside a sign-changing bracket and
    a bisection step replaces any Newton step that would leave it.
    """
    K1, K2 = abs(float(spec.K1)), float(spec.K2)
    z_value = float(z_value)
    head = K2 / g - z_value
    if K1 == 0.0:
        if spec.branch is Branch.SUPERCRITICAL:
            raise NoEquilibriumError("still water has no supercritical branch")
        if head <= 0.0:
            raise NoEquilibriumError(f"K2 = {K2} <= g z = {g * z_value}: no positive depth")
        return head
    h_c = critical_depth(K1, g)
    f_c = 1.5 * (K1 * g) ** (2.0 / 3.0) + g * z_value - K2
    tol = rtol * abs(K2)
    if f_c > tol:
        raise NoEquilibriumError(
            f"no real depth: K2 - (3/2)(K1 g)^(2/3) - g z = {-f_c:.6g} < 0 (K1={K1}, K2={K2}, z={z_value})")
    if f_c >= -tol:
        return h_c
    if spec.branch is Branch.SUBCRITICAL:
        lo, hi = h_c, head  # f increasing, f(lo) < 0 <= f(hi)
        h = hi
    else:
        lo, hi = K1 / math.sqrt(2.0 * (K2 - g * z_value)), h_c  # f decreasing, f(lo) > 0 > f(hi)
        h = lo
    sign_lo = -1.0 if spec.branch is Branch.SUBCRITICAL else 1.0
    for _ in range(max_iter):
        f = bernoulli_residual(h, K1, K2, z_value, g)
        if f == 0.0:
            return h
        if (f > 0.0) == (sign_lo > 0.0):
            lo = h
        else:
            hi = h
        df = g - K1 * K1 / (h * h * h)
        step = f / df if df != 0.0 else math.inf
        h_new = h - step
        if not lo < h_new < hi:
            h_new = 0.5 * (lo + hi)
        if abs(h_new - h) <= 2.0 * np.finfo(float).eps * h or hi - lo <= 4.0 * np.finfo(float).eps * hi:
            h = h_new
            break
        h = h_new
    f = bernoulli_residual(h, K1, K2, z_value, g)
    if abs(f) > tol:
        raise NoEquilibriumError(f"equilibrium solve did not converge: |f| = {abs(f):.3g} > {tol:.3g}")
    return h


def equilibrium_profile(spec: EquilibriumSpec, z: np.ndarray, g: float = DEFAULT_G) -> np.ndarray:
    return np.array([equilibrium_depth(spec, zi, g) for zi in np.asarray(z, dtype=float)])


def transcritical_reference(K1: float, K2: float, x: np.ndarray, z: np.ndarray, x_crest: float,
                            g: float = DEFAULT_G) -> np.ndarray:
    """Smooth transcritical profile: subcritical upstream of the crest, supercritical downstream."""
    sub = equilibrium_profile(EquilibriumSpec(K1, K2, Branch.SUBCRITICAL), z, g)
    sup = equilibrium_profile(EquilibriumSpec(K1, K2, Branch.SUPERCRITICAL), z, g)
    return np.where(np.asarray(x) < x_crest, sub, sup)


InitialFn = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class Scenario:
    name: str
    x_min: float
    x_max: float
    n_cells: int
    z_function: Callable[[np.ndarray], np.ndarray]
    initial: InitialFn  # (x, z) -> (h, hu)
    bc: BoundaryPolicy
    g: float
    t_end: float
    cfl_factor: float
    dt_limit_factor: float | None = None
    params: dict = field(default_factory=dict)

    def grid(self, n_cells: int | None = None) -> Grid1D:
        return sample_topography(GridSpec(self.x_min, self.x_max, n_cells or self.n_cells), self.z_function)

    def initial_state(self, n_cells: int | None = None) -> tuple[Grid1D, FlowState]:
        grid = self.grid(n_cells)
        h, hu = self.initial(grid.cell_centers, grid.z)
        state = FlowState(np.asarray(h, dtype=float), np.asarray(hu, dtype=float), 0.0)
        state.validate()
        return grid, state

    def config(self, variant: Variant | str = Variant.EXEX_LOC, **overrides) -> SchemeConfig:
        if isinstance(variant, str):
            variant = Variant(variant)
        base = dict(variant=variant, cfl_factor=self.cfl_factor, g=self.g, t_end=self.t_end, bc=self.bc)
        # the large-step limit only concerns the implicit variants
        if variant.implicit:
            base["dt_limit_factor"] = self.dt_limit_factor
        base.update(overrides)
        return SchemeConfig(**base)


def _n(x_min, x_max, dx) -> int:
    return int(round((x_max - x_min) / dx))


def dam_break_topography(x):
    x = np.asarray(x, dtype=float)
    z = np.zeros_like(x)
    with np.errstate(divide="ignore", over="ignore"):
        pieces = [
            ((487.5 < x) & (x <= 562.5), lambda s: 4 * np.exp(2 - 150 / (s - 487.5))),
            ((562.5 < x) & (x <= 637.5), lambda s: 8 - 4 * np.exp(2 - 150 / (637.5 - s))),
            ((637.5 < x) & (x <= 862.5), lambda s: 8.0 + 0 * s),
            ((862.5 < x) & (x <= 937.5), lambda s: 8 - 4 * np.exp(2 - 150 / (s - 862.5))),
            ((937.5 < x) & (x <= 1012.5), lambda s: 4 * np.exp(2 - 150 / (1012.5 - s))),
        ]
        for mask, fn in pieces:
            z[mask] = fn(x[mask])
    return z


def _dam_break(g: float, **_) -> Scenario:
    def initial(x, z):
        h = np.where(x <= 750.0, 20.0, 15.0)
        return h, np.zeros_like(h)

    return Scenario("dam_break", 0.0, 1500.0, 1500, dam_break_topography, initial, BoundaryPolicy.neumann(),
                    g=g, t_end=50.0, cfl_factor=0.5)


def perturbation_topography(x):
    x = np.asarray(x, dtype=float)
    bump = 2 + 0.25 * (np.cos(10 * np.pi * (x - 0.5)) + 1)
    return np.where((1.4 < x) & (x < 1.6), bump, 2.0)


def _perturbation(g: float, dh: float = 0.001, **_) -> Scenario:
    def initial(x, z):
        h = 3.0 - z + np.where((1.1 < x) & (x < 1.2), dh, 0.0)
        return h, np.zeros_like(h)

    return Scenario("perturbation", 0.0, 2.0, _n(0, 2, 1 / 500), perturbation_topography, initial,
                    BoundaryPolicy.neumann(), g=g, t_end=0.2, cfl_factor=0.9, dt_limit_factor=10.0,
                    params={"dh": dh})


def _lake_at_rest(g: float, **_) -> Scenario:
    def initial(x, z):
        h = 3.0 - z
        return h, np.zeros_like(h)

    return Scenario("lake_at_rest", 0.0, 2.0, 500, perturbation_topography, initial, BoundaryPolicy.neumann(),
                    g=g, t_end=1.0, cfl_factor=0.5)


def bump_topography(x):
    x = np.asarray(x, dtype=float)
    return np.where((1.9 <= x) & (x <= 2.1), (np.cos(10 * np.pi * (x - 1)) + 1) / 4, 0.0)


def _bump(name: str, K1: float, K2: float, right_branch: Branch, t_end: float, g: float) -> Scenario:
    sub = EquilibriumSpec(K1, K2, Branch.SUBCRITICAL)
    h_right = equilibrium_depth(EquilibriumSpec(K1, K2, right_branch), float(bump_topography(4.0)), g)

    def initial(x, z):
        h = equilibrium_profile(sub, z, g)
        return h, np.zeros_like(h)

    bc = BoundaryPolicy(DirichletDischarge(K1), DirichletDepth(h_right))
    return Scenario(name, 0.0, 4.0, _n(0, 4, 1 / 400), bump_topography, initial, bc, g=g, t_end=t_end,
                    cfl_factor=0.5, params={"K1": K1, "K2": K2, "h_right": h_right, "x_crest": 2.0})


def _bump_fluvial(g: float, **_) -> Scenario:
    return _bump("bump_fluvial", 1.0, 25.0, Branch.SUBCRITICAL, 200.0, g)


def _bump_transcritical(g: float, **_) -> Scenario:
    K1 = 3.0
    K2 = 1.5 * (K1 * g) ** (2.0 / 3.0) + g / 2
    # the flow leaves the bump supercritical, so the downstream depth is taken on that branch
    return _bump("bump_transcritical_noshock", K1, K2, Branch.SUPERCRITICAL, 10.0, g)


SHOCK_BUMP_COEFF = 0.05
SHOCK_BUMP_COEFF_DISCONTINUOUS = 0.005


def shock_topography(x, coeff: float = SHOCK_BUMP_COEFF):
    """3 - coeff (x - 10)^2 on 8 < x < 12, else 2.8.

    Only coeff = 0.05 joins the 2.8 plateau continuously at x = 8 and x = 12;
    0.005 leaves a 0.18 step at both ends of the bump.
    """
    x = np.asarray(x, dtype=float)
    return np.where((8 < x) & (x < 12), 3 - coeff * (x - 10) ** 2, 2.8)


def _bump_shock(g: float, coeff: float = SHOCK_BUMP_COEFF, name: str = "bump_transcritical_shock", **_) -> Scenario:
    q0 = 0.18

    def initial(x, z):
        h = 3.13 - z
        return h, np.full_like(h, q0)

    bc = BoundaryPolicy(DirichletDischarge(q0), DirichletDepth(0.33))
    return Scenario(name, 0.0, 25.0, _n(0, 25, 1 / 64), lambda x: shock_topography(x, coeff), initial, bc,
                    g=g, t_end=200.0, cfl_factor=0.9, params={"q0": q0, "h_right": 0.33, "bump_coeff": coeff})


def _bump_shock_discontinuous(g: float, **_) -> Scenario:
    return _bump_shock(g, coeff=SHOCK_BUMP_COEFF_DISCONTINUOUS, name="bump_transcritical_shock_discontinuous")


def nonunique_topography(x):
    return np.where(np.asarray(x, dtype=float) <= 0.5, 1.5, 1.1)


def _nonunique(g: float = 2.0, **_) -> Scenario:
    def initial(x, z):
        left = x <= 0.5
        h = np.where(left, 1.3, 0.1)
        return h, h * -2.0

    return Scenario("nonunique_riemann", 0.0, 1.0, _n(0, 1, 1 / 300), nonunique_topography, initial,
                    BoundaryPolicy.neumann(), g=g, t_end=0.1, cfl_factor=0.9, dt_limit_factor=3.0)


_CATALOGUE = {
    "dam_break": (_dam_break, DEFAULT_G),
    "perturbation": (_perturbation, DEFAULT_G),
    "bump_fluvial": (_bump_fluvial, DEFAULT_G),
    "bump_transcritical_noshock": (_bump_transcritical, DEFAULT_G),
    "bump_transcritical_shock": (_bump_shock, DEFAULT_G),
    "bump_transcritical_shock_discontinuous": (_bump_shock_discontinuous, DEFAULT_G),
    "nonunique_riemann": (_nonunique, 2.0),
    "lake_at_rest": (_lake_at_rest, DEFAULT_G),
}


def list_scenarios() -> list[str]:
    return list(_CATALOGUE)


def build_scenario(name: str, g: float | None = None) -> Scenario:
    """Scenario by catalogue name; ``g`` overrides the default gravity (and
    anything derived from it, such as equilibrium boundary depths)."""
    try:
        factory, g_default = _CATALOGUE[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(_CATALOGUE)}") from None
    return factory(g=g_default if g is None else float(g))
