"""Well-balanced Lagrange-Projection schemes for the 1D shallow-water equations."""

from .boundary import BoundaryPolicy, DirichletDepth, DirichletDischarge, Neumann, Periodic
from .diagnostics import entropy_audit, wellbalanced_residual, conservation_ledger
from .driver import SchemeConfig, StepRecord, Variant, advance, practical_dt, run_to
from .mesh_state import FlowState, Grid1D, GridSpec, PositivityError, sample_topography
from .relaxation import RelaxSpeedPolicy, SpeedMode, compute_interface_speeds
from .scenarios import Branch, EquilibriumSpec, build_scenario, equilibrium_depth, list_scenarios

__version__ = "0.1.0"

__all__ = [
    "BoundaryPolicy", "DirichletDepth", "DirichletDischarge", "Neumann", "Periodic",
    "entropy_audit", "wellbalanced_residual", "conservation_ledger",
    "SchemeConfig", "StepRecord", "Variant", "advance", "practical_dt", "run_to",
    "FlowState", "Grid1D", "GridSpec", "PositivityError", "sample_topography",
    "RelaxSpeedPolicy", "SpeedMode", "compute_interface_speeds",
    "Branch", "EquilibriumSpec", "build_scenario", "equilibrium_depth", "list_scenarios",
]
