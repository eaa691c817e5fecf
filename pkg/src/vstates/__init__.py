"""Rotating vortex patches: spectral boundary solver, branch continuation and stream-function tools."""

from .spectral import PatchCoeffs, GridTrace, synthesize, analyze_residual
from .solver import NewtonConfig, newton_solve, eval_FM, critical_frequency
from .continuation import BranchConfig, trace_branch
from .field import StreamField, find_critical_points

__all__ = [
    "PatchCoeffs", "GridTrace", "synthesize", "analyze_residual",
    "NewtonConfig", "newton_solve", "eval_FM", "critical_frequency",
    "BranchConfig", "trace_branch", "StreamField", "find_critical_points",
]
