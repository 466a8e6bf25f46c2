"""Conditional-displacement gates between qubits sharing bosonic modes."""

from .hilbert import SystemSpec
from .phasespace import BranchTable, ConditionalGate, TrajectoryResult, cz_time, run_gate
from .flowers import PulseSchedule, make_flower_schedule, solve_cz_flower, uhrig_closing_time
from .integers import IntegerSolution, solve_integers
from .perturbation import schrieffer_wolff, zz_single_cavity
from .metamaterial import ChainSpec, diagonalize_chain, scaling_experiment

__version__ = "0.1.0"

__all__ = [
    "SystemSpec", "BranchTable", "ConditionalGate", "TrajectoryResult", "cz_time", "run_gate",
    "PulseSchedule", "make_flower_schedule", "solve_cz_flower", "uhrig_closing_time",
    "IntegerSolution", "solve_integers", "schrieffer_wolff", "zz_single_cavity",
    "ChainSpec", "diagonalize_chain", "scaling_experiment", "__version__",
]
