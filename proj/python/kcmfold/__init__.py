"""Kinetostatic compliance folding of protein backbone chains.

Thin bindings over the C++ core. Angles are radians, lengths Å, energies
kcal/mol; arrays are NumPy.

    >>> import kcmfold
    >>> topo = kcmfold.build_backbone(15)
    >>> theta0 = kcmfold.pre_coiled_alpha(topo, seed=1)
    >>> traj = kcmfold.run_folding(topo, theta0)
    >>> traj.terminated_by
    'converged'
"""

from ._core import (
    ChainTopology,
    FoldingTrajectory,
    ForceFieldConfig,
    KcmError,
    RadiusRule,
    SolverConfig,
    SolverMode,
    atom_positions,
    atomic_forces,
    build_backbone,
    conventional_step,
    fold,
    free_energy,
    normalize_config,
    oscillation_score,
    pre_coiled_alpha,
    run_folding,
    schedule_geometric,
    sgd_step,
    torque,
    wrap_angles,
)

__all__ = [
    "ChainTopology",
    "FoldingTrajectory",
    "ForceFieldConfig",
    "KcmError",
    "RadiusRule",
    "SolverConfig",
    "SolverMode",
    "atom_positions",
    "atomic_forces",
    "build_backbone",
    "conventional_step",
    "fold",
    "free_energy",
    "normalize_config",
    "oscillation_score",
    "pre_coiled_alpha",
    "run_folding",
    "schedule_geometric",
    "sgd_step",
    "torque",
    "wrap_angles",
]
