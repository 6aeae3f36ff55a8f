"""Relaxation of nonconvex elastic energies over broken polynomial spaces.

The library assembles stabilized discrete energies on criss-cross triangle
meshes (interior-penalty and lifted-gradient formulations with sublinear jump
penalties), minimizes them with a quasi-Newton line-search loop, and drives
the compression, two-well microstructure and envelope-estimate experiments.
"""
from .energy import (FORMULATIONS, PENALTY_VARIANTS, AssembledEnergy,
                     DiscreteEnergyConfig, EnergyAssembler,
                     NonFiniteEnergyError)
from .harness import (RunConfig, RunRecord, error_norms, load_config,
                      qc_envelope_estimate, run_compression, run_experiment,
                      run_qc_envelope, run_twowell, twowell_data_gradient,
                      wells_fraction)
from .mesh import Edge, Mesh, build_crisscross_mesh, classify_edges, mesh_to_csv
from .minimize import (MinimizeOptions, MinimizeResult, check_gradient,
                       minimize)
from .models import (EnergyModel, TwinningSystem, model_detsq,
                     model_quadratic, model_twowell, solve_twinning,
                     stretch_matrix)
from .quadrature import QuadratureRule, edge_rule, triangle_rule
from .space import DGField, DGSpace, interpolate, locate_points
from .traces import (MatrixField, broken_gradient, broken_seminorm,
                     broken_seminorm_pow, discrete_gradient, lift,
                     reconstruct_continuous)

__version__ = "0.1.0"

__all__ = [
    "AssembledEnergy", "DGField", "DGSpace", "DiscreteEnergyConfig", "Edge",
    "EnergyAssembler", "EnergyModel", "FORMULATIONS", "MatrixField", "Mesh",
    "MinimizeOptions", "MinimizeResult", "NonFiniteEnergyError",
    "PENALTY_VARIANTS", "QuadratureRule", "RunConfig", "RunRecord",
    "TwinningSystem", "broken_gradient", "broken_seminorm",
    "broken_seminorm_pow", "build_crisscross_mesh", "check_gradient",
    "classify_edges", "discrete_gradient", "edge_rule", "error_norms",
    "interpolate", "lift", "load_config", "locate_points", "mesh_to_csv",
    "minimize", "model_detsq", "model_quadratic", "model_twowell",
    "qc_envelope_estimate", "reconstruct_continuous", "run_compression",
    "run_experiment", "run_qc_envelope", "run_twowell", "solve_twinning",
    "stretch_matrix", "triangle_rule", "twowell_data_gradient",
    "wells_fraction",
]
