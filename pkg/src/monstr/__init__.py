"""MONSTR: 2D residual strain tensor reconstruction from strain sinograms.

A measured Bragg-edge strain sinogram is inverted for the full in-plane
strain tensor by iterating four consensus agents (detector data fit,
per-component tomographic MAP reconstruction, stress equilibrium, sample
support) until they agree. See the README for the CLI pipeline.
"""
from monstr._kernels import BACKEND
from monstr.agents import (
    AgentParams,
    QggmrfParams,
    detector_agent,
    equilibrium_agent,
    reconstruction_agent,
    support_agent,
)
from monstr.core import (
    ConfigError,
    DivergenceError,
    Geometry,
    GeometryError,
    MfldError,
    MonstrError,
    ScalarField,
    ShapeMask,
    StrainSinogram,
    TensorField2D,
    VirtualSinogramTensor,
    default_geometry,
    read_field,
    read_mask,
    uniform_angles,
    write_field,
)
from monstr.elasticity import (
    ElasticityModel,
    stiffness_matrix,
    strain_to_stress,
    stress_to_strain,
)
from monstr.forward_model import (
    RayWeights,
    add_noise,
    compute_weights,
    subsample_views,
    synthesize_strain_sinogram,
)
from monstr.mace import MaceState, consensus_nrmse, run_monstr
from monstr.metrics import TensorNrmse, error_field, nrmse
from monstr.phantom import (
    BeamPhantomParams,
    ExperimentSpec,
    cantilever_strain,
    reference_experiments,
)
from monstr.projector import Projector

__version__ = "0.1.0"

__all__ = [
    "AgentParams",
    "BACKEND",
    "BeamPhantomParams",
    "ConfigError",
    "DivergenceError",
    "ElasticityModel",
    "ExperimentSpec",
    "Geometry",
    "GeometryError",
    "MaceState",
    "MfldError",
    "MonstrError",
    "Projector",
    "QggmrfParams",
    "RayWeights",
    "ScalarField",
    "ShapeMask",
    "StrainSinogram",
    "TensorField2D",
    "TensorNrmse",
    "VirtualSinogramTensor",
    "add_noise",
    "cantilever_strain",
    "compute_weights",
    "consensus_nrmse",
    "default_geometry",
    "detector_agent",
    "equilibrium_agent",
    "error_field",
    "nrmse",
    "read_field",
    "read_mask",
    "reconstruction_agent",
    "reference_experiments",
    "run_monstr",
    "stiffness_matrix",
    "strain_to_stress",
    "stress_to_strain",
    "subsample_views",
    "support_agent",
    "synthesize_strain_sinogram",
    "uniform_angles",
    "write_field",
]
