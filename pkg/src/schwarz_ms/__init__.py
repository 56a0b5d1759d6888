"""Two-level overlapping Schwarz solver with spectral multiscale coarse spaces."""

__version__ = "0.1.0"

from .mesh import (
    CoefficientField,
    ConstantSpec,
    LogUniformSpec,
    Mesh,
    build_mesh,
    coefficient_from_csv,
    coefficient_to_csv,
    sample_coefficient,
)
from .fem import (
    DofMap,
    assemble_load,
    assemble_stiffness,
    assemble_weighted_mass,
    export_matrix_market,
    nodal_interpolant_product,
)
from .partition import (
    DomainPartition,
    OversampledRegion,
    PartitionOfUnity,
    build_oversampled,
    build_partition,
    build_pou,
)
from .spectral import AuxSpace, SubdomainModes, build_aux_space, local_gevp, spectra_to_csv
from .coarse import (
    CoarseSpace,
    EnergyForms,
    apply_pi,
    build_coarse_space,
    build_forms,
    build_galvis_coarse,
    build_glb_basis,
    build_ms_basis,
    decay_profile,
    energy_norm,
)
from .precond import SchwarzPreconditioner, build_preconditioner
from .krylov import SolveReport, dense_spectrum_oracle, pcg
from .cli import ExperimentConfig, emit, parse_report_csv, run_experiment

__all__ = [
    "AuxSpace",
    "CoarseSpace",
    "CoefficientField",
    "ConstantSpec",
    "DofMap",
    "DomainPartition",
    "EnergyForms",
    "ExperimentConfig",
    "LogUniformSpec",
    "Mesh",
    "OversampledRegion",
    "PartitionOfUnity",
    "SchwarzPreconditioner",
    "SolveReport",
    "SubdomainModes",
    "apply_pi",
    "assemble_load",
    "assemble_stiffness",
    "assemble_weighted_mass",
    "build_aux_space",
    "build_coarse_space",
    "build_forms",
    "build_galvis_coarse",
    "build_glb_basis",
    "build_mesh",
    "build_ms_basis",
    "build_oversampled",
    "build_partition",
    "build_pou",
    "build_preconditioner",
    "coefficient_from_csv",
    "coefficient_to_csv",
    "decay_profile",
    "dense_spectrum_oracle",
    "emit",
    "energy_norm",
    "export_matrix_market",
    "local_gevp",
    "nodal_interpolant_product",
    "parse_report_csv",
    "pcg",
    "run_experiment",
    "sample_coefficient",
    "spectra_to_csv",
]
