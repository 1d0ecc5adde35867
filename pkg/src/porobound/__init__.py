"""Bounds on effective moduli of heterogeneous anisotropic poroelastic RVEs."""

__version__ = "0.1.0"

from .bounds import (  # noqa: E402
    BoundsResult,
    PoroelasticBounds,
    canonical_gamma_cases,
    canonical_kappa_cases,
    compute_bounds,
    lower_bound,
    ordering_check,
    reuss_estimate,
    saddle_gap,
    upper_bound,
    voigt_estimate,
)
from .core import (  # noqa: E402
    ComplianceForm,
    MaterialError,
    NumericalError,
    PoroelasticMaterial,
    apply_constitutive,
    assemble_A,
    contract_index,
    expand_index,
    invert_A,
    isotropic_stiffness,
    strain_energy,
    validate_material,
)
from .microstructure import (  # noqa: E402
    Microstructure,
    RVEFormatError,
    homogeneity_score,
    load_rve,
    two_point_probability,
    volume_fractions,
)

__all__ = [
    "BoundsResult", "ComplianceForm", "MaterialError", "Microstructure", "NumericalError",
    "PoroelasticBounds", "PoroelasticMaterial", "RVEFormatError", "apply_constitutive",
    "assemble_A", "canonical_gamma_cases", "canonical_kappa_cases", "compute_bounds",
    "contract_index", "expand_index", "homogeneity_score", "invert_A", "isotropic_stiffness", "load_rve",
    "lower_bound", "ordering_check", "reuss_estimate", "saddle_gap", "strain_energy",
    "two_point_probability", "upper_bound", "validate_material", "voigt_estimate",
    "volume_fractions",
]
