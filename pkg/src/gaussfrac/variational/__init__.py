"""Fractional perimeters, the coarea functional, the isoperimetric scan and
the nonlocal Allen-Cahn problem."""

from gaussfrac.variational.allen_cahn import (
    AllenCahnResult,
    ConvergenceWarning,
    Potential,
    allen_cahn_1d,
    allen_cahn_nd,
    parse_potential,
)
from gaussfrac.variational.coarea import coarea_Vs
from gaussfrac.variational.isoscan import CandidateRecord, IsoReport, candidate_sets, isoperimetric_scan
from gaussfrac.variational.onedim import one_dim_residual, profile_coefficients
from gaussfrac.variational.perimeter import (
    DivergenceWarning,
    PerimeterResult,
    frac_perimeter,
    indicator_seminorm,
    perimeter_extension,
    perimeter_semigroup,
    perimeter_spectral,
)
from gaussfrac.variational.sets import (
    Ball,
    Halfspace,
    PerturbedHalfspace,
    Quadrant,
    RawIndicator,
    SetSpec,
    Strip,
    calibrate_mass,
    gaussian_mass,
)

__all__ = [
    "AllenCahnResult",
    "Ball",
    "CandidateRecord",
    "ConvergenceWarning",
    "DivergenceWarning",
    "Halfspace",
    "IsoReport",
    "PerimeterResult",
    "PerturbedHalfspace",
    "Potential",
    "Quadrant",
    "RawIndicator",
    "SetSpec",
    "Strip",
    "allen_cahn_1d",
    "allen_cahn_nd",
    "calibrate_mass",
    "candidate_sets",
    "coarea_Vs",
    "frac_perimeter",
    "gaussian_mass",
    "indicator_seminorm",
    "isoperimetric_scan",
    "one_dim_residual",
    "parse_potential",
    "perimeter_extension",
    "perimeter_semigroup",
    "perimeter_spectral",
    "profile_coefficients",
]
