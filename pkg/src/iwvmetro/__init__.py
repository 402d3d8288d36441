"""Inverse-weak-value phase and frequency metrology workbench."""

from iwvmetro.core_model import (
    GaussianMeter,
    Grid,
    InterferometerParams,
    SampledDensity,
    mean_shift_exact,
    pdf_noiseless,
    postselected_amplitude,
    postselection_probability,
    postselection_probability_iwv_approx,
)
from iwvmetro.errors import (
    BoundaryMaximum,
    DegenerateParams,
    GridAliasing,
    GridTooNarrow,
    UnstableCurvature,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryMaximum",
    "DegenerateParams",
    "GaussianMeter",
    "Grid",
    "GridAliasing",
    "GridTooNarrow",
    "InterferometerParams",
    "SampledDensity",
    "UnstableCurvature",
    "mean_shift_exact",
    "pdf_noiseless",
    "postselected_amplitude",
    "postselection_probability",
    "postselection_probability_iwv_approx",
]
