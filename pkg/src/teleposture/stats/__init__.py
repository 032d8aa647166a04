"""Statistical primitives: PMAD, DTW, ADF unit-root test, power-law tail fitting."""

from .adf import AdfResult, adf_test
from .dtw import DtwResult, dtw, dtw_distance, dtw_distance_matrix, path_cost
from .pmad import pmad
from .powerlaw import PowerLawFit, ks_statistic, powerlaw_fit

__all__ = [
    "AdfResult",
    "DtwResult",
    "PowerLawFit",
    "adf_test",
    "dtw",
    "dtw_distance",
    "dtw_distance_matrix",
    "ks_statistic",
    "path_cost",
    "pmad",
    "powerlaw_fit",
]
