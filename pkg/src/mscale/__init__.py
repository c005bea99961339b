"""Multiscale confidence regions for nonparametric regression on an
equispaced design: taut-string fits, LP-regularized fits within the region,
shape and smoothness confidence bands, and detectability calculators."""

from .bands import (
    Band,
    SmoothnessClass,
    fast_band_convex,
    fast_band_monotone,
    lp_band_convex,
    lp_band_monotone,
    min_consistent_k,
    piecewise_band,
    smoothness_band_fast,
    smoothness_band_lp,
    superfast_band_convex,
    superfast_band_monotone,
    universal_band,
)
from .detect import PeakQuery, Span, default_peak_query, inflection_condition, min_n_for_peak, peak_condition
from .errors import (
    InfeasibleError,
    InsufficientDataError,
    IterationLimitError,
    MscaleError,
    NumericalError,
    ParameterError,
)
from .grid import DesignSample, TestFunction, estimate_sigma, generate_data
from .multires import IntervalFamily, RegionSpec, calibrate_tau, is_member, make_family, multiscale_stat
from .regularize import minimize_supnorm, minimize_tv, supnorm_deriv, tv
from .shape import ShapeSpec
from .tautstring import TautFit, TubeSpec, local_extremes, taut_string, taut_string_multires

__version__ = "0.1.0"
