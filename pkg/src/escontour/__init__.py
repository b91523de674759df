"""Monte Carlo contour maps of estimation error for Expected Shortfall portfolio optimization."""

__version__ = "0.1.0"

from escontour.sampling import (
    CovarianceMatrix,
    DistributionSpec,
    Family,
    NotPositiveDefinite,
    ReturnMatrix,
    StreamKey,
    cholesky,
    load_returns_csv,
    make_stream,
    sample_returns,
)
from escontour.lp import (
    LinearProgram,
    LpOutcome,
    NumericalBreakdown,
    Relation,
    ResidualReport,
    Verdict,
    check_solution,
    solve,
)
from escontour.esopt import (
    EsSolution,
    MomentEstimates,
    PortfolioWeights,
    SingularCovariance,
    UnboundedVerdict,
    build_ru_lp,
    estimate_moments,
    gaussian_es_coefficient,
    historical_es,
    min_variance_weights,
    optimize_es_historical,
    optimize_es_parametric,
    portfolio_losses,
)
from escontour.estimators import (
    HistoricalEsOptimizer,
    MinVarianceOptimizer,
    ParametricEsOptimizer,
)
from escontour.mc import CellSpec, CellStats, Estimator, delta_of_weights, run_cell
from escontour.contour_map import (
    BoundaryCurve,
    ContourSet,
    GridResult,
    GridSpec,
    InsufficientSpan,
    extract_contours,
    fit_boundary,
    sweep,
)

__all__ = [
    "__version__",
    "BoundaryCurve",
    "CellSpec",
    "CellStats",
    "ContourSet",
    "CovarianceMatrix",
    "DistributionSpec",
    "Estimator",
    "EsSolution",
    "Family",
    "GridResult",
    "GridSpec",
    "HistoricalEsOptimizer",
    "InsufficientSpan",
    "LinearProgram",
    "LpOutcome",
    "MinVarianceOptimizer",
    "MomentEstimates",
    "NotPositiveDefinite",
    "NumericalBreakdown",
    "ParametricEsOptimizer",
    "PortfolioWeights",
    "Relation",
    "ResidualReport",
    "ReturnMatrix",
    "SingularCovariance",
    "StreamKey",
    "UnboundedVerdict",
    "Verdict",
    "build_ru_lp",
    "check_solution",
    "cholesky",
    "delta_of_weights",
    "estimate_moments",
    "extract_contours",
    "fit_boundary",
    "gaussian_es_coefficient",
    "historical_es",
    "load_returns_csv",
    "make_stream",
    "min_variance_weights",
    "optimize_es_historical",
    "optimize_es_parametric",
    "portfolio_losses",
    "run_cell",
    "sample_returns",
    "solve",
    "sweep",
]
