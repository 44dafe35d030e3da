"""American-option pricing under time-dependent coefficients with
discrete cash and proportional dividends, via integral-transform Volterra
equations, plus a binomial-tree oracle and de-Americanization tools."""

from .baseline import TreeResult, tree_boundary, tree_price
from .boundary import (BoundaryCurve, BoundarySolveError, NoBoundaryError,
                       eb_asymptote, solve_boundary)
from .deamericanize import (ImpliedResult, ImpliedStrikeResult,
                            NoSolutionError, SensitivityWarning,
                            dupire_local_variance, implied_sigma,
                            implied_strike_batch, read_quotes_csv,
                            write_quotes_csv, x_substitutions)
from .density import (DensityPath, lognormal_partial_mean_below,
                      lognormal_prob_below)
from .european import EuroSolution, price_european, solve_european
from .model import MarketModel, OptionSpec, RegularizationWarning, TimeMap
from .pricer import PriceReport, price_american

__version__ = "0.1.0"

__all__ = [
    "MarketModel", "OptionSpec", "TimeMap", "RegularizationWarning",
    "EuroSolution", "price_european", "solve_european",
    "DensityPath", "lognormal_prob_below", "lognormal_partial_mean_below",
    "BoundaryCurve", "NoBoundaryError", "BoundarySolveError",
    "solve_boundary", "eb_asymptote",
    "PriceReport", "price_american",
    "TreeResult", "tree_price", "tree_boundary",
    "ImpliedResult", "ImpliedStrikeResult", "NoSolutionError",
    "SensitivityWarning", "implied_sigma", "implied_strike_batch",
    "dupire_local_variance", "x_substitutions",
    "read_quotes_csv", "write_quotes_csv",
    "__version__",
]
