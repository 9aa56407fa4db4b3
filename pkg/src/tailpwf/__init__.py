"""Tail-risk portfolio toolkit: CVaR frontiers, tangency portfolios, NIG fits and
implied probability-weighting functions."""

__version__ = "0.1.0"

from .distfit import (  # noqa: E402
    DistributionFit,
    NigParams,
    NormalParams,
    fit_nig,
    fit_normal,
    gof_metrics,
    nig_cdf,
    nig_pdf,
    nig_quantile,
    nig_sample,
)
from .market_data import ReturnPanel, daily_risk_free, load_prices, to_return_panel  # noqa: E402
from .optimizer import (  # noqa: E402
    cvar_frontier,
    cvar_tangency,
    estimate_moments,
    min_cvar,
    portfolio_cvar,
    sharpe_tangency,
)
from .pwf import distortion_metrics, implied_pwf  # noqa: E402
from .backtest import BacktestConfig, oos_evaluate, rolling_backtest  # noqa: E402

__all__ = [
    "BacktestConfig", "DistributionFit", "NigParams", "NormalParams", "ReturnPanel",
    "cvar_frontier", "cvar_tangency", "daily_risk_free", "distortion_metrics",
    "estimate_moments", "fit_nig", "fit_normal", "gof_metrics", "implied_pwf",
    "load_prices", "min_cvar", "nig_cdf", "nig_pdf", "nig_quantile", "nig_sample",
    "oos_evaluate", "portfolio_cvar", "rolling_backtest", "sharpe_tangency",
    "to_return_panel",
]
