"""Window estimation and out-of-sample evaluation of the tangency portfolios."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from datetime import date
from typing import Optional, Union

import numpy as np

from .distfit import NIG, NORMAL, DistributionFit, fit_family
from .errors import DegenerateSampleError, FitError, ValidationError, WindowError
from .market_data import ReturnPanel, RiskFreeRate, daily_risk_free, format_number
from .optimizer import cvar_tangency, estimate_moments, sharpe_tangency

PORTFOLIOS = ("sharpe", "cvar", "benchmark")
FAMILIES = (NORMAL, NIG)
FOUR_YEARS = 4 * 252


@dataclass(frozen=True)
class BacktestConfig:
    window_days: int = FOUR_YEARS
    oos_days: int = 100
    confidence: float = 0.99
    rf: RiskFreeRate = field(default_factory=lambda: daily_risk_free(0.042))
    rebalance: str = "hold-once"
    stride: Optional[int] = None  # re-estimate every `stride` OOS days; None = one split

    def __post_init__(self):
        if self.window_days < 2:
            raise ValidationError("window_days must be at least 2")
        if self.oos_days < 1:
            raise ValidationError("oos_days must be at least 1")
        if self.rebalance != "hold-once":
            raise ValidationError(f"unsupported rebalance mode {self.rebalance!r}")
        if self.stride is not None and self.stride < 1:
            raise ValidationError("stride must be positive")


@dataclass(frozen=True)
class Segment:
    """One estimation/hold block: weights estimated on rows [est_start, est_stop)."""

    est_start: int
    est_stop: int
    oos_stop: int
    weights_sharpe: np.ndarray
    weights_cvar: np.ndarray


@dataclass
class FitFailure:
    portfolio: str
    family: str
    message: str


@dataclass
class BacktestResult:
    dates: tuple[date, ...]
    sharpe_returns: np.ndarray
    cvar_returns: np.ndarray
    benchmark_returns: np.ndarray
    weights_sharpe: np.ndarray
    weights_cvar: np.ndarray
    tickers: tuple[str, ...] = ()
    segments: list[Segment] = field(default_factory=list)
    fits: list[DistributionFit] = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return {"sharpe": self.sharpe_returns, "cvar": self.cvar_returns, "benchmark": self.benchmark_returns}[name]

    def to_csv(self) -> str:
        """Per-day OOS returns plus explicitly labelled cumulative sums."""
        cols = [self.sharpe_returns, self.cvar_returns, self.benchmark_returns]
        cums = [np.cumsum(c) for c in cols]
        buf = io.StringIO()
        buf.write("date,sharpe,cvar,benchmark,sharpe_cumsum,cvar_cumsum,benchmark_cumsum\n")
        for i, d in enumerate(self.dates):
            vals = [c[i] for c in cols] + [c[i] for c in cums]
            buf.write(d.isoformat() + "," + ",".join(format_number(v) for v in vals) + "\n")
        return buf.getvalue()


def _split(n_obs: int, cfg: BacktestConfig) -> tuple[int, int]:
    need = cfg.window_days + cfg.oos_days
    if n_obs < need:
        raise WindowError(f"need {need} return rows (window {cfg.window_days} + oos {cfg.oos_days}), have {n_obs}")
    oos_start = n_obs - cfg.oos_days
    return oos_start - cfg.window_days, oos_start


def estimation_rows(n_obs: int, cfg: BacktestConfig) -> tuple[range, range]:
    """Row ranges of the terminal estimation window and the OOS span."""
    est_start, oos_start = _split(n_obs, cfg)
    return range(est_start, oos_start), range(oos_start, n_obs)


def _estimate(window: np.ndarray, cfg: BacktestConfig) -> tuple[np.ndarray, np.ndarray]:
    ws = sharpe_tangency(estimate_moments(window), cfg.rf)
    wc = cvar_tangency(window, cfg.confidence, cfg.rf).weights
    return ws, wc


def rolling_backtest(
    panel: ReturnPanel, benchmark: ReturnPanel, cfg: BacktestConfig = BacktestConfig(), evaluate: bool = True
) -> BacktestResult:
    """Estimate on the window before the final ``oos_days`` rows, hold through them.

    With ``cfg.stride`` set, the OOS span is cut into blocks of ``stride`` days and
    each block is held with weights estimated on the ``window_days`` rows right
    before it.  Weights never see the rows they are applied to.
    """
    if benchmark.n_assets != 1:
        raise ValidationError("benchmark panel must have exactly one column")
    if panel.dates != benchmark.dates:
        raise ValidationError("panel and benchmark must share the same dates")
    r = panel.returns
    n = r.shape[0]
    _, oos_start = _split(n, cfg)
    stride = cfg.stride or cfg.oos_days
    segments = []
    sharpe = np.empty(cfg.oos_days)
    cvar = np.empty(cfg.oos_days)
    for block in range(oos_start, n, stride):
        stop = min(block + stride, n)
        est = block - cfg.window_days
        ws, wc = _estimate(r[est:block], cfg)
        segments.append(Segment(est, block, stop, ws, wc))
        sharpe[block - oos_start : stop - oos_start] = r[block:stop] @ ws
        cvar[block - oos_start : stop - oos_start] = r[block:stop] @ wc
    result = BacktestResult(
        dates=panel.dates[oos_start:],
        sharpe_returns=sharpe,
        cvar_returns=cvar,
        benchmark_returns=benchmark.returns[oos_start:, 0].copy(),
        weights_sharpe=segments[0].weights_sharpe,
        weights_cvar=segments[0].weights_cvar,
        tickers=panel.tickers,
        segments=segments,
    )
    if evaluate:
        table = oos_evaluate(result)
        result.fits = [f for f in table.values() if isinstance(f, DistributionFit)]
    return result


FitTable = dict[tuple[str, str], Union[DistributionFit, FitFailure]]


def oos_evaluate(result: BacktestResult) -> FitTable:
    """Normal and NIG fits for each of the three OOS series; failures are kept as markers."""
    table: FitTable = {}
    for name in PORTFOLIOS:
        x = result.series(name)
        for fam in FAMILIES:
            try:
                table[(name, fam)] = fit_family(fam, x)
            except (DegenerateSampleError, FitError) as exc:
                table[(name, fam)] = FitFailure(name, fam, str(exc))
    return table


_LABEL = {NORMAL: "Normal", NIG: "NIG", "sharpe": "Sharpe", "cvar": "CVaR", "benchmark": "DJIA"}


def fit_table_csv(table: FitTable) -> str:
    buf = io.StringIO()
    buf.write("portfolio,distribution,aic,bic,ks,loglik,n,status\n")
    for (name, fam), f in table.items():
        if isinstance(f, DistributionFit):
            cells = [format_number(v) for v in (f.aic, f.bic, f.ks, f.log_likelihood)] + [str(f.n), "ok"]
        else:
            cells = ["", "", "", "", "", "failed: " + f.message.replace(",", ";")]
        buf.write(f"{_LABEL[name]},{_LABEL[fam]}," + ",".join(cells) + "\n")
    return buf.getvalue()


def fit_table_json(table: FitTable) -> str:
    rows = []
    for (name, fam), f in table.items():
        row = {"portfolio": _LABEL[name], "distribution": _LABEL[fam]}
        if isinstance(f, DistributionFit):
            row.update(f.to_dict())
            row["status"] = "ok"
        else:
            row.update({"status": "failed", "error": f.message})
        rows.append(row)
    return json.dumps(rows, indent=2, sort_keys=True)
