"""Command-line entry point: ``tailpwf <command> [options]``.

Commands: returns, fit, frontier, tangency, backtest, pwf, report.  Every run
writes its artifacts plus ``manifest.json`` to ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .backtest import (
    FAMILIES,
    PORTFOLIOS,
    BacktestConfig,
    fit_table_csv,
    fit_table_json,
    oos_evaluate,
    rolling_backtest,
)
from .distfit import DistributionFit, fit_family, qq_points
from .errors import ConfigError, DataError, DomainError, FitError, OptimizationError, ParseError, TailPwfError
from .fixture import DEFAULT_SEED, bundled_paths, write_fixture
from .market_data import (
    ReturnPanel,
    daily_risk_free,
    format_number,
    load_prices,
    to_return_panel,
)
from .optimizer import (
    cvar_frontier,
    cvar_tangency,
    estimate_moments,
    frontier_to_csv,
    min_cvar,
    sharpe_kkt_residual,
    sharpe_ratio,
    sharpe_tangency,
)
from .pwf import Bands, default_grid, distortion_metrics, implied_pwf

log = logging.getLogger("tailpwf")

COMMANDS = ("returns", "fit", "frontier", "tangency", "backtest", "pwf", "report")
EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DATA, EXIT_FIT, EXIT_OPTIM = 0, 1, 2, 3, 4, 5

DEFAULTS = {
    "prices": None,
    "benchmark": None,
    "returns": None,
    "fixture": False,
    "alpha": 0.99,
    "rf": [0.042, 0.046],
    "trading_days": 252,
    "window": 1008,
    "oos": 100,
    "grid": 999,
    "points": 64,
    "bands": [0.10, 0.90, 0.30, 0.70],
    "out": "tailpwf-out",
    "seed": DEFAULT_SEED,
}


@dataclass
class RunConfig:
    command: str
    prices: Optional[str] = None
    benchmark: Optional[str] = None
    returns: Optional[str] = None
    fixture: bool = False
    alpha: float = 0.99
    rf: list = field(default_factory=lambda: [0.042, 0.046])
    trading_days: int = 252
    window: int = 1008
    oos: int = 100
    grid: int = 999
    points: int = 64
    bands: list = field(default_factory=lambda: [0.10, 0.90, 0.30, 0.70])
    out: str = "tailpwf-out"
    seed: int = DEFAULT_SEED

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.trading_days <= 0:
            raise ConfigError("trading_days must be positive")
        if not self.rf:
            raise ConfigError("at least one --rf rate is required")
        if self.grid < 199:
            # k/(M+1) reaches the 0.005 / 0.995 coverage bands only from M = 199
            raise ConfigError("grid must have at least 199 points")
        if self.points < 2:
            raise ConfigError("points must be at least 2")
        if len(self.bands) != 4:
            raise ConfigError("bands needs four cutoffs: fear_hi greed_lo mid_lo mid_hi")
        for name in ("prices", "benchmark", "returns"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"--{name} file not found: {path}")
        needs_prices = {"returns", "frontier", "tangency", "backtest", "pwf", "report"}
        if self.command in needs_prices and self.prices is None and not self.fixture:
            raise ConfigError(f"{self.command} needs --prices (or --fixture)")
        if self.command in {"backtest", "pwf", "report"} and self.benchmark is None and not self.fixture:
            raise ConfigError(f"{self.command} needs --benchmark (or --fixture)")
        if self.command == "fit" and self.returns is None and self.prices is None:
            raise ConfigError("fit needs --returns or --prices")


class Outputs:
    """Artifact writer that remembers every file for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []
        self.stage = "setup"

    def write(self, name: str, text: str) -> None:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------- inputs


def _resolve_inputs(cfg: RunConfig, out: Outputs) -> tuple[Optional[str], Optional[str]]:
    prices, bench = cfg.prices, cfg.benchmark
    if cfg.fixture:
        if cfg.seed == DEFAULT_SEED:
            p, b = bundled_paths()
        else:
            p, b = write_fixture(out.root / "fixture", cfg.seed)
            out.files += [f"fixture/{p.name}", f"fixture/{b.name}"]
        prices = prices or str(p)
        bench = bench or str(b)
    return prices, bench


def _panels(prices: str, bench: Optional[str]) -> tuple[ReturnPanel, Optional[ReturnPanel]]:
    assets = load_prices(prices)
    if bench is None:
        return to_return_panel(assets), None
    index = load_prices(bench)
    if len(index) != 1:
        raise DataError(f"benchmark file must have exactly one price column, found {len(index)}")
    names = {s.ticker for s in assets}
    if index[0].ticker in names:
        raise DataError(f"benchmark ticker {index[0].ticker!r} also appears among assets")
    joint = to_return_panel(assets + index)
    asset_cols = [t for t in joint.tickers if t != index[0].ticker]
    return joint.select(asset_cols), joint.select([index[0].ticker])


def read_samples(path: str) -> dict[str, np.ndarray]:
    """Columns of a CSV as float arrays; a leading ``date`` column is ignored."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    skip = 1 if header[0].lower() == "date" else 0
    cols: dict[str, list[float]] = {h: [] for h in header[skip:]}
    for line, row in enumerate(rows[1:], start=2):
        for h, cell in zip(header[skip:], row[skip:]):
            if cell.strip():
                try:
                    cols[h].append(float(cell))
                except ValueError as exc:
                    raise ParseError(f"{path} row {line}: not a number {cell!r}") from exc
    return {h: np.array(v) for h, v in cols.items()}


# --------------------------------------------------------------------------- stages


def _rf_label(annual: float) -> str:
    return f"rf{annual:g}"


def _fit_both(x: np.ndarray) -> dict[str, DistributionFit]:
    return {fam: fit_family(fam, x) for fam in FAMILIES}


def _qq_csv(fit: DistributionFit, x: np.ndarray) -> str:
    pts = qq_points(fit, x)
    lines = ["theoretical_quantile,empirical_quantile"]
    lines += [f"{format_number(a)},{format_number(b)}" for a, b in pts]
    return "\n".join(lines) + "\n"


def _stage_fit(cfg: RunConfig, out: Outputs, prices: Optional[str]) -> None:
    out.stage = "fit"
    if cfg.returns is not None:
        columns = read_samples(cfg.returns)
    else:
        panel = to_return_panel(load_prices(prices))
        columns = {t: panel.column(t) for t in panel.tickers}
    for name, x in columns.items():
        fits = _fit_both(x)
        out.json(f"fit_{name}.json", {fam: f.to_dict() for fam, f in fits.items()})
        for fam, f in fits.items():
            out.write(f"qq_{name}_{fam}.csv", _qq_csv(f, x))


def _sharpe_record(m, w, rf, tickers) -> dict:
    return {
        "weights": {t: float(v) for t, v in zip(tickers, w)},
        "expected_return": float(m.mu @ w),
        "volatility": float(np.sqrt(w @ m.sigma @ w)),
        "objective_ratio": sharpe_ratio(m, w, rf),
        "rf_daily": rf.daily_rate,
        "rf_annual": rf.annual_rate,
        "kkt_residual": sharpe_kkt_residual(m, w, rf),
    }


def _stage_tangency(cfg, out, panel, with_frontier: bool):
    out.stage = "moments"
    m = estimate_moments(panel)
    out.json("moments.json", {
        "tickers": list(panel.tickers),
        "mu": m.mu.tolist(),
        "sigma": m.sigma.tolist(),
    })
    out.stage = "sharpe_tangency"
    for annual in cfg.rf:
        rf = daily_risk_free(annual, cfg.trading_days)
        w = sharpe_tangency(m, rf)
        out.json(f"sharpe_tangency_{_rf_label(annual)}.json", _sharpe_record(m, w, rf, panel.tickers))
    out.stage = "min_cvar"
    base = min_cvar(panel, cfg.alpha)
    out.json("min_cvar.json", base.to_dict(panel.tickers))
    if with_frontier:
        out.stage = "cvar_frontier"
        out.write("frontier.csv", frontier_to_csv(cvar_frontier(panel, cfg.alpha, cfg.points), panel.tickers))
    out.stage = "cvar_tangency"
    tangents = {}
    for annual in cfg.rf:
        rf = daily_risk_free(annual, cfg.trading_days)
        sol = cvar_tangency(panel, cfg.alpha, rf, n_points=max(cfg.points, 64))
        rec = sol.to_dict(panel.tickers)
        rec.update({"rf_daily": rf.daily_rate, "rf_annual": annual})
        out.json(f"cvar_tangency_{_rf_label(annual)}.json", rec)
        tangents[annual] = sol
    return base, tangents


def _backtest_config(cfg: RunConfig) -> BacktestConfig:
    return BacktestConfig(
        window_days=cfg.window,
        oos_days=cfg.oos,
        confidence=cfg.alpha,
        rf=daily_risk_free(cfg.rf[0], cfg.trading_days),
    )


def _stage_backtest(cfg, out, panel, bench):
    out.stage = "backtest"
    result = rolling_backtest(panel, bench, _backtest_config(cfg), evaluate=False)
    out.write("oos_returns.csv", result.to_csv())
    out.json("backtest.json", {
        "oos_start": result.dates[0].isoformat(),
        "oos_end": result.dates[-1].isoformat(),
        "window_days": cfg.window,
        "oos_days": cfg.oos,
        "rf_annual": cfg.rf[0],
        "weights_sharpe": {t: float(v) for t, v in zip(panel.tickers, result.weights_sharpe)},
        "weights_cvar": {t: float(v) for t, v in zip(panel.tickers, result.weights_cvar)},
    })
    out.stage = "oos_fits"
    table = oos_evaluate(result)
    out.write("fit_table.csv", fit_table_csv(table))
    out.write("fit_table.json", fit_table_json(table) + "\n")
    for (name, fam), f in table.items():
        if isinstance(f, DistributionFit):
            out.write(f"qq_oos_{name}_{fam}.csv", _qq_csv(f, result.series(name)))
    return result, table


def _write_pwf(cfg, out, metrics, key, subjective, objective):
    curve = implied_pwf(subjective, objective, default_grid(cfg.grid))
    out.write(f"pwf_{key}.csv", curve.to_csv())
    metrics[key] = distortion_metrics(curve, Bands(*cfg.bands)).to_dict()


def _stage_pwf_oos(cfg, out, table, metrics):
    out.stage = "pwf_oos"
    for fam in FAMILIES:
        obj = table[("benchmark", fam)]
        if not isinstance(obj, DistributionFit):
            continue
        for name in PORTFOLIOS[:2]:
            sub = table[(name, fam)]
            if isinstance(sub, DistributionFit):
                _write_pwf(cfg, out, metrics, f"oos_{name}_{fam}_{_rf_label(cfg.rf[0])}", sub, obj)


def _stage_pwf_insample(cfg, out, panel, bench, base, tangents, metrics):
    out.stage = "pwf_insample"
    bx = bench.returns[:, 0]
    portfolios = [("min_cvar", "all", base.weights)]
    portfolios += [("cvar_tangency", _rf_label(a), s.weights) for a, s in tangents.items()]
    for fam in FAMILIES:
        obj = fit_family(fam, bx)
        for name, regime, w in portfolios:
            sub = fit_family(fam, panel.returns @ w)
            _write_pwf(cfg, out, metrics, f"insample_{name}_{fam}_{regime}", sub, obj)


def execute(cfg: RunConfig, out: Outputs) -> None:
    prices, bench_path = _resolve_inputs(cfg, out)
    if cfg.command == "fit":
        _stage_fit(cfg, out, prices)
        return
    out.stage = "returns"
    panel, bench = _panels(prices, bench_path)
    if cfg.command in ("returns", "report"):
        out.write("panel.csv", panel.to_csv())
        if bench is not None:
            out.write("benchmark_panel.csv", bench.to_csv())
    if cfg.command == "frontier":
        out.stage = "cvar_frontier"
        out.json("min_cvar.json", min_cvar(panel, cfg.alpha).to_dict(panel.tickers))
        out.write("frontier.csv", frontier_to_csv(cvar_frontier(panel, cfg.alpha, cfg.points), panel.tickers))
    elif cfg.command == "tangency":
        _stage_tangency(cfg, out, panel, with_frontier=False)
    elif cfg.command in ("backtest", "pwf"):
        _, table = _stage_backtest(cfg, out, panel, bench)
        if cfg.command == "pwf":
            metrics: dict = {}
            _stage_pwf_oos(cfg, out, table, metrics)
            out.json("pwf_metrics.json", metrics)
    elif cfg.command == "report":
        base, tangents = _stage_tangency(cfg, out, panel, with_frontier=True)
        _, table = _stage_backtest(cfg, out, panel, bench)
        metrics = {}
        _stage_pwf_insample(cfg, out, panel, bench, base, tangents, metrics)
        _stage_pwf_oos(cfg, out, table, metrics)
        out.json("pwf_metrics.json", metrics)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, FitError):
        return EXIT_FIT
    if isinstance(exc, OptimizationError):
        return EXIT_OPTIM
    if isinstance(exc, DomainError):
        return EXIT_CONFIG
    return EXIT_OTHER


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    out = Outputs(Path(cfg.out))
    out.root.mkdir(parents=True, exist_ok=True)
    status, code, message = "ok", EXIT_OK, None
    try:
        execute(cfg, out)
    except TailPwfError as exc:
        status, code, message = "failed", _exit_code(exc), str(exc)
        log.error("%s stage failed: %s", out.stage, exc)
    manifest = {
        "toolkit": "tailpwf",
        "version": __version__,
        "command": cfg.command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "kernel_backend": kernels.BACKEND,
        "status": status,
        "failed_stage": out.stage if status != "ok" else None,
        "error": message,
        "files": sorted(out.files),
    }
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code


# --------------------------------------------------------------------------- argv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prices", help="wide price CSV: date,T1,...,TN")
    common.add_argument("--benchmark", help="single-column benchmark price CSV")
    common.add_argument("--returns", help="returns/sample CSV (fit command)")
    common.add_argument("--fixture", action="store_true", default=None,
                        help="use the bundled synthetic 30-asset fixture")
    common.add_argument("--alpha", type=float, help="CVaR confidence level (default 0.99)")
    common.add_argument("--rf", type=float, action="append", help="annual risk-free rate; repeatable")
    common.add_argument("--trading-days", dest="trading_days", type=int)
    common.add_argument("--window", type=int, help="estimation window in rows (default 1008)")
    common.add_argument("--oos", type=int, help="out-of-sample rows (default 100)")
    common.add_argument("--grid", type=int, help="PWF grid size (default 999)")
    common.add_argument("--points", type=int, help="frontier points (default 64)")
    common.add_argument("--bands", type=float, nargs=4, metavar=("FEAR_HI", "GREED_LO", "MID_LO", "MID_HI"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="flat JSON object of option defaults")
    common.add_argument("-v", "--verbose", action="store_true", default=None)
    parser = argparse.ArgumentParser(prog="tailpwf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    """Merge built-in defaults < config file < command-line flags."""
    values = dict(DEFAULTS)
    if ns.config:
        try:
            with open(ns.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a flat JSON object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for key in DEFAULTS:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(command=ns.command, **values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
