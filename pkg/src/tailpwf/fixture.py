"""Seeded synthetic 30-asset price panel with an NIG market factor.

The shipped CSVs in ``tailpwf/data`` are ``write_fixture(DEFAULT_SEED)`` output;
``python -m tailpwf.fixture OUTDIR`` regenerates them.
"""
from __future__ import annotations

import math
import sys
import zlib
from datetime import date, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from .distfit import NigParams
from .market_data import PriceSeries, prices_to_csv, price_weighted_index

DEFAULT_SEED = 20250503
N_ASSETS = 30
N_ROWS = 1130
START = date(2020, 11, 19)
BENCHMARK = "DJIA"
PRICES_FILE = "fixture_prices.csv"
BENCHMARK_FILE = "fixture_benchmark.csv"


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Independent stream for ``label`` derived from the root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(label.encode())]))


def _stream_seed(seed: int, label: str) -> int:
    return int(rng_for(seed, label).integers(2**63))


def nig_from_shape(alpha_bar: float, beta_bar: float, mean: float, sd: float) -> NigParams:
    """NIG law with scale-free shape ``(alpha*delta, beta*delta)`` and given mean/sd."""
    g = math.sqrt(alpha_bar**2 - beta_bar**2)
    delta = sd * g**1.5 / alpha_bar
    mu = mean - delta * beta_bar / g
    return NigParams(alpha_bar / delta, beta_bar / delta, mu, delta)


def business_days(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def generate(seed: int = DEFAULT_SEED) -> tuple[list[PriceSeries], PriceSeries]:
    """Asset price series (with a few missing cells) and a price-weighted benchmark."""
    dates = business_days(START, N_ROWS)
    t = N_ROWS - 1
    rng = rng_for(seed, "loadings")
    beta = rng.uniform(0.6, 1.4, N_ASSETS)
    alpha = rng.uniform(-0.0002, 0.0008, N_ASSETS)
    idio_sd = rng.uniform(0.006, 0.016, N_ASSETS)
    idio_shape = rng.uniform(1.2, 3.0, N_ASSETS)
    idio_skew = rng.uniform(-0.4, 0.2, N_ASSETS)
    start_px = np.round(rng.uniform(40.0, 350.0, N_ASSETS), 2)

    market = nig_from_shape(1.6, -0.35, 0.0003, 0.0105).sample(t, _stream_seed(seed, "market"))
    returns = np.empty((t, N_ASSETS))
    for i in range(N_ASSETS):
        law = nig_from_shape(idio_shape[i], idio_skew[i] * idio_shape[i], 0.0, idio_sd[i])
        eps = law.sample(t, _stream_seed(seed, f"idio-{i}"))
        returns[:, i] = alpha[i] + beta[i] * market + eps
    returns = np.clip(returns, -0.5, 0.5)
    prices = start_px * np.vstack([np.ones(N_ASSETS), np.cumprod(1.0 + returns, axis=0)])
    prices = np.round(prices, 4)

    holes = rng_for(seed, "holes")
    missing = {(int(holes.integers(1, N_ROWS - 1)), int(holes.integers(N_ASSETS))) for _ in range(4)}
    tickers = [f"AS{i + 1:02d}" for i in range(N_ASSETS)]
    series = []
    for i, tk in enumerate(tickers):
        keep = [r for r in range(N_ROWS) if (r, i) not in missing]
        series.append(PriceSeries(tk, tuple(dates[r] for r in keep), prices[keep, i]))
    full = [PriceSeries(tk, tuple(dates), prices[:, i]) for i, tk in enumerate(tickers)]
    index = price_weighted_index(full, BENCHMARK, base=30000.0)
    index = PriceSeries(BENCHMARK, index.dates, np.round(index.closes, 4))
    return series, index


def write_fixture(out_dir, seed: int = DEFAULT_SEED) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series, index = generate(seed)
    p, b = out / PRICES_FILE, out / BENCHMARK_FILE
    p.write_text(prices_to_csv(series))
    b.write_text(prices_to_csv([index]))
    return p, b


def bundled_paths() -> tuple[Path, Path]:
    root = resources.files("tailpwf") / "data"
    return Path(str(root / PRICES_FILE)), Path(str(root / BENCHMARK_FILE))


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "data")
    for path in write_fixture(target):
        print(path)
