"""Price ingestion, date alignment, arithmetic returns and risk-free rates."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from datetime import date
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import AlignmentError, DomainError, InputError, ParseError, ValidationError

TRADING_DAYS = 252


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    dates: tuple[date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=np.float64)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if closes.shape != (len(self.dates),):
            raise ValidationError(f"{self.ticker}: {len(self.dates)} dates but {closes.size} closes")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError(f"{self.ticker}: dates must be strictly increasing")
        if not np.all(np.isfinite(closes) & (closes > 0)):
            raise ValidationError(f"{self.ticker}: closes must be finite and positive")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned T x N matrix of daily arithmetic returns."""

    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    returns: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=np.float64)
        if r.ndim == 1:
            r = r[:, None]
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        if r.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError(
                f"returns shape {r.shape} does not match {len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if len(self.tickers) < 1:
            raise ValidationError("panel needs at least one ticker")
        if not np.all(np.isfinite(r)):
            raise ValidationError("panel contains non-finite returns")

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def column(self, ticker: str) -> np.ndarray:
        return self.returns[:, self.tickers.index(ticker)]

    def select(self, tickers: Sequence[str]) -> "ReturnPanel":
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnPanel(tuple(tickers), self.dates, self.returns[:, idx])

    def rows(self, start: int, stop: int) -> "ReturnPanel":
        return ReturnPanel(self.tickers, self.dates[start:stop], self.returns[start:stop])

    def to_csv(self) -> str:
        """Canonical CSV: ``date,T1,...,TN`` with 12 significant digits."""
        return _format_wide(self.tickers, self.dates, self.returns)


@dataclass(frozen=True)
class RiskFreeRate:
    annual_rate: float
    trading_days: int = TRADING_DAYS

    def __post_init__(self):
        if self.trading_days <= 0:
            raise DomainError(f"trading_days must be positive, got {self.trading_days}")

    @property
    def daily_rate(self) -> float:
        return self.annual_rate / self.trading_days


def daily_risk_free(annual_rate: float, trading_days: int = TRADING_DAYS) -> RiskFreeRate:
    """Convert an annualised rate to a per-day rate by simple division."""
    return RiskFreeRate(float(annual_rate), int(trading_days))


def _open_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8-sig"))
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, newline="", encoding="utf-8-sig")
        except FileNotFoundError as exc:
            raise InputError(f"no such file: {source}") from exc
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def _read_wide(source) -> tuple[list[str], list[tuple[int, date, list[str]]]]:
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise ParseError(f"row {line_no}: malformed date {row[0]!r}") from exc
            rows.append((line_no, d, row[1:]))
    finally:
        if fh is not source:
            fh.close()
    if header is None or len(header) < 2:
        raise InputError("empty CSV or header without ticker columns")
    if header[0].strip().lower() != "date":
        raise InputError(f"first header column must be 'date', got {header[0]!r}")
    tickers = [h.strip() for h in header[1:]]
    if len(set(tickers)) != len(tickers):
        raise InputError("duplicate ticker columns in header")
    if not rows:
        raise InputError("CSV has a header but no data rows")
    return tickers, rows


def load_prices(source) -> list[PriceSeries]:
    """Read a wide price CSV (``date,T1,...,TN``) into one series per ticker.

    ``source`` may be raw bytes, a path, or an open text/binary stream.  Empty
    cells are missing observations and are simply omitted from that series.
    """
    tickers, rows = _read_wide(source)
    cols: dict[str, list[tuple[date, float]]] = {t: [] for t in tickers}
    for line_no, d, cells in rows:
        if len(cells) > len(tickers):
            raise ParseError(f"row {line_no}: {len(cells)} cells for {len(tickers)} tickers")
        for ticker, cell in zip(tickers, cells):
            cell = cell.strip()
            if not cell:
                continue
            try:
                value = float(cell)
            except ValueError as exc:
                raise ParseError(f"row {line_no}, {ticker}: not a number {cell!r}") from exc
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"row {line_no}, {ticker}: price must be positive, got {cell}")
            cols[ticker].append((d, value))
    out = []
    for ticker in tickers:
        points = sorted(cols[ticker], key=lambda p: p[0])
        for (d0, _), (d1, _) in zip(points, points[1:]):
            if d0 == d1:
                raise ValidationError(f"{ticker}: duplicate date {d0.isoformat()}")
        out.append(
            PriceSeries(ticker, tuple(p[0] for p in points), np.array([p[1] for p in points]))
        )
    return out


def to_return_panel(series: Iterable[PriceSeries]) -> ReturnPanel:
    """Arithmetic returns on the dates shared by every series.

    The first shared date is consumed as the base price; each later return is
    computed against the previous shared date, whatever the gap.
    """
    series = sorted(series, key=lambda s: s.ticker)
    if not series:
        raise AlignmentError("no price series given")
    names = [s.ticker for s in series]
    if len(set(names)) != len(names):
        raise AlignmentError(f"duplicate tickers: {names}")
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if len(common) < 2:
        ranges = ", ".join(
            f"{s.ticker}: {s.dates[0].isoformat()}..{s.dates[-1].isoformat()}" if len(s) else f"{s.ticker}: empty"
            for s in series
        )
        raise AlignmentError(f"date intersection has {len(common)} dates, need >= 2 ({ranges})")
    dates = sorted(common)
    prices = np.empty((len(dates), len(series)))
    for j, s in enumerate(series):
        lookup = dict(zip(s.dates, s.closes))
        prices[:, j] = [lookup[d] for d in dates]
    returns = prices[1:] / prices[:-1] - 1.0
    return ReturnPanel(tuple(names), tuple(dates[1:]), returns)


def read_return_panel(source) -> ReturnPanel:
    """Parse a canonical return-panel CSV (as written by ``ReturnPanel.to_csv``)."""
    tickers, rows = _read_wide(source)
    values = np.empty((len(rows), len(tickers)))
    for i, (line_no, _, cells) in enumerate(rows):
        if len(cells) != len(tickers):
            raise ParseError(f"row {line_no}: expected {len(tickers)} cells, got {len(cells)}")
        try:
            values[i] = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"row {line_no}: non-numeric return") from exc
    return ReturnPanel(tuple(tickers), tuple(r[1] for r in rows), values)


def price_weighted_index(series: Sequence[PriceSeries], ticker: str = "INDEX", base: float = 100.0) -> PriceSeries:
    """Price-weighted basket: sum of closes over a divisor fixed at the first shared date.

    Stand-in for a published index level when index data are unavailable.
    """
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if not common:
        raise AlignmentError("series share no dates")
    dates = sorted(common)
    total = np.zeros(len(dates))
    for s in series:
        lookup = dict(zip(s.dates, s.closes))
        total += [lookup[d] for d in dates]
    divisor = total[0] / base
    return PriceSeries(ticker, tuple(dates), total / divisor)


def _format_wide(tickers, dates, values) -> str:
    buf = io.StringIO()
    buf.write("date," + ",".join(tickers) + "\n")
    for d, row in zip(dates, values):
        buf.write(d.isoformat() + "," + ",".join(format_number(v) for v in row) + "\n")
    return buf.getvalue()


def format_number(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.12g}"


def prices_to_csv(series: Sequence[PriceSeries]) -> str:
    """Wide price CSV over the union of dates; missing cells left empty."""
    series = sorted(series, key=lambda s: s.ticker)
    dates = sorted(set().union(*(s.dates for s in series)))
    grid = np.full((len(dates), len(series)), np.nan)
    pos = {d: i for i, d in enumerate(dates)}
    for j, s in enumerate(series):
        for d, c in zip(s.dates, s.closes):
            grid[pos[d], j] = c
    return _format_wide([s.ticker for s in series], dates, grid)
