import io
import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailpwf.errors import AlignmentError, DomainError, InputError, ParseError, ValidationError
from tailpwf.fixture import N_ASSETS, N_ROWS
from tailpwf.market_data import (
    PriceSeries,
    RiskFreeRate,
    daily_risk_free,
    load_prices,
    price_weighted_index,
    prices_to_csv,
    read_return_panel,
    to_return_panel,
)


def _series(ticker, closes, start=date(2021, 1, 4), skip=()):
    days = [start + timedelta(days=i) for i in range(len(closes) + len(skip)) if i not in skip]
    return PriceSeries(ticker, tuple(days), np.asarray(closes, dtype=float))


def test_minimal_csv():
    out = load_prices(b"date,AAPL\n2021-01-04,100.0\n2021-01-05,101.0\n")
    assert len(out) == 1
    assert out[0].ticker == "AAPL"
    assert len(out[0]) == 2
    np.testing.assert_array_equal(out[0].closes, [100.0, 101.0])


def test_path_and_stream_sources(tmp_path):
    text = "date,B,A\n2021-01-05,2,3\n2021-01-04,1,2\n"
    p = tmp_path / "px.csv"
    p.write_text(text)
    for src in (p, str(p), io.BytesIO(text.encode()), io.StringIO(text)):
        out = load_prices(src)
        assert [s.ticker for s in out] == ["B", "A"]
        assert out[0].dates == (date(2021, 1, 4), date(2021, 1, 5))


def test_negative_price_names_row_and_ticker():
    with pytest.raises(ValidationError, match=r"row 3.*AAPL"):
        load_prices(b"date,AAPL\n2021-01-04,100.0\n2021-01-05,-5.0\n")


def test_malformed_date_names_row():
    with pytest.raises(ParseError, match="row 2"):
        load_prices(b"date,X\n04/01/2021,1.0\n")


@pytest.mark.parametrize("payload", [b"", b"date,X\n", b"\n"])
def test_empty_input(payload):
    with pytest.raises(InputError):
        load_prices(payload)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_prices(tmp_path / "nope.csv")


def test_missing_cells_omitted():
    out = load_prices(b"date,A,B\n2021-01-04,1,2\n2021-01-05,,3\n2021-01-06,2,4\n")
    assert len(out[0]) == 2 and len(out[1]) == 3


def test_fixture_counts(fixture_series):
    assets, bench = fixture_series
    assert len(assets) == N_ASSETS == 30
    assert all(len(s) <= N_ROWS == 1130 for s in assets)
    assert sum(N_ROWS - len(s) for s in assets) > 0
    assert len(bench) == 1 and len(bench[0]) == N_ROWS


def test_returns_hand_arithmetic():
    p = to_return_panel([_series("X", [100, 110, 99])])
    np.testing.assert_allclose(p.returns[:, 0], [0.10, -0.10], rtol=0, atol=1e-15)
    flat = to_return_panel([_series("X", [50, 50, 50])])
    np.testing.assert_array_equal(flat.returns[:, 0], [0.0, 0.0])


def test_gap_is_bridged_by_intersection():
    a = _series("A", [100, 105, 120])
    b = _series("B", [10, 12], skip=(1,))
    p = to_return_panel([a, b])
    assert p.n_obs == 1
    assert p.dates == (date(2021, 1, 6),)
    np.testing.assert_allclose(p.returns[0], [0.2, 0.2])


def test_empty_intersection_lists_ranges():
    a = _series("A", [1, 2])
    b = _series("B", [1, 2], start=date(2022, 1, 1))
    with pytest.raises(AlignmentError, match="A: 2021-01-04..2021-01-05"):
        to_return_panel([a, b])


def test_columns_are_lexicographic():
    p = to_return_panel([_series("ZZ", [1, 2]), _series("AA", [1, 3])])
    assert p.tickers == ("AA", "ZZ")
    np.testing.assert_allclose(p.returns[0], [2.0, 1.0])


_prices = st.lists(st.floats(0.01, 1e4, allow_nan=False), min_size=3, max_size=40)


@settings(max_examples=60, deadline=None)
@given(_prices)
def test_returns_above_minus_one(closes):
    p = to_return_panel([_series("X", closes)])
    assert np.all(p.returns > -1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(_prices, min_size=2, max_size=5), st.randoms(use_true_random=False))
def test_permutation_invariance(cols, rnd):
    n = min(map(len, cols))
    series = [_series(f"T{i}", c[:n]) for i, c in enumerate(cols)]
    shuffled = list(series)
    rnd.shuffle(shuffled)
    a, b = to_return_panel(series), to_return_panel(shuffled)
    assert a.tickers == b.tickers
    np.testing.assert_array_equal(a.returns, b.returns)


def test_canonical_round_trip(fixture_series):
    assets, bench = fixture_series
    panel = to_return_panel(assets)
    again = to_return_panel(load_prices(prices_to_csv(assets).encode()))
    assert again.tickers == panel.tickers and again.dates == panel.dates
    np.testing.assert_array_equal(again.returns, panel.returns)
    text = panel.to_csv()
    reread = read_return_panel(text.encode())
    assert reread.to_csv() == text
    np.testing.assert_allclose(reread.returns, panel.returns, rtol=1e-11, atol=0)


def test_price_weighted_index():
    a = _series("A", [10, 20, 30])
    b = _series("B", [30, 20, 50])
    idx = price_weighted_index([a, b], "IDX", base=100.0)
    np.testing.assert_allclose(idx.closes, [100.0, 100.0, 200.0])


@pytest.mark.parametrize(
    "annual, expected",
    [(0.042, 1.6667e-4), (0.046, 1.8254e-4), (0.0, 0.0)],
)
def test_daily_risk_free_examples(annual, expected):
    rf = daily_risk_free(annual, 252)
    assert rf.daily_rate == annual / 252
    assert math.isclose(rf.daily_rate, expected, rel_tol=5e-5, abs_tol=0)
    assert rf.daily_rate * rf.trading_days == annual


def test_zero_trading_days():
    with pytest.raises(DomainError):
        daily_risk_free(0.042, 0)
    with pytest.raises(DomainError):
        RiskFreeRate(0.042, -1)
