from dataclasses import replace
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from quantsig.errors import (ConfigError, DuplicateDate, EmptySeries, FileAccessError, MalformedHeader,
                             MalformedNumber, NetworkError, SymbolNotFound)
from quantsig.marketdata import (EndpointConfig, GapViolation, OhlcvBar, OhlcvSeries, cache_path, fetch_history,
                                 parse_ohlcv_csv, read_ohlcv_file, serialize_ohlcv_csv, validate_series)
from tests.conftest import SMALL_CSV

HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"
ROW_A = "2020-01-02,10.0,10.5,9.8,10.2,10.1,1000\n"
ROW_B = "2020-01-03,10.2,10.9,10.1,10.8,10.7,1500\n"


def test_parse_two_rows():
    series = parse_ohlcv_csv(HEADER + ROW_A + ROW_B, symbol="AAPL")
    assert len(series) == 2
    assert series.dates == [date(2020, 1, 2), date(2020, 1, 3)]
    assert series.bars[0] == OhlcvBar(date(2020, 1, 2), 10.0, 10.5, 9.8, 10.2, 10.1, 1000)


def test_reverse_order_is_sorted():
    assert parse_ohlcv_csv(HEADER + ROW_B + ROW_A) == parse_ohlcv_csv(HEADER + ROW_A + ROW_B)


def test_bad_volume_names_row():
    text = HEADER + ROW_A + "2020-01-03,10.2,10.9,10.1,10.8,10.7,abc\n"
    with pytest.raises(MalformedNumber) as info:
        parse_ohlcv_csv(text)
    assert info.value.row == 3
    assert info.value.column == "Volume"
    assert "abc" in str(info.value)


def test_missing_column_is_malformed_header():
    with pytest.raises(MalformedHeader):
        parse_ohlcv_csv("Date,Open,High,Low,Close\n2020-01-02,1,1,1,1\n")


def test_empty_document_is_malformed_header():
    with pytest.raises(MalformedHeader):
        parse_ohlcv_csv("")


def test_duplicate_date():
    with pytest.raises(DuplicateDate) as info:
        parse_ohlcv_csv(HEADER + ROW_A + ROW_A)
    assert info.value.date == date(2020, 1, 2)


def test_header_only_is_empty_series():
    with pytest.raises(EmptySeries):
        parse_ohlcv_csv(HEADER)


def test_rows_with_empty_cells_are_skipped_and_counted():
    text = HEADER + ROW_A + "2020-01-03,null,null,null,null,null,null\n" + "2020-01-06,,,,,,\n" + ROW_B.replace(
        "2020-01-03", "2020-01-07")
    series = parse_ohlcv_csv(text)
    assert len(series) == 2
    assert series.skipped_rows == 2


def test_adj_close_defaults_to_close():
    series = parse_ohlcv_csv("date,open,high,low,close,volume\n2020-01-02,1,2,0.5,1.5,10\n")
    assert series.bars[0].adj_close == 1.5


def test_read_missing_file(tmp_path):
    with pytest.raises(FileAccessError) as raised:
        read_ohlcv_file(tmp_path / "absent.csv")
    assert raised.value.exit_code == 2


def test_read_file_that_is_not_utf8(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_bytes(HEADER.encode() + b"2020-01-02,1,2,0.5,1.5,1.5,10\xff\n")
    with pytest.raises(MalformedHeader, match="UTF-8"):
        read_ohlcv_file(path)


def test_round_trip_synthetic(price_series):
    assert parse_ohlcv_csv(serialize_ohlcv_csv(price_series), "AAPL") == price_series


prices = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(prices, prices, prices, prices, st.integers(0, 10 ** 12)), min_size=1, max_size=20))
def test_round_trip_property(rows):
    bars = []
    for offset, (a, b, c, adj, volume) in enumerate(rows):
        low, mid, high = sorted((a, b, c))
        bars.append(OhlcvBar(date.fromordinal(737000 + offset), mid, high, low, mid, adj, volume))
    series = OhlcvSeries("X", tuple(bars))
    assert parse_ohlcv_csv(serialize_ohlcv_csv(series), "X") == series


def test_endpoint_timeout_must_be_positive():
    with pytest.raises(ConfigError):
        EndpointConfig(timeout=0)


def test_env_overrides_endpoint(monkeypatch, tmp_path):
    monkeypatch.setenv("QUANTSIG_DATA_URL", "http://example.invalid/{symbol}")
    monkeypatch.setenv("QUANTSIG_CACHE", str(tmp_path))
    cfg = EndpointConfig.from_env(base_url="http://ignored/{symbol}")
    assert cfg.base_url == "http://example.invalid/{symbol}"
    assert cfg.cache_dir == tmp_path


class TestFetchHistory:
    start, end = date(2020, 1, 1), date(2020, 2, 1)

    def _config(self, server, tmp_path):
        return EndpointConfig(base_url=server.template(), timeout=5, cache_dir=tmp_path / "cache")

    def test_second_call_served_from_cache(self, fixture_server, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (200, SMALL_CSV.encode())
        cfg = self._config(fixture_server, tmp_path)
        first = fetch_history("AAPL", self.start, self.end, cfg)
        second = fetch_history("AAPL", self.start, self.end, cfg)
        assert len(fixture_server.requests) == 1
        assert first.origin == "network" and second.origin == "cache"
        assert first == second

    def test_network_result_matches_direct_parse(self, fixture_server, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (200, SMALL_CSV.encode())
        cfg = self._config(fixture_server, tmp_path)
        series = fetch_history("AAPL", self.start, self.end, cfg)
        assert len(series) == 5
        assert series == parse_ohlcv_csv(SMALL_CSV, "AAPL")
        assert cache_path("AAPL", self.start, self.end, cfg).read_bytes() == SMALL_CSV.encode()

    def test_refresh_bypasses_cache(self, fixture_server, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (200, SMALL_CSV.encode())
        cfg = self._config(fixture_server, tmp_path)
        fetch_history("AAPL", self.start, self.end, cfg)
        fetch_history("AAPL", self.start, self.end, cfg, refresh=True)
        assert len(fixture_server.requests) == 2

    def test_404_is_symbol_not_found(self, fixture_server, tmp_path):
        with pytest.raises(SymbolNotFound) as info:
            fetch_history("NOPE", self.start, self.end, self._config(fixture_server, tmp_path))
        assert info.value.symbol == "NOPE"

    def test_server_error_is_network_error(self, fixture_server, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (500, b"boom")
        with pytest.raises(NetworkError):
            fetch_history("AAPL", self.start, self.end, self._config(fixture_server, tmp_path))

    def test_body_that_is_not_utf8_is_network_error(self, fixture_server, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (200, SMALL_CSV.encode() + b"\xff\xfe")
        cfg = self._config(fixture_server, tmp_path)
        with pytest.raises(NetworkError, match="UTF-8"):
            fetch_history("AAPL", self.start, self.end, cfg)
        assert not cache_path("AAPL", self.start, self.end, cfg).exists()

    def test_bad_body_is_not_cached(self, fixture_server, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (200, b"Date,Open,High,Low,Close,Volume\n2020-01-02,x,1,1,1,1\n")
        cfg = self._config(fixture_server, tmp_path)
        with pytest.raises(MalformedNumber):
            fetch_history("AAPL", self.start, self.end, cfg)
        assert not cache_path("AAPL", self.start, self.end, cfg).exists()

    def test_unreachable_endpoint_is_network_error(self, tmp_path):
        cfg = EndpointConfig(base_url="http://127.0.0.1:9/{symbol}", timeout=1, cache_dir=tmp_path)
        with pytest.raises(NetworkError):
            fetch_history("AAPL", self.start, self.end, cfg)

    def test_start_must_precede_end(self, tmp_path):
        with pytest.raises(ConfigError):
            fetch_history("AAPL", self.end, self.start, EndpointConfig(cache_dir=tmp_path))


def test_clean_series_has_no_violations(price_series):
    assert validate_series(price_series) == []


def test_high_below_low_is_one_violation():
    series = parse_ohlcv_csv(SMALL_CSV)
    broken = list(series.bars)
    broken[2] = replace(broken[2], high=10.0, low=10.9)
    violations = validate_series(OhlcvSeries("X", tuple(broken)))
    assert [v.index for v in violations] == [2]


def test_long_gap_is_gap_violation():
    text = HEADER + ROW_A + "2020-02-01,10.2,10.9,10.1,10.8,10.7,1500\n"
    violations = validate_series(parse_ohlcv_csv(text), max_gap_days=7)
    assert len(violations) == 1
    assert isinstance(violations[0], GapViolation)
    assert violations[0].gap_days == 30
