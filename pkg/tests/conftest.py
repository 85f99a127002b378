import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, List, Tuple

import numpy as np
import pytest

from quantsig.synthetic import synthetic_ohlcv, write_synthetic_ohlcv, write_synthetic_tweets

SMALL_CSV = (
    "Date,Open,High,Low,Close,Adj Close,Volume\n"
    "2020-01-02,10.0,10.5,9.8,10.2,10.1,1000\n"
    "2020-01-03,10.2,10.9,10.1,10.8,10.7,1500\n"
    "2020-01-06,10.8,11.0,10.4,10.5,10.4,1200\n"
    "2020-01-07,10.5,10.7,10.2,10.6,10.5,900\n"
    "2020-01-08,10.6,11.2,10.6,11.1,11.0,2000\n"
)


class FixtureServer:
    """Local stand-in for the price endpoint; counts every request it sees."""

    def __init__(self):
        self.routes: Dict[str, Tuple[int, bytes]] = {}
        self.requests: List[str] = []
        fixture = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                fixture.requests.append(self.path)
                status, body = fixture.routes.get(self.path.split("?")[0], (404, b"not found"))
                self.send_response(status)
                self.send_header("Content-Type", "text/csv")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def template(self) -> str:
        return self.base_url + "/history/{symbol}.csv?start={start}&end={end}"


@pytest.fixture
def fixture_server():
    server = FixtureServer()
    server.thread.start()
    yield server
    server.httpd.shutdown()
    server.httpd.server_close()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def price_series():
    return synthetic_ohlcv(symbol="AAPL")


@pytest.fixture(scope="session")
def price_csv(tmp_path_factory):
    return write_synthetic_ohlcv(tmp_path_factory.mktemp("prices") / "aapl_like.csv", symbol="AAPL")


@pytest.fixture(scope="session")
def tweets_csv(tmp_path_factory):
    return write_synthetic_tweets(tmp_path_factory.mktemp("tweets") / "tweets.csv")


@pytest.fixture(scope="session")
def small_tweets_csv(tmp_path_factory):
    return write_synthetic_tweets(tmp_path_factory.mktemp("tweets") / "small.csv", n_tweets=600)
