from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from treeroute.embeddings import (
    DEFAULT_DIMENSION,
    EmbeddingProvider,
    HashedBagEmbedder,
    RemoteEmbedder,
    embed,
)
from treeroute.errors import BackendError
from treeroute.vectorstore import cosine


def test_default_dimension():
    assert HashedBagEmbedder().dimension == DEFAULT_DIMENSION == 768


def test_vectors_are_unit_norm():
    embedder = HashedBagEmbedder(dimension=64)
    for text in ("cancel my card", "a", "", "   ", "one two three four five"):
        assert np.linalg.norm(embedder.embed(text)) == pytest.approx(1.0, abs=1e-9)


def test_deterministic_across_instances():
    a = HashedBagEmbedder(dimension=128, seed=3).embed("compare savings rates")
    b = HashedBagEmbedder(dimension=128, seed=3).embed("compare savings rates")
    assert np.array_equal(a, b)


def test_seed_changes_vectors():
    a = HashedBagEmbedder(dimension=128, seed=0).embed("compare savings rates")
    b = HashedBagEmbedder(dimension=128, seed=1).embed("compare savings rates")
    assert not np.array_equal(a, b)


def test_contributions_are_nonnegative_so_cosines_are_too():
    embedder = HashedBagEmbedder(dimension=32)
    texts = ["alpha beta", "gamma", "delta epsilon zeta", "unrelated words here"]
    for a in texts:
        for b in texts:
            assert cosine(embedder.embed(a), embedder.embed(b)) >= 0.0


def test_token_overlap_raises_similarity():
    embedder = HashedBagEmbedder()
    compare_rates = embedder.embed("compare interest rates")
    compare_fees = embedder.embed("compare account fees")
    unrelated = embedder.embed("walk the dog tonight")
    assert cosine(compare_rates, compare_fees) > cosine(compare_rates, unrelated)


def test_tokenization_normalizes_before_hashing():
    embedder = HashedBagEmbedder()
    assert np.array_equal(
        embedder.embed("Cancel my card!"), embedder.embed("cancel   my card")
    )


def test_cache_returns_same_readonly_array():
    embedder = HashedBagEmbedder(dimension=16)
    first = embedder.embed("hello")
    assert embedder.embed("hello") is first
    with pytest.raises(ValueError):
        first[0] = 9.0


def test_rejects_bad_dimension():
    with pytest.raises(ValueError):
        HashedBagEmbedder(dimension=0)


def test_provider_protocol():
    assert isinstance(HashedBagEmbedder(), EmbeddingProvider)


def test_embed_wrapper_enforces_dimension_contract():
    class Lying:
        dimension = 10

        def embed(self, text):
            return np.ones(3)

    with pytest.raises(ValueError, match="shape"):
        embed("x", Lying())


class _EmbedHandler(BaseHTTPRequestHandler):
    fail_first = 0
    payload_shape = "flat"
    dimension = 8
    requests_seen = 0

    def do_POST(self):
        cls = type(self)
        cls.requests_seen += 1
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        assert "input" in body and "model" in body
        if cls.fail_first > 0:
            cls.fail_first -= 1
            self.send_response(500)
            self.end_headers()
            return
        values = [float(i + 1) for i in range(cls.dimension)]
        if cls.payload_shape == "flat":
            payload = {"embedding": values}
        elif cls.payload_shape == "openai":
            payload = {"data": [{"embedding": values}]}
        elif cls.payload_shape == "zero":
            payload = {"embedding": [0.0] * cls.dimension}
        else:
            payload = {"surprise": True}
        data = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _EmbedHandler.fail_first = 0
    _EmbedHandler.payload_shape = "flat"
    _EmbedHandler.requests_seen = 0
    yield f"http://127.0.0.1:{server.server_port}/embed"
    server.shutdown()


def _remote(endpoint):
    return RemoteEmbedder(endpoint, model="m", dimension=8, timeout_ms=5000)


def test_remote_happy_path_normalizes(embed_server):
    vector = _remote(embed_server).embed("hello")
    assert vector.shape == (8,)
    assert np.linalg.norm(vector) == pytest.approx(1.0, abs=1e-9)
    assert vector[7] > vector[0] > 0


def test_remote_parses_nested_shape(embed_server):
    _EmbedHandler.payload_shape = "openai"
    vector = _remote(embed_server).embed("hello")
    assert np.linalg.norm(vector) == pytest.approx(1.0, abs=1e-9)


def test_remote_retries_transport_failure_once(embed_server):
    _EmbedHandler.fail_first = 1
    vector = _remote(embed_server).embed("hello")
    assert vector.shape == (8,)
    assert _EmbedHandler.requests_seen == 2


def test_remote_gives_up_after_one_retry(embed_server):
    _EmbedHandler.fail_first = 2
    with pytest.raises(BackendError, match="embedding"):
        _remote(embed_server).embed("hello")
    assert _EmbedHandler.requests_seen == 2


def test_remote_rejects_unknown_shape(embed_server):
    _EmbedHandler.payload_shape = "weird"
    with pytest.raises(BackendError, match="shape"):
        _remote(embed_server).embed("hello")


def test_remote_rejects_zero_vector(embed_server):
    _EmbedHandler.payload_shape = "zero"
    with pytest.raises(BackendError, match="zero"):
        _remote(embed_server).embed("hello")


def test_remote_rejects_wrong_dimension(embed_server):
    client = RemoteEmbedder(embed_server, model="m", dimension=99, timeout_ms=5000)
    with pytest.raises(BackendError, match="dimension"):
        client.embed("hello")


def test_remote_requires_endpoint():
    with pytest.raises(ValueError):
        RemoteEmbedder("", model="m")
