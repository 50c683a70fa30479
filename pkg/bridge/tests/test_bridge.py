"""Bridge tests: tokenizer, model invariants, HTTP behavior, conformance.

The live-server tests talk plain HTTP through urllib so the bridge itself
stays dependency-free.  The interop tests at the bottom drive the bridge
through the syntax-smc client, which is the consumer the wire protocol
exists for.
"""

import json
import math
import random
import urllib.error
import urllib.request

import pytest

from lm_bridge import (
    ApiError, Bridge, BridgeModel, BridgeServer, Tokenizer, TOP_K,
    conformance_fixtures, write_conformance_fixtures,
)

from syntax_smc.engine import RunConfig
from syntax_smc.remote import (
    FixtureTransport, HttpTransport, RemoteLM, RemoteTagger, run_remote,
)
from syntax_smc.tags import encode
from syntax_smc.trees import parse_bracketed, template_from_tree


def _post(base, path, payload=None, raw=None):
    data = raw if raw is not None else json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        base + path, data=data,
        headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            return response.status, json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode("utf-8"))


def _page_mass(page):
    total = math.fsum(math.exp(float(lp)) for _, lp in page["top"])
    total += math.exp(float(page["eos_logprob"]))
    total += math.exp(float(page["other_mass_logprob"]))
    return total


@pytest.fixture(scope="module")
def live():
    server = BridgeServer(seed=0)
    server.start()
    yield server.address
    server.stop()


# ---------------------------------------------------------------- tokenizer

def test_tokenizer_round_trips_known_words():
    tok = Tokenizer()
    for text in ("the dog", "a bird sings", "chance", "the morning light",
                 "dogs chant", "an artist walks"):
        tokens, ends = tok.tokenize(text)
        assert tok.detokenize(tokens) == text
        assert len(tokens) == len(ends)
        assert ends[-1] is True
        assert sum(ends) == len(text.split())


def test_tokenizer_greedy_segmentation():
    tok = Tokenizer()
    tokens, ends = tok.tokenize("the dogs")
    assert [tok.text(t) for t in tokens] == [" the", " dog", "s"]
    assert ends == [True, False, True]
    tokens, _ = tok.tokenize("chance")
    assert [tok.text(t) for t in tokens] == [" ch", "ance"]


def test_tokenizer_prefix_stability():
    # Pieces never span a space, so tokenizing a word prefix of a sentence
    # yields a prefix of the sentence's tokens.  The conformance fixtures
    # lean on this when they record per-word tag pages.
    tok = Tokenizer()
    full, _ = tok.tokenize("the morning light")
    for count in (1, 2, 3):
        sub, _ = tok.tokenize(" ".join("the morning light".split()[:count]))
        assert full[:len(sub)] == sub


def test_tokenizer_character_fallback_covers_anything():
    tok = Tokenizer()
    tokens, _ = tok.tokenize("thedog zyx qqq")
    assert tok.detokenize(tokens) == "thedog zyx qqq"


def test_tokenizer_rejects_bad_text():
    tok = Tokenizer()
    for bad in ("", "Dog", "two  spaces", " lead", "trail ", "dot.", 7):
        with pytest.raises(ValueError):
            tok.tokenize(bad)


def test_tokenizer_word_start_convention():
    tok = Tokenizer()
    assert all(tok.starts_word[t] == tok.text(t).startswith(" ")
               for t in range(len(tok)))
    assert len(tok) > TOP_K


# -------------------------------------------------------------------- model

def test_distribution_is_normalized_and_deterministic():
    model = BridgeModel(seed=3)
    again = BridgeModel(seed=3)
    other = BridgeModel(seed=4)
    for prefix in ((), (1, 2), (5, 5, 5, 5)):
        probs, eos = model.distribution(prefix)
        assert math.fsum(probs) + eos == pytest.approx(1.0, abs=1e-12)
        assert min(probs) > 0.0 and eos > 0.0
        assert model.next_token_page(prefix) == again.next_token_page(prefix)
        assert model.next_token_page(prefix) != other.next_token_page(prefix)


def test_next_token_page_shape_and_mass():
    model = BridgeModel(seed=0)
    page = model.next_token_page((2, 9))
    assert len(page["top"]) == TOP_K
    assert len(page["texts"]) == TOP_K and len(page["starts_word"]) == TOP_K
    assert float(page["other_mass_logprob"]) > float("-inf")
    assert _page_mass(page) == pytest.approx(1.0, abs=1e-9)
    logprobs = [float(lp) for _, lp in page["top"]]
    assert logprobs == sorted(logprobs, reverse=True)


def test_eos_pressure_grows_with_prefix_length():
    model = BridgeModel(seed=0)
    _, short = model.distribution(())
    _, long = model.distribution(tuple(range(8)))
    assert long > short


def test_score_agrees_with_page_strings():
    model = BridgeModel(seed=1)
    page = model.next_token_page((4,))
    for token_id, logprob in page["top"][:10]:
        assert model.score_page((4,), token_id)["logprob"] == logprob


def test_tag_pages_normalize():
    model = BridgeModel(seed=2)
    for prefix in ((), (0,), (3, 1, 4)):
        page = model.tag_page(prefix)
        for table in (page["odd"], page["even"]):
            mass = math.fsum(math.exp(float(v)) for v in table.values())
            assert mass == pytest.approx(1.0, abs=1e-9)
        assert {"l", "r"} <= set(page["odd"])
        assert {"L", "R", "L/S", "R/S"} <= set(page["even"])


def test_bridge_dispatch_errors():
    bridge = Bridge(BridgeModel(seed=0))
    with pytest.raises(ApiError) as err:
        bridge.handle("/v1/nope", {})
    assert err.value.status == 404
    with pytest.raises(ApiError) as err:
        bridge.handle("/v1/score", {"prefix_tokens": [0], "token_id": True})
    assert err.value.status == 422
    with pytest.raises(ApiError) as err:
        bridge.handle("/v1/next_token", {"prefix_tokens": "zero"})
    assert err.value.status == 422
    with pytest.raises(ApiError) as err:
        bridge.handle("/v1/next_token", {})
    assert err.value.status == 422


# -------------------------------------------------------------- live server

def test_live_mass_conservation_over_many_requests(live):
    rng = random.Random(0)
    vocab = len(Tokenizer())
    for _ in range(100):
        prefix = [rng.randrange(vocab) for _ in range(rng.randrange(7))]
        status, page = _post(live, "/v1/next_token", {"prefix_tokens": prefix})
        assert status == 200
        assert len(page["top"]) <= TOP_K
        assert _page_mass(page) == pytest.approx(1.0, abs=1e-6)


def test_live_score_matches_top_list_exactly(live):
    rng = random.Random(1)
    vocab = len(Tokenizer())
    for _ in range(10):
        prefix = [rng.randrange(vocab) for _ in range(rng.randrange(5))]
        _, page = _post(live, "/v1/next_token", {"prefix_tokens": prefix})
        for token_id, logprob in page["top"][:5]:
            status, scored = _post(live, "/v1/score",
                                   {"prefix_tokens": prefix, "token_id": token_id})
            assert status == 200
            assert scored["logprob"] == logprob


def test_live_tags_normalize(live):
    rng = random.Random(2)
    vocab = len(Tokenizer())
    for _ in range(20):
        prefix = [rng.randrange(vocab) for _ in range(rng.randrange(6))]
        status, page = _post(live, "/v1/tags", {"prefix_tokens": prefix})
        assert status == 200
        for table in (page["odd"], page["even"]):
            mass = math.fsum(math.exp(float(v)) for v in table.values())
            assert mass == pytest.approx(1.0, abs=1e-6)


def test_live_tokenize(live):
    status, paged = _post(live, "/v1/tokenize", {"text": "the dogs"})
    assert status == 200
    assert len(paged["tokens"]) == len(paged["word_ends"]) == 3
    status, error = _post(live, "/v1/tokenize", {"text": "NOT valid!"})
    assert status == 422 and "error" in error


def test_live_error_statuses(live):
    status, body = _post(live, "/v1/next_token", raw=b"{not json")
    assert status == 400 and "JSON" in body["error"]
    status, body = _post(live, "/v1/score",
                         {"prefix_tokens": [], "token_id": 10 ** 6})
    assert status == 422
    status, body = _post(live, "/v1/score", {"prefix_tokens": []})
    assert status == 422 and "token_id" in body["error"]
    status, body = _post(live, "/v1/other", {})
    assert status == 404


def test_server_returns_503_until_loaded():
    server = BridgeServer(preload=False)
    server.start()
    try:
        status, body = _post(server.address, "/v1/next_token",
                             {"prefix_tokens": []})
        assert status == 503 and "loading" in body["error"]
        server.load()
        status, _ = _post(server.address, "/v1/next_token",
                          {"prefix_tokens": []})
        assert status == 200
    finally:
        server.stop()


def test_live_matches_recorded_transcript(live):
    transcript = conformance_fixtures(seed=0, texts=("the dog",))
    for exchange in transcript["exchanges"]:
        status, body = _post(live, exchange["path"], exchange["request"])
        assert status == 200
        assert body == exchange["response"]


# -------------------------------------------------------------- conformance

def test_fixtures_replay_through_client(tmp_path):
    path = tmp_path / "bridge_fixtures.json"
    payload = write_conformance_fixtures(path, seed=0)
    assert path.exists() and payload["exchanges"]
    client = RemoteLM(FixtureTransport.from_file(path))

    tokens, ends = client.tokenize("the dog")
    assert len(tokens) == len(ends) == 2
    page = client.next_token(())
    assert math.fsum(math.exp(lp) for lp in page.logprobs) < 1.0

    logprob = client.string_logprob(("the", "dog"))
    assert math.isfinite(logprob) and logprob < 0.0

    direct = BridgeModel(seed=0)
    ids, _ = direct.tokenizer.tokenize("the dog")
    expected = math.fsum(direct.score(tuple(ids[:i]), ids[i])
                         for i in range(len(ids)))
    expected += float(direct.next_token_page(tuple(ids))["eos_logprob"])
    assert logprob == pytest.approx(expected, rel=1e-12)

    tagger = RemoteTagger(client)
    target = encode(parse_bracketed("(S (NP ?) (VP ?))"))
    assert 0.0 < tagger.likelihood(("the", "dog"), target) < 1.0


def test_fixtures_cover_all_default_texts(tmp_path):
    path = tmp_path / "bridge_fixtures.json"
    write_conformance_fixtures(path, seed=0)
    client = RemoteLM(FixtureTransport.from_file(path))
    for text in ("the dog", "a bird sings", "the morning light"):
        assert math.isfinite(client.string_logprob(tuple(text.split())))


# ------------------------------------------------------------------ interop

def test_end_to_end_run_against_live_server(live):
    client = RemoteLM(HttpTransport(live))
    tagger = RemoteTagger(client)
    template = template_from_tree(parse_bracketed("(S (NP ?) (VP ?))"))
    config = RunConfig(M=3, tau=0.5, seed=0)
    result = run_remote(client, tagger, tagger, template, config)
    assert result.config.method == "smc"
    assert not result.degenerate
    assert result.z_hat > 0.0
    assert len(result.diagnostics) == 2
    for entry in result.support:
        assert len(entry.words) == 2
        assert entry.weight > 0.0

    again = run_remote(RemoteLM(HttpTransport(live)), tagger, tagger,
                       template, config)
    assert again.z_hat == result.z_hat
    assert [e.text for e in again.support] == [e.text for e in result.support]
