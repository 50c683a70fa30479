"""Client for a token-level LM served over HTTP, plus its run loop.

The server exposes four JSON endpoints: /v1/next_token (top-K
candidates with exact logprobs, an EOS logprob, and the mass of
everything else), /v1/score (the exact logprob of any single token),
/v1/tags (tetratag head distributions), and /v1/tokenize.  All
logprobs travel as decimal strings so float values survive the round
trip bit-for-bit.  next_token responses must also carry the candidate
token texts and starts-word flags; the client assembles words from
sampled tokens and cannot do that from bare token ids.

Token-level sampling draws from the top-K candidates renormalized, so
every importance ratio is exact (log of the truncated mass).  Strings
whose tokens fall outside top-K are unreachable under this proposal;
the potential-zero convention keeps the estimator honest for the
reachable set, and scoring (string_logprob) always uses the exact
/v1/score endpoint rather than renormalized values.

Words are segmented by lookahead: a sampled token flagged as starting
a new word closes the current one, and the sampled token is carried
into the next word so no probability is dropped.  At the template's
final word the carry has nowhere to go, so the proposal there offers
only word-continuing tokens and EOS.
"""

import json
import math
import random
from dataclasses import dataclass, replace as dc_replace

import requests

from .engine import (StepDiagnostics, AllZeroWeights, _finish, resample,
                     rng_for, sample_categorical)
from .lm import NEGINF, log
from .tags import encode
from .taggers import NullShaper

MAX_TOKENS_PER_WORD = 16

_MASS_TOL = 1e-6


class RemoteError(Exception):
    """Protocol violation: bad payloads, invariant breaches, HTTP errors."""


class RemoteUnavailable(RemoteError):
    """The server cannot be reached at all (maps to CLI exit code 3)."""


class BoundaryUndetected(Exception):
    """No word boundary after the per-word token budget."""


class HttpTransport:
    def __init__(self, base_url, timeout=30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def post(self, path, payload):
        url = self.base_url + path
        try:
            response = requests.post(url, json=payload, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise RemoteUnavailable("cannot reach %s: %s" % (url, exc)) from exc
        if response.status_code != 200:
            raise RemoteError("%s returned %d: %s"
                              % (url, response.status_code, response.text[:200]))
        return response.json()


class FixtureTransport:
    """Replays recorded exchanges instead of talking to a server.

    The fixture file holds {"exchanges": [{path, request, response}]};
    requests are matched by path plus canonical JSON, and a matched
    response may be served any number of times (the server is
    deterministic, so identical requests get identical answers).
    """

    def __init__(self, exchanges):
        self._table = {}
        for exchange in exchanges:
            key = (exchange["path"], _canonical(exchange["request"]))
            self._table[key] = exchange["response"]

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        return cls(payload["exchanges"])

    def post(self, path, payload):
        key = (path, _canonical(payload))
        if key not in self._table:
            raise RemoteError("no recorded exchange for %s %s"
                              % (path, _canonical(payload)))
        return self._table[key]


def _canonical(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _parse_logprob(value):
    if isinstance(value, str):
        out = float(value)
    elif isinstance(value, (int, float)):
        out = float(value)
    else:
        raise RemoteError("logprob is neither string nor number: %r" % (value,))
    if out > 0.0 or out != out:
        raise RemoteError("logprob out of range: %r" % (value,))
    return out


@dataclass(frozen=True)
class NextTokenPage:
    token_ids: tuple
    logprobs: tuple
    texts: tuple
    starts_word: tuple
    eos_logprob: float
    other_logprob: float


@dataclass(frozen=True)
class TokenDraw:
    token_id: object          # int, or None for EOS
    text: str
    starts_word: bool
    log_p: float
    log_q: float


class RemoteLM:
    """Validating client over a transport; caches by token prefix."""

    def __init__(self, transport):
        self.transport = transport
        self._pages = {}
        self._scores = {}
        self._token_cache = {}
        self._tag_cache = {}

    def next_token(self, prefix_tokens):
        prefix_tokens = tuple(int(t) for t in prefix_tokens)
        page = self._pages.get(prefix_tokens)
        if page is not None:
            return page
        raw = self.transport.post("/v1/next_token",
                                  {"prefix_tokens": list(prefix_tokens)})
        try:
            top = raw["top"]
            texts = raw["texts"]
            starts = raw["starts_word"]
            eos_logprob = _parse_logprob(raw["eos_logprob"])
            other_logprob = _parse_logprob(raw["other_mass_logprob"])
        except KeyError as exc:
            raise RemoteError("next_token response missing %s" % exc) from exc
        if not (len(top) == len(texts) == len(starts)):
            raise RemoteError("top/texts/starts_word lengths disagree")
        ids = tuple(int(entry[0]) for entry in top)
        logprobs = tuple(_parse_logprob(entry[1]) for entry in top)
        total = math.fsum(math.exp(lp) for lp in logprobs)
        total += math.exp(eos_logprob) + math.exp(other_logprob)
        if abs(total - 1.0) > _MASS_TOL:
            raise RemoteError("next_token mass sums to %.9f" % total)
        page = NextTokenPage(
            token_ids=ids,
            logprobs=logprobs,
            texts=tuple(str(t) for t in texts),
            starts_word=tuple(bool(s) for s in starts),
            eos_logprob=eos_logprob,
            other_logprob=other_logprob,
        )
        self._pages[prefix_tokens] = page
        return page

    def score(self, prefix_tokens, token_id):
        key = (tuple(int(t) for t in prefix_tokens), int(token_id))
        if key not in self._scores:
            raw = self.transport.post("/v1/score", {
                "prefix_tokens": list(key[0]),
                "token_id": key[1],
            })
            self._scores[key] = _parse_logprob(raw["logprob"])
        return self._scores[key]

    def tokenize(self, text):
        if text not in self._token_cache:
            raw = self.transport.post("/v1/tokenize", {"text": text})
            tokens = tuple(int(t) for t in raw["tokens"])
            ends = tuple(bool(e) for e in raw["word_ends"])
            if len(tokens) != len(ends):
                raise RemoteError("tokens/word_ends lengths disagree")
            self._token_cache[text] = (tokens, ends)
        return self._token_cache[text]

    def tag_distributions(self, prefix_tokens):
        prefix_tokens = tuple(int(t) for t in prefix_tokens)
        if prefix_tokens not in self._tag_cache:
            raw = self.transport.post("/v1/tags",
                                      {"prefix_tokens": list(prefix_tokens)})
            odd = {str(k): _parse_logprob(v) for k, v in raw["odd"].items()}
            even = {str(k): _parse_logprob(v) for k, v in raw["even"].items()}
            for name, table in (("odd", odd), ("even", even)):
                mass = math.fsum(math.exp(v) for v in table.values())
                if abs(mass - 1.0) > _MASS_TOL:
                    raise RemoteError("%s tag mass sums to %.9f" % (name, mass))
            self._tag_cache[prefix_tokens] = (odd, even)
        return self._tag_cache[prefix_tokens]

    def string_logprob(self, words):
        """Exact log p of the words plus the final EOS, via /v1/score."""
        tokens, _ = self.tokenize(" ".join(words))
        total = math.fsum(self.score(tokens[:i], tokens[i])
                          for i in range(len(tokens)))
        return total + self.next_token(tokens).eos_logprob


class RemoteTokenProposal:
    """Top-K renormalized candidates; exact ratio = log truncated mass."""

    def options(self, page, closing):
        picks = []
        for token_id, logprob, text, starts in zip(
                page.token_ids, page.logprobs, page.texts, page.starts_word):
            if closing and starts:
                continue
            picks.append((token_id, text, starts, logprob))
        masses = [math.exp(entry[3]) for entry in picks]
        if closing:
            masses.append(math.exp(page.eos_logprob))
        total = math.fsum(masses)
        if total <= 0.0:
            raise RemoteError("candidate set has no probability mass")
        log_total = math.log(total)
        draws = [TokenDraw(token_id=tid, text=text, starts_word=starts,
                           log_p=lp, log_q=lp - log_total)
                 for tid, text, starts, lp in picks]
        if closing:
            draws.append(TokenDraw(token_id=None, text="", starts_word=False,
                                   log_p=page.eos_logprob,
                                   log_q=page.eos_logprob - log_total))
        return draws


def _draw_token(options, rng):
    u = rng.random()
    acc = 0.0
    chosen = None
    for option in options:
        weight = math.exp(option.log_q)
        if weight <= 0.0:
            continue
        chosen = option
        acc += weight
        if u <= acc:
            break
    assert chosen is not None, "no positive-probability candidate"
    return chosen


@dataclass(frozen=True)
class WordOutcome:
    word: str
    log_ratio: float         # accumulated log p - log q over consumed tokens
    log_q: float             # accumulated log q alone
    token_ids: tuple
    carry: object            # TokenDraw opening the next word, or None
    ended: bool              # True when EOS closed the sentence


def _assemble_word(client, history, proposal, rng_factory, carry, final,
                   max_tokens):
    """Sample tokens until the current word closes.

    Non-final words close when a sampled token starts a new word; that
    token (already paid for by neither p nor q here) is returned as
    the carry and both its ratio and text belong to the next word.
    The final word closes on EOS; word-starting tokens are excluded
    from its candidate set since no further word may begin.
    """
    consumed = []
    history = list(history)
    log_ratio = 0.0
    log_q = 0.0
    if carry is not None:
        consumed.append(carry)
        history.append(carry.token_id)
        log_ratio += carry.log_p - carry.log_q
        log_q += carry.log_q
    next_carry = None
    ended = False
    draw_index = 0
    while True:
        if len(consumed) >= max_tokens:
            raise BoundaryUndetected(
                "no word boundary after %d tokens" % max_tokens)
        closing = final and bool(consumed)
        page = client.next_token(tuple(history))
        options = proposal.options(page, closing)
        draw = _draw_token(options, rng_factory(draw_index))
        draw_index += 1
        if draw.token_id is None:
            log_ratio += draw.log_p - draw.log_q
            log_q += draw.log_q
            ended = True
            break
        if draw.starts_word and consumed:
            next_carry = draw
            break
        consumed.append(draw)
        history.append(draw.token_id)
        log_ratio += draw.log_p - draw.log_q
        log_q += draw.log_q
    word = "".join(token.text for token in consumed).strip()
    if not word:
        raise RemoteError("assembled an empty word")
    return WordOutcome(
        word=word,
        log_ratio=log_ratio,
        log_q=log_q,
        token_ids=tuple(token.token_id for token in consumed),
        carry=next_carry,
        ended=ended,
    )


def advance_word(lm, prefix, proposal, rng=None, carry=None, final=False,
                 max_tokens=MAX_TOKENS_PER_WORD):
    """Sample one whole word; returns (word, log_ratio, log_q, carry).

    Word-level language models take exactly one draw and never carry.
    Token-level remote clients assemble the word from sampled tokens;
    callers generating whole sentences must thread the returned carry
    into the next call or its probability is lost (run_remote does).
    """
    if rng is None:
        rng = random.Random(0)
    if isinstance(lm, RemoteLM):
        if proposal is None:
            proposal = RemoteTokenProposal()
        if prefix:
            history, _ = lm.tokenize(" ".join(prefix))
        else:
            history = ()
        outcome = _assemble_word(lm, history, proposal,
                                 lambda _index: rng, carry, final, max_tokens)
        return outcome.word, outcome.log_ratio, outcome.log_q, outcome.carry
    dist_q = proposal.distribution(tuple(prefix), None)
    word = sample_categorical(dist_q, rng)
    dist_p = lm.conditional(tuple(prefix))
    log_q = dist_q.logprob(word)
    return word, dist_p.logprob(word) - log_q, log_q, None


@dataclass
class RemoteParticle:
    words: tuple = ()
    token_ids: tuple = ()
    carry: object = None
    log_weight: float = 0.0
    log_phi: float = 0.0
    active: bool = True

    def copy(self):
        return RemoteParticle(
            words=self.words, token_ids=self.token_ids, carry=self.carry,
            log_weight=self.log_weight, log_phi=self.log_phi,
            active=self.active)


def run_remote(client, potential, shaper, template, config, resampling=True,
               trace=False, proposal=None,
               max_tokens=MAX_TOKENS_PER_WORD):
    """SIS/SMC over a token-level remote LM, one word per step.

    Mirrors the built-in engine: shaping ratios apply per word,
    resampling (when enabled) runs after every word step, and final
    weights telescope to plain importance weights times the potential.
    """
    if shaper is None or not config.shaping:
        shaper = NullShaper()
    if proposal is None:
        proposal = RemoteTokenProposal()
    config = dc_replace(config, method="smc" if resampling else "sis")
    target = encode(template.tree)
    budget = template.word_count if config.N is None else config.N
    assert budget == template.word_count, "word budget must equal the template's"
    init = shaper.log_initial()
    particles = [RemoteParticle(log_weight=init, log_phi=init)
                 for _ in range(config.M)]
    diagnostics = []
    step = 0
    while any(p.active for p in particles):
        step += 1
        for index, particle in enumerate(particles):
            if not particle.active:
                continue
            final = len(particle.words) == budget - 1

            def stream(draw_index, _index=index, _step=step):
                return rng_for(config.seed, "draw", _index, _step, draw_index)

            outcome = _assemble_word(client, particle.token_ids, proposal,
                                     stream, particle.carry, final, max_tokens)
            before = particle.words
            particle.words = before + (outcome.word,)
            particle.token_ids = particle.token_ids + outcome.token_ids
            particle.carry = outcome.carry
            phi_step = shaper.log_step_ratio(before, outcome.word, target)
            if phi_step > NEGINF:
                particle.log_phi += phi_step
                particle.log_weight += outcome.log_ratio + phi_step
            else:
                particle.log_weight = NEGINF
            if final:
                assert outcome.ended and outcome.carry is None
                if particle.log_weight > NEGINF:
                    particle.log_weight += (
                        potential.log_likelihood(particle.words, target)
                        - particle.log_phi)
                particle.active = False
        fired = False
        current_ess = None
        if resampling:
            try:
                particles, current_ess, fired = resample(
                    particles, config.tau,
                    rng_for(config.seed, "resample", step))
            except AllZeroWeights:
                pass
        diagnostics.append(StepDiagnostics(
            step=step,
            ess=current_ess,
            resampled=fired,
            active_count=sum(p.active for p in particles),
            log_weights=tuple(p.log_weight for p in particles) if trace else None,
        ))
        assert step <= budget, "particles outlived the word budget"
    return _finish(client, potential, target, template, particles,
                   diagnostics, config)


class RemoteTagger:
    """Potential and shaper over the server's tetratag heads.

    The slot pair for word l is scored from the token prefix covering
    the first l words; the final even slot is the padding tag with
    probability one, matching the feature tagger's convention.  The
    potential is the product of these causal factors, so the shaper's
    telescoped product reproduces it exactly.
    """

    def __init__(self, client):
        self.client = client

    def _slot_maps(self, words):
        tokens, _ = self.client.tokenize(" ".join(words))
        return self.client.tag_distributions(tokens)

    # potential interface

    def likelihood(self, words, target):
        value = self.log_likelihood(words, target)
        return math.exp(value) if value > NEGINF else 0.0

    def log_likelihood(self, words, target):
        if len(words) != target.word_count:
            return NEGINF
        total = 0.0
        for index in range(len(words)):
            odd, even = self.step_log_factors(words[:index], words[index],
                                              target)
            total += odd + even
            if total == NEGINF:
                return NEGINF
        return total

    # shaper interface

    def log_initial(self):
        return 0.0

    def step_log_factors(self, prefix, word, target):
        words = tuple(prefix) + (word,)
        index = len(prefix)
        rendered = [t.render() for t in target]
        odd_map, even_map = self._slot_maps(words)
        log_odd = odd_map.get(rendered[2 * index], NEGINF)
        if index == target.word_count - 1:
            log_even = 0.0
        else:
            log_even = even_map.get(rendered[2 * index + 1], NEGINF)
        return log_odd, log_even

    def log_step_ratio(self, prefix, word, target):
        odd, even = self.step_log_factors(prefix, word, target)
        return odd + even
