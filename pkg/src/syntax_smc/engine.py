"""Sequential importance sampling and sequential Monte Carlo over words.

Both engines advance M particles one word per step until every
particle has sampled EOS (the proposals force EOS once the template's
word budget is reached).  Weights follow the usual importance
telescoping: each word multiplies in p_lm/q, and completion multiplies
in the potential.  The SMC engine additionally multiplies each step by
the shaper ratio phi(y.x)/phi(y) and divides it back out at
completion, so final weights agree with plain importance weights; it
also calls the resampling check after every step, which triggers a
multinomial resample whenever the effective sample size drops below
tau * M and resets all weights to their mean.

Randomness is counter-based: every draw uses a fresh generator keyed
by (seed, particle, step, draw) and resampling by (seed, "resample",
step), so runs are bit-reproducible regardless of scheduling and
SMC with tau = 0 replays SIS draw for draw.
"""

import dataclasses
import hashlib
import json
import math
import random
from dataclasses import dataclass, field

from .lm import EOS, NEGINF, logsumexp
from .tags import encode
from .taggers import NullShaper
from .trees import serialize_bracketed


class AllZeroWeights(Exception):
    pass


class DegenerateRun(Exception):
    """Raised by sample_outputs when a run retained no posterior mass."""


def rng_for(*key):
    """Counter-based stream: an independent generator per key tuple."""
    digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def sample_categorical(dist, rng):
    """One draw from a NextTokenDistribution, scanning in its fixed order."""
    u = rng.random()
    acc = 0.0
    last = None
    for token, prob in dist.items():
        if prob <= 0.0:
            continue
        acc += prob
        last = token
        if u <= acc:
            return token
    assert last is not None, "cannot sample from an all-zero distribution"
    return last


def ess(weights):
    """(sum w)^2 / sum w^2 for linear-scale weights."""
    total = math.fsum(weights)
    square = math.fsum(w * w for w in weights)
    if square <= 0.0:
        raise AllZeroWeights("effective sample size needs a positive weight")
    return total * total / square


def log_ess(log_weights):
    """ess computed stably from log-scale weights."""
    finite = [w for w in log_weights if w > NEGINF]
    if not finite:
        raise AllZeroWeights("effective sample size needs a positive weight")
    return math.exp(2.0 * logsumexp(log_weights) - logsumexp([2.0 * w for w in log_weights]))


@dataclass
class Particle:
    words: tuple = ()
    log_weight: float = 0.0
    log_phi: float = 0.0
    active: bool = True

    def copy(self):
        return Particle(self.words, self.log_weight, self.log_phi, self.active)


@dataclass(frozen=True)
class RunConfig:
    M: int = 20
    tau: float = 0.25
    seed: int = 0
    N: int | None = None
    proposal: str = "prior"
    shaping: bool = True
    method: str = ""

    def __post_init__(self):
        assert self.M >= 1
        assert 0.0 <= self.tau <= 1.0


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    ess: float | None
    resampled: bool
    active_count: int
    log_weights: tuple | None = None


@dataclass(frozen=True)
class SupportEntry:
    text: str
    words: tuple
    weight: float            # normalized posterior estimate
    log_prior: float
    log_potential: float


@dataclass(frozen=True)
class RunResult:
    z_hat: float
    log_z_hat: float
    support: tuple
    diagnostics: tuple
    particles: tuple
    degenerate: bool
    config: RunConfig
    template_text: str = ""


def resample(particles, tau, rng):
    """Multinomial resample when ESS < tau * M; returns (particles, ess, fired).

    All weights, including completed particles', enter the pool; after
    a resample every particle carries the mean weight W/M and the
    active flag of its source.  Raises AllZeroWeights if no particle
    has mass.
    """
    log_weights = [p.log_weight for p in particles]
    current = log_ess(log_weights)
    m = len(particles)
    if current >= tau * m:
        return particles, current, False
    log_total = logsumexp(log_weights)
    peak = max(log_weights)
    linear = [math.exp(w - peak) for w in log_weights]
    total = math.fsum(linear)
    mean_log = log_total - math.log(m)
    fallback = max(i for i, w in enumerate(linear) if w > 0.0)
    fresh = []
    for _ in range(m):
        u = rng.random() * total
        acc = 0.0
        pick = fallback
        for index, w in enumerate(linear):
            acc += w
            if u <= acc and w > 0.0:
                pick = index
                break
        chosen = particles[pick].copy()
        chosen.log_weight = mean_log
        fresh.append(chosen)
    return fresh, current, True


def sis(lm, proposal, potential, template, config, trace=False):
    """Algorithm: plain sequential importance sampling (no resampling)."""
    config = dataclasses.replace(config, method="sis")
    return _run(lm, proposal, potential, NullShaper(), template, config,
                resampling=False, trace=trace)


def smc(lm, proposal, potential, shaper, template, config, trace=False):
    """SMC with autoregressive shaping and ESS-triggered resampling."""
    if shaper is None or not config.shaping:
        shaper = NullShaper()
    config = dataclasses.replace(config, method="smc")
    return _run(lm, proposal, potential, shaper, template, config,
                resampling=True, trace=trace)


def _run(lm, proposal, potential, shaper, template, config, resampling, trace):
    target = encode(template.tree)
    budget = template.word_count if config.N is None else config.N
    assert budget == template.word_count, "word budget must equal the template's"
    init = shaper.log_initial()
    particles = [Particle(log_weight=init, log_phi=init) for _ in range(config.M)]
    diagnostics = []
    step = 0
    while any(p.active for p in particles):
        step += 1
        for index, particle in enumerate(particles):
            if not particle.active:
                continue
            dist_q = proposal.distribution(particle.words, template)
            word = sample_categorical(dist_q, rng_for(config.seed, "draw", index, step, 0))
            dist_p = lm.conditional(particle.words)
            if word == EOS:
                particle.log_weight += (
                    dist_p.logprob(EOS) - dist_q.logprob(EOS)
                    + potential.log_likelihood(particle.words, target)
                    - particle.log_phi
                )
                particle.active = False
            else:
                ratio = dist_p.logprob(word) - dist_q.logprob(word)
                phi_step = shaper.log_step_ratio(particle.words, word, target)
                if phi_step > NEGINF:
                    particle.log_weight += ratio + phi_step
                    particle.log_phi += phi_step
                else:
                    particle.log_weight = NEGINF
                particle.words = particle.words + (word,)
        fired = False
        current_ess = None
        if resampling:
            try:
                particles, current_ess, fired = resample(
                    particles, config.tau, rng_for(config.seed, "resample", step)
                )
            except AllZeroWeights:
                pass
        else:
            try:
                current_ess = log_ess([p.log_weight for p in particles])
            except AllZeroWeights:
                pass
        diagnostics.append(StepDiagnostics(
            step=step,
            ess=current_ess,
            resampled=fired,
            active_count=sum(p.active for p in particles),
            log_weights=tuple(p.log_weight for p in particles) if trace else None,
        ))
        assert step <= budget + 1, "particles outlived the word budget"
    return _finish(lm, potential, target, template, particles, diagnostics, config)


def _finish(lm, potential, target, template, particles, diagnostics, config):
    log_weights = [p.log_weight for p in particles]
    log_total = logsumexp(log_weights)
    degenerate = log_total == NEGINF
    if degenerate:
        z_hat, log_z = 0.0, NEGINF
        support = ()
    else:
        log_z = log_total - math.log(config.M)
        z_hat = math.exp(log_z)
        by_string = {}
        for particle in particles:
            if particle.log_weight == NEGINF:
                continue
            by_string.setdefault(particle.words, []).append(particle.log_weight)
        entries = []
        for words in sorted(by_string):
            weight = math.exp(logsumexp(by_string[words]) - log_total)
            entries.append(SupportEntry(
                text=" ".join(words),
                words=words,
                weight=weight,
                log_prior=lm.string_logprob(words),
                log_potential=potential.log_likelihood(words, target),
            ))
        support = tuple(entries)
    return RunResult(
        z_hat=z_hat,
        log_z_hat=log_z,
        support=support,
        diagnostics=tuple(diagnostics),
        particles=tuple(p.copy() for p in particles),
        degenerate=degenerate,
        config=config,
        template_text=serialize_bracketed(template.tree),
    )


def sample_outputs(result, k, rng):
    """k independent draws from the estimated posterior over strings."""
    if result.degenerate or not result.support:
        raise DegenerateRun("no surviving posterior mass to sample from")
    outputs = []
    for _ in range(k):
        u = rng.random()
        acc = 0.0
        chosen = result.support[-1]
        for entry in result.support:
            acc += entry.weight
            if u <= acc:
                chosen = entry
                break
        outputs.append(chosen.text)
    return outputs


def write_run_jsonl(result, handle, samples=None):
    """Header record, one support record per surviving string, then one
    sample record per drawn output (when ``samples`` is given)."""
    header = {
        "record": "header",
        "method": result.config.method,
        "z_hat": result.z_hat,
        "log_z_hat": _json_float(result.log_z_hat),
        "M": result.config.M,
        "tau": result.config.tau,
        "seed": result.config.seed,
        "proposal": result.config.proposal,
        "degenerate": result.degenerate,
        "template": result.template_text,
        "diagnostics": [
            {
                "step": d.step,
                "ess": _json_float(d.ess),
                "resampled": d.resampled,
                "active_count": d.active_count,
            }
            for d in result.diagnostics
        ],
    }
    handle.write(json.dumps(header) + "\n")
    for entry in result.support:
        handle.write(json.dumps({
            "record": "support",
            "text": entry.text,
            "words": list(entry.words),
            "weight": entry.weight,
            "logprior": _json_float(entry.log_prior),
            "logpotential": _json_float(entry.log_potential),
        }) + "\n")
    for text in samples or ():
        handle.write(json.dumps({"record": "sample", "text": text}) + "\n")


def _json_float(value):
    if value is None or value == NEGINF or value != value:
        return None
    return value


def read_run_jsonl(handle):
    """Parse concatenated run records back into (header, entries) pairs."""
    runs = []
    for line in handle:
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("record") == "header":
            runs.append((record, []))
        else:
            assert runs, "support record before any header"
            runs[-1][1].append(record)
    return runs
