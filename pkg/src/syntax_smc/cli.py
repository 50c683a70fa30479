"""Command-line surface: tree tools, training, generation, evaluation.

Exit codes follow a fixed contract: 0 on success, 2 on any input or
configuration problem, 3 when a remote LM cannot be used.  Everything
machine-readable (JSON or JSONL) goes to stdout or --output; progress
and warnings go to stderr.  A key=value config file (bare lines or INI
sections, see --config) supplies defaults for flags; explicit flags
win, and the SYNTAX_SMC_CONFIG environment variable names a config
file to use when --config is absent.
"""

import argparse
import configparser
import json
import os
import sys

from .engine import (RunConfig, rng_for, read_run_jsonl, sample_outputs, sis,
                     smc, write_run_jsonl)
from .grammar import GrammarError, load_grammar
from .lm import (EmptyCorpus, NEGINF, NgramLM, TabularLM, UnknownToken,
                 load_corpus, load_lm, save_lm, train_ngram)
from .metrics import EmptyList, score_outputs, summarize, write_eval_csv
from .oracle import (SupportTooLarge, empirical_distribution,
                     enumerate_posterior, optimal_shaping, tvd,
                     write_comparison_csv)
from .proposals import (BigramMixtureProposal, EmptyCandidateSet,
                        PriorProposal, load_pos_bigram, save_pos_bigram,
                        train_pos_bigram)
from .remote import (BoundaryUndetected, HttpTransport, RemoteError,
                     RemoteLM, RemoteTagger, RemoteUnavailable, run_remote)
from .taggers import (UnitPotential, grammar_oracle_tagger,
                      load_tagged_corpus, load_tagger, save_tagger,
                      train_feature_tagger)
from .tags import MalformedSequence, decode, encode, format_tags, parse_tags
from .trees import (TreeError, parse_bracketed, serialize_bracketed,
                    template_from_tree, tree_stats)

CONFIG_ENV = "SYNTAX_SMC_CONFIG"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REMOTE = 3


class CliError(Exception):
    """Bad flags, bad files, bad combinations; exits with code 2."""


INPUT_ERRORS = (CliError, TreeError, MalformedSequence, GrammarError,
                EmptyCorpus, UnknownToken, EmptyCandidateSet, EmptyList,
                SupportTooLarge, BoundaryUndetected, json.JSONDecodeError,
                OSError, ValueError, KeyError, AssertionError)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="syntax-smc",
        description="Generate sentences that realize a constituency-tree "
                    "template, via importance sampling or SMC over a "
                    "language model.")
    sub = parser.add_subparsers(dest="command", required=True)

    tree = sub.add_parser("tree", help="parse, inspect, encode, decode trees")
    tree.add_argument("action",
                      choices=("parse", "stats", "template", "encode", "decode"))
    tree.add_argument("source", nargs="?",
                      help="bracketed tree text, or a file containing one")
    tree.add_argument("--tags", help="tag sequence (decode)")
    tree.add_argument("--words", help="space-separated words (decode)")
    tree.add_argument("--pos", help="space-separated preterminals (decode)")
    tree.add_argument("--output", help="write result here instead of stdout")

    train = sub.add_parser("train", help="fit and save a model artifact")
    train.add_argument("what", choices=("ngram", "bigram", "tagger"))
    train.add_argument("--corpus", required=True,
                       help="text lines (ngram), words/pos JSONL (bigram), "
                            "or words/tags JSONL (tagger)")
    train.add_argument("--output", required=True)
    train.add_argument("--order", type=int, default=2)
    train.add_argument("--smoothing", type=float, default=0.01,
                       help="add-k smoothing constant (ngram)")
    train.add_argument("--floor", type=float, default=1e-6,
                       help="probability floor (bigram)")
    train.add_argument("--context", choices=("full", "prefix"), default="full",
                       help="feature context (tagger); potentials need full, "
                            "shapers need prefix")
    train.add_argument("--lr", type=float, default=0.1)
    train.add_argument("--epochs", type=int, default=50)
    train.add_argument("--l2", type=float, default=1e-4)

    gen = sub.add_parser("generate",
                         help="sample sentences conforming to a template")
    gen.add_argument("--tree", help="template: bracketed text or a file")
    gen.add_argument("--method", choices=("sis", "smc"))
    gen.add_argument("--M", type=int, help="particle count")
    gen.add_argument("--tau", type=float, help="resampling threshold in [0,1]")
    gen.add_argument("--proposal", choices=("prior", "bigram"))
    gen.add_argument("--lm", choices=("ngram", "tabular", "remote"),
                     dest="lm_kind")
    gen.add_argument("--lm-file", help="trained model file (ngram/tabular)")
    gen.add_argument("--remote-url", help="bridge base URL (remote)")
    gen.add_argument("--grammar", help="PCFG file: grammar-oracle potential "
                                       "and shaper")
    gen.add_argument("--potential-tagger",
                     help="full-context feature tagger file as the potential")
    gen.add_argument("--shaping-tagger",
                     help="prefix-context feature tagger file as the shaper")
    gen.add_argument("--bigram", help="POS-bigram file (bigram proposal)")
    gen.add_argument("--top-k", type=int, dest="top_k",
                     help="LM words mixed into the bigram proposal")
    gen.add_argument("--k", type=int, help="sample records to draw")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--no-shaping", action="store_true",
                     help="run SMC without shaping factors")
    gen.add_argument("--config", help="key=value defaults for these flags")
    gen.add_argument("--output")

    evaluate = sub.add_parser("eval",
                              help="score a generate run file; renders "
                                   "figures and CSV next to the JSON report")
    evaluate.add_argument("samples", help="JSONL written by generate")
    evaluate.add_argument("--grammar",
                          help="PCFG file: reference parser and potential")
    evaluate.add_argument("--parses",
                          help="JSONL of {text, tree} reference parses, "
                               "replacing the grammar parser")
    evaluate.add_argument("--potential-tagger",
                          help="full-context tagger as reference potential "
                               "(with --parses)")
    evaluate.add_argument("--lm-file",
                          help="rescore log priors with this model instead "
                               "of the stored values")
    evaluate.add_argument("--csv", help="write per-run metric rows here")
    evaluate.add_argument("--figures", help="write a metrics figure here")
    evaluate.add_argument("--config")
    evaluate.add_argument("--output")

    orc = sub.add_parser("oracle",
                         help="exact posterior by enumeration, optionally "
                              "comparing a sampler run against it")
    orc.add_argument("spec", help="instance JSON: lm, grammar or unit "
                                  "potential, template, optional run block")
    orc.add_argument("--csv", help="write exact-vs-estimated rows here")
    orc.add_argument("--figures", help="write a comparison figure here")
    orc.add_argument("--config")
    orc.add_argument("--output")
    return parser


def load_config_mapping(path):
    """Flat key=value mapping from an INI-ish file; {} when absent."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser.read_string("[config]\n" + text)
    merged = dict(parser.defaults())
    for section in parser.sections():
        merged.update(parser[section])
    return {key.replace("-", "_"): value for key, value in merged.items()}


def _fill(args, mapping, casts):
    """Config supplies values for flags the user left unset."""
    for dest, cast in casts.items():
        if getattr(args, dest, None) is None and dest in mapping:
            setattr(args, dest, cast(mapping[dest]))


def _as_bool(text):
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _read_source(value, kind="tree"):
    """A bracketed tree may be given inline or as a file path."""
    if value is None:
        raise CliError("missing %s input" % kind)
    if value.lstrip().startswith("("):
        return value
    with open(value, encoding="utf-8") as handle:
        return handle.read()


def _emit(path, text):
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _note(message):
    print(message, file=sys.stderr)


def cmd_tree(args, mapping):
    if args.action == "decode":
        if not (args.tags and args.words and args.pos):
            raise CliError("decode needs --tags, --words, and --pos")
        tags = parse_tags(args.tags)
        tree = decode(tags, args.words.split(), args.pos.split())
        _emit(args.output, serialize_bracketed(tree) + "\n")
        return EXIT_OK
    tree = parse_bracketed(_read_source(args.source))
    if args.action == "parse":
        out = serialize_bracketed(tree) + "\n"
    elif args.action == "stats":
        out = json.dumps(tree_stats(tree), sort_keys=True) + "\n"
    elif args.action == "template":
        out = serialize_bracketed(template_from_tree(tree).tree) + "\n"
    else:  # encode
        out = format_tags(encode(tree)) + "\n"
    _emit(args.output, out)
    return EXIT_OK


def _read_jsonl(path, required_keys):
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            for key in required_keys:
                if key not in record:
                    raise CliError("%s line %d: missing %r"
                                   % (path, lineno, key))
            records.append(record)
    if not records:
        raise CliError("%s holds no records" % path)
    return records


def cmd_train(args, mapping):
    if args.what == "ngram":
        sentences = load_corpus(args.corpus)
        model = train_ngram(sentences, order=args.order, k=args.smoothing)
        save_lm(model, args.output)
        summary = {"model": "ngram", "order": args.order,
                   "k": args.smoothing, "vocabulary": len(model.vocab)}
    elif args.what == "bigram":
        records = _read_jsonl(args.corpus, ("words", "pos"))
        pairs = [(tuple(r["words"]), tuple(r["pos"])) for r in records]
        model = train_pos_bigram(pairs, floor=args.floor)
        save_pos_bigram(model, args.output)
        summary = {"model": "bigram", "pairs": len(model.pairs),
                   "floor": args.floor}
    else:
        corpus = load_tagged_corpus(args.corpus)
        tagger = train_feature_tagger(corpus, args.context, lr=args.lr,
                                      epochs=args.epochs, l2=args.l2)
        save_tagger(tagger, args.output)
        summary = {"model": "tagger", "context": args.context,
                   "features": len(tagger.features)}
    summary["path"] = args.output
    _emit(None, json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


_GEN_CASTS = {
    "tree": str, "method": str, "M": int, "tau": float, "proposal": str,
    "lm_kind": str, "lm_file": str, "remote_url": str, "grammar": str,
    "potential_tagger": str, "shaping_tagger": str, "bigram": str,
    "top_k": int, "k": int, "seed": int, "output": str,
}


def cmd_generate(args, mapping):
    _fill(args, mapping, _GEN_CASTS)
    method = args.method or "smc"
    proposal_kind = args.proposal or "prior"
    lm_kind = args.lm_kind or "ngram"
    tau = 0.25 if args.tau is None else args.tau
    seed = args.seed or 0
    k = args.k or 0
    top_k = args.top_k or 50
    shaping = not (args.no_shaping or _as_bool(mapping.get("no_shaping", "")))
    if args.M is not None:
        particle_count = args.M
    else:
        particle_count = 6 if proposal_kind == "bigram" else 20

    if args.tree is None:
        raise CliError("generate needs --tree (a template file or text)")
    template = template_from_tree(parse_bracketed(_read_source(args.tree)))

    if lm_kind == "remote":
        if proposal_kind == "bigram":
            raise CliError("the bigram proposal needs word-level "
                           "probabilities; it is not available with --lm "
                           "remote")
        if not args.remote_url:
            raise CliError("--lm remote needs --remote-url")
        client = RemoteLM(HttpTransport(args.remote_url))
        lm = None
    else:
        if not args.lm_file:
            raise CliError("--lm %s needs --lm-file" % lm_kind)
        lm = load_lm(args.lm_file)
        expected = NgramLM if lm_kind == "ngram" else TabularLM
        if not isinstance(lm, expected):
            raise CliError("%s is not a %s model" % (args.lm_file, lm_kind))
        client = None

    grammar_shaper = None
    if args.grammar:
        pcfg = load_grammar(args.grammar)
        potential, grammar_shaper = grammar_oracle_tagger(pcfg)
    elif args.potential_tagger:
        potential = load_tagger(args.potential_tagger)
        if potential.context != "full":
            raise CliError("--potential-tagger must be a full-context tagger")
    elif client is not None:
        potential = RemoteTagger(client)
    else:
        raise CliError("generate needs a potential: --grammar, "
                       "--potential-tagger, or a remote LM's tag heads")

    if args.shaping_tagger:
        shaper = load_tagger(args.shaping_tagger)
        if shaper.context != "prefix":
            raise CliError("--shaping-tagger must be a prefix-context tagger")
    elif grammar_shaper is not None:
        shaper = grammar_shaper
    elif client is not None and isinstance(potential, RemoteTagger):
        shaper = potential
    else:
        shaper = None

    config = RunConfig(M=particle_count, tau=tau, seed=seed,
                       proposal="topk" if lm_kind == "remote" else proposal_kind,
                       shaping=shaping)

    if client is not None:
        result = run_remote(client, potential, shaper, template, config,
                            resampling=(method == "smc"))
        scorer = client
    else:
        if proposal_kind == "bigram":
            if not args.bigram:
                raise CliError("--proposal bigram needs --bigram (a trained "
                               "POS-bigram file)")
            proposal = BigramMixtureProposal(lm, load_pos_bigram(args.bigram),
                                             top_k=top_k)
        else:
            proposal = PriorProposal(lm)
        if method == "sis":
            result = sis(lm, proposal, potential, template, config)
        else:
            result = smc(lm, proposal, potential, shaper, template, config)
        scorer = lm

    samples = []
    if k > 0:
        if result.degenerate:
            _note("warning: degenerate run, no samples to draw")
        else:
            samples = sample_outputs(result, k, rng_for(seed, "emit"))

    def writer(handle):
        write_run_jsonl(result, handle, samples=samples)

    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            writer(handle)
    else:
        writer(sys.stdout)
    resampled = sum(1 for d in result.diagnostics if d.resampled)
    _note("%s: z_hat=%.6g support=%d resampled_steps=%d%s"
          % (result.config.method, result.z_hat, len(result.support),
             resampled, " DEGENERATE" if result.degenerate else ""))
    del scorer
    return EXIT_OK


_EVAL_CASTS = {"grammar": str, "parses": str, "potential_tagger": str,
               "lm_file": str, "csv": str, "figures": str, "output": str}


def _reference_pipeline(args):
    """(potential, parser) for evaluation, from grammar or parse files."""
    parser = None
    if args.grammar:
        pcfg = load_grammar(args.grammar)
        potential, _ = grammar_oracle_tagger(pcfg)
        parser = pcfg.viterbi_parse
    elif args.potential_tagger:
        potential = load_tagger(args.potential_tagger)
        if potential.context != "full":
            raise CliError("--potential-tagger must be a full-context tagger")
    else:
        raise CliError("eval needs --grammar or --potential-tagger as the "
                       "reference potential")
    if args.parses:
        table = {}
        for record in _read_jsonl(args.parses, ("text", "tree")):
            table[tuple(record["text"].split())] = \
                parse_bracketed(record["tree"])
        parser = table.get
    if parser is None:
        raise CliError("eval needs --grammar or --parses to supply "
                       "reference trees")
    return potential, parser


def cmd_eval(args, mapping):
    _fill(args, mapping, _EVAL_CASTS)
    potential, parser = _reference_pipeline(args)
    lm = load_lm(args.lm_file) if args.lm_file else None

    with open(args.samples, encoding="utf-8") as handle:
        runs = read_run_jsonl(handle)
    if not runs:
        raise CliError("%s holds no runs" % args.samples)

    named_reports = []
    pooled = []
    for index, (header, records) in enumerate(runs):
        template_text = header.get("template")
        if not template_text:
            raise CliError("run %d: header lacks a template" % index)
        template = template_from_tree(parse_bracketed(template_text))
        support = [r for r in records if r.get("record") == "support"]
        drawn = [r for r in records if r.get("record") == "sample"]
        outputs = [r["text"] for r in (drawn or support)]
        if not outputs:
            _note("warning: run %d has no outputs; skipped" % index)
            continue
        log_priors = {
            r["text"]: NEGINF if r.get("logprior") is None else r["logprior"]
            for r in support
        }
        scores = score_outputs(outputs, template, potential, lm, parser,
                               log_priors=log_priors)
        pooled.extend(scores)
        name = "run%d" % index
        if header.get("method"):
            name += ":" + header["method"]
        named_reports.append((name, summarize(scores)))
    if not pooled:
        raise CliError("%s contains no evaluable outputs" % args.samples)

    overall = summarize(pooled)
    rows = named_reports + [("overall", overall)]
    payload = {
        "runs": [dict(report.to_dict(), name=name)
                 for name, report in named_reports],
        "overall": overall.to_dict(),
    }
    _emit(args.output, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as handle:
            write_eval_csv(rows, handle)
        _note("wrote %s" % args.csv)
    if args.figures:
        from .report import render_eval_figure

        render_eval_figure(rows, args.figures)
        _note("wrote %s" % args.figures)
    return EXIT_OK


_ORACLE_CASTS = {"csv": str, "figures": str, "output": str}


def cmd_oracle(args, mapping):
    _fill(args, mapping, _ORACLE_CASTS)
    with open(args.spec, encoding="utf-8") as handle:
        spec = json.load(handle)
    base = os.path.dirname(os.path.abspath(args.spec))

    def resolve(path):
        return path if os.path.isabs(path) else os.path.join(base, path)

    if "lm" not in spec:
        raise CliError("oracle spec needs an 'lm' model file")
    lm = load_lm(resolve(spec["lm"]))
    if "template" in spec:
        template_text = spec["template"]
    elif "template_file" in spec:
        template_text = _read_source(resolve(spec["template_file"]))
    else:
        raise CliError("oracle spec needs 'template' or 'template_file'")
    template = template_from_tree(parse_bracketed(template_text))

    grammar_shaper = None
    if "grammar" in spec:
        pcfg = load_grammar(resolve(spec["grammar"]))
        potential, grammar_shaper = grammar_oracle_tagger(pcfg)
    elif spec.get("potential") == "unit":
        potential = UnitPotential()
    else:
        raise CliError("oracle spec needs 'grammar' or 'potential': 'unit'")

    exact = enumerate_posterior(lm, potential, template)
    payload = {
        "z": exact.z,
        "log_z": None if exact.log_z == NEGINF else exact.log_z,
        "template": exact.template_text,
        "support": [
            {"text": " ".join(words), "prob": prob}
            for words, prob in sorted(exact.probs.items(),
                                      key=lambda kv: (-kv[1], kv[0]))
        ],
    }
    shaping = None
    if exact.z > 0.0:
        shaping = optimal_shaping(lm, potential, template)
        payload["phi_star_initial"] = shaping.z

    approx = {}
    run_spec = spec.get("run")
    if run_spec is not None:
        method = run_spec.get("method", "smc")
        proposal_kind = run_spec.get("proposal", "prior")
        config = RunConfig(
            M=int(run_spec.get("M", 16)),
            tau=float(run_spec.get("tau", 0.25)),
            seed=int(run_spec.get("seed", 0)),
            proposal=proposal_kind,
            shaping=bool(run_spec.get("shaping", True)),
        )
        if proposal_kind == "phi_star":
            if shaping is None:
                raise CliError("phi_star proposal is undefined: the exact "
                               "posterior has no mass")
            proposal, shaper = shaping.proposal, shaping.shaper
        elif proposal_kind == "prior":
            proposal, shaper = PriorProposal(lm), grammar_shaper
        else:
            raise CliError("oracle run proposal must be prior or phi_star")
        if method == "sis":
            result = sis(lm, proposal, potential, template, config)
        elif method == "smc":
            result = smc(lm, proposal, potential, shaper, template, config)
        else:
            raise CliError("oracle run method must be sis or smc")
        approx = empirical_distribution(result)
        payload["run"] = {
            "method": method,
            "M": config.M,
            "tau": config.tau,
            "seed": config.seed,
            "proposal": proposal_kind,
            "z_hat": result.z_hat,
            "degenerate": result.degenerate,
            "tvd": tvd(exact.probs, approx),
        }

    _emit(args.output, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as handle:
            write_comparison_csv(exact.probs, approx, handle)
        _note("wrote %s" % args.csv)
    if args.figures:
        from .report import render_posterior_figure

        tvd_value = payload.get("run", {}).get("tvd")
        render_posterior_figure(exact.probs, approx, args.figures,
                                tvd_value=tvd_value)
        _note("wrote %s" % args.figures)
    return EXIT_OK


_DISPATCH = {
    "tree": cmd_tree,
    "train": cmd_train,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "oracle": cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        mapping = load_config_mapping(getattr(args, "config", None))
        return _DISPATCH[args.command](args, mapping)
    except RemoteUnavailable as exc:
        _note("remote error: %s" % exc)
        return EXIT_REMOTE
    except RemoteError as exc:
        _note("remote error: %s" % exc)
        return EXIT_REMOTE
    except INPUT_ERRORS as exc:
        _note("error [%s]: %s" % (type(exc).__name__, exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
