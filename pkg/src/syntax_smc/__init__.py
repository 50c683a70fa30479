"""Template-constrained sentence generation by sequential Monte Carlo.

A constituency-tree template fixes the syntax a sentence must realize;
a language model supplies the prior over word strings.  This package
scores candidate strings with tag-sequence potentials, steers particle
samplers with autoregressive shaping, and checks everything against
exact enumeration on small instances.
"""

from .engine import (DegenerateRun, RunConfig, RunResult, ess, rng_for,
                     read_run_jsonl, resample, sample_categorical,
                     sample_outputs, sis, smc, write_run_jsonl)
from .grammar import (PCFG, GrammarError, load_grammar, parse_grammar,
                      save_grammar)
from .lm import (EOS, EmptyCorpus, NEGINF, NextTokenDistribution, NgramLM,
                 TabularLM, UnknownToken, Vocabulary, load_corpus, load_lm,
                 save_lm, train_ngram)
from .metrics import (EmptyList, EvalReport, bracket_f1, brackets, diversity,
                      evaluate_run, log_potential_median, match_metrics,
                      score_outputs, summarize, write_eval_csv)
from .oracle import (ExactPosterior, OptimalShaping, SupportTooLarge,
                     empirical_distribution, enumerate_posterior,
                     optimal_shaping, tvd)
from .proposals import (BigramMixtureProposal, EmptyCandidateSet,
                        PosBigramModel, PriorProposal, load_pos_bigram,
                        save_pos_bigram, train_pos_bigram)
from .remote import (BoundaryUndetected, FixtureTransport, HttpTransport,
                     RemoteError, RemoteLM, RemoteTagger, RemoteUnavailable,
                     advance_word, run_remote)
from .taggers import (FeatureTagger, NullShaper, Potential, UnitPotential,
                      grammar_oracle_tagger, load_tagged_corpus, load_tagger,
                      save_tagged_corpus, save_tagger, target_from_tree,
                      train_feature_tagger)
from .tags import (MalformedSequence, TagSequence, Tetratag, decode, encode,
                   format_tags, parse_tags)
from .trees import (Internal, Leaf, TreeError, TreeTemplate, leaves,
                    parse_bracketed, pos_sequence, serialize_bracketed,
                    template_from_tree, tree_stats)

__version__ = "0.1.0"

__all__ = [
    "BigramMixtureProposal", "BoundaryUndetected", "DegenerateRun", "EOS",
    "EmptyCandidateSet", "EmptyCorpus", "EmptyList", "EvalReport",
    "ExactPosterior", "FeatureTagger", "FixtureTransport", "GrammarError",
    "HttpTransport", "Internal", "Leaf", "MalformedSequence", "NEGINF",
    "NextTokenDistribution", "NgramLM", "NullShaper", "OptimalShaping",
    "PCFG", "PosBigramModel", "Potential", "PriorProposal", "RemoteError",
    "RemoteLM", "RemoteTagger", "RemoteUnavailable", "RunConfig",
    "RunResult", "SupportTooLarge", "TabularLM", "TagSequence", "Tetratag",
    "TreeError", "TreeTemplate", "UnitPotential", "UnknownToken",
    "Vocabulary", "advance_word", "bracket_f1", "brackets", "decode",
    "diversity", "empirical_distribution", "encode", "enumerate_posterior",
    "ess", "evaluate_run", "format_tags", "grammar_oracle_tagger", "leaves",
    "load_corpus", "load_grammar", "load_lm", "load_pos_bigram",
    "load_tagged_corpus", "load_tagger", "log_potential_median",
    "match_metrics", "optimal_shaping", "parse_bracketed", "parse_grammar",
    "parse_tags", "pos_sequence", "read_run_jsonl", "resample", "rng_for",
    "run_remote", "sample_categorical", "sample_outputs",
    "save_grammar", "save_lm", "save_pos_bigram", "save_tagged_corpus",
    "save_tagger", "score_outputs", "serialize_bracketed", "sis", "smc",
    "summarize", "target_from_tree", "template_from_tree", "train_ngram",
    "train_feature_tagger", "train_pos_bigram", "tree_stats", "tvd",
    "write_eval_csv", "write_run_jsonl",
]
