"""Figure rendering for evaluation reports and oracle comparisons.

Everything draws through the Agg backend straight to files, so these
functions work headless and the CLI can drop a PNG next to its JSON
and CSV outputs.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PERCENT_METRICS = ("correct_length", "exact_match", "structure_match", "f1")
_DIVERSITY_METRICS = ("diversity_1", "diversity_2", "diversity_3")


def render_eval_figure(named_reports, path):
    """Grouped bars of the percent-scale metrics plus diversity curves.

    named_reports is a list of (name, EvalReport); one bar group (and
    one diversity line) per report.
    """
    assert named_reports, "nothing to plot"
    names = [name for name, _ in named_reports]
    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4.2))

    width = 0.8 / len(_PERCENT_METRICS)
    for slot, metric in enumerate(_PERCENT_METRICS):
        xs = [i + slot * width for i in range(len(named_reports))]
        ys = [getattr(report, metric) for _, report in named_reports]
        left.bar(xs, ys, width=width, label=metric)
    left.set_xticks([i + 0.4 - width / 2 for i in range(len(names))])
    left.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    left.set_ylim(0, 105)
    left.set_ylabel("percent / F1")
    left.legend(fontsize=7)
    left.set_title("match metrics")

    for name, report in named_reports:
        ys = [getattr(report, metric) for metric in _DIVERSITY_METRICS]
        right.plot([1, 2, 3], ys, marker="o", label=name)
    right.set_xticks([1, 2, 3])
    right.set_xlabel("n-gram order")
    right.set_ylabel("distinct fraction")
    right.set_ylim(0, 1.05)
    right.legend(fontsize=7)
    right.set_title("diversity")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_posterior_figure(exact_probs, approx_probs, path, tvd_value=None,
                            top=20):
    """Side-by-side bars of exact posterior vs estimated weights.

    Strings are ranked by exact probability; anything beyond `top` is
    folded into a final "rest" bucket so the plot stays readable.
    """
    ranked = sorted(exact_probs.items(), key=lambda kv: (-kv[1], kv[0]))
    shown = ranked[:top]
    extra = {words for words in approx_probs if words not in dict(shown)}
    labels = [" ".join(words) for words, _ in shown]
    exact_bars = [prob for _, prob in shown]
    approx_bars = [approx_probs.get(words, 0.0) for words, _ in shown]
    rest_exact = 1.0 - math.fsum(exact_bars)
    rest_approx = math.fsum(approx_probs.get(words, 0.0) for words in extra)
    if len(ranked) > top or rest_approx > 0.0:
        labels.append("rest")
        exact_bars.append(max(rest_exact, 0.0))
        approx_bars.append(rest_approx)

    fig, axis = plt.subplots(figsize=(max(6.0, 0.45 * len(labels)), 4.2))
    xs = range(len(labels))
    axis.bar([x - 0.2 for x in xs], exact_bars, width=0.4, label="exact")
    axis.bar([x + 0.2 for x in xs], approx_bars, width=0.4, label="estimated")
    axis.set_xticks(list(xs))
    axis.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    axis.set_ylabel("probability")
    title = "posterior vs estimate"
    if tvd_value is not None:
        title += "  (TVD %.4f)" % tvd_value
    axis.set_title(title)
    axis.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_diagnostics_figure(headers, path):
    """ESS trajectories per run, with resampling steps marked."""
    assert headers, "nothing to plot"
    fig, axis = plt.subplots(figsize=(7, 4.2))
    for index, header in enumerate(headers):
        steps = [d["step"] for d in header.get("diagnostics", [])]
        values = [d["ess"] for d in header.get("diagnostics", [])]
        if not steps:
            continue
        clean = [(s, v) for s, v in zip(steps, values) if v is not None]
        if not clean:
            continue
        xs, ys = zip(*clean)
        label = "run %d (%s)" % (index, header.get("method") or "?")
        line, = axis.plot(xs, ys, marker=".", label=label)
        hits = [(d["step"], d["ess"]) for d in header["diagnostics"]
                if d.get("resampled") and d["ess"] is not None]
        if hits:
            rx, ry = zip(*hits)
            axis.scatter(rx, ry, marker="x", color=line.get_color(), zorder=3)
    axis.set_xlabel("step")
    axis.set_ylabel("effective sample size")
    axis.legend(fontsize=7)
    axis.set_title("ESS per step (x = resampled)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
