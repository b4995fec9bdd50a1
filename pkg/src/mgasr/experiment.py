"""End-to-end synthetic bilingual decoding experiment.

From one root seed: generate data, train the language models, tune the
static interpolation weight on dev, compile decoding graphs, decode the
test set with each system, and write per-condition WER reports (CSV, text,
and a comparison figure) to an output directory.

Systems reported:
  cs           single graph from the code-switched LM
  interp       single graph from the dev-tuned static interpolation of the
               code-switched LM and the enlarged monolingual-B LM
  union        multigraph union of the code-switched and enlarged
               monolingual-B graphs
  union-mono   multigraph union of the two plain monolingual graphs
  union-resc   `union` N-best rescored with per-graph LMs (optional)
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

from .decoder import best_hypothesis, decode, lattice_nbest
from .errors import SearchFailure
from .graphs import build_multigraph, compile_decoding_graph
from .lm import (
    interpolate_static,
    lm_to_grammar_fst,
    train_kneser_ney,
    tune_interpolation_weight,
)
from .rescore import RescoreConfig, rescore_nbest
from .score import WerReport, report_by_condition, write_report_figure
from .synthdata import (
    CODE_A,
    CODE_B,
    gen_synthetic_bilingual,
    scores_for_segments,
)


@dataclass
class ExperimentConfig:
    seed: int = 1
    order: int = 2
    n_words_per_lang: int = 24
    n_train_cs: int = 120
    n_train_mono: int = 120
    extra_factor: int = 10
    n_dev: int = 45
    n_test: int = 45
    frames_per_unit: int = 3
    margin: float = 4.5
    noise_sd: float = 2.5
    beam: float = 10.0
    lattice_beam: float = 4.0
    loop_cost: float = 0.69
    word_penalty: float = 2.5
    union_prior: str = "one"
    systems: tuple[str, ...] = ("cs", "interp", "union", "union-mono")
    rescore: bool = False
    rescore_nbest: int = 10
    rescore_mu: float = 0.5
    rescore_lm_scale: float = 1.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    interp_lambda: float
    reports: dict[str, WerReport]
    hypotheses: dict[str, dict[str, tuple[str, ...]]]
    search_failures: dict[str, list[str]] = field(default_factory=dict)


def run_experiment(config: ExperimentConfig, out_dir: str | None = None) -> ExperimentResult:
    data = gen_synthetic_bilingual(
        seed=config.seed,
        n_words_per_lang=config.n_words_per_lang,
        n_train_cs=config.n_train_cs,
        n_train_mono=config.n_train_mono,
        extra_factor=config.extra_factor,
        n_dev=config.n_dev,
        n_test=config.n_test,
    )
    lm_cs = train_kneser_ney(data.corpora["cs"], order=config.order)
    lm_a = train_kneser_ney(data.corpora[CODE_A], order=config.order)
    lm_b = train_kneser_ney(data.corpora[CODE_B], order=config.order)
    lm_bpp = train_kneser_ney(data.corpora[CODE_B + "_extra"], order=config.order)
    dev_text = [list(words) for _, words in data.dev.values()]
    lam = tune_interpolation_weight(lm_cs, lm_bpp, dev_text)
    lm_interp = interpolate_static(lm_cs, lm_bpp, lam)

    def graph(model, gid):
        return compile_decoding_graph(data.lexicon, lm_to_grammar_fst(model), gid)

    g_cs = graph(lm_cs, "cs")
    g_bpp = graph(lm_bpp, CODE_B + "pp")
    builders = {
        "cs": lambda: g_cs,
        "interp": lambda: graph(lm_interp, "interp"),
        "union": lambda: build_multigraph([g_cs, g_bpp], union_prior=config.union_prior),
        "union-mono": lambda: build_multigraph(
            [graph(lm_a, CODE_A), graph(lm_b, CODE_B)], union_prior=config.union_prior
        ),
    }
    unknown = set(config.systems) - set(builders)
    if unknown:
        from .errors import UsageError

        raise UsageError(f"unknown systems: {sorted(unknown)}")
    systems = {name: builders[name]() for name in config.systems}

    scores = scores_for_segments(
        data,
        data.test,
        frames_per_unit=config.frames_per_unit,
        margin=config.margin,
        noise_sd=config.noise_sd,
    )

    reports: dict[str, WerReport] = {}
    hypotheses: dict[str, dict[str, tuple[str, ...]]] = {}
    failures: dict[str, list[str]] = {}
    rescore_models = {"cs": lm_cs, CODE_B + "pp": lm_bpp}

    def decode_system(name, g, rescored=False):
        hyps: dict[str, tuple[str, ...]] = {}
        failed: list[str] = []
        for utt_id, sc in scores.items():
            try:
                lat = decode(
                    g,
                    sc,
                    beam=config.beam,
                    lattice_beam=config.lattice_beam,
                    loop_cost=config.loop_cost,
                    word_penalty=config.word_penalty,
                )
                if rescored:
                    nb = lattice_nbest(lat, config.rescore_nbest)
                    cfg = RescoreConfig(
                        rescore_models,
                        lm_scale=config.rescore_lm_scale,
                        mu=config.rescore_mu,
                    )
                    hyps[utt_id] = rescore_nbest(nb, cfg)[0].words
                else:
                    hyps[utt_id] = best_hypothesis(lat).words
            except SearchFailure:
                failed.append(utt_id)
        hypotheses[name] = hyps
        failures[name] = failed
        reports[name] = report_by_condition(data.test, hyps)

    for name, g in systems.items():
        decode_system(name, g)
    if config.rescore:
        if "union" not in systems:
            from .errors import UsageError

            raise UsageError("rescoring requires the `union` system")
        decode_system("union-resc", systems["union"], rescored=True)

    result = ExperimentResult(config, lam, reports, hypotheses, failures)
    if out_dir is not None:
        write_experiment_outputs(result, data, out_dir)
    return result


# -- output files ----------------------------------------------------------


def write_experiment_outputs(result: ExperimentResult, data, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    from .score import write_hyps, write_refs

    write_refs(data.test, os.path.join(out_dir, "test_refs.txt"))
    for name, hyps in result.hypotheses.items():
        write_hyps(hyps, os.path.join(out_dir, f"hyps_{name}.txt"))

    conditions = sorted(
        {c for rep in result.reports.values() for c in rep.by_condition}
    )
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["system", "condition", "num_ref_words", "sub", "del", "ins", "wer"])
        for name in sorted(result.reports):
            for cond in conditions:
                c = result.reports[name].by_condition.get(cond)
                if c is None:
                    continue
                w.writerow([name, cond, c.num_ref, c.subs, c.dels, c.ins, f"{c.wer:.4f}"])

    lines = [f"interpolation lambda: {result.interp_lambda:.2f}", ""]
    header = f"{'system':<12}" + "".join(f"{c:>9}" for c in conditions)
    lines.append(header)
    for name in sorted(result.reports):
        row = f"{name:<12}"
        for cond in conditions:
            c = result.reports[name].by_condition.get(cond)
            row += f"{100.0 * c.wer:>9.2f}" if c is not None else f"{'-':>9}"
        lines.append(row)
    for name, failed in sorted(result.search_failures.items()):
        if failed:
            lines.append(f"search failures ({name}): {' '.join(failed)}")
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")

    with open(os.path.join(out_dir, "params.json"), "w", encoding="utf-8") as f:
        json.dump(
            {"config": asdict(result.config), "interp_lambda": result.interp_lambda},
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")

    _write_comparison_figure(result, conditions, os.path.join(out_dir, "summary.png"))
    for name, rep in result.reports.items():
        write_report_figure(
            rep, os.path.join(out_dir, f"wer_{name}.png"), title=f"WER by condition: {name}"
        )


def _write_comparison_figure(result: ExperimentResult, conditions, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    systems = sorted(result.reports)
    width = 0.8 / max(1, len(systems))
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, name in enumerate(systems):
        xs = []
        ys = []
        for i, cond in enumerate(conditions):
            c = result.reports[name].by_condition.get(cond)
            if c is None:
                continue
            xs.append(i + k * width)
            ys.append(100.0 * c.wer)
        ax.bar(xs, ys, width=width, label=name)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(conditions))])
    ax.set_xticklabels(conditions)
    ax.set_ylabel("WER (%)")
    ax.set_title("WER by condition and system")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
