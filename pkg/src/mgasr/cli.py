"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 search failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import __version__
from .errors import MgasrError, SearchFailure, UsageError


def _cmd_gen_corpus(args) -> int:
    import os

    from .lm import save_corpus
    from .score import write_refs
    from .synthdata import gen_synthetic_bilingual

    data = gen_synthetic_bilingual(
        seed=args.seed,
        n_words_per_lang=args.words_per_lang,
        n_train_cs=args.train_cs,
        n_train_mono=args.train_mono,
        extra_factor=args.extra_factor,
        n_dev=args.dev,
        n_test=args.test,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    for name, corpus in data.corpora.items():
        save_corpus(corpus, os.path.join(args.out_dir, f"corpus_{name}.txt"))
    data.lexicon.write(os.path.join(args.out_dir, "lexicon.txt"))
    write_refs(data.dev, os.path.join(args.out_dir, "dev_refs.txt"))
    write_refs(data.test, os.path.join(args.out_dir, "test_refs.txt"))
    print(f"wrote corpora, lexicon and references to {args.out_dir}")
    return 0


def _cmd_train_lm(args) -> int:
    from .lm import load_corpus, train_kneser_ney, write_arpa

    corpus = load_corpus(args.text)
    discount = "auto" if args.discount == "auto" else float(args.discount)
    model = train_kneser_ney(corpus, order=args.order, discount=discount)
    write_arpa(model, args.out)
    print(f"trained order-{args.order} model on {len(corpus)} sentences -> {args.out}")
    return 0


def _cmd_interpolate_lm(args) -> int:
    from .lm import (
        interpolate_static,
        load_corpus,
        read_arpa,
        tune_interpolation_weight,
        write_arpa,
    )

    a = read_arpa(args.lm_a)
    b = read_arpa(args.lm_b)
    if args.tune_on is not None:
        lam = tune_interpolation_weight(a, b, load_corpus(args.tune_on))
        print(f"tuned lambda = {lam:.2f}")
    elif args.lam is not None:
        lam = args.lam
    else:
        raise UsageError("provide either --lam or --tune-on")
    model = interpolate_static(a, b, lam)
    write_arpa(model, args.out)
    print(f"interpolated model (lambda={lam:.2f}) -> {args.out}")
    return 0


def _cmd_perplexity(args) -> int:
    from .lm import load_corpus, perplexity, read_arpa

    model = read_arpa(args.lm)
    result = perplexity(model, load_corpus(args.text))
    print(
        f"perplexity {result.perplexity:.4f} over {result.num_events} events "
        f"({result.num_oov} OOV)"
    )
    return 0


def _cmd_compile_graph(args) -> int:
    from .graphs import Lexicon, compile_decoding_graph, save_decoding_graph
    from .lm import lm_to_grammar_fst, read_arpa

    lex = Lexicon.read(args.lexicon)
    model = read_arpa(args.lm)
    g = lm_to_grammar_fst(model)
    dg = compile_decoding_graph(
        lex, g, args.graph_id, sil_enabled=args.silence, lm_provenance=args.lm
    )
    save_decoding_graph(dg, args.out_prefix)
    n_arcs = sum(len(a) for a in dg.fst.arcs)
    print(f"graph {args.graph_id!r}: {len(dg.fst.arcs)} states, {n_arcs} arcs -> {args.out_prefix}.*")
    return 0


def _cmd_union_graphs(args) -> int:
    from .graphs import (
        DecodingGraph,
        build_multigraph,
        load_decoding_graph,
        save_decoding_graph,
    )

    members = [load_decoding_graph(p) for p in args.graphs]
    gs = build_multigraph(members, union_prior=args.union_prior)
    union_id = "union:" + ",".join(g.graph_id for g in members)
    save_decoding_graph(
        DecodingGraph(graph_id=union_id, fst=gs.fst, units=gs.units), args.out_prefix
    )
    print(f"union of {len(members)} graphs -> {args.out_prefix}.*")
    return 0


def _cmd_synth_scores(args) -> int:
    from .acoustics import synth_acoustic_scores, write_scores

    inventory = tuple(args.inventory.split(","))
    ref_units = args.units.split(",")
    sc = synth_acoustic_scores(
        ref_units,
        inventory,
        frames_per_unit=args.frames_per_unit,
        margin=args.margin,
        noise_sd=args.noise_sd,
        seed=args.seed,
    )
    write_scores(sc, args.out)
    print(f"{sc.num_frames} frames x {len(inventory)} units -> {args.out}")
    return 0


def _cmd_decode(args) -> int:
    from .acoustics import read_scores
    from .decoder import decode, lattice_nbest, write_lattice_text
    from .graphs import load_decoding_graph
    from .rescore import write_nbest

    graph = load_decoding_graph(args.graph)
    scores = read_scores(args.scores)
    lat = decode(
        graph,
        scores,
        beam=args.beam,
        lattice_beam=args.lattice_beam,
        loop_cost=args.loop_cost,
        word_penalty=args.word_penalty,
    )
    hyps = lattice_nbest(lat, max(1, args.nbest))
    best = hyps[0]
    gid = f" [{best.graph_id}]" if best.graph_id else ""
    print(f"{' '.join(best.words)}{gid} (cost {best.total_cost:.3f})")
    if args.lattice_out:
        write_lattice_text(lat, args.lattice_out)
    if args.nbest_out:
        write_nbest({args.utt_id: hyps}, args.nbest_out)
    return 0


def _cmd_rescore(args) -> int:
    from .lm import read_arpa
    from .rescore import RescoreConfig, read_nbest, rescore_nbest, write_nbest

    models = {}
    for spec in args.lm:
        if "=" not in spec:
            raise UsageError(f"--lm expects graph_id=arpa_path, got {spec!r}")
        gid, path = spec.split("=", 1)
        models[gid if gid != "-" else None] = read_arpa(path)
    config = RescoreConfig(models, lm_scale=args.lm_scale, mu=args.mu)
    nbest = read_nbest(args.nbest)
    out = {}
    for utt_id, hyps in nbest.items():
        rescored = rescore_nbest(hyps, config)
        out[utt_id] = rescored
        print(f"{utt_id} {' '.join(rescored[0].words)} (cost {rescored[0].total_cost:.3f})")
    if args.out:
        write_nbest(out, args.out)
    return 0


def _cmd_score(args) -> int:
    from .score import (
        format_report_text,
        read_hyps,
        read_refs,
        report_by_condition,
        write_report_csv,
        write_report_figure,
        write_report_text,
    )

    report = report_by_condition(read_refs(args.refs), read_hyps(args.hyps))
    sys.stdout.write(format_report_text(report))
    if args.out_prefix:
        write_report_csv(report, args.out_prefix + ".csv")
        write_report_text(report, args.out_prefix + ".txt")
        write_report_figure(report, args.out_prefix + ".png")
        print(f"wrote {args.out_prefix}.csv/.txt/.png")
    return 0


def _cmd_run_experiment(args) -> int:
    from .experiment import ExperimentConfig, run_experiment

    kwargs = {}
    if args.config:
        import tomli

        with open(args.config, "rb") as f:
            try:
                kwargs = tomli.load(f)
            except tomli.TOMLDecodeError as e:
                raise UsageError(f"bad config file {args.config}: {e}") from None
        valid = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(kwargs) - valid
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "systems" in kwargs:
            kwargs["systems"] = tuple(kwargs["systems"])
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.rescore:
        kwargs["rescore"] = True
    config = ExperimentConfig(**kwargs)
    result = run_experiment(config, out_dir=args.out_dir)
    with open(f"{args.out_dir}/summary.txt", encoding="utf-8") as f:
        sys.stdout.write(f.read())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mgasr",
        description="WFST-based multi-graph decoding toolkit for code-switched speech",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-corpus", help="generate synthetic bilingual data")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--words-per-lang", type=int, default=24)
    s.add_argument("--train-cs", type=int, default=120)
    s.add_argument("--train-mono", type=int, default=120)
    s.add_argument("--extra-factor", type=int, default=10)
    s.add_argument("--dev", type=int, default=45)
    s.add_argument("--test", type=int, default=45)
    s.set_defaults(func=_cmd_gen_corpus)

    s = sub.add_parser("train-lm", help="train a Kneser-Ney n-gram model")
    s.add_argument("--text", required=True, help="training text, one sentence per line")
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--discount", default="auto", help='a value in (0,1) or "auto"')
    s.add_argument("--out", required=True, help="output ARPA file")
    s.set_defaults(func=_cmd_train_lm)

    s = sub.add_parser("interpolate-lm", help="statically interpolate two models")
    s.add_argument("--lm-a", required=True)
    s.add_argument("--lm-b", required=True)
    s.add_argument("--lam", type=float, default=None, help="weight of the first model")
    s.add_argument("--tune-on", default=None, help="tune lambda on this dev text")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_interpolate_lm)

    s = sub.add_parser("perplexity", help="evaluate a model on text")
    s.add_argument("--lm", required=True)
    s.add_argument("--text", required=True)
    s.set_defaults(func=_cmd_perplexity)

    s = sub.add_parser("compile-graph", help="compile a decoding graph")
    s.add_argument("--lexicon", required=True)
    s.add_argument("--lm", required=True, help="ARPA model for the grammar")
    s.add_argument("--graph-id", required=True)
    s.add_argument("--silence", action="store_true", help="add an optional silence loop")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=_cmd_compile_graph)

    s = sub.add_parser("union-graphs", help="combine graphs into a multigraph union")
    s.add_argument("graphs", nargs="+", help="graph file prefixes")
    s.add_argument("--union-prior", choices=("one", "uniform"), default="one")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=_cmd_union_graphs)

    s = sub.add_parser("synth-scores", help="make synthetic acoustic scores")
    s.add_argument("--units", required=True, help="comma-separated reference units")
    s.add_argument("--inventory", required=True, help="comma-separated unit inventory")
    s.add_argument("--frames-per-unit", type=int, default=3)
    s.add_argument("--margin", type=float, default=4.0)
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth_scores)

    s = sub.add_parser("decode", help="decode one utterance")
    s.add_argument("--graph", required=True, help="graph file prefix")
    s.add_argument("--scores", required=True)
    s.add_argument("--beam", type=float, default=12.0)
    s.add_argument("--lattice-beam", type=float, default=6.0)
    s.add_argument("--loop-cost", type=float, default=0.69)
    s.add_argument("--word-penalty", type=float, default=0.0)
    s.add_argument("--nbest", type=int, default=1)
    s.add_argument("--utt-id", default="utt")
    s.add_argument("--lattice-out", default=None)
    s.add_argument("--nbest-out", default=None)
    s.set_defaults(func=_cmd_decode)

    s = sub.add_parser("rescore", help="rescore an N-best file with per-graph LMs")
    s.add_argument("--nbest", required=True)
    s.add_argument(
        "--lm",
        action="append",
        required=True,
        metavar="GRAPH_ID=ARPA",
        help="repeatable; use `-` as the id for untagged hypotheses",
    )
    s.add_argument("--mu", type=float, default=0.0, help="weight kept on the graph LM cost")
    s.add_argument("--lm-scale", type=float, default=1.0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_rescore)

    s = sub.add_parser("score", help="per-condition WER report")
    s.add_argument("--refs", required=True)
    s.add_argument("--hyps", required=True)
    s.add_argument("--out-prefix", default=None)
    s.set_defaults(func=_cmd_score)

    s = sub.add_parser("run-experiment", help="full synthetic decoding experiment")
    s.add_argument("--config", default=None, help="TOML file with experiment settings")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--rescore", action="store_true")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=_cmd_run_experiment)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 for --help/--version
        return int(e.code or 0)
    try:
        return args.func(args)
    except SearchFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MgasrError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
