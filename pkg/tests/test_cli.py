"""CLI surface: command pipeline, exit codes, reproducibility."""

import os

import pytest

from mgasr.cli import main


def run(args):
    return main(args)


def test_version_and_usage_exit_codes(capsys):
    assert run(["--version"]) == 0
    assert run([]) == 2
    assert run(["bogus-command"]) == 2
    capsys.readouterr()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small data + model + graph setup shared across CLI tests."""
    d = tmp_path_factory.mktemp("cli")
    data = str(d / "data")
    assert (
        run(
            [
                "gen-corpus", "--seed", "3", "--out-dir", data,
                "--words-per-lang", "8", "--train-cs", "30", "--train-mono", "30",
                "--extra-factor", "2", "--dev", "6", "--test", "6",
            ]
        )
        == 0
    )
    assert run(["train-lm", "--text", f"{data}/corpus_cs.txt", "--order", "2",
                "--out", f"{d}/cs.arpa"]) == 0
    assert run(["train-lm", "--text", f"{data}/corpus_nl_extra.txt", "--order", "2",
                "--out", f"{d}/bpp.arpa"]) == 0
    assert run(["compile-graph", "--lexicon", f"{data}/lexicon.txt",
                "--lm", f"{d}/cs.arpa", "--graph-id", "cs",
                "--out-prefix", f"{d}/gcs"]) == 0
    assert run(["compile-graph", "--lexicon", f"{data}/lexicon.txt",
                "--lm", f"{d}/bpp.arpa", "--graph-id", "bpp",
                "--out-prefix", f"{d}/gbpp"]) == 0
    return d


def test_corpus_files_written(workdir):
    data = workdir / "data"
    for fn in ("corpus_cs.txt", "corpus_fy.txt", "corpus_nl.txt", "corpus_nl_extra.txt",
               "lexicon.txt", "dev_refs.txt", "test_refs.txt"):
        assert (data / fn).exists()


def test_interpolate_and_perplexity(workdir, capsys):
    out = str(workdir / "int.arpa")
    assert run(["interpolate-lm", "--lm-a", f"{workdir}/cs.arpa",
                "--lm-b", f"{workdir}/bpp.arpa", "--lam", "0.5", "--out", out]) == 0
    assert os.path.exists(out)
    assert run(["perplexity", "--lm", out,
                "--text", f"{workdir}/data/corpus_fy.txt"]) == 0
    assert "perplexity" in capsys.readouterr().out


def test_interpolate_requires_lambda_or_tuning(workdir, capsys):
    assert run(["interpolate-lm", "--lm-a", f"{workdir}/cs.arpa",
                "--lm-b", f"{workdir}/bpp.arpa", "--out", str(workdir / "x.arpa")]) == 2
    capsys.readouterr()


def test_union_decode_rescore_pipeline(workdir, capsys):
    d = workdir
    assert run(["union-graphs", f"{d}/gcs", f"{d}/gbpp",
                "--out-prefix", f"{d}/guni"]) == 0
    # a decodable unit sequence: spell a real word from the lexicon
    with open(f"{d}/data/lexicon.txt") as f:
        word, *units = f.readline().split()
    inventory = "p,t,k,s,m,n,i,u,e,o"
    assert run(["synth-scores", "--units", ",".join(units * 2),
                "--inventory", inventory, "--frames-per-unit", "3",
                "--out", f"{d}/sc.txt"]) == 0
    assert run(["decode", "--graph", f"{d}/guni", "--scores", f"{d}/sc.txt",
                "--nbest", "4", "--nbest-out", f"{d}/nb.txt",
                "--lattice-out", f"{d}/lat.txt", "--utt-id", "u1"]) == 0
    out = capsys.readouterr().out
    assert "[cs]" in out or "[bpp]" in out
    assert os.path.exists(f"{d}/nb.txt")
    assert os.path.exists(f"{d}/lat.txt")
    assert run(["rescore", "--nbest", f"{d}/nb.txt",
                "--lm", f"cs={d}/cs.arpa", "--lm", f"bpp={d}/bpp.arpa",
                "--mu", "0.5", "--out", f"{d}/nb2.txt"]) == 0
    assert os.path.exists(f"{d}/nb2.txt")
    capsys.readouterr()


def test_decode_search_failure_exit_code(workdir, capsys):
    # one frame cannot cover any multi-unit word
    assert run(["synth-scores", "--units", "p",
                "--inventory", "p,t,k,s,m,n,i,u,e,o", "--frames-per-unit", "1",
                "--out", f"{workdir}/sc1.txt"]) == 0
    assert run(["decode", "--graph", f"{workdir}/gcs",
                "--scores", f"{workdir}/sc1.txt"]) == 4
    capsys.readouterr()


def test_missing_file_exit_code(workdir, capsys):
    assert run(["perplexity", "--lm", f"{workdir}/nope.arpa",
                "--text", f"{workdir}/data/corpus_cs.txt"]) == 3
    capsys.readouterr()


def test_score_command(workdir, tmp_path, capsys):
    refs = tmp_path / "refs.txt"
    hyps = tmp_path / "hyps.txt"
    refs.write_text("u1 nl a b\nu2 fy c\n")
    hyps.write_text("u1 a b\nu2 d\n")
    prefix = str(tmp_path / "rep")
    assert run(["score", "--refs", str(refs), "--hyps", str(hyps),
                "--out-prefix", prefix]) == 0
    out = capsys.readouterr().out
    assert "wer%" in out
    for ext in (".csv", ".txt", ".png"):
        assert os.path.exists(prefix + ext)


def test_run_experiment_with_toml_and_reproducibility(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        "n_words_per_lang = 8\nn_train_cs = 25\nn_train_mono = 25\n"
        "extra_factor = 2\nn_dev = 6\nn_test = 6\nsystems = [\"cs\", \"union\"]\n"
    )
    out1, out2 = str(tmp_path / "e1"), str(tmp_path / "e2")
    assert run(["run-experiment", "--config", str(cfg), "--seed", "2",
                "--out-dir", out1]) == 0
    assert "lambda" in capsys.readouterr().out
    assert run(["run-experiment", "--config", str(cfg), "--seed", "2",
                "--out-dir", out2]) == 0
    capsys.readouterr()
    for fn in ("summary.csv", "summary.txt"):
        assert open(f"{out1}/{fn}").read() == open(f"{out2}/{fn}").read()


def test_run_experiment_rejects_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("not_a_real_key = 1\n")
    assert run(["run-experiment", "--config", str(cfg),
                "--out-dir", str(tmp_path / "out")]) == 2
    capsys.readouterr()
