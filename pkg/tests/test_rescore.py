"""Rescoring: interpolation formula, model routing by graph id, file I/O."""

import random

import pytest

from mgasr.decoder import Hypothesis
from mgasr.errors import DataFormatError, UsageError
from mgasr.lm import train_kneser_ney
from mgasr.rescore import RescoreConfig, read_nbest, rescore_nbest, write_nbest

CORPUS_A = [["x", "y"], ["x", "y", "x"], ["y", "x"]]
CORPUS_B = [["y", "y"], ["y", "x", "y"], ["y"]]


def models():
    return {
        "a": train_kneser_ney(CORPUS_A, order=2),
        "b": train_kneser_ney(CORPUS_B, order=2),
    }


def hyp(words, gid, am=1.0, lm=2.0):
    return Hypothesis(tuple(words), gid, am, lm)


def test_formula_matches_hand_computation():
    m = models()
    h = hyp(["x", "y"], "a", am=1.5, lm=3.0)
    cfg = RescoreConfig(m, lm_scale=0.8, mu=0.25)
    (r,) = rescore_nbest([h], cfg)
    want = 0.25 * 3.0 + 0.75 * 0.8 * m["a"].sentence_cost(["x", "y"])
    assert abs(r.lm_cost - want) < 1e-12
    assert r.am_cost == 1.5
    assert abs(r.total_cost - (1.5 + want)) < 1e-12


def test_mu_one_keeps_graph_costs():
    m = models()
    hyps = [hyp(["x"], "a", am=1.0, lm=5.0), hyp(["y"], "b", am=2.0, lm=1.0)]
    out = rescore_nbest(hyps, RescoreConfig(m, mu=1.0))
    by_words = {r.words: r for r in out}
    assert by_words[("x",)].lm_cost == 5.0
    assert by_words[("y",)].lm_cost == 1.0


def test_mu_zero_uses_only_model_cost():
    m = models()
    h = hyp(["y", "x"], "b", lm=99.0)
    (r,) = rescore_nbest([h], RescoreConfig(m, mu=0.0))
    assert abs(r.lm_cost - m["b"].sentence_cost(["y", "x"])) < 1e-12


def test_each_graph_id_uses_its_own_model():
    m = models()
    ha = hyp(["y", "y"], "a")
    hb = hyp(["y", "y"], "b")
    ra, rb = rescore_nbest([ha, hb], RescoreConfig(m, mu=0.0))[:2]
    costs = {r.graph_id: r.lm_cost for r in (ra, rb)}
    assert abs(costs["a"] - m["a"].sentence_cost(["y", "y"])) < 1e-12
    assert abs(costs["b"] - m["b"].sentence_cost(["y", "y"])) < 1e-12
    assert costs["a"] != costs["b"]


def test_output_sorted_by_total_cost():
    m = models()
    rng = random.Random(4)
    hyps = [
        hyp(rng.choices(["x", "y"], k=rng.randint(1, 4)), rng.choice(["a", "b"]),
            am=rng.uniform(0, 5), lm=rng.uniform(0, 5))
        for _ in range(20)
    ]
    out = rescore_nbest(hyps, RescoreConfig(m, mu=0.3))
    totals = [r.total_cost for r in out]
    assert totals == sorted(totals)


def test_missing_model_names_graph_id():
    with pytest.raises(UsageError, match="ghost"):
        rescore_nbest([hyp(["x"], "ghost")], RescoreConfig(models()))


def test_invalid_config_rejected():
    with pytest.raises(UsageError):
        RescoreConfig(models(), mu=1.5)
    with pytest.raises(UsageError):
        RescoreConfig(models(), lm_scale=0.0)


def test_nbest_round_trip(tmp_path):
    nb = {
        "utt1": [hyp(["x", "y"], "a", 1.25, 2.5), hyp(["y"], None, 0.5, 0.75)],
        "utt2": [hyp([], "b", 3.0, 0.0)],
    }
    p = str(tmp_path / "nbest.txt")
    write_nbest(nb, p)
    back = read_nbest(p)
    assert back == nb


def test_read_nbest_rejects_bad_rank(tmp_path):
    p = tmp_path / "nb.txt"
    p.write_text("u 2 a 1.0 2.0 x\n")
    with pytest.raises(DataFormatError):
        read_nbest(str(p))


def test_read_nbest_rejects_short_line(tmp_path):
    p = tmp_path / "nb.txt"
    p.write_text("u 1 a 1.0\n")
    with pytest.raises(DataFormatError):
        read_nbest(str(p))
