"""Shared test utilities: random machine generators and independent oracles.

Weights drawn here are small dyadic rationals (multiples of 0.25) so that
every sum along a path is exact in double precision and language equality
can be asserted with ==.
"""

from __future__ import annotations

import random

from mgasr.fst import EPS, Fst
from mgasr.semiring import INF, TROPICAL

DYADIC = [i * 0.25 for i in range(17)]  # 0.0 .. 4.0


def dyadic_weight(rng: random.Random) -> float:
    return rng.choice(DYADIC)


def random_acyclic_fst(
    rng: random.Random,
    max_states: int = 8,
    n_ilabels: int = 3,
    n_olabels: int = 3,
    eps_prob: float = 0.0,
    arc_density: float = 0.5,
) -> Fst:
    """Random trim-ish acyclic machine: arcs only go from lower to higher
    state ids, last state always final, start = 0."""
    n = rng.randint(2, max_states)
    f = Fst(TROPICAL)
    f.add_states(n)
    f.set_start(0)
    for s in range(n - 1):
        n_arcs = max(1, int(arc_density * rng.randint(1, 3)))
        for _ in range(n_arcs):
            t = rng.randint(s + 1, n - 1)
            if rng.random() < eps_prob:
                il = ol = EPS
            else:
                il = rng.randint(1, n_ilabels)
                ol = rng.randint(1, n_olabels)
            f.add_arc(s, il, ol, dyadic_weight(rng), t)
    f.set_final(n - 1, dyadic_weight(rng))
    # sprinkle extra finals
    for s in range(1, n - 1):
        if rng.random() < 0.2:
            f.set_final(s, dyadic_weight(rng))
    return f


def random_acceptor(rng: random.Random, max_states: int = 8, n_labels: int = 3, **kw) -> Fst:
    """Acyclic acceptor: identical input and output labels on every arc."""
    f = random_acyclic_fst(rng, max_states, n_labels, n_labels, **kw)
    g = Fst(TROPICAL)
    g.add_states(f.num_states)
    g.set_start(f.start)
    g.finals = dict(f.finals)
    for s in f.states():
        for a in f.arcs[s]:
            g.add_arc(s, a.ilabel, a.ilabel, a.weight, a.nextstate)
    return g


# -- independent path-enumeration oracle -----------------------------------


def oracle_paths(f: Fst, max_len: int = 10):
    """Straightforward bounded DFS, written independently of mgasr.ops.

    Yields (ilabels, olabels, weight) per complete path; labels stripped of
    epsilons, weight summed along the path (tropical times)."""
    out = []

    def rec(state, ils, ols, w, depth):
        fw = f.finals.get(state)
        if fw is not None:
            out.append((tuple(ils), tuple(ols), w + fw))
        if depth >= max_len:
            return
        for a in f.arcs[state]:
            rec(
                a.nextstate,
                ils + [a.ilabel] if a.ilabel != EPS else ils,
                ols + [a.olabel] if a.olabel != EPS else ols,
                w + a.weight,
                depth + 1,
            )

    if f.start != Fst.NO_STATE:
        rec(f.start, [], [], 0.0, 0)
    return out


def oracle_language(f: Fst, max_len: int = 10):
    """(ilabels, olabels) -> min weight, from the oracle enumeration."""
    lang = {}
    for ils, ols, w in oracle_paths(f, max_len):
        k = (ils, ols)
        if k not in lang or w < lang[k]:
            lang[k] = w
    return lang


def oracle_union_language(a: Fst, b: Fst, max_len: int = 10):
    lang = oracle_language(a, max_len)
    for k, w in oracle_language(b, max_len).items():
        if k not in lang or w < lang[k]:
            lang[k] = w
    return lang


def oracle_compose_language(a: Fst, b: Fst, max_len: int = 10):
    """Join of the operands' enumerated path sets on matching middle labels."""
    lang = {}
    for ia, oa, wa in oracle_paths(a, max_len):
        for ib, ob, wb in oracle_paths(b, max_len):
            if oa == ib:
                k = (ia, ob)
                w = wa + wb
                if k not in lang or w < lang[k]:
                    lang[k] = w
    return lang


def assert_language_equal(lang_a: dict, lang_b: dict):
    assert set(lang_a) == set(lang_b), (
        f"string sets differ: only-left={set(lang_a) - set(lang_b)} "
        f"only-right={set(lang_b) - set(lang_a)}"
    )
    for k in lang_a:
        assert lang_a[k] == lang_b[k], f"weight mismatch on {k}: {lang_a[k]} vs {lang_b[k]}"
