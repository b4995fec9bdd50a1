"""Synthetic bilingual data for desk-scale experiments.

Two toy languages are generated as first-order Markov chains over disjoint
vocabularies; words carry `_fy` / `_nl` language markers and spell their own
pronunciations over a shared unit inventory.  The generator produces a
code-switched training corpus, monolingual corpora (one optionally
enlarged), dev/test reference segments labelled by condition (`fy`, `nl`,
`fy-nl`), and noisy synthetic acoustic scores per utterance.

All randomness flows from one root seed through named substreams, so every
artifact is reproducible independently of generation order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .acoustics import AcousticScores, synth_acoustic_scores
from .errors import UsageError
from .graphs import Lexicon

UNIT_INVENTORY = ("p", "t", "k", "s", "m", "n", "i", "u", "e", "o")

CODE_A = "fy"
CODE_B = "nl"
COND_MIXED = f"{CODE_A}-{CODE_B}"


def _substream(seed: int, name: str) -> random.Random:
    return random.Random(f"{seed}:{name}")


@dataclass
class ToyLanguage:
    code: str
    words: list[str]
    prons: dict[str, tuple[str, ...]]
    # word -> (successor words, cumulative-ish weights used by choices())
    chain: dict[str, tuple[list[str], list[float]]]

    def sample_word(self, rng: random.Random) -> str:
        return rng.choice(self.words)

    def next_word(self, rng: random.Random, prev: str | None) -> str:
        if prev is None or prev not in self.chain:
            return self.sample_word(rng)
        succ, weights = self.chain[prev]
        return rng.choices(succ, weights=weights, k=1)[0]

    def sentence(self, rng: random.Random, length: int) -> list[str]:
        out: list[str] = []
        prev = None
        for _ in range(length):
            w = self.next_word(rng, prev)
            out.append(w)
            prev = w
        return out


# disjoint phonotactics: words of the two languages never share units, so
# a graph for the wrong language pays a real acoustic cost
PHONES = {
    CODE_A: (("p", "t", "k"), ("i", "u")),
    CODE_B: (("s", "m", "n"), ("e", "o")),
}


def _make_language(code: str, n_words: int, rng: random.Random) -> ToyLanguage:
    consonants, vowels = PHONES[code]
    prons: dict[str, tuple[str, ...]] = {}
    attempts = 0
    while len(prons) < n_words:
        attempts += 1
        if attempts > 100 * n_words + 1000:
            raise UsageError(
                f"cannot draw {n_words} distinct pronunciations for language {code!r}"
            )
        syllables = rng.randint(1, 2)
        pron = []
        for _ in range(syllables):
            pron.append(rng.choice(consonants))
            pron.append(rng.choice(vowels))
        word = "".join(pron) + "_" + code
        prons.setdefault(word, tuple(pron))
    words = sorted(prons)
    # a skewed Markov chain: each word strongly prefers a few successors
    chain: dict[str, tuple[list[str], list[float]]] = {}
    for w in words:
        preferred = rng.sample(words, k=min(3, len(words)))
        succ = list(words)
        weights = [8.0 if s in preferred else 0.5 for s in succ]
        chain[w] = (succ, weights)
    return ToyLanguage(code, words, prons, chain)


def _mixed_sentence(a: ToyLanguage, b: ToyLanguage, rng: random.Random,
                    length: int, switch_prob: float) -> list[str]:
    lang = a if rng.random() < 0.5 else b
    out: list[str] = []
    prev = None
    for _ in range(length):
        if out and rng.random() < switch_prob:
            lang = b if lang is a else a
            prev = None
        w = lang.next_word(rng, prev)
        out.append(w)
        prev = w
    return out


@dataclass
class SyntheticData:
    lexicon: Lexicon
    corpora: dict[str, list[list[str]]]  # cs, fy, nl, nl_extra
    dev: dict[str, tuple[str, tuple[str, ...]]]
    test: dict[str, tuple[str, tuple[str, ...]]]
    seed: int
    params: dict = field(default_factory=dict)


def _segments(a: ToyLanguage, b: ToyLanguage, rng: random.Random,
              n: int, prefix: str, switch_prob: float) -> dict:
    out = {}
    conds = [CODE_A, CODE_B, COND_MIXED]
    for i in range(n):
        cond = conds[i % 3]
        length = rng.randint(3, 7)
        if cond == CODE_A:
            words = a.sentence(rng, length)
        elif cond == CODE_B:
            words = b.sentence(rng, length)
        else:
            words = _mixed_sentence(a, b, rng, length, switch_prob)
        out[f"{prefix}{i:04d}"] = (cond, tuple(words))
    return out


def gen_synthetic_bilingual(
    seed: int,
    n_words_per_lang: int = 24,
    n_train_cs: int = 120,
    n_train_mono: int = 120,
    extra_factor: int = 10,
    n_dev: int = 45,
    n_test: int = 45,
    switch_prob: float = 0.3,
) -> SyntheticData:
    """Build the full desk-scale bilingual setup from one root seed."""
    if extra_factor < 1:
        raise UsageError("extra_factor must be >= 1")
    a = _make_language(CODE_A, n_words_per_lang, _substream(seed, "lang-a"))
    b = _make_language(CODE_B, n_words_per_lang, _substream(seed, "lang-b"))

    def sentences(lang, rng, n):
        return [lang.sentence(rng, rng.randint(3, 7)) for _ in range(n)]

    rng_cs = _substream(seed, "train-cs")
    corpora = {
        "cs": [
            _mixed_sentence(a, b, rng_cs, rng_cs.randint(3, 7), switch_prob)
            for _ in range(n_train_cs)
        ],
        CODE_A: sentences(a, _substream(seed, "train-a"), n_train_mono),
        CODE_B: sentences(b, _substream(seed, "train-b"), n_train_mono),
        CODE_B + "_extra": sentences(
            b, _substream(seed, "train-b-extra"), n_train_mono * extra_factor
        ),
    }
    entries = {w: [p] for lang in (a, b) for w, p in lang.prons.items()}
    lexicon = Lexicon(entries, units=UNIT_INVENTORY)
    dev = _segments(a, b, _substream(seed, "dev"), n_dev, "dev", switch_prob)
    test = _segments(a, b, _substream(seed, "test"), n_test, "test", switch_prob)
    return SyntheticData(
        lexicon=lexicon,
        corpora=corpora,
        dev=dev,
        test=test,
        seed=seed,
        params=dict(
            n_words_per_lang=n_words_per_lang,
            n_train_cs=n_train_cs,
            n_train_mono=n_train_mono,
            extra_factor=extra_factor,
            switch_prob=switch_prob,
        ),
    )


def scores_for_segments(
    data: SyntheticData,
    segments: dict[str, tuple[str, tuple[str, ...]]],
    frames_per_unit: int = 3,
    margin: float = 4.5,
    noise_sd: float = 2.5,
) -> dict[str, AcousticScores]:
    """Noisy acoustic score matrices for each reference utterance; seeded
    per utterance id so subsets reproduce identically."""
    out = {}
    for utt_id in sorted(segments):
        _, words = segments[utt_id]
        units = [u for w in words for u in data.lexicon.entries[w][0]]
        utt_seed = _substream(data.seed, f"scores:{utt_id}").getrandbits(32)
        out[utt_id] = synth_acoustic_scores(
            units,
            data.lexicon.units,
            frames_per_unit=frames_per_unit,
            margin=margin,
            noise_sd=noise_sd,
            seed=utt_seed,
        )
    return out
