"""Backoff n-gram language modeling.

Training uses interpolated Kneser-Ney smoothing: raw counts at the highest
order, continuation counts below (n-grams starting with <s> keep raw
counts), a single absolute discount per order, and interpolation down to a
uniform base distribution.  Models are stored in standard backoff form
(log10 probability + log10 backoff weight per entry), so ARPA round trips
are direct and per-history normalization is exact by construction.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataFormatError, UsageError
from .fst import EPS, Fst, SymbolTable, is_reserved_symbol
from .semiring import TROPICAL

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
BACKOFF_SYM = "#0"

LN10 = math.log(10.0)
LOGP_BOS = -99.0  # conventional stand-in: <s> is never a predicted event

DEFAULT_DISCOUNT = 0.75
DEFAULT_UNK_MASS = 1e-7

Sentence = Sequence[str]


# -- corpus helpers --------------------------------------------------------


def load_corpus(path: str) -> list[list[str]]:
    """UTF-8, one sentence per line, whitespace-tokenized."""
    corpus = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            toks = line.split()
            if not toks:
                continue
            for t in toks:
                if is_reserved_symbol(t):
                    raise DataFormatError(f"{path}:{lineno}: reserved symbol in corpus: {t!r}")
            corpus.append(toks)
    return corpus


def save_corpus(corpus: Iterable[Sentence], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in corpus:
            f.write(" ".join(sent) + "\n")


# -- model -----------------------------------------------------------------


class NGramModel:
    """Backoff n-gram model over word strings.

    tables[k] maps k-tuples of words to [log10 p, log10 bow or None].
    Scoring is reentrant; the model is immutable after construction.
    """

    def __init__(self, order: int):
        self.order = order
        self.tables: dict[int, dict[tuple[str, ...], list]] = {
            k: {} for k in range(1, order + 1)
        }
        self.vocab: set[str] = set()  # scoring vocab: words + </s> + <unk>, no <s>

    # -- scoring -----------------------------------------------------------

    def _norm_word(self, w: str) -> str:
        return w if w in self.vocab or w == BOS else UNK

    def logp10(self, word: str, history: Sequence[str]) -> float:
        """Backoff log10 probability of word given the history."""
        w = self._norm_word(word)
        h = tuple(self._norm_word(x) for x in history)[max(0, len(history) - self.order + 1):]
        acc = 0.0
        while True:
            entry = self.tables[len(h) + 1].get(h + (w,))
            if entry is not None:
                return acc + entry[0]
            if not h:
                # every scoring-vocab word has a unigram entry; reaching here
                # means w itself is <unk> without an entry, which training
                # forbids
                raise KeyError(f"no unigram entry for {w!r}")
            he = self.tables[len(h)].get(h)
            if he is not None and he[1] is not None:
                acc += he[1]
            h = h[1:]
        # unreachable

    def sentence_logp10(self, words: Sequence[str]) -> float:
        """Sum of log10 p over the words plus the sentence-end event."""
        total = 0.0
        hist: tuple[str, ...] = (BOS,)
        for w in words:
            total += self.logp10(w, hist)
            hist = hist + (w,)
        total += self.logp10(EOS, hist)
        return total

    def sentence_cost(self, words: Sequence[str]) -> float:
        """Natural-log cost of the sentence (  -ln p ), for rescoring."""
        return -self.sentence_logp10(words) * LN10

    # -- invariants --------------------------------------------------------

    def check_normalization(self, tol: float = 1e-6) -> None:
        """Verify sum_w p(w|h) == 1 for every stored history; raises on
        violation."""
        words = sorted(self.vocab)
        for h in self.histories():
            total = sum(10.0 ** self.logp10(w, h) for w in words)
            if abs(total - 1.0) > tol:
                raise UsageError(f"history {h!r} sums to {total!r}, not 1")

    def histories(self) -> list[tuple[str, ...]]:
        """Every context that conditions at least one stored n-gram."""
        hs = {()}
        for k in range(2, self.order + 1):
            hs.update(g[:-1] for g in self.tables[k])
        return sorted(hs, key=lambda h: (len(h), h))

    def num_entries(self, k: int) -> int:
        return len(self.tables[k])


# -- Kneser-Ney training ---------------------------------------------------


def _raw_counts(corpus: Iterable[Sentence], order: int) -> dict[int, dict[tuple[str, ...], int]]:
    counts: dict[int, dict[tuple[str, ...], int]] = {k: defaultdict(int) for k in range(1, order + 1)}
    for sent in corpus:
        padded = [BOS] + list(sent) + [EOS]
        n = len(padded)
        for k in range(1, order + 1):
            for i in range(n - k + 1):
                g = tuple(padded[i : i + k])
                if all(x == BOS for x in g):
                    continue
                counts[k][g] += 1

        counts[1][(BOS,)] += 1  # context mass for backoff bookkeeping
    return counts


def _estimate_discount(counts: dict[tuple[str, ...], int]) -> float:
    n1 = sum(1 for c in counts.values() if c == 1)
    n2 = sum(1 for c in counts.values() if c == 2)
    if n1 == 0 or n2 == 0:
        return DEFAULT_DISCOUNT
    return n1 / (n1 + 2.0 * n2)


def train_kneser_ney(
    corpus: Iterable[Sentence],
    order: int,
    discount: float | str = DEFAULT_DISCOUNT,
    unk_mass: float = DEFAULT_UNK_MASS,
) -> NGramModel:
    """Interpolated (non-modified) Kneser-Ney.

    discount: a fixed D in (0,1), or "auto" for D = n1/(n1+2*n2) per order.
    """
    corpus = [list(s) for s in corpus]
    if not corpus:
        raise UsageError("empty training corpus")
    if not 1 <= order <= 5:
        raise UsageError(f"order must be in [1,5], got {order}")
    seen = {w for s in corpus for w in s}
    if len(seen) < 2:
        raise UsageError("vocabulary of size < 2: smoothing undefined")

    counts = _raw_counts(corpus, order)

    # continuation counts for the lower orders; <s>-initial n-grams keep raw
    for k in range(order - 1, 0, -1):
        cont: dict[tuple[str, ...], int] = defaultdict(int)
        for g in counts[k + 1]:
            cont[g[1:]] += 1
        for g in list(counts[k]):
            if g[0] != BOS:
                counts[k][g] = cont.get(g, counts[k][g])

    discounts: dict[int, float] = {}
    for k in range(1, order + 1):
        if discount == "auto":
            discounts[k] = _estimate_discount(
                {g: c for g, c in counts[k].items() if g[0] != BOS or k == 1}
            )
        else:
            d = float(discount)
            if not 0.0 < d < 1.0:
                raise UsageError(f"discount must be in (0,1), got {d}")
            discounts[k] = d

    model = NGramModel(order)
    model.vocab = seen | {EOS, UNK}

    # context totals and fan-out at each order
    totals: dict[int, dict[tuple[str, ...], int]] = {}
    fanout: dict[int, dict[tuple[str, ...], int]] = {}
    for k in range(1, order + 1):
        tot: dict[tuple[str, ...], int] = defaultdict(int)
        fan: dict[tuple[str, ...], int] = defaultdict(int)
        for g, c in counts[k].items():
            if k == 1 and g == (BOS,):
                continue
            tot[g[:-1]] += c
            fan[g[:-1]] += 1
        totals[k] = tot
        fanout[k] = fan

    # uniform interpolation base over the seen vocab + </s>; <unk> gets its
    # own floor mass afterwards
    base_vocab = sorted(seen | {EOS})
    uniform = 1.0 / len(base_vocab)

    def p_interp(g: tuple[str, ...]) -> float:
        """Interpolated KN probability of g[-1] given g[:-1]."""
        k = len(g)
        h = g[:-1]
        c = counts[k].get(g, 0)
        tot = totals[k].get(h, 0)
        d = discounts[k]
        if tot == 0:
            lower = p_interp(g[1:]) if k > 1 else uniform
            return lower
        main = max(c - d, 0.0) / tot
        lam = d * fanout[k].get(h, 0) / tot
        lower = p_interp(g[1:]) if k > 1 else uniform
        return main + lam * lower

    # unigram probabilities over the base vocab, renormalized exactly, with
    # the <unk> floor carved out afterwards
    uni: dict[str, float] = {w: p_interp((w,)) for w in base_vocab}
    total_mass = sum(uni.values())
    scale = (1.0 - unk_mass) / total_mass
    for w, p in uni.items():
        model.tables[1][(w,)] = [math.log10(p * scale), None]
    model.tables[1][(UNK,)] = [math.log10(unk_mass), None]
    model.tables[1][(BOS,)] = [LOGP_BOS, None]

    # higher orders: every counted n-gram gets its interpolated probability
    for k in range(2, order + 1):
        for g in sorted(counts[k]):
            if g[-1] == BOS:
                continue
            model.tables[k][g] = [math.log10(p_interp(g)), None]

    _recompute_backoffs(model)
    return model


def _recompute_backoffs(model: NGramModel) -> None:
    """Set backoff weights so that every history normalizes exactly:
    bow(h) = (1 - sum_seen p(w|h)) / (1 - sum_seen p(w|h')).

    Processes contexts by increasing length so lower-order scoring is
    complete when needed."""
    contexts: dict[int, dict[tuple[str, ...], list[str]]] = defaultdict(lambda: defaultdict(list))
    for k in range(2, model.order + 1):
        for g in model.tables[k]:
            contexts[k - 1][g[:-1]].append(g[-1])
    for hlen in sorted(contexts):
        for h, words in contexts[hlen].items():
            num = 1.0
            den = 1.0
            for w in words:
                num -= 10.0 ** model.tables[hlen + 1][h + (w,)][0]
                den -= 10.0 ** model.logp10(w, h[1:])
            if den <= 1e-12 or num <= 1e-12:
                bow10 = 0.0
            else:
                bow10 = math.log10(num / den)
            entry = model.tables[hlen].get(h)
            if entry is None:
                # ensure a carrier entry exists for the context itself
                entry = [LOGP_BOS if h[-1] == BOS else math.log10(10.0 ** model.logp10(h[-1], h[:-1])), None]
                model.tables[hlen][h] = entry
            entry[1] = bow10


# -- interpolation ---------------------------------------------------------


def interpolate_static(a: NGramModel, b: NGramModel, lam: float) -> NGramModel:
    """Merged backoff model: p = lam*Pa + (1-lam)*Pb on the union of both
    models' events, with backoff weights recomputed for exact
    normalization."""
    if a.order != b.order:
        raise UsageError(f"order mismatch: {a.order} vs {b.order}")
    if not 0.0 <= lam <= 1.0:
        raise UsageError(f"lambda must be in [0,1], got {lam}")
    out = NGramModel(a.order)
    out.vocab = a.vocab | b.vocab

    def mix(w: str, h: tuple[str, ...]) -> float:
        pa = 10.0 ** a.logp10(w, h)
        pb = 10.0 ** b.logp10(w, h)
        return lam * pa + (1.0 - lam) * pb

    # unigram level: extend each model over the union vocabulary by
    # splitting its <unk> mass over the words it has never seen (plus <unk>
    # itself), so each extended distribution still sums to one exactly
    extra_a = out.vocab - a.vocab
    extra_b = out.vocab - b.vocab

    def ext_uni(m: NGramModel, extra: set[str], w: str) -> float:
        if w == UNK or w not in m.vocab:
            return (10.0 ** m.logp10(UNK, ())) / (len(extra) + 1)
        return 10.0 ** m.logp10(w, ())

    for w in sorted(out.vocab):
        p = lam * ext_uni(a, extra_a, w) + (1.0 - lam) * ext_uni(b, extra_b, w)
        out.tables[1][(w,)] = [math.log10(p), None]
    out.tables[1][(BOS,)] = [LOGP_BOS, None]

    for k in range(2, out.order + 1):
        keys = set(a.tables[k]) | set(b.tables[k])
        for g in sorted(keys):
            if g[-1] == BOS:
                continue
            out.tables[k][g] = [math.log10(mix(g[-1], g[:-1])), None]

    _recompute_backoffs(out)
    return out


# -- perplexity ------------------------------------------------------------


@dataclass
class PerplexityResult:
    perplexity: float
    log10_sum: float
    num_events: int  # predicted tokens including </s>, excluding <s>
    num_oov: int

    def __float__(self) -> float:
        return self.perplexity


def perplexity(model: NGramModel, corpus: Iterable[Sentence]) -> PerplexityResult:
    """10^(-mean log10 p per event); OOV tokens scored as <unk> and counted."""
    corpus = [list(s) for s in corpus]
    if not corpus:
        raise UsageError("empty evaluation corpus")
    log_sum = 0.0
    n = 0
    oov = 0
    for sent in corpus:
        hist: tuple[str, ...] = (BOS,)
        for w in sent:
            if w not in model.vocab:
                oov += 1
            log_sum += model.logp10(w, hist)
            hist = hist + (w,)
            n += 1
        log_sum += model.logp10(EOS, hist)
        n += 1
    return PerplexityResult(10.0 ** (-log_sum / n), log_sum, n, oov)


def _dynamic_perplexity(a: NGramModel, b: NGramModel, lam: float, corpus: list[list[str]]) -> float:
    """Token-level mixture perplexity, the exact objective for lambda
    tuning (equals the static merge's perplexity on shared vocab)."""
    log_sum = 0.0
    n = 0
    for sent in corpus:
        hist: tuple[str, ...] = (BOS,)
        for w in list(sent) + [EOS]:
            p = lam * 10.0 ** a.logp10(w, hist) + (1.0 - lam) * 10.0 ** b.logp10(w, hist)
            log_sum += math.log10(p)
            hist = hist + (w,)
            n += 1
    return 10.0 ** (-log_sum / n)


LAMBDA_GRID = [round(0.05 * i, 2) for i in range(21)]


def tune_interpolation_weight(a: NGramModel, b: NGramModel, dev: Iterable[Sentence]) -> float:
    """argmin over the 0.00..1.00 (step 0.05) grid of mixture perplexity on
    dev; ties go to the smaller lambda."""
    dev = [list(s) for s in dev]
    if not dev:
        raise UsageError("empty dev corpus")
    best_lam, best_ppl = None, None
    for lam in LAMBDA_GRID:
        ppl = _dynamic_perplexity(a, b, lam, dev)
        if best_ppl is None or ppl < best_ppl:
            best_lam, best_ppl = lam, ppl
    return best_lam


# -- ARPA I/O --------------------------------------------------------------


def _fmt_log(x: float) -> str:
    return f"{x:.7g}"


def write_arpa(model: NGramModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for k in range(1, model.order + 1):
            f.write(f"ngram {k}={model.num_entries(k)}\n")
        for k in range(1, model.order + 1):
            f.write(f"\n\\{k}-grams:\n")
            for g in sorted(model.tables[k]):
                p, bow = model.tables[k][g]
                line = f"{_fmt_log(p)}\t{' '.join(g)}"
                if bow is not None:
                    line += f"\t{_fmt_log(bow)}"
                f.write(line + "\n")
        f.write("\n\\end\\\n")


def read_arpa(path: str) -> NGramModel:
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    i = 0

    def err(lineno: int, msg: str) -> DataFormatError:
        return DataFormatError(f"{path}:{lineno}: {msg}")

    while i < len(lines) and lines[i].strip() != "\\data\\":
        if lines[i].strip():
            raise err(i + 1, "expected \\data\\ header")
        i += 1
    if i == len(lines):
        raise err(len(lines), "missing \\data\\ header")
    i += 1
    declared: dict[int, int] = {}
    while i < len(lines) and lines[i].strip():
        line = lines[i].strip()
        if not line.startswith("ngram "):
            raise err(i + 1, f"bad count line: {line!r}")
        try:
            k_s, n_s = line[len("ngram "):].split("=")
            declared[int(k_s)] = int(n_s)
        except ValueError:
            raise err(i + 1, f"non-numeric count line: {line!r}") from None
        i += 1
    if not declared or sorted(declared) != list(range(1, max(declared) + 1)):
        raise err(i, "incomplete ngram count declarations")

    model = NGramModel(max(declared))
    section = None
    for lineno in range(i, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        if line == "\\end\\":
            section = "end"
            continue
        m = line.startswith("\\") and line.endswith("-grams:")
        if m:
            try:
                section = int(line[1:].split("-")[0])
            except ValueError:
                raise err(lineno + 1, f"bad section header {line!r}") from None
            if section not in declared:
                raise err(lineno + 1, f"undeclared section {line!r}")
            continue
        if section is None or section == "end":
            raise err(lineno + 1, f"entry outside any section: {line!r}")
        parts = line.split()
        if len(parts) < section + 1:
            raise err(lineno + 1, f"too few fields in {section}-gram entry")
        try:
            p = float(parts[0])
        except ValueError:
            raise err(lineno + 1, f"non-numeric log probability {parts[0]!r}") from None
        g = tuple(parts[1 : 1 + section])
        bow = None
        if len(parts) == section + 2:
            try:
                bow = float(parts[-1])
            except ValueError:
                raise err(lineno + 1, f"non-numeric backoff weight {parts[-1]!r}") from None
        elif len(parts) > section + 2:
            raise err(lineno + 1, f"too many fields in {section}-gram entry")
        model.tables[section][g] = [p, bow]

    for k, n in declared.items():
        if model.num_entries(k) != n:
            raise DataFormatError(
                f"{path}: section {k}-grams has {model.num_entries(k)} entries, header says {n}"
            )
    model.vocab = {g[0] for g in model.tables[1]} - {BOS}
    return model


# -- grammar Fst export ----------------------------------------------------


def lm_to_grammar_fst(model: NGramModel, check: bool = True) -> Fst:
    """Word-level grammar acceptor: one state per stored history, word arcs
    weighted -ln p, `#0`-labeled backoff arcs weighted -ln(bow), sentence
    end as final weights."""
    if check:
        model.check_normalization(tol=1e-4)

    # <unk> never becomes a word arc: it has no pronunciation downstream
    syms = SymbolTable()
    syms.add(BACKOFF_SYM)
    for w in sorted(model.vocab - {EOS, UNK}):
        syms.add(w)

    g = Fst(TROPICAL, isyms=syms, osyms=syms)
    states: dict[tuple[str, ...], int] = {}

    def state_of(h: tuple[str, ...]) -> int:
        sid = states.get(h)
        if sid is None:
            sid = g.add_state()
            states[h] = sid
        return sid

    # states: empty context plus every stored key shorter than the order
    state_of(())
    for k in range(1, model.order):
        for key in sorted(model.tables[k]):
            state_of(key)

    def next_context(ctx: tuple[str, ...]) -> tuple[str, ...]:
        while len(ctx) >= model.order or ctx not in states:
            if not ctx:
                return ()
            ctx = ctx[1:]
        return ctx

    backoff_id = syms.find(BACKOFF_SYM)
    for k in range(1, model.order + 1):
        for key in sorted(model.tables[k]):
            p10, bow10 = model.tables[k][key]
            h, w = key[:-1], key[-1]
            if k < model.order and bow10 is not None and len(key) >= 1 and key in states:
                # backoff arc from this context down one level
                g.add_arc(states[key], backoff_id, EPS, -bow10 * LN10, states[next_context(key[1:])])
            if w == BOS:
                continue
            src = states.get(h)
            if src is None:
                continue  # highest-order history missing a carrier state
            if w == EOS:
                g.set_final(src, -p10 * LN10)
            elif w in syms:
                wid = syms.find(w)
                g.add_arc(src, wid, wid, -p10 * LN10, states[next_context(h + (w,))])

    start_ctx = (BOS,) if model.order >= 2 and (BOS,) in states else ()
    g.set_start(states[start_ctx])
    return g
