"""Decoding-graph compilation: lexicon transducer, min(det(L∘G)) per task,
and the tagged multi-graph union.

The context and HMM layers are identity at this level: compiled graphs map
unit (phone) sequences to weighted word sequences, and the decoder supplies
per-unit self-loops.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from .errors import DataFormatError, UsageError
from .fst import EPS, Fst, SymbolTable, is_reserved_symbol, read_fst_text, write_fst_text
from .lm import BACKOFF_SYM
from .ops import fst_determinize, fst_minimize, relabel

TAG_PREFIX = "#graph:"

DEFAULT_SIL_UNIT = "!SIL"
DEFAULT_SIL_PROB = 0.5


# -- lexicon ---------------------------------------------------------------


@dataclass
class Lexicon:
    """word -> pronunciations (unit sequences), with a declared inventory."""

    entries: dict[str, list[tuple[str, ...]]]
    units: tuple[str, ...]

    def __post_init__(self):
        if not self.entries:
            raise UsageError("empty lexicon")
        inventory = set(self.units)
        for word, prons in self.entries.items():
            if is_reserved_symbol(word):
                raise DataFormatError(f"reserved symbol {word!r} cannot be a lexicon word")
            if not prons:
                raise DataFormatError(f"word {word!r} has no pronunciation")
            for pron in prons:
                for u in pron:
                    if u not in inventory:
                        raise DataFormatError(
                            f"unknown unit {u!r} in pronunciation of {word!r}"
                        )

    @classmethod
    def read(cls, path: str, units: tuple[str, ...] | None = None) -> "Lexicon":
        entries: dict[str, list[tuple[str, ...]]] = {}
        seen_units: list[str] = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 2:
                    raise DataFormatError(f"{path}:{lineno}: expected `word unit unit ...`")
                word, pron = parts[0], tuple(parts[1:])
                entries.setdefault(word, []).append(pron)
                for u in pron:
                    if u not in seen_units:
                        seen_units.append(u)
        return cls(entries, units if units is not None else tuple(sorted(seen_units)))

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for word in sorted(self.entries):
                for pron in self.entries[word]:
                    f.write(f"{word} {' '.join(pron)}\n")

    def inventory_hash(self) -> str:
        return hashlib.sha256(" ".join(sorted(self.units)).encode()).hexdigest()[:16]


def _assign_disambiguation(lex: Lexicon) -> dict[tuple[str, tuple[str, ...]], int]:
    """Give a distinct `#k` (k >= 1) to every pronunciation that equals or
    prefixes another pronunciation; others need none (0)."""
    all_prons = [(w, p) for w in sorted(lex.entries) for p in lex.entries[w]]
    pron_count: dict[tuple[str, ...], int] = {}
    prefixes: set[tuple[str, ...]] = set()
    for _, p in all_prons:
        pron_count[p] = pron_count.get(p, 0) + 1
        for i in range(1, len(p)):
            prefixes.add(p[:i])
    marks: dict[tuple[str, tuple[str, ...]], int] = {}
    next_k: dict[tuple[str, ...], int] = {}
    for w, p in all_prons:
        if pron_count[p] > 1 or p in prefixes:
            k = next_k.get(p, 0) + 1
            next_k[p] = k
            marks[(w, p)] = k
        else:
            marks[(w, p)] = 0
    return marks


def compile_lexicon_fst(
    lex: Lexicon,
    sil_enabled: bool = False,
    sil_unit: str = DEFAULT_SIL_UNIT,
    sil_prob: float = DEFAULT_SIL_PROB,
) -> Fst:
    """Closure transducer mapping unit sequences to word sequences, with a
    `#0` passthrough loop for the grammar's backoff symbol."""
    marks = _assign_disambiguation(lex)
    max_k = max(marks.values(), default=0)

    isyms = SymbolTable()
    isyms.add(BACKOFF_SYM)
    for k in range(1, max_k + 1):
        isyms.add(f"#{k}")
    for u in lex.units:
        isyms.add(u)
    if sil_enabled:
        isyms.add(sil_unit)
    osyms = SymbolTable()
    osyms.add(BACKOFF_SYM)
    for w in sorted(lex.entries):
        osyms.add(w)

    f = Fst(isyms=isyms, osyms=osyms)
    loop = f.add_state()
    f.set_start(loop)
    f.set_final(loop, 0.0)
    f.add_arc(loop, isyms.find(BACKOFF_SYM), osyms.find(BACKOFF_SYM), 0.0, loop)
    if sil_enabled:
        f.add_arc(loop, isyms.find(sil_unit), EPS, -math.log(sil_prob), loop)

    for word in sorted(lex.entries):
        wid = osyms.find(word)
        for pron in lex.entries[word]:
            k = marks[(word, pron)]
            cur = loop
            labels = [isyms.find(u) for u in pron]
            if k > 0:
                labels.append(isyms.find(f"#{k}"))
            for i, lab in enumerate(labels):
                last = i == len(labels) - 1
                nxt = loop if last else f.add_state()
                f.add_arc(cur, lab, wid if i == 0 else EPS, 0.0, nxt)
                cur = nxt
    return f


# -- decoding graph --------------------------------------------------------


@dataclass
class DecodingGraph:
    graph_id: str
    fst: Fst
    units: tuple[str, ...]
    lm_provenance: str = ""

    def inventory_hash(self) -> str:
        return hashlib.sha256(" ".join(sorted(self.units)).encode()).hexdigest()[:16]


def compile_decoding_graph(
    lex: Lexicon,
    g: Fst,
    graph_id: str,
    sil_enabled: bool = False,
    lm_provenance: str = "",
) -> DecodingGraph:
    """min(det(L∘G)) with the auxiliary `#0`/`#k` input symbols replaced by
    epsilon afterwards."""
    from .ops import fst_compose  # local import keeps module load cheap

    lfst = compile_lexicon_fst(lex, sil_enabled=sil_enabled)
    if g.isyms is not None:
        # grammar words must resolve in the lexicon's output table
        for sym, _ in g.isyms.symbols():
            if not is_reserved_symbol(sym) and sym not in lfst.osyms:
                raise UsageError(f"grammar word {sym!r} missing from the lexicon")
    # align G's labels with L's output ids
    imap = {}
    omap = {}
    if g.isyms is not None:
        for sym, sid in g.isyms.symbols():
            imap[sid] = lfst.osyms.find(sym)
    if g.osyms is not None:
        for sym, sid in g.osyms.symbols():
            omap[sid] = lfst.osyms.find(sym)
    g2 = relabel(g, imap, omap)
    g2.isyms = lfst.osyms
    g2.osyms = lfst.osyms

    lg = fst_compose(lfst, g2)
    det = fst_determinize(lg)
    mn = fst_minimize(det)
    # strip auxiliary input symbols; outputs of these arcs are already eps
    # (the `#0` passthrough pairs with the grammar's eps-output backoff arc)
    aux = {
        sid: EPS
        for sym, sid in lfst.isyms.symbols()
        if sym.startswith("#")
    }
    aux_out = {sid: EPS for sym, sid in lfst.osyms.symbols() if sym.startswith("#")}
    out = relabel(mn, aux, aux_out)
    return DecodingGraph(graph_id, out, tuple(lex.units), lm_provenance)


# -- multi-graph union -----------------------------------------------------


@dataclass
class GraphSet:
    graphs: list[DecodingGraph]
    fst: Fst
    tag_ids: dict[str, int] = field(default_factory=dict)  # graph_id -> tag olabel

    @property
    def units(self) -> tuple[str, ...]:
        return self.graphs[0].units


def build_multigraph(graphs: list[DecodingGraph], union_prior: str = "one") -> GraphSet:
    """Union with one weight-one entry arc per member, each tagged with a
    `#graph:<id>` output label; members are never determinized across."""
    if not graphs:
        raise UsageError("need at least one graph")
    ids = [g.graph_id for g in graphs]
    if len(set(ids)) != len(ids):
        raise UsageError(f"duplicate graph ids: {ids}")
    units = graphs[0].units
    for g in graphs[1:]:
        if tuple(sorted(g.units)) != tuple(sorted(units)):
            raise UsageError(
                f"unit inventory mismatch between {graphs[0].graph_id!r} and {g.graph_id!r}"
            )
    if union_prior not in ("one", "uniform"):
        raise UsageError(f"union_prior must be 'one' or 'uniform', got {union_prior!r}")
    entry_weight = 0.0 if union_prior == "one" else math.log(len(graphs))

    isyms = SymbolTable()
    osyms = SymbolTable()
    tag_ids = {}
    for g in graphs:
        tag_ids[g.graph_id] = osyms.add(f"{TAG_PREFIX}{g.graph_id}")
    out = Fst(isyms=isyms, osyms=osyms)
    start = out.add_state()
    out.set_start(start)

    for g in graphs:
        imap = {}
        omap = {}
        if g.fst.isyms is not None:
            for sym, sid in g.fst.isyms.symbols():
                imap[sid] = isyms.add(sym) if sid != EPS else EPS
        if g.fst.osyms is not None:
            for sym, sid in g.fst.osyms.symbols():
                omap[sid] = osyms.add(sym) if sid != EPS else EPS
        base = out.num_states
        out.add_states(g.fst.num_states)
        for s in g.fst.states():
            for a in g.fst.arcs[s]:
                out.add_arc(
                    base + s,
                    imap.get(a.ilabel, a.ilabel),
                    omap.get(a.olabel, a.olabel),
                    a.weight,
                    base + a.nextstate,
                )
        for s, w in g.fst.finals.items():
            out.set_final(base + s, w)
        out.add_arc(start, EPS, tag_ids[g.graph_id], entry_weight, base + g.fst.start)
    return GraphSet(list(graphs), out, tag_ids)


# -- serialization ---------------------------------------------------------


def save_decoding_graph(graph: DecodingGraph, prefix: str) -> None:
    """Write <prefix>.fst.txt, <prefix>.isyms, <prefix>.osyms and a JSON
    sidecar with graph metadata."""
    write_fst_text(graph.fst, prefix + ".fst.txt")
    if graph.fst.isyms is not None:
        graph.fst.isyms.write(prefix + ".isyms")
    if graph.fst.osyms is not None:
        graph.fst.osyms.write(prefix + ".osyms")
    meta = {
        "graph_id": graph.graph_id,
        "units": list(graph.units),
        "inventory_hash": graph.inventory_hash(),
        "lm_provenance": graph.lm_provenance,
    }
    with open(prefix + ".meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_decoding_graph(prefix: str) -> DecodingGraph:
    with open(prefix + ".meta.json", encoding="utf-8") as f:
        meta = json.load(f)
    isyms = SymbolTable.read(prefix + ".isyms") if os.path.exists(prefix + ".isyms") else None
    osyms = SymbolTable.read(prefix + ".osyms") if os.path.exists(prefix + ".osyms") else None
    fst = read_fst_text(prefix + ".fst.txt", isyms=isyms, osyms=osyms)
    graph = DecodingGraph(meta["graph_id"], fst, tuple(meta["units"]), meta.get("lm_provenance", ""))
    if graph.inventory_hash() != meta["inventory_hash"]:
        raise DataFormatError(f"{prefix}: unit inventory hash mismatch")
    return graph
