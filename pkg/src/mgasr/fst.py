"""Weighted finite-state transducer representation and text I/O.

An Fst is built with add_state/add_arc/set_start/set_final and treated as
immutable once handed to any algorithm; all algorithms in `ops` are pure
functions returning fresh Fsts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import DataFormatError, FstError
from .semiring import INF, TROPICAL, Semiring

EPS = 0
EPS_SYM = "<eps>"

# Reserved symbol prefixes that must never collide with lexical words.
RESERVED_SYMBOLS = ("<eps>", "<unk>", "<s>", "</s>", "!SIL")
RESERVED_PREFIXES = ("#",)  # disambiguation `#k`, backoff `#0`, tags `#graph:<id>`


def is_reserved_symbol(sym: str) -> bool:
    return sym in RESERVED_SYMBOLS or sym.startswith(RESERVED_PREFIXES)


class SymbolTable:
    """Bijection between symbol strings and non-negative ids; id 0 is <eps>."""

    def __init__(self):
        self._sym2id: dict[str, int] = {EPS_SYM: EPS}
        self._id2sym: dict[int, str] = {EPS: EPS_SYM}
        self._next_id = 1

    def __len__(self) -> int:
        return len(self._sym2id)

    def __contains__(self, sym: str) -> bool:
        return sym in self._sym2id

    def add(self, sym: str) -> int:
        if sym in self._sym2id:
            return self._sym2id[sym]
        sid = self._next_id
        self._next_id += 1
        self._sym2id[sym] = sid
        self._id2sym[sid] = sym
        return sid

    def add_with_id(self, sym: str, sid: int) -> int:
        existing = self._sym2id.get(sym)
        if existing is not None:
            if existing != sid:
                raise FstError(f"symbol {sym!r} already has id {existing}, not {sid}")
            return sid
        if sid in self._id2sym:
            raise FstError(f"id {sid} already taken by {self._id2sym[sid]!r}")
        self._sym2id[sym] = sid
        self._id2sym[sid] = sym
        self._next_id = max(self._next_id, sid + 1)
        return sid

    def find(self, sym: str) -> int:
        try:
            return self._sym2id[sym]
        except KeyError:
            raise FstError(f"symbol not in table: {sym!r}") from None

    def get(self, sym: str) -> int | None:
        return self._sym2id.get(sym)

    def name(self, sid: int) -> str:
        try:
            return self._id2sym[sid]
        except KeyError:
            raise FstError(f"id not in table: {sid}") from None

    def has_id(self, sid: int) -> bool:
        return sid in self._id2sym

    def symbols(self) -> Iterator[tuple[str, int]]:
        return iter(self._sym2id.items())

    def copy(self) -> "SymbolTable":
        t = SymbolTable()
        t._sym2id = dict(self._sym2id)
        t._id2sym = dict(self._id2sym)
        t._next_id = self._next_id
        return t

    def same_content(self, other: "SymbolTable") -> bool:
        return self._sym2id == other._sym2id

    @classmethod
    def from_symbols(cls, symbols: Iterable[str]) -> "SymbolTable":
        t = cls()
        for s in symbols:
            t.add(s)
        return t

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for sid in sorted(self._id2sym):
                f.write(f"{self._id2sym[sid]} {sid}\n")

    @classmethod
    def read(cls, path: str) -> "SymbolTable":
        t = cls()
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2:
                    raise DataFormatError(f"{path}:{lineno}: expected `symbol id`")
                sym, sid_s = parts
                try:
                    sid = int(sid_s)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: bad id {sid_s!r}") from None
                if sym == EPS_SYM and sid == EPS:
                    continue
                t.add_with_id(sym, sid)
        return t


@dataclass(frozen=True)
class Arc:
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


class Fst:
    """States, per-state arc lists, one start state and final weights."""

    NO_STATE = -1

    def __init__(
        self,
        semiring: Semiring = TROPICAL,
        isyms: SymbolTable | None = None,
        osyms: SymbolTable | None = None,
    ):
        self.semiring = semiring
        self.arcs: list[list[Arc]] = []
        self.start = Fst.NO_STATE
        self.finals: dict[int, float] = {}
        self.isyms = isyms
        self.osyms = osyms

    # -- construction ------------------------------------------------------

    def add_state(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_states(self, n: int) -> None:
        for _ in range(n):
            self.add_state()

    def add_arc(self, state: int, ilabel: int, olabel: int, weight: float, nextstate: int) -> None:
        self.arcs[state].append(Arc(ilabel, olabel, weight, nextstate))

    def set_start(self, state: int) -> None:
        self.start = state

    def set_final(self, state: int, weight: float = 0.0) -> None:
        self.finals[state] = weight

    # -- inspection --------------------------------------------------------

    @property
    def num_states(self) -> int:
        return len(self.arcs)

    @property
    def num_arcs(self) -> int:
        return sum(len(a) for a in self.arcs)

    def is_final(self, state: int) -> bool:
        return state in self.finals

    def final_weight(self, state: int) -> float:
        return self.finals.get(state, INF)

    def states(self) -> range:
        return range(len(self.arcs))

    def validate(self) -> None:
        """Raise FstError on any violated structural invariant."""
        n = self.num_states
        if n == 0 and self.start == Fst.NO_STATE and not self.finals:
            return  # the empty Fst is valid
        if not (0 <= self.start < n):
            raise FstError(f"start state {self.start} out of range [0,{n})")
        for s, w in self.finals.items():
            if not (0 <= s < n):
                raise FstError(f"final state {s} out of range")
            if w == INF:
                raise FstError(f"final weight of state {s} is the zero element")
            if math.isnan(w):
                raise FstError(f"final weight of state {s} is NaN")
        for s in self.states():
            for a in self.arcs[s]:
                if not (0 <= a.nextstate < n):
                    raise FstError(f"arc from {s} points to invalid state {a.nextstate}")
                if math.isnan(a.weight):
                    raise FstError(f"arc from {s} has NaN weight")
                if a.ilabel < 0 or a.olabel < 0:
                    raise FstError(f"arc from {s} has negative label")
                if self.isyms is not None and not self.isyms.has_id(a.ilabel):
                    raise FstError(f"arc ilabel {a.ilabel} not in input symbol table")
                if self.osyms is not None and not self.osyms.has_id(a.olabel):
                    raise FstError(f"arc olabel {a.olabel} not in output symbol table")

    def copy(self) -> "Fst":
        f = Fst(self.semiring, self.isyms, self.osyms)
        f.arcs = [list(a) for a in self.arcs]
        f.start = self.start
        f.finals = dict(self.finals)
        return f

    def __repr__(self) -> str:
        return (
            f"<Fst {self.semiring.name} states={self.num_states} "
            f"arcs={self.num_arcs} start={self.start} finals={len(self.finals)}>"
        )


# -- AT&T text format ------------------------------------------------------


def _fmt_weight(w: float) -> str:
    if w == INF:
        return "inf"
    return f"{w:.6f}"


def write_fst_text(fst: Fst, path: str) -> None:
    """One arc per line `src dst ilabel olabel weight`, then `state weight`
    final lines.  Weight one (0.0) is still written, keeping the format
    regular; `inf` never appears for finals (validate forbids it)."""
    with open(path, "w", encoding="utf-8") as f:
        for s in fst.states():
            for a in fst.arcs[s]:
                f.write(f"{s} {a.nextstate} {a.ilabel} {a.olabel} {_fmt_weight(a.weight)}\n")
        for s in sorted(fst.finals):
            f.write(f"{s} {_fmt_weight(fst.finals[s])}\n")
        if fst.start != Fst.NO_STATE:
            f.write(f"# start {fst.start}\n")


def read_fst_text(
    path: str,
    semiring: Semiring = TROPICAL,
    isyms: SymbolTable | None = None,
    osyms: SymbolTable | None = None,
) -> Fst:
    fst = Fst(semiring, isyms, osyms)
    start = None
    pending: list[tuple[int, int, int, int, float, int]] = []
    finals: list[tuple[int, float, int]] = []
    max_state = -1

    def parse_w(tok: str, lineno: int) -> float:
        if tok == "inf":
            return INF
        try:
            return float(tok)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad weight {tok!r}") from None

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if len(parts) == 3 and parts[1] == "start":
                    start = int(parts[2])
                continue
            try:
                if len(parts) in (4, 5):
                    src, dst, il, ol = (int(p) for p in parts[:4])
                    w = parse_w(parts[4], lineno) if len(parts) == 5 else 0.0
                    pending.append((src, dst, il, ol, w, lineno))
                    max_state = max(max_state, src, dst)
                elif len(parts) in (1, 2):
                    s = int(parts[0])
                    w = parse_w(parts[1], lineno) if len(parts) == 2 else 0.0
                    finals.append((s, w, lineno))
                    max_state = max(max_state, s)
                else:
                    raise DataFormatError(f"{path}:{lineno}: unparseable line")
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric field") from None

    fst.add_states(max_state + 1)
    for src, dst, il, ol, w, _ in pending:
        fst.add_arc(src, il, ol, w, dst)
    for s, w, _ in finals:
        fst.set_final(s, w)
    if start is not None:
        fst.set_start(start)
    elif fst.num_states > 0:
        # conventional default: first mentioned source state
        fst.set_start(pending[0][0] if pending else finals[0][0])
    return fst
