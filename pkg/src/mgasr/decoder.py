"""Frame-synchronous Viterbi beam search over a DecodingGraph or GraphSet.

Tokens are keyed by (graph state, current unit) per frame; epsilon arcs are
traversed cost-free of acoustics within a frame; every unit-labeled arc
consumes at least one frame, repeats pay `loop_cost` per extra frame.  The
search emits a lattice DAG with per-arc (am, graph) cost pairs; N-best
extraction deduplicates word sequences.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .acoustics import AcousticScores
from .errors import DataFormatError, SearchFailure, UsageError
from .fst import EPS, Fst, SymbolTable
from .graphs import TAG_PREFIX, DecodingGraph, GraphSet

INF = math.inf

DEFAULT_LOOP_COST = 0.69  # about -ln 0.5: stay/leave a unit equally likely
DEFAULT_BEAM = 12.0
DEFAULT_LATTICE_BEAM = 6.0


@dataclass
class Hypothesis:
    words: tuple[str, ...]
    graph_id: str | None
    am_cost: float
    graph_lm_cost: float

    @property
    def total_cost(self) -> float:
        return self.am_cost + self.graph_lm_cost


@dataclass
class LatArc:
    ilabel: int
    olabel: int
    am: float
    graph: float
    nextnode: int


class Lattice:
    """Acyclic DAG from the source node to one end node; arc labels are
    graph input units / output words (tags preserved)."""

    def __init__(self, osyms: SymbolTable | None, isyms: SymbolTable | None = None):
        self.osyms = osyms
        self.isyms = isyms
        self.arcs: list[list[LatArc]] = []
        self.start = 0
        self.end = -1

    def add_node(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_arc(self, src: int, arc: LatArc) -> None:
        self.arcs[src].append(arc)

    @property
    def num_nodes(self) -> int:
        return len(self.arcs)

    def topological_order(self) -> list[int]:
        indeg = [0] * self.num_nodes
        for s in range(self.num_nodes):
            for a in self.arcs[s]:
                indeg[a.nextnode] += 1
        order = [s for s in range(self.num_nodes) if indeg[s] == 0]
        i = 0
        while i < len(order):
            s = order[i]
            i += 1
            for a in self.arcs[s]:
                indeg[a.nextnode] -= 1
                if indeg[a.nextnode] == 0:
                    order.append(a.nextnode)
        if len(order) != self.num_nodes:
            raise DataFormatError("lattice has a cycle")
        return order


# -- search ----------------------------------------------------------------


def _eps_paths(fst: Fst, state: int):
    """All simple epsilon-input paths from state (including the empty one):
    yields (target state, graph cost, output labels)."""
    stack = [(state, 0.0, (), frozenset((state,)))]
    while stack:
        s, c, ws, seen = stack.pop()
        yield s, c, ws
        for a in fst.arcs[s]:
            if a.ilabel == EPS and a.nextstate not in seen:
                if a.weight < 0 and a.nextstate == state:
                    raise UsageError("negative-cost epsilon cycle in decoding graph")
                nws = ws + (a.olabel,) if a.olabel != EPS else ws
                stack.append((a.nextstate, c + a.weight, nws, seen | {a.nextstate}))


def _check_inventory(graph_units, scores: AcousticScores) -> None:
    if set(graph_units) - set(scores.units):
        raise UsageError(
            "graph unit inventory not covered by the acoustic scores: "
            f"missing {sorted(set(graph_units) - set(scores.units))}"
        )


def decode(
    graph: DecodingGraph | GraphSet,
    scores: AcousticScores,
    beam: float = DEFAULT_BEAM,
    lattice_beam: float = DEFAULT_LATTICE_BEAM,
    loop_cost: float = DEFAULT_LOOP_COST,
    word_penalty: float = 0.0,
) -> Lattice:
    """Token-passing Viterbi search; returns the pruned lattice.

    word_penalty is a constant cost added per emitted word (auxiliary
    `#...` labels such as graph tags are exempt); it counters the bias
    toward splitting frames into many short words."""
    fst = graph.fst
    _check_inventory(graph.units, scores)
    if beam <= 0:
        raise UsageError("beam must be positive")
    if word_penalty < 0:
        raise UsageError("word_penalty must be non-negative")
    if scores.num_frames == 0:
        raise SearchFailure(0, "no frames to decode")

    if word_penalty and fst.osyms is not None:
        exempt = {sid for sym, sid in fst.osyms.symbols() if sym.startswith("#")}
    else:
        exempt = set()
    exempt.add(EPS)

    def pen(labels) -> float:
        if not word_penalty:
            return 0.0
        return word_penalty * sum(1 for w in labels if w not in exempt)

    col_cache: dict[int, int] = {}

    def col_of(ilabel: int) -> int:
        c = col_cache.get(ilabel)
        if c is None:
            c = scores.column(fst.isyms.name(ilabel) if fst.isyms else str(ilabel))
            col_cache[ilabel] = c
        return c

    # node bookkeeping: nodes[i] = [best_cost, cands]; cand =
    # (prev_node, am_inc, graph_inc, words, ilabel, cost)
    nodes: list[list] = [[0.0, []]]
    source = 0

    # tokens this frame: (state, col) -> (node_id, best cost)
    tokens: dict[tuple[int, int], tuple[int, float]] = {}

    def arrive(next_tokens, key, prev_node, am_inc, graph_inc, words, ilabel, cost):
        ent = next_tokens.get(key)
        if ent is None:
            nid = len(nodes)
            nodes.append([cost, []])
            next_tokens[key] = (nid, cost)
        else:
            nid, best = ent
            if cost < best:
                nodes[nid][0] = cost
                next_tokens[key] = (nid, cost)
        nodes[next_tokens[key][0]][1].append((prev_node, am_inc, graph_inc, words, ilabel, cost))

    # frame 0: from the start state, epsilon closure then one unit arc
    mat = scores.matrix
    init: dict[tuple[int, int], tuple[int, float]] = {}
    for s, gcost, words in _eps_paths(fst, fst.start):
        for a in fst.arcs[s]:
            if a.ilabel == EPS:
                continue
            c = col_of(a.ilabel)
            am = mat[0, c]
            w = words + ((a.olabel,) if a.olabel != EPS else ())
            g = gcost + a.weight + pen(w)
            arrive(init, (a.nextstate, c), source, am, g, w, a.ilabel, am + g)
    tokens = init
    if not tokens:
        raise SearchFailure(0)

    for t in range(1, scores.num_frames):
        nxt: dict[tuple[int, int], tuple[int, float]] = {}
        best = min(c for _, c in tokens.values())
        for (state, c_col), (nid, cost) in sorted(tokens.items()):
            if cost > best + beam:
                continue
            # self-loop on the current unit
            am = mat[t, c_col] + loop_cost
            arrive(nxt, (state, c_col), nid, am, 0.0, (), EPS, cost + am)
            # leave the unit: free exit, epsilon closure, next unit arc
            for s, gcost, words in _eps_paths(fst, state):
                for a in fst.arcs[s]:
                    if a.ilabel == EPS:
                        continue
                    c = col_of(a.ilabel)
                    am2 = mat[t, c]
                    w = words + ((a.olabel,) if a.olabel != EPS else ())
                    g2 = gcost + a.weight + pen(w)
                    arrive(nxt, (a.nextstate, c), nid, am2, g2, w, a.ilabel, cost + am2 + g2)
        if not nxt:
            raise SearchFailure(t)
        tokens = nxt

    # reach final states through the epsilon closure
    end_cands = []
    best_total = INF
    for (state, c_col), (nid, cost) in sorted(tokens.items()):
        for s, gcost, words in _eps_paths(fst, state):
            if s in fst.finals:
                g = gcost + fst.finals[s] + pen(words)
                end_cands.append((nid, 0.0, g, words, EPS, cost + g))
                best_total = min(best_total, cost + g)
    if not end_cands:
        raise SearchFailure(scores.num_frames, "no token reaches a final state")

    return _build_lattice(fst, nodes, source, end_cands, best_total, lattice_beam)


def _build_lattice(fst, nodes, source, end_cands, best_total, lattice_beam) -> Lattice:
    lat = Lattice(fst.osyms, fst.isyms)
    keep_arc: dict[int, list] = {}
    for nid, node in enumerate(nodes):
        best, cands = node
        keep_arc[nid] = [c for c in cands if c[5] <= best + lattice_beam]
    end_keep = [c for c in end_cands if c[5] <= best_total + lattice_beam]

    # map surviving search nodes to lattice nodes (all nodes with kept
    # incoming arcs that are backward-reachable from the end)
    reach = set()
    stack = [c[0] for c in end_keep]
    while stack:
        nid = stack.pop()
        if nid in reach:
            continue
        reach.add(nid)
        stack.extend(c[0] for c in keep_arc.get(nid, ()))
    node_map: dict[int, int] = {}
    for nid in sorted(reach):
        node_map[nid] = lat.add_node()
    end_node = lat.add_node()
    lat.start = node_map[source]
    lat.end = end_node

    def emit(src_nid: int, dst_lat: int, cand) -> None:
        prev, am_inc, graph_inc, words, ilabel, _ = cand
        if prev not in node_map:
            return
        cur = node_map[prev]
        labels = list(words)
        # chain: intermediate eps arcs carry all but the last output label;
        # the final (unit-consuming) arc carries the last one and the costs
        for w in labels[:-1] if labels else []:
            mid = lat.add_node()
            lat.add_arc(cur, LatArc(EPS, w, 0.0, 0.0, mid))
            cur = mid
        last_w = labels[-1] if labels else EPS
        lat.add_arc(cur, LatArc(ilabel, last_w, am_inc, graph_inc, dst_lat))

    for nid in sorted(reach):
        for cand in keep_arc.get(nid, ()):
            emit(nid, node_map[nid], cand)
    for cand in end_keep:
        emit(cand[0], end_node, cand)
    return lat


# -- N-best extraction -----------------------------------------------------


def _split_tag(words: tuple[str, ...]) -> tuple[tuple[str, ...], str | None]:
    if words and words[0].startswith(TAG_PREFIX):
        return words[1:], words[0][len(TAG_PREFIX):]
    return tuple(w for w in words if not w.startswith(TAG_PREFIX)), None


def lattice_nbest(lat: Lattice, n: int, max_pops: int | None = None) -> list[Hypothesis]:
    """The n cheapest distinct word sequences; ties broken by lexicographic
    word ids; tags stripped into graph_id."""
    if n <= 0 or lat.num_nodes == 0 or lat.end < 0:
        return []
    order = lat.topological_order()
    suffix = [INF] * lat.num_nodes
    suffix[lat.end] = 0.0
    for s in reversed(order):
        for a in lat.arcs[s]:
            suffix[s] = min(suffix[s], a.am + a.graph + suffix[a.nextnode])
    if suffix[lat.start] == INF:
        return []
    if max_pops is None:
        max_pops = max(20000, 200 * n)

    results: list[Hypothesis] = []
    seen: set[tuple[int, ...]] = set()
    heap = [(suffix[lat.start], (), lat.start, 0.0, 0.0)]
    pops = 0
    while heap and len(results) < n and pops < max_pops:
        est, words, node, am, graph = heapq.heappop(heap)
        pops += 1
        if node == lat.end:
            if words in seen:
                continue
            seen.add(words)
            names = tuple(lat.osyms.name(w) if lat.osyms else str(w) for w in words)
            stripped, gid = _split_tag(names)
            results.append(Hypothesis(stripped, gid, am, graph))
            continue
        for a in lat.arcs[node]:
            nw = words + (a.olabel,) if a.olabel != EPS else words
            nam, ng = am + a.am, graph + a.graph
            heapq.heappush(heap, (nam + ng + suffix[a.nextnode], nw, a.nextnode, nam, ng))
    return results


def best_hypothesis(lat: Lattice) -> Hypothesis:
    hyps = lattice_nbest(lat, 1)
    if not hyps:
        raise SearchFailure(0, "empty lattice")
    return hyps[0]


# -- lattice text I/O ------------------------------------------------------


def write_lattice_text(lat: Lattice, path: str) -> None:
    """`src dst ilabel olabel am,graph` per arc, plus start/end comments."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# start {lat.start}\n# end {lat.end}\n")
        for s in range(lat.num_nodes):
            for a in lat.arcs[s]:
                f.write(
                    f"{s} {a.nextnode} {a.ilabel} {a.olabel} "
                    f"{float(a.am)!r},{float(a.graph)!r}\n"
                )


def read_lattice_text(
    path: str, osyms: SymbolTable | None = None, isyms: SymbolTable | None = None
) -> Lattice:
    lat = Lattice(osyms, isyms)
    start = end = None
    arcs = []
    max_node = -1
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if len(parts) == 3 and parts[1] in ("start", "end"):
                    if parts[1] == "start":
                        start = int(parts[2])
                    else:
                        end = int(parts[2])
                continue
            if len(parts) != 5 or "," not in parts[4]:
                raise DataFormatError(f"{path}:{lineno}: bad lattice line")
            try:
                src, dst, il, ol = (int(p) for p in parts[:4])
                am_s, g_s = parts[4].split(",")
                arcs.append((src, dst, il, ol, float(am_s), float(g_s)))
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric field") from None
            max_node = max(max_node, src, dst)
    if start is None or end is None:
        raise DataFormatError(f"{path}: missing start/end markers")
    for _ in range(max_node + 1):
        lat.add_node()
    for src, dst, il, ol, am, g in arcs:
        lat.add_arc(src, LatArc(il, ol, am, g, dst))
    lat.start, lat.end = start, end
    return lat
