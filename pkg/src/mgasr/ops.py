"""Pure-function algebra over Fsts: union, composition, epsilon removal,
determinization, minimization, n-shortest paths, path enumeration.

All functions leave their inputs untouched and return new Fsts in the same
semiring.  Tie-breaking is by smallest state id, then smallest label id, so
outputs are reproducible.
"""

from __future__ import annotations

import heapq
from collections import defaultdict, deque

from .errors import DeterminizeError, FstError
from .fst import EPS, Arc, Fst, SymbolTable
from .semiring import INF

# Hard cap on subset states generated by determinize, as a multiple of the
# input state count: exceeding it raises instead of hanging.
DETERMINIZE_CAP_FACTOR = 100


# -- symbol-table helpers --------------------------------------------------


def _merge_symtables(a: SymbolTable | None, b: SymbolTable | None) -> tuple[SymbolTable | None, dict[int, int] | None]:
    """Merge b into a copy of a; return (merged, relabel map for b's ids).

    A None relabel map means b's ids are already valid under the merged
    table.  Both None tables merge to None.
    """
    if a is None and b is None:
        return None, None
    if a is None:
        return b.copy(), None
    if b is None:
        return a.copy(), None
    if a.same_content(b):
        return a.copy(), None
    merged = a.copy()
    relabel: dict[int, int] = {}
    identity = True
    for sym, sid in b.symbols():
        mid = merged.get(sym)
        if mid is None:
            mid = merged.add(sym)
        relabel[sid] = mid
        if mid != sid:
            identity = False
    return merged, (None if identity else relabel)


def _relabel_arc(a: Arc, imap: dict[int, int] | None, omap: dict[int, int] | None) -> Arc:
    il = imap[a.ilabel] if imap else a.ilabel
    ol = omap[a.olabel] if omap else a.olabel
    if il == a.ilabel and ol == a.olabel:
        return a
    return Arc(il, ol, a.weight, a.nextstate)


# -- union -----------------------------------------------------------------


def fst_union(a: Fst, b: Fst) -> Fst:
    """Machine accepting every weighted path of a or b: a fresh start state
    with weight-one epsilon arcs into copies of both operands."""
    if a.semiring is not b.semiring:
        raise FstError("semiring mismatch in union")
    isyms, imap = _merge_symtables(a.isyms, b.isyms)
    osyms, omap = _merge_symtables(a.osyms, b.osyms)
    out = Fst(a.semiring, isyms, osyms)
    start = out.add_state()
    out.set_start(start)

    def splice(src: Fst, imap_, omap_) -> int | None:
        if src.start == Fst.NO_STATE:
            return None
        base = out.num_states
        out.add_states(src.num_states)
        for s in src.states():
            for arc in src.arcs[s]:
                arc = _relabel_arc(arc, imap_, omap_)
                out.add_arc(base + s, arc.ilabel, arc.olabel, arc.weight, base + arc.nextstate)
        for s, w in src.finals.items():
            out.set_final(base + s, w)
        return base + src.start

    sa = splice(a, None, None)
    sb = splice(b, imap, omap)
    for entry in (sa, sb):
        if entry is not None:
            out.add_arc(start, EPS, EPS, out.semiring.one, entry)
    return out


# -- composition -----------------------------------------------------------


def fst_compose(a: Fst, b: Fst) -> Fst:
    """Weighted composition with the three-state epsilon-sequencing filter,
    so no path is dropped or duplicated when a has output epsilons and b has
    input epsilons."""
    if a.semiring is not b.semiring:
        raise FstError("semiring mismatch in compose")
    if a.osyms is not None and b.isyms is not None and not a.osyms.same_content(b.isyms):
        raise FstError("incompatible symbol tables: a.osyms != b.isyms")
    sr = a.semiring
    out = Fst(sr, a.isyms, b.osyms)
    if a.start == Fst.NO_STATE or b.start == Fst.NO_STATE:
        return out

    # index b's arcs by input label per state
    b_by_il: list[dict[int, list[Arc]]] = []
    for s in b.states():
        d: dict[int, list[Arc]] = defaultdict(list)
        for arc in b.arcs[s]:
            d[arc.ilabel].append(arc)
        b_by_il.append(d)

    state_map: dict[tuple[int, int, int], int] = {}

    def get_state(sa: int, sb: int, filt: int) -> int:
        key = (sa, sb, filt)
        sid = state_map.get(key)
        if sid is None:
            sid = out.add_state()
            state_map[key] = sid
            queue.append(key)
        return sid

    queue: deque[tuple[int, int, int]] = deque()
    out_start = None
    start_key = (a.start, b.start, 0)
    queue.append(start_key)
    state_map[start_key] = out.add_state()
    out_start = state_map[start_key]
    out.set_start(out_start)

    while queue:
        sa, sb, filt = key = queue.popleft()
        sid = state_map[key]
        fa, fb = a.final_weight(sa), b.final_weight(sb)
        if fa != INF and fb != INF:
            out.set_final(sid, sr.times(fa, fb))
        # matched moves: a's non-eps output meets b's same input label
        for arc_a in a.arcs[sa]:
            if arc_a.olabel != EPS:
                for arc_b in b_by_il[sb].get(arc_a.olabel, ()):
                    ns = get_state(arc_a.nextstate, arc_b.nextstate, 0)
                    out.add_arc(sid, arc_a.ilabel, arc_b.olabel, sr.times(arc_a.weight, arc_b.weight), ns)
            else:
                # joint eps move (a outputs eps, b consumes eps): filter 0 only
                if filt == 0:
                    for arc_b in b_by_il[sb].get(EPS, ()):
                        ns = get_state(arc_a.nextstate, arc_b.nextstate, 0)
                        out.add_arc(sid, arc_a.ilabel, arc_b.olabel, sr.times(arc_a.weight, arc_b.weight), ns)
                # a-only move: allowed unless the filter committed to b-side
                if filt != 1:
                    ns = get_state(arc_a.nextstate, sb, 2)
                    out.add_arc(sid, arc_a.ilabel, EPS, arc_a.weight, ns)
        # b-only move on b's input eps: allowed unless committed to a-side
        if filt != 2:
            for arc_b in b_by_il[sb].get(EPS, ()):
                ns = get_state(sa, arc_b.nextstate, 1)
                out.add_arc(sid, EPS, arc_b.olabel, arc_b.weight, ns)
    return connect(out)


# -- connect (trim) --------------------------------------------------------


def connect(a: Fst) -> Fst:
    """Remove states not both accessible and coaccessible; renumber in
    accessibility (BFS) order with the start first."""
    if a.start == Fst.NO_STATE:
        return Fst(a.semiring, a.isyms, a.osyms)
    # forward reachability
    fwd = set()
    dq = deque([a.start])
    fwd.add(a.start)
    while dq:
        s = dq.popleft()
        for arc in a.arcs[s]:
            if arc.nextstate not in fwd:
                fwd.add(arc.nextstate)
                dq.append(arc.nextstate)
    # backward reachability from finals
    rev: list[list[int]] = [[] for _ in a.states()]
    for s in a.states():
        for arc in a.arcs[s]:
            rev[arc.nextstate].append(s)
    bwd = set()
    dq = deque(s for s in a.finals if s in fwd)
    bwd.update(dq)
    while dq:
        s = dq.popleft()
        for p in rev[s]:
            if p in fwd and p not in bwd:
                bwd.add(p)
                dq.append(p)
    keep = fwd & bwd
    out = Fst(a.semiring, a.isyms, a.osyms)
    if a.start not in keep:
        return out
    order: list[int] = []
    num: dict[int, int] = {}
    dq = deque([a.start])
    num[a.start] = out.add_state()
    order.append(a.start)
    while dq:
        s = dq.popleft()
        for arc in a.arcs[s]:
            t = arc.nextstate
            if t in keep and t not in num:
                num[t] = out.add_state()
                order.append(t)
                dq.append(t)
    out.set_start(num[a.start])
    for s in order:
        for arc in a.arcs[s]:
            if arc.nextstate in num:
                out.add_arc(num[s], arc.ilabel, arc.olabel, arc.weight, num[arc.nextstate])
        if s in a.finals:
            out.set_final(num[s], a.finals[s])
    return out


# -- epsilon removal -------------------------------------------------------


def _eps_closure(a: Fst, src: int) -> dict[int, float]:
    """Shortest closure distances over arcs with ilabel=olabel=eps.

    Tropical-style relaxation; raises on a negative-cost epsilon cycle
    (divergent closure)."""
    sr = a.semiring
    dist = {src: sr.one}
    # Bellman-Ford style relaxation bounded by state count; an improving
    # update on the n-th pass means a divergent (negative) epsilon cycle.
    n = a.num_states
    for it in range(n + 1):
        changed = False
        for s, d in list(dist.items()):
            for arc in a.arcs[s]:
                if arc.ilabel == EPS and arc.olabel == EPS:
                    nd = sr.times(d, arc.weight)
                    old = dist.get(arc.nextstate, INF)
                    new = sr.plus(old, nd)
                    if new != old:
                        dist[arc.nextstate] = new
                        changed = True
        if not changed:
            return dist
    raise FstError("divergent epsilon cycle in rm_epsilon")


def fst_rm_epsilon(a: Fst) -> Fst:
    """Remove all arcs with both labels epsilon, preserving the weighted
    language; arcs carrying a label on either side stay."""
    sr = a.semiring
    out = Fst(sr, a.isyms, a.osyms)
    if a.start == Fst.NO_STATE:
        return out
    out.add_states(a.num_states)
    out.set_start(a.start)
    for s in a.states():
        closure = _eps_closure(a, s)
        fin = INF
        for t, d in sorted(closure.items()):
            if t in a.finals:
                fin = sr.plus(fin, sr.times(d, a.finals[t]))
            for arc in a.arcs[t]:
                if arc.ilabel == EPS and arc.olabel == EPS:
                    continue
                out.add_arc(s, arc.ilabel, arc.olabel, sr.times(d, arc.weight), arc.nextstate)
        if fin != INF:
            out.set_final(s, fin)
    return connect(out)


# -- determinization -------------------------------------------------------


def is_deterministic(a: Fst, pairs: bool = False) -> bool:
    """True if no state has two arcs sharing an input label (or an
    (ilabel, olabel) pair when pairs=True) and no input epsilons."""
    for s in a.states():
        seen = set()
        for arc in a.arcs[s]:
            key = (arc.ilabel, arc.olabel) if pairs else arc.ilabel
            if (arc.ilabel == EPS and arc.olabel == EPS) or key in seen:
                return False
            seen.add(key)
    return True


def fst_determinize(a: Fst, cap_factor: int = DETERMINIZE_CAP_FACTOR) -> Fst:
    """Weighted subset determinization.

    Transducers are handled by encoding (ilabel, olabel) pairs as a single
    acceptor label, determinizing, and decoding.  The result has at most
    one arc per (state, encoded label).  Raises DeterminizeError when more
    than cap_factor * num_states subset states are generated."""
    sr = a.semiring
    out = Fst(sr, a.isyms, a.osyms)
    if a.start == Fst.NO_STATE:
        return out
    cap = max(cap_factor * max(a.num_states, 1), cap_factor)

    def norm_key(subset: tuple[tuple[int, float], ...]) -> tuple:
        return tuple((s, round(r, 9)) for s, r in subset)

    start_subset = ((a.start, sr.one),)
    subsets: dict[tuple, int] = {norm_key(start_subset): 0}
    out.add_state()
    out.set_start(0)
    work: deque[tuple[int, tuple[tuple[int, float], ...]]] = deque([(0, start_subset)])

    while work:
        sid, subset = work.popleft()
        # final weight
        fin = INF
        for s, r in subset:
            if s in a.finals:
                fin = sr.plus(fin, sr.times(r, a.finals[s]))
        if fin != INF:
            out.set_final(sid, fin)
        # gather moves per encoded label
        moves: dict[tuple[int, int], dict[int, float]] = {}
        for s, r in subset:
            for arc in a.arcs[s]:
                if arc.ilabel == EPS and arc.olabel == EPS:
                    raise FstError("determinize requires an epsilon-free input")
                lab = (arc.ilabel, arc.olabel)
                tgt = moves.setdefault(lab, {})
                w = sr.times(r, arc.weight)
                tgt[arc.nextstate] = sr.plus(tgt.get(arc.nextstate, INF), w)
        for lab in sorted(moves):
            tgt = moves[lab]
            # common divisor: plus over all target weights
            total = INF
            for t in sorted(tgt):
                total = sr.plus(total, tgt[t])
            new_subset = tuple((t, sr.divide(tgt[t], total)) for t in sorted(tgt))
            key = norm_key(new_subset)
            nsid = subsets.get(key)
            if nsid is None:
                if len(subsets) >= cap:
                    raise DeterminizeError(
                        f"subset cap exceeded ({cap} states): possibly non-determinizable"
                    )
                nsid = out.add_state()
                subsets[key] = nsid
                work.append((nsid, new_subset))
            out.add_arc(sid, lab[0], lab[1], total, nsid)
    return connect(out)


# -- minimization ----------------------------------------------------------


def _shortest_distance_to_final(a: Fst) -> list[float]:
    """Plus-sum of suffix path weights per state (min for tropical).

    Bellman-Ford relaxation on the reversed graph; assumes no divergent
    cycles (the tropical decoding case has none after trimming)."""
    sr = a.semiring
    n = a.num_states
    dist = [INF] * n
    for s, w in a.finals.items():
        dist[s] = w
    for _ in range(n + 1):
        changed = False
        for s in range(n):
            d = a.finals.get(s, INF)
            for arc in a.arcs[s]:
                d = sr.plus(d, sr.times(arc.weight, dist[arc.nextstate]))
            if d != dist[s]:
                dist[s] = d
                changed = True
        if not changed:
            break
    return dist


def fst_minimize(a: Fst) -> Fst:
    """Merge weighted-language-equivalent states of a deterministic machine.

    Weights are first pushed toward the start (internal only) so that states
    whose suffix languages differ by a constant still merge; partition
    refinement on the pushed machine then computes exact equivalence."""
    if not is_deterministic(a, pairs=True):
        raise FstError("minimize requires a deterministic input")
    a = connect(a)
    n = a.num_states
    if n == 0:
        return a
    sr = a.semiring
    dist = _shortest_distance_to_final(a)

    has_start_in = any(arc.nextstate == a.start for s in a.states() for arc in a.arcs[s])
    push = all(d != INF for d in dist) and (not has_start_in or dist[a.start] == sr.one)

    def arc_w(s: int, arc: Arc) -> float:
        if not push:
            return arc.weight
        w = sr.times(arc.weight, dist[arc.nextstate])
        w = sr.divide(w, dist[s])
        if s == a.start:
            w = sr.times(w, dist[a.start])
        return w

    def fin_w(s: int) -> float:
        f = a.finals.get(s, INF)
        if f == INF or not push:
            return f
        f = sr.divide(f, dist[s])
        if s == a.start:
            f = sr.times(f, dist[a.start])
        return f

    # partition refinement on (final weight, arcs -> (label pair, weight, block))
    block = [0] * n
    groups: dict[float, list[int]] = defaultdict(list)
    for s in range(n):
        groups[fin_w(s)].append(s)
    for i, key in enumerate(sorted(groups, key=lambda k: (k == INF, k))):
        for s in groups[key]:
            block[s] = i

    while True:
        sig2block: dict[tuple, int] = {}
        new_block = [0] * n
        for s in range(n):
            sig = (
                block[s],
                tuple(
                    sorted(
                        (arc.ilabel, arc.olabel, arc_w(s, arc), block[arc.nextstate])
                        for arc in a.arcs[s]
                    )
                ),
            )
            nb = sig2block.setdefault(sig, len(sig2block))
            new_block[s] = nb
        if new_block == block:
            break
        block = new_block

    n_blocks = len(set(block))
    out = Fst(sr, a.isyms, a.osyms)
    out.add_states(n_blocks)
    rep: dict[int, int] = {}
    for s in range(n):  # smallest state id represents its block
        rep.setdefault(block[s], s)
    out.set_start(block[a.start])
    for b, s in sorted(rep.items()):
        for arc in a.arcs[s]:
            out.add_arc(b, arc.ilabel, arc.olabel, arc_w(s, arc), block[arc.nextstate])
        f = fin_w(s)
        if f != INF:
            out.set_final(b, f)
    return connect(out)


# -- shortest paths --------------------------------------------------------


def fst_shortest_path(a: Fst, n: int) -> list[tuple[tuple[int, ...], tuple[int, ...], float]]:
    """The n cheapest complete paths (tropical), ascending by total weight;
    ties broken by the lexicographically smallest state-id sequence.

    Returns (input labels, output labels, weight) with epsilons stripped
    from the label sequences."""
    if n <= 0 or a.start == Fst.NO_STATE or not a.finals:
        return []
    if a.semiring.name != "tropical":
        raise FstError("shortest path requires the tropical semiring")
    # admissible heuristic: shortest suffix distance
    h = _shortest_distance_to_final(a)
    if h[a.start] == INF:
        return []
    results = []
    pops: dict[int, int] = defaultdict(int)
    # heap entries: (estimate, state sequence, cost, state, ilabels, olabels)
    heap = [(h[a.start], (a.start,), 0.0, a.start, (), ())]
    while heap and len(results) < n:
        est, seq, cost, s, ils, ols = heapq.heappop(heap)
        if s == -1:  # completed path marker
            results.append((ils, ols, cost))
            continue
        pops[s] += 1
        if pops[s] > n:
            continue
        if s in a.finals:
            total = cost + a.finals[s]
            heapq.heappush(heap, (total, seq + (-1,), total, -1, ils, ols))
        for arc in sorted(a.arcs[s], key=lambda x: (x.nextstate, x.ilabel, x.olabel, x.weight)):
            if h[arc.nextstate] == INF:
                continue
            nc = cost + arc.weight
            nils = ils + (arc.ilabel,) if arc.ilabel != EPS else ils
            nols = ols + (arc.olabel,) if arc.olabel != EPS else ols
            heapq.heappush(heap, (nc + h[arc.nextstate], seq + (arc.nextstate,), nc, arc.nextstate, nils, nols))
    return results


# -- naive path enumeration (the oracle) -----------------------------------


def enumerate_paths(a: Fst, max_len: int) -> list[tuple[tuple[int, ...], tuple[int, ...], float]]:
    """Every complete path with at most max_len arcs, by plain recursive
    search; deliberately naive so it can serve as an independent oracle.

    Returns (epsilon-stripped input labels, output labels, times-weight)
    per path, as a multiset (list)."""
    out: list[tuple[tuple[int, ...], tuple[int, ...], float]] = []
    if a.start == Fst.NO_STATE:
        return out
    sr = a.semiring

    def walk(s: int, ils: tuple, ols: tuple, w: float, depth: int) -> None:
        if s in a.finals:
            out.append((ils, ols, sr.times(w, a.finals[s])))
        if depth == max_len:
            return
        for arc in a.arcs[s]:
            walk(
                arc.nextstate,
                ils + (arc.ilabel,) if arc.ilabel != EPS else ils,
                ols + (arc.olabel,) if arc.olabel != EPS else ols,
                sr.times(w, arc.weight),
                depth + 1,
            )

    walk(a.start, (), (), sr.one, 0)
    return out


def weighted_language(a: Fst, max_len: int) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
    """Map (input string, output string) -> plus-total weight over all
    complete paths of at most max_len arcs."""
    sr = a.semiring
    lang: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    for ils, ols, w in enumerate_paths(a, max_len):
        key = (ils, ols)
        lang[key] = sr.plus(lang.get(key, INF), w)
    return lang


# -- label substitution ----------------------------------------------------


def relabel(a: Fst, imap: dict[int, int] | None = None, omap: dict[int, int] | None = None) -> Fst:
    """Replace arc labels via the given id maps (ids absent from a map pass
    through); symbol tables are kept as-is."""
    out = Fst(a.semiring, a.isyms, a.osyms)
    out.add_states(a.num_states)
    out.start = a.start
    out.finals = dict(a.finals)
    for s in a.states():
        for arc in a.arcs[s]:
            il = imap.get(arc.ilabel, arc.ilabel) if imap else arc.ilabel
            ol = omap.get(arc.olabel, arc.olabel) if omap else arc.olabel
            out.add_arc(s, il, ol, arc.weight, arc.nextstate)
    return out
