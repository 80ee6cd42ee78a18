"""Brute-force reference implementations of the DAG queries.

These work on a plain dictionary description of a DAG and share no code with
:mod:`dagpos.dag`: ancestry is recomputed by graph search, antichains by
enumeration, and orders by Kahn's algorithm.  They are slow on purpose and
exist to cross-check the fast paths (and to emit test vectors from the CLI).

A toy DAG is ``{name: {"slot", "y", "short", "long", "payload"}}`` where
``payload`` is ``None`` or a ``(conflict_key, tx_id)`` pair and ``long`` is a
name or ``None``.  Blocks are compared by the key ``(slot, y, name)``.
"""
from __future__ import annotations

import heapq
import math
import random
from typing import Iterable

ToyDag = dict


def parents(g: ToyDag, x) -> list:
    p = list(g[x]["short"])
    if g[x]["long"] is not None:
        p.append(g[x]["long"])
    return p


def key(g: ToyDag, x) -> tuple:
    return (g[x]["slot"], g[x]["y"], x)


def anc_star(g: ToyDag, x) -> set:
    seen = {x}
    todo = [x]
    while todo:
        u = todo.pop()
        for p in parents(g, u):
            if p not in seen:
                seen.add(p)
                todo.append(p)
    return seen


def desc_star(g: ToyDag, x) -> set:
    return {d for d in g if x in anc_star(g, d)}


def reachable(g: ToyDag, a, b) -> bool:
    """a is an ancestor of b (or equal)."""
    return a in anc_star(g, b)


def comparable(g: ToyDag, a, b) -> bool:
    return reachable(g, a, b) or reachable(g, b, a)


def tips(g: ToyDag, t: int, w: int) -> set:
    lo = t - w
    out = set()
    for x in g:
        if g[x]["slot"] < lo:
            continue
        has_child = any(x in g[c]["short"] and g[c]["slot"] >= lo for c in g)
        if not has_child:
            out.add(x)
    return out


def cca(g: ToyDag, i, j):
    if comparable(g, i, j):
        raise ValueError("comparable")
    common = (anc_star(g, i) - {i}) & (anc_star(g, j) - {j})
    return max(common, key=lambda x: key(g, x))


def counted_refs(g: ToyDag, d, w: int, t: int | None) -> int:
    if t is None:
        return len(g[d]["short"])
    return sum(1 for r in g[d]["short"] if t - w <= g[r]["slot"] <= t - 1)


def subdag_weight(g: ToyDag, x, c, w: int, t: int | None = None) -> int:
    region = [d for d in anc_star(g, x) if d != c and c in anc_star(g, d)]
    return sum(counted_refs(g, d, w, t) for d in region)


def payload_clash(p, q) -> bool:
    return p is not None and q is not None and p[0] == q[0] and p[1] != q[1]


def hist_conflict(g: ToyDag, i, j) -> bool:
    ai, aj = anc_star(g, i), anc_star(g, j)
    return any(payload_clash(g[a]["payload"], g[b]["payload"])
               for a in ai - aj for b in aj - ai)


def payload_conflicts(g: ToyDag, p, hist: Iterable) -> bool:
    closure = set()
    for h in hist:
        closure |= anc_star(g, h)
    return any(payload_clash(p, g[a]["payload"]) for a in closure)


def ctr(g: ToyDag, i, j, w: int, t: int | None = None, tie_break: str = "larger"):
    c = cca(g, i, j)
    wi, wj = subdag_weight(g, i, c, w, t), subdag_weight(g, j, c, w, t)
    if wi != wj:
        return i if wi > wj else j
    ki, kj = (g[i]["y"], i), (g[j]["y"], j)
    if tie_break == "larger":
        return i if ki > kj else j
    return i if ki < kj else j


def frontier(g: ToyDag, t: int, w: int, tie_break: str = "larger") -> set:
    u = sorted(tips(g, t, w), key=lambda x: key(g, x))
    pairs = [(u[a], u[b]) for a in range(len(u)) for b in range(a + 1, len(u))
             if hist_conflict(g, u[a], u[b])]
    dead = set()
    for a, b in pairs:
        if a in dead or b in dead:
            continue
        win = ctr(g, a, b, w, t, tie_break)
        dead.add(b if win == a else a)
    return set(u) - dead


def window(g: ToyDag, t: int, w: int) -> list:
    return [x for x in g if t - w <= g[x]["slot"] <= t - 1]


def all_antichains(g: ToyDag, nodes: list) -> list[list]:
    nodes = sorted(nodes, key=lambda x: key(g, x))
    out = []

    def grow(start, chosen):
        out.append(list(chosen))
        for k in range(start, len(nodes)):
            v = nodes[k]
            if all(not comparable(g, v, c) for c in chosen):
                chosen.append(v)
                grow(k + 1, chosen)
                chosen.pop()

    grow(0, [])
    return out


def max_antichain(g: ToyDag, nodes: list) -> list:
    """Lexicographically least maximum antichain, by sorted keys."""
    best = []
    for a in all_antichains(g, nodes):
        ka = sorted(key(g, x) for x in a)
        kb = sorted(key(g, x) for x in best)
        if len(a) > len(best) or (len(a) == len(best) and ka < kb):
            best = a
    return sorted(best, key=lambda x: key(g, x))


def min_chain_cover(g: ToyDag, nodes: list) -> int:
    """Smallest number of chains partitioning ``nodes`` (backtracking)."""
    nodes = sorted(nodes, key=lambda x: key(g, x))
    if not nodes:
        return 0

    def fits(k):
        chains: list[list] = []

        def place(pos):
            if pos == len(nodes):
                return True
            v = nodes[pos]
            for ch in chains:
                if all(comparable(g, v, c) for c in ch):
                    ch.append(v)
                    if place(pos + 1):
                        return True
                    ch.pop()
            if len(chains) < k:
                chains.append([v])
                if place(pos + 1):
                    return True
                chains.pop()
            return False

        return place(0)

    for k in range(1, len(nodes) + 1):
        if fits(k):
            return k
    return len(nodes)


def linearize(g: ToyDag, anchor, front: Iterable) -> list:
    """Least topological order by key of Anc*(front) above ``anchor`` (Kahn)."""
    keep = set()
    for f in front:
        keep |= anc_star(g, f)
    keep = {x for x in keep if anchor in anc_star(g, x)}
    indeg = {x: sum(1 for p in parents(g, x) if p in keep) for x in keep}
    heap = [key(g, x) for x in keep if indeg[x] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        x = heapq.heappop(heap)[2]
        out.append(x)
        for c in keep:
            if x in parents(g, c):
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, key(g, c))
    return out


def gap(g: ToyDag, i, j, w: int, t: int | None = None) -> int:
    c = cca(g, i, j)
    return subdag_weight(g, i, c, w, t) - subdag_weight(g, j, c, w, t)


def random_dag(rng: random.Random, n: int, w: int | None = None,
               n_keys: int = 3, p_payload: float = 0.6) -> tuple[ToyDag, int]:
    """Random slotted DAG with ``n`` vertices (genesis included)."""
    if w is None:
        w = rng.randint(1, 5)
    g: ToyDag = {"g": {"slot": 0, "y": 0.0, "short": [], "long": None, "payload": None}}
    slot = 0
    names = ["g"]
    for k in range(1, n):
        slot += rng.choice((0, 1, 1, 1, 2, 3)) if k > 1 else 1
        slot = max(slot, 1)
        older = [x for x in names if g[x]["slot"] < slot]
        near = [x for x in older if slot - g[x]["slot"] <= w]
        far = [x for x in older if slot - g[x]["slot"] > w]
        short = rng.sample(near, rng.randint(1, min(3, len(near)))) if near else []
        long_ref = rng.choice(far) if far and (not short or rng.random() < 0.3) else None
        if not short and long_ref is None:
            long_ref = rng.choice(far)
        payload = None
        if rng.random() < p_payload:
            payload = (rng.randrange(n_keys), rng.randrange(1 << 20))
        name = f"b{k}"
        g[name] = {"slot": slot, "y": rng.random(), "short": sorted(short),
                   "long": long_ref, "payload": payload}
        names.append(name)
    return g, w


def topo_names(g: ToyDag) -> list:
    return sorted(g, key=lambda x: key(g, x))


def log_linear_fit(points: list[tuple[float, float]], weighted: bool = False) -> tuple[float, float]:
    """Closed-form (optionally frequency-weighted) least squares of ln(freq) on depth.

    Returns (A, decay).
    """
    pts = [(d, f) for d, f in points if f > 0]
    ws = [f if weighted else 1.0 for _, f in pts]
    xs = [d for d, _ in pts]
    ys = [math.log(f) for _, f in pts]
    sw = sum(ws)
    mx = sum(w * x for w, x in zip(ws, xs)) / sw
    my = sum(w * y for w, y in zip(ws, ys)) / sw
    sxx = sum(w * (x - mx) ** 2 for w, x in zip(ws, xs))
    sxy = sum(w * (x - mx) * (y - my) for w, x, y in zip(ws, xs, ys))
    slope = sxy / sxx
    return math.exp(my - slope * mx), -slope


def to_view(g: ToyDag):
    """Build a :class:`dagpos.dag.DagView` from a toy DAG; returns (view, name->id)."""
    from .dag import DagView, Payload, insert_block, new_block, EMPTY

    view = DagView()
    ids = {"g": view.genesis}
    for x in topo_names(g):
        if x == "g":
            continue
        d = g[x]
        p = EMPTY if d["payload"] is None else Payload.of(d["payload"][1], d["payload"][0])
        b = new_block(d["slot"], 0, [ids[r] for r in d["short"]],
                      None if d["long"] is None else ids[d["long"]], p, d["y"])
        insert_block(view, b)
        ids[x] = b.id
    return view, ids
