"""Block DAG structures and the combinatorial queries used by fork choice.

Blocks live in a :class:`BlockStore` that assigns each block a dense integer
index and keeps its ancestor closure as a Python ``int`` bitset.  A
:class:`DagView` is one node's ancestor-closed subset of a store, so many views
can share a store without copying ancestry.  Every public operation accepts and
returns block ids; the ``*_idx`` helpers work on store indices and are what the
simulator uses on its hot paths.

When blocks are added to a store in ascending ``(slot, y, id)`` order the store
is *ordered*: index order then equals the ledger tie-break order and several
queries reduce to bit tricks.  Unordered stores fall back to explicit sorting.
"""
from __future__ import annotations

import hashlib
import struct
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

__all__ = [
    "DagError", "MissingParent", "Duplicate", "CycleDetected", "UnknownBlock",
    "Comparable", "NoCommonAncestor", "NotDescendant", "NotConflicting",
    "Payload", "EMPTY", "Block", "block_digest", "new_block", "genesis_block",
    "BlockStore", "DagView", "bits",
    "insert_block", "ancestors", "descendants", "tips_w", "cca", "subdag_weight",
    "histories_conflict", "ctr", "preferred_frontier", "max_antichain",
    "min_chain_cover", "conflicts", "linearize", "windowed_gap", "dump",
    "hopcroft_karp", "konig_antichain",
]

_FAR = 1 << 62


class DagError(Exception):
    """Base class for DAG operation failures."""


class MissingParent(DagError):
    pass


class Duplicate(DagError):
    pass


class CycleDetected(DagError):
    pass


class UnknownBlock(DagError):
    pass


class Comparable(DagError):
    pass


class NoCommonAncestor(DagError):
    pass


class NotDescendant(DagError):
    pass


class NotConflicting(DagError):
    pass


@dataclass(frozen=True, slots=True)
class Payload:
    tx_id: int = 0
    conflict_key: int = 0
    is_empty: bool = True

    @classmethod
    def of(cls, tx_id: int, conflict_key: int) -> "Payload":
        return cls(tx_id, conflict_key, False)

    def conflicts_with(self, other: "Payload") -> bool:
        return (not self.is_empty and not other.is_empty
                and self.conflict_key == other.conflict_key
                and self.tx_id != other.tx_id)


EMPTY = Payload()


@dataclass(frozen=True, slots=True)
class Block:
    id: int
    slot: int
    validator: int
    payload: Payload
    short_refs: tuple[int, ...]
    long_ref: int | None
    y: float
    auth_valid: bool = True

    @property
    def refs(self) -> tuple[int, ...]:
        if self.long_ref is None:
            return self.short_refs
        return self.short_refs + (self.long_ref,)

    @property
    def key(self) -> tuple[int, float, int]:
        return (self.slot, self.y, self.id)


def block_digest(slot: int, validator: int, short_refs: Iterable[int],
                 long_ref: int | None, payload: Payload, y: float) -> int:
    """Stable 64-bit content digest used as the block id."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<qqd?QQ", slot, validator, y, payload.is_empty,
                         payload.tx_id, payload.conflict_key))
    for r in sorted(short_refs):
        h.update(struct.pack("<Q", r))
    if long_ref is None:
        h.update(b"-")
    else:
        h.update(b"L" + struct.pack("<Q", long_ref))
    return int.from_bytes(h.digest(), "little")


def new_block(slot: int, validator: int, short_refs: Iterable[int] = (),
              long_ref: int | None = None, payload: Payload = EMPTY,
              y: float = 0.0, auth_valid: bool = True) -> Block:
    refs = tuple(sorted(set(short_refs)))
    bid = block_digest(slot, validator, refs, long_ref, payload, y)
    return Block(bid, slot, validator, payload, refs, long_ref, y, auth_valid)


def genesis_block() -> Block:
    return new_block(0, -1)


def bits(x: int) -> Iterator[int]:
    """Indices of set bits, lowest first."""
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def bits_desc(x: int) -> Iterator[int]:
    while x:
        i = x.bit_length() - 1
        yield i
        x ^= 1 << i


class BlockStore:
    """Append-only registry of blocks with per-block ancestry bitsets."""

    def __init__(self, genesis: Block | None = None):
        self.blocks: list[Block] = []
        self.index: dict[int, int] = {}
        self.slot: list[int] = []
        self.y: list[float] = []
        self.keys: list[tuple[int, float, int]] = []
        self.anc: list[int] = []          # Anc* over all edges
        self.sanc: list[int] = []         # Anc* over short edges only
        self.short: list[tuple[int, ...]] = []
        self.long: list[int] = []         # -1 when absent
        self.short_slots: list[tuple[int, ...]] = []
        self.smask: list[int] = []        # bitset of short parents
        self.refs_mask: list[int] = []    # bitset of all parents
        self.short_children: list[list[int]] = []
        self.long_children: list[list[int]] = []
        self.key_tx: dict[int, dict[int, int]] = {}
        self.contested = 0                # blocks whose conflict key has >= 2 tx ids
        self.ordered = True
        self._slot_mask: dict[int, int] = {}
        self.genesis = self.add(genesis or genesis_block())

    def __len__(self) -> int:
        return len(self.blocks)

    def __contains__(self, bid: int) -> bool:
        return bid in self.index

    def add(self, b: Block) -> int:
        """Register ``b`` (idempotent) and return its index."""
        known = self.index.get(b.id)
        if known is not None:
            return known
        try:
            sidx = tuple(self.index[r] for r in b.short_refs)
            lidx = -1 if b.long_ref is None else self.index[b.long_ref]
        except KeyError as exc:
            raise MissingParent(exc.args[0]) from None
        i = len(self.blocks)
        bit = 1 << i
        anc = bit
        sanc = bit
        sm = 0
        for r in sidx:
            anc |= self.anc[r]
            sanc |= self.sanc[r]
            sm |= 1 << r
            self.short_children[r].append(i)
        rm = sm
        if lidx >= 0:
            anc |= self.anc[lidx]
            rm |= 1 << lidx
            self.long_children[lidx].append(i)
        key = (b.slot, b.y, b.id)
        if self.keys and key <= self.keys[-1]:
            self.ordered = False
        self.blocks.append(b)
        self.index[b.id] = i
        self.slot.append(b.slot)
        self.y.append(b.y)
        self.keys.append(key)
        self.anc.append(anc)
        self.sanc.append(sanc)
        self.short.append(sidx)
        self.long.append(lidx)
        self.short_slots.append(tuple(sorted(self.slot[r] for r in sidx)))
        self.smask.append(sm)
        self.refs_mask.append(rm)
        self.short_children.append([])
        self.long_children.append([])
        self._slot_mask[b.slot] = self._slot_mask.get(b.slot, 0) | bit
        p = b.payload
        if not p.is_empty:
            txs = self.key_tx.setdefault(p.conflict_key, {})
            txs[p.tx_id] = txs.get(p.tx_id, 0) | bit
            if len(txs) > 1:
                for m in txs.values():
                    self.contested |= m
        return i

    def parents(self, i: int) -> tuple[int, ...]:
        if self.long[i] >= 0:
            return self.short[i] + (self.long[i],)
        return self.short[i]

    def range_mask(self, lo: int, hi: int = _FAR) -> int:
        """Bitset of all stored blocks with lo <= slot <= hi."""
        if hi < lo:
            return 0
        if self.ordered:
            a = bisect_left(self.slot, lo)
            b = bisect_right(self.slot, hi)
            return ((1 << b) - 1) ^ ((1 << a) - 1)
        m = 0
        for s, mk in self._slot_mask.items():
            if lo <= s <= hi:
                m |= mk
        return m

    def sort_idx(self, xs: Iterable[int]) -> list[int]:
        if self.ordered:
            return sorted(xs)
        return sorted(xs, key=self.keys.__getitem__)

    def top(self, mask: int) -> int:
        """Index with the largest (slot, y, id) key in a non-empty mask."""
        if self.ordered:
            return mask.bit_length() - 1
        return max(bits(mask), key=self.keys.__getitem__)

    def ids(self, xs: Iterable[int]) -> set[int]:
        bl = self.blocks
        return {bl[i].id for i in xs}

    def mask_of(self, xs: Iterable[int]) -> int:
        m = 0
        for i in xs:
            m |= 1 << i
        return m


class DagView:
    """One node's ancestor-closed local DAG.

    ``members`` is a bitset over the shared store; ``maximal`` holds the
    members without children in this view.  For any ``t`` at or beyond the
    newest slot in the view, the windowed tip set is simply the maximal
    members whose slot is at least ``t - w``.
    """

    __slots__ = ("store", "members", "maximal", "size", "max_slot")

    def __init__(self, store: BlockStore | None = None, genesis: Block | None = None):
        self.store = store if store is not None else BlockStore(genesis)
        g = self.store.genesis
        self.members = 1 << g
        self.maximal: set[int] = {g}
        self.size = 1
        self.max_slot = self.store.slot[g]

    @property
    def genesis(self) -> int:
        return self.store.blocks[self.store.genesis].id

    def __contains__(self, bid: int) -> bool:
        i = self.store.index.get(bid)
        return i is not None and (self.members >> i) & 1 == 1

    def __len__(self) -> int:
        return self.size

    def has(self, i: int) -> bool:
        return (self.members >> i) & 1 == 1

    def idx(self, bid: int) -> int:
        i = self.store.index.get(bid)
        if i is None or not (self.members >> i) & 1:
            raise UnknownBlock(bid)
        return i

    def block(self, bid: int) -> Block:
        return self.store.blocks[self.idx(bid)]

    @property
    def blocks(self) -> dict[int, Block]:
        bl = self.store.blocks
        return {bl[i].id: bl[i] for i in bits(self.members)}

    @property
    def slot_layers(self) -> dict[int, set[int]]:
        st = self.store
        out: dict[int, set[int]] = {}
        for i in bits(self.members):
            out.setdefault(st.slot[i], set()).add(st.blocks[i].id)
        return out

    def children(self, bid: int) -> list[tuple[int, str]]:
        i = self.idx(bid)
        st = self.store
        m = self.members
        out = [(st.blocks[c].id, "short") for c in st.short_children[i] if (m >> c) & 1]
        out += [(st.blocks[c].id, "long") for c in st.long_children[i] if (m >> c) & 1]
        return out

    def tip_cache(self, t: int, w: int) -> set[int]:
        return tips_w(self, t, w)

    def link(self, i: int) -> None:
        """Add an already-stored block whose parents are all members."""
        st = self.store
        self.members |= 1 << i
        mx = self.maximal
        for r in st.short[i]:
            mx.discard(r)
        if st.long[i] >= 0:
            mx.discard(st.long[i])
        mx.add(i)
        self.size += 1
        if st.slot[i] > self.max_slot:
            self.max_slot = st.slot[i]

    def copy(self) -> "DagView":
        v = DagView.__new__(DagView)
        v.store = self.store
        v.members = self.members
        v.maximal = set(self.maximal)
        v.size = self.size
        v.max_slot = self.max_slot
        return v


# ---------------------------------------------------------------------------
# index-level primitives


def masks_conflict(st: BlockStore, a: int, b: int) -> bool:
    """True iff some block only in ``a`` conflicts with some block only in ``b``."""
    cont = st.contested
    xa = a & ~b & cont
    if not xa:
        return False
    xb = b & ~a & cont
    if not xb:
        return False
    blocks = st.blocks
    for i in bits(xa):
        p = blocks[i].payload
        for tx, m in st.key_tx[p.conflict_key].items():
            if tx != p.tx_id and m & xb:
                return True
    return False


def payload_conflicts_mask(st: BlockStore, p: Payload, hist: int) -> bool:
    if p.is_empty:
        return False
    txs = st.key_tx.get(p.conflict_key)
    if not txs:
        return False
    for tx, m in txs.items():
        if tx != p.tx_id and m & hist:
            return True
    return False


def cca_idx(st: BlockStore, i: int, j: int) -> int:
    ai, aj = st.anc[i], st.anc[j]
    if (ai >> j) & 1 or (aj >> i) & 1:
        raise Comparable((st.blocks[i].id, st.blocks[j].id))
    common = ai & aj
    if not common:
        raise NoCommonAncestor((st.blocks[i].id, st.blocks[j].id))
    return st.top(common)


def weight_idx(st: BlockStore, region: int, c: int, w: int, t: int | None) -> int:
    """Sum of weighted short references over ``region`` blocks strictly above ``c``.

    ``c = -1`` stands for a virtual root below every block, so the whole
    region counts.
    """
    anc = st.anc
    total = 0
    if c < 0:
        above = -1
    else:
        region &= ~(1 << c)
        above = c
    if t is None:
        for d in bits(region):
            if above < 0 or (anc[d] >> above) & 1:
                total += len(st.short[d])
        return total
    lo = t - w
    region &= st.range_mask(lo + 1)
    ss = st.short_slots
    for d in bits(region):
        if above < 0 or (anc[d] >> above) & 1:
            s = ss[d]
            if s and s[0] >= lo and s[-1] <= t - 1:
                total += len(s)
            elif s:
                total += bisect_right(s, t - 1) - bisect_left(s, lo)
    return total


def subdag_weight_idx(st: BlockStore, x: int, c: int, w: int, t: int | None = None) -> int:
    if x != c and not (st.anc[x] >> c) & 1:
        raise NotDescendant((st.blocks[x].id, st.blocks[c].id))
    return weight_idx(st, st.anc[x], c, w, t)


def beats(st: BlockStore, i: int, wi: int, j: int, wj: int, tie_break: str) -> bool:
    """Whether tip ``i`` (weight wi) wins against ``j`` (weight wj)."""
    if wi != wj:
        return wi > wj
    ki = (st.y[i], st.blocks[i].id)
    kj = (st.y[j], st.blocks[j].id)
    return ki > kj if tie_break == "larger" else ki < kj


def ctr_idx(st: BlockStore, i: int, j: int, w: int, t: int | None = None,
            tie_break: str = "larger") -> int:
    try:
        c = cca_idx(st, i, j)
    except NoCommonAncestor:
        # only reachable on graphs cut loose from genesis, e.g. with long refs removed
        c = -1
    wi = weight_idx(st, st.anc[i], c, w, t)
    wj = weight_idx(st, st.anc[j], c, w, t)
    return i if beats(st, i, wi, j, wj, tie_break) else j


def frontier_idx(st: BlockStore, tips: Sequence[int], t: int, w: int,
                 tie_break: str = "larger") -> tuple[list[int], bool]:
    """Preferred frontier of key-sorted ``tips``; also reports whether any pair conflicted."""
    n = len(tips)
    if n < 2:
        return list(tips), False
    anc = st.anc
    cont = st.contested
    hot = [x for x in tips if anc[x] & cont]
    if len(hot) < 2:
        return list(tips), False
    pairs = []
    for a in range(len(hot)):
        x = hot[a]
        ax = anc[x]
        for b in range(a + 1, len(hot)):
            y = hot[b]
            if masks_conflict(st, ax, anc[y]):
                pairs.append((x, y))
    if not pairs:
        return list(tips), False
    defeated: set[int] = set()
    for x, y in pairs:
        if x in defeated or y in defeated:
            continue
        win = ctr_idx(st, x, y, w, t, tie_break)
        defeated.add(y if win == x else x)
    return [x for x in tips if x not in defeated], True


def tips_idx(view: DagView, t: int, w: int) -> list[int]:
    st = view.store
    lo = t - w
    if view.max_slot <= t:
        return st.sort_idx(x for x in view.maximal if st.slot[x] >= lo)
    m = view.members
    out = []
    for i in bits(m & st.range_mask(lo)):
        if not any((m >> c) & 1 for c in st.short_children[i]):
            out.append(i)
    return st.sort_idx(out)


# ---------------------------------------------------------------------------
# bipartite matching and Dilworth


def hopcroft_karp(adj: Sequence[Sequence[int]], n_right: int) -> tuple[list[int], list[int], int]:
    """Maximum bipartite matching; returns (match_left, match_right, size)."""
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    inf = n_left + n_right + 1
    size = 0
    while True:
        dist = [inf] * n_left
        q = deque()
        for u in range(n_left):
            if match_l[u] < 0:
                dist[u] = 0
                q.append(u)
        found = False
        while q:
            u = q.popleft()
            for v in adj[u]:
                m = match_r[v]
                if m < 0:
                    found = True
                elif dist[m] == inf:
                    dist[m] = dist[u] + 1
                    q.append(m)
        if not found:
            break

        def augment(u: int) -> bool:
            for v in adj[u]:
                m = match_r[v]
                if m < 0 or (dist[m] == dist[u] + 1 and augment(m)):
                    match_l[u] = v
                    match_r[v] = u
                    return True
            dist[u] = inf
            return False

        for u in range(n_left):
            if match_l[u] < 0 and augment(u):
                size += 1
    return match_l, match_r, size


def konig_antichain(adj: Sequence[Sequence[int]], match_l: Sequence[int],
                    match_r: Sequence[int]) -> list[int]:
    """Maximum antichain from a maximum matching of the split comparability graph.

    Alternating reachability from unmatched left copies gives a minimum vertex
    cover; elements with neither copy in the cover form the antichain.
    """
    n = len(adj)
    seen_l = [False] * n
    seen_r = [False] * n
    q = deque(u for u in range(n) if match_l[u] < 0)
    for u in q:
        seen_l[u] = True
    while q:
        u = q.popleft()
        for v in adj[u]:
            if not seen_r[v]:
                seen_r[v] = True
                m = match_r[v]
                if m >= 0 and not seen_l[m]:
                    seen_l[m] = True
                    q.append(m)
    return [x for x in range(n) if seen_l[x] and not seen_r[x]]


def _order_adj(st: BlockStore, nodes: Sequence[int]) -> list[list[int]]:
    anc = st.anc
    pos = {x: k for k, x in enumerate(nodes)}
    mask = st.mask_of(nodes)
    adj: list[list[int]] = [[] for _ in nodes]
    for k, x in enumerate(nodes):
        for a in bits(anc[x] & mask & ~(1 << x)):
            adj[pos[a]].append(k)
    return adj


def _antichain_size(adj: list[list[int]], keep: Sequence[int]) -> int:
    if not keep:
        return 0
    sub = {x: k for k, x in enumerate(keep)}
    sadj = [[sub[v] for v in adj[x] if v in sub] for x in keep]
    return len(keep) - hopcroft_karp(sadj, len(keep))[2]


def max_antichain_idx(st: BlockStore, nodes: Iterable[int]) -> list[int]:
    """Lexicographically least maximum antichain (by sorted keys) among ``nodes``."""
    nodes = st.sort_idx(set(nodes))
    n = len(nodes)
    if n < 2:
        return nodes
    adj = _order_adj(st, nodes)
    if not any(adj):
        return nodes
    ml, mr, size = hopcroft_karp(adj, n)
    best = n - size
    comp = [set(adj[k]) for k in range(n)]
    for k in range(n):
        for v in adj[k]:
            comp[v].add(k)
    chosen: list[int] = []
    blocked: set[int] = set()
    for k in range(n):
        if k in blocked:
            continue
        pool = [u for u in range(k + 1, n) if u not in blocked and u not in comp[k]]
        if len(chosen) + 1 + _antichain_size(adj, pool) == best:
            chosen.append(k)
            blocked |= comp[k]
            if len(chosen) == best:
                break
        blocked.add(k)
    return [nodes[k] for k in chosen]


def chain_cover_idx(st: BlockStore, nodes: Iterable[int]) -> list[list[int]]:
    """Minimum chain cover from a maximum matching (Dilworth dual)."""
    nodes = st.sort_idx(set(nodes))
    n = len(nodes)
    adj = _order_adj(st, nodes)
    ml, mr, _ = hopcroft_karp(adj, n)
    chains = []
    for k in range(n):
        if mr[k] >= 0:
            continue
        chain = [nodes[k]]
        u = k
        while ml[u] >= 0:
            u = ml[u]
            chain.append(nodes[u])
        chains.append(chain)
    return chains


def window_members(view: DagView, t: int, w: int) -> list[int]:
    return list(bits(view.members & view.store.range_mask(t - w, t - 1)))


# ---------------------------------------------------------------------------
# id-level operations


def insert_block(view: DagView, b: Block) -> None:
    st = view.store
    i = st.index.get(b.id)
    if i is not None and view.has(i):
        raise Duplicate(b.id)
    for r in b.refs:
        if r not in view:
            raise MissingParent(r)
    i = st.add(b)
    for r in st.parents(i):
        if (st.anc[r] >> i) & 1:
            raise CycleDetected(b.id)
    view.link(i)


def ancestors(view: DagView, bid: int, closure: bool = False) -> set[int]:
    i = view.idx(bid)
    st = view.store
    m = st.anc[i] if closure else st.anc[i] & ~(1 << i)
    return st.ids(bits(m))


def descendants(view: DagView, bid: int, closure: bool = False) -> set[int]:
    i = view.idx(bid)
    st = view.store
    m = view.members
    seen = {i}
    stack = [i]
    while stack:
        u = stack.pop()
        for c in st.short_children[u] + st.long_children[u]:
            if c not in seen and (m >> c) & 1:
                seen.add(c)
                stack.append(c)
    if not closure:
        seen.discard(i)
    return st.ids(seen)


def tips_w(view: DagView, t: int, w: int) -> set[int]:
    return view.store.ids(tips_idx(view, t, w))


def cca(view: DagView, i: int, j: int) -> int:
    st = view.store
    return st.blocks[cca_idx(st, view.idx(i), view.idx(j))].id


def subdag_weight(view: DagView, x: int, c: int, w: int, t: int | None = None) -> int:
    """Weighted short references of blocks above ``c`` on the way to ``x``.

    The region is Anc*(x) minus Anc*-closed blocks not strictly above ``c``.
    With ``t`` given, only references whose target lies in slots
    ``[t - w, t - 1]`` are counted.
    """
    return subdag_weight_idx(view.store, view.idx(x), view.idx(c), w, t)


def histories_conflict(view: DagView, i: int, j: int) -> bool:
    st = view.store
    return masks_conflict(st, st.anc[view.idx(i)], st.anc[view.idx(j)])


def ctr(view: DagView, i: int, j: int, w: int, t: int | None = None,
        tie_break: str = "larger") -> int:
    st = view.store
    a, b = view.idx(i), view.idx(j)
    if not masks_conflict(st, st.anc[a], st.anc[b]):
        raise NotConflicting((i, j))
    return st.blocks[ctr_idx(st, a, b, w, t, tie_break)].id


def preferred_frontier(view: DagView, t: int, w: int, tie_break: str = "larger") -> set[int]:
    st = view.store
    f, _ = frontier_idx(st, tips_idx(view, t, w), t, w, tie_break)
    return st.ids(f)


def max_antichain(view: DagView, t: int, w: int,
                  candidates: Iterable[int] | None = None) -> set[int]:
    """Maximum antichain of the window ``[t - w, t - 1]`` under full-view reachability.

    ``candidates`` (ids) restricts the vertex set; reachability is unchanged.
    """
    st = view.store
    if candidates is None:
        nodes = window_members(view, t, w)
    else:
        lo, hi = t - w, t - 1
        nodes = [view.idx(c) for c in candidates]
        nodes = [i for i in nodes if lo <= st.slot[i] <= hi]
    return st.ids(max_antichain_idx(st, nodes))


def min_chain_cover(view: DagView, t: int, w: int) -> list[list[int]]:
    st = view.store
    return [[st.blocks[i].id for i in ch] for ch in chain_cover_idx(st, window_members(view, t, w))]


def conflicts(p: Payload, hist: Iterable[int], view: DagView) -> bool:
    st = view.store
    m = 0
    for h in hist:
        m |= st.anc[view.idx(h)]
    return payload_conflicts_mask(st, p, m)


def linearize(view: DagView, anchor: int, t: int, w: int, tie_break: str = "larger",
              frontier: Iterable[int] | None = None) -> list[int]:
    st = view.store
    a = view.idx(anchor)
    if frontier is None:
        f, _ = frontier_idx(st, tips_idx(view, t, w), t, w, tie_break)
    else:
        f = [view.idx(x) for x in frontier]
    m = 0
    for x in f:
        m |= st.anc[x]
    anc = st.anc
    out = [i for i in bits(m) if (anc[i] >> a) & 1]
    return [st.blocks[i].id for i in st.sort_idx(out)]


def windowed_gap(view: DagView, i: int, j: int, w: int, t: int | None = None) -> int:
    st = view.store
    a, b = view.idx(i), view.idx(j)
    c = cca_idx(st, a, b)
    return weight_idx(st, st.anc[a], c, w, t) - weight_idx(st, st.anc[b], c, w, t)


def dump(view: DagView) -> str:
    """Tab-separated listing, one block per line, sorted by (slot, y, id)."""
    st = view.store
    lines = []
    for i in st.sort_idx(bits(view.members)):
        b = st.blocks[i]
        refs = ",".join(f"{r:016x}" for r in b.short_refs)
        lr = "" if b.long_ref is None else f"{b.long_ref:016x}"
        ck = "" if b.payload.is_empty else str(b.payload.conflict_key)
        tx = "" if b.payload.is_empty else str(b.payload.tx_id)
        lines.append(f"{b.id:016x}\t{b.slot}\t{b.validator}\t{b.y!r}\t{refs}|{lr}\t{ck}\t{tx}")
    return "\n".join(lines) + ("\n" if lines else "")
