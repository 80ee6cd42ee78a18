"""Honest node behaviour: eligibility, block creation, validation and fork choice.

Two variants share one :class:`NodeState`.  ``ideal`` nodes may reference any
visible block and skip the base-model structural checks; ``base`` nodes
reference the preferred tips inside the window, add at most one long reference
to reattach an orphaned older block, and validate incoming blocks in the fixed
order listed in :func:`validate_base`.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .dag import (EMPTY, Block, BlockStore, DagView, Payload, bits, bits_desc,
                  frontier_idx, masks_conflict, max_antichain_idx, new_block,
                  payload_conflicts_mask)

LABEL, PAYLOAD, DELAY, STAKE, ADVERSARY, PAIRS = 1, 2, 3, 4, 5, 6


@dataclass(frozen=True)
class ValidatorProfile:
    id: int
    stake: float
    honest: bool = True


@dataclass(frozen=True)
class EligibilityParams:
    f: float = 0.25
    mode: str = "base_vrf"          # or "ideal_public_coin"
    phi_fn: str = "praos_style"     # or "linear"


def phi(f: float, alpha: float, phi_fn: str = "praos_style") -> float:
    if phi_fn == "praos_style":
        return 1.0 - (1.0 - f) ** alpha
    if phi_fn == "linear":
        return f * alpha
    raise ValueError(f"unknown phi_fn {phi_fn!r}")


def win_probability(v: ValidatorProfile, params: EligibilityParams,
                    total_stake: float = 1.0) -> float:
    """Per-slot success probability of ``v``."""
    if params.mode == "ideal_public_coin":
        return min(params.f, 1.0)
    return min(phi(params.f, v.stake / total_stake, params.phi_fn), 1.0)


class RandomOracle:
    """Seeded pseudorandom function keyed by tuples of non-negative ints.

    Labels for one slot are drawn as a single vector, so the label of
    validator ``v`` in slot ``s`` is the ``v``-th entry of that vector and
    does not depend on how many validators were asked for.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._slot = -1
        self._labels = np.empty(0)

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))

    def uniform(self, *key: int) -> float:
        return float(self.generator(*key).random())

    def labels(self, slot: int, n: int) -> np.ndarray:
        if slot != self._slot or len(self._labels) < n:
            self._labels = self.generator(LABEL, slot).random(max(n, 1))
            self._slot = slot
        return self._labels[:n]

    def label(self, v: int, slot: int) -> float:
        return float(self.labels(slot, v + 1)[v])


def eligibility(v: ValidatorProfile, slot: int, params: EligibilityParams,
                oracle: RandomOracle, total_stake: float = 1.0) -> tuple[bool, float]:
    y = oracle.label(v.id, slot)
    return y < win_probability(v, params, total_stake), y


class PayloadSampler:
    """World-level payload source.

    With probability ``p_conflict`` a payload reuses one of the most recent
    conflict keys under a fresh transaction id, which manufactures a
    double-spend candidate.
    """

    def __init__(self, oracle: RandomOracle, p_conflict: float = 0.0, recent: int = 16):
        self.oracle = oracle
        self.p_conflict = p_conflict
        self.recent: deque[int] = deque(maxlen=recent)

    def draw(self, validator: int, slot: int) -> Payload:
        g = self.oracle.generator(PAYLOAD, validator + 1, slot)
        u = g.random()
        tx = int(g.integers(1, 1 << 63))
        if self.recent and u < self.p_conflict:
            key = self.recent[int(g.integers(len(self.recent)))]
        else:
            key = int(g.integers(1, 1 << 63))
        self.recent.append(key)
        return Payload.of(tx, key)


def sample_payload(sampler: PayloadSampler, validator: int, slot: int) -> Payload:
    return sampler.draw(validator, slot)


# ---------------------------------------------------------------------------
# reception

ACCEPTED, REJECTED, DEFERRED, DUPLICATE = "accepted", "rejected", "deferred", "duplicate"

AUTH_INVALID = "AuthInvalid"
ABOVE_THRESHOLD = "AboveThreshold"
NON_POSITIVE_DISTANCE = "NonPositiveRefDistance"
TOO_MANY_LONG_REFS = "TooManyLongRefs"
MISCLASSIFIED_REF = "MisclassifiedRef"
CYCLE = "CycleDetected"
NOT_ANTICHAIN = "RefsNotAntichain"
PAYLOAD_CONFLICT = "PayloadConflict"


@dataclass(frozen=True)
class Reception:
    status: str
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.status == ACCEPTED


def validate_base(store: BlockStore, b: Block, w: int,
                  threshold: Callable[[int], float] | None) -> str | None:
    """Return the first failing check for ``b`` (parents must be stored), else None."""
    if not b.auth_valid:
        return AUTH_INVALID
    if threshold is not None and not b.y < threshold(b.validator):
        return ABOVE_THRESHOLD
    idx = store.index
    slot = store.slot
    refs = [idx[r] for r in b.refs]
    dist = [b.slot - slot[r] for r in refs]
    if any(d <= 0 for d in dist):
        return NON_POSITIVE_DISTANCE
    if sum(1 for d in dist if d > w) > 1:
        return TOO_MANY_LONG_REFS
    if any(b.slot - slot[idx[r]] > w for r in b.short_refs):
        return MISCLASSIFIED_REF
    if b.long_ref is not None and b.slot - slot[idx[b.long_ref]] <= w:
        return MISCLASSIFIED_REF
    me = idx.get(b.id)
    anc = store.anc
    if me is not None and any((anc[r] >> me) & 1 for r in refs):
        return CYCLE
    short = [idx[r] for r in b.short_refs]
    sm = store.mask_of(short)
    for r in short:
        if anc[r] & sm & ~(1 << r):
            return NOT_ANTICHAIN
    hist = 0
    for r in refs:
        hist |= anc[r]
    if payload_conflicts_mask(store, b.payload, hist):
        return PAYLOAD_CONFLICT
    return None


def validate_ideal(store: BlockStore, b: Block) -> str | None:
    me = store.index.get(b.id)
    if me is not None:
        anc = store.anc
        if any((anc[store.index[r]] >> me) & 1 for r in b.refs):
            return CYCLE
    if any(store.slot[store.index[r]] >= b.slot for r in b.refs):
        return CYCLE
    return None


# ---------------------------------------------------------------------------
# node state


class NodeState:
    """Local state of one honest validator.

    Besides the view and the pending buffer, the node keeps ``live`` (maximal
    blocks inside the current window) and ``ledger`` (bitset of the ancestor
    closure of its preferred frontier).  ``dirty`` marks a view change since
    the last fork-choice evaluation; ``conflicted`` marks that the last
    evaluation had to resolve a conflict, in which case weights must be
    recomputed every slot because they shift with the window.
    """

    def __init__(self, me: ValidatorProfile, w: int, variant: str = "base",
                 store: BlockStore | None = None, *,
                 threshold: Callable[[int], float] | None = None,
                 tie_break: str = "larger", verdicts: dict | None = None,
                 fc_cache: dict | None = None):
        if variant not in ("base", "ideal"):
            raise ValueError(f"unknown variant {variant!r}")
        self.me = me
        self.w = w
        self.variant = variant
        self.view = DagView(store)
        self.threshold = threshold
        self.tie_break = tie_break
        self.verdicts = verdicts if verdicts is not None else {}
        self.fc_cache = fc_cache        # shared per-slot frontier results, keyed by tips
        self.pending: dict[int, Block] = {}
        self._waiting: dict[int, list[int]] = {}
        g = self.view.store.genesis
        self.live: set[int] = {g}
        self.frontier_list: list[int] = [g]
        self.ledger = self.view.store.anc[g]
        self.dirty = False
        self.conflicted = False
        self._aged = False
        self.t = 0

    @property
    def store(self) -> BlockStore:
        return self.view.store

    @property
    def frontier(self) -> set[int]:
        return self.store.ids(self.frontier_list)

    # -- reception -------------------------------------------------------

    def _verdict(self, b: Block) -> str | None:
        v = self.verdicts.get(b.id, 0)
        if v == 0:
            if self.variant == "base":
                v = validate_base(self.store, b, self.w, self.threshold)
            else:
                v = validate_ideal(self.store, b)
            self.verdicts[b.id] = v
        return v

    def receive(self, b: Block) -> Reception:
        st = self.store
        i = st.index.get(b.id)
        if (i is not None and self.view.has(i)) or b.id in self.pending:
            return Reception(DUPLICATE)
        for r in b.refs:
            if r not in self.view:
                self.pending[b.id] = b
                self._waiting.setdefault(r, []).append(b.id)
                return Reception(DEFERRED)
        reason = self._verdict(b)
        if reason is not None:
            return Reception(REJECTED, reason)
        i = st.add(b)
        self._link(i)
        self._wake(b.id)
        return Reception(ACCEPTED)

    def _link(self, i: int) -> None:
        st = self.store
        self.view.link(i)
        live = self.live
        for r in st.short[i]:
            live.discard(r)
        if st.long[i] >= 0:
            live.discard(st.long[i])
        live.add(i)
        self.dirty = True

    def _wake(self, bid: int) -> None:
        todo = deque([bid])
        while todo:
            waiting = self._waiting.pop(todo.popleft(), None)
            if not waiting:
                continue
            for wid in waiting:
                b = self.pending.pop(wid, None)
                if b is None:
                    continue
                res = self.receive(b)
                if res.status == ACCEPTED:
                    todo.append(wid)

    def deliver(self, i: int) -> None:
        """Engine fast path for a block already registered in the shared store."""
        view = self.view
        if (view.members >> i) & 1:
            return
        st = self.store
        missing = st.refs_mask[i] & ~view.members
        b = st.blocks[i]
        if missing:
            if b.id in self.pending:
                return
            self.pending[b.id] = b
            p = missing.bit_length() - 1
            self._waiting.setdefault(st.blocks[p].id, []).append(b.id)
            return
        if self._verdict(b) is not None:
            return
        self._link(i)
        if self._waiting:
            self._wake(b.id)

    # -- fork choice -----------------------------------------------------

    def _prune(self, t: int) -> bool:
        lo = t - self.w
        slot = self.store.slot
        old = [x for x in self.live if slot[x] < lo]
        for x in old:
            self.live.discard(x)
        if old:
            self._aged = True
        return bool(old)

    def frontier_at(self, t: int) -> list[int]:
        """Preferred frontier at slot ``t`` (index list, key order)."""
        self._prune(t)
        st = self.store
        tips = st.sort_idx(x for x in self.live if st.slot[x] <= t)
        f, _ = frontier_idx(st, tips, t, self.w, self.tie_break)
        return f

    def update(self, t: int) -> tuple[int, int, int, int] | None:
        """Slot-end fork choice.

        Returns ``(depth, appended, removed_mask, old_ledger)`` when the ledger
        lost blocks, otherwise None.
        """
        self._prune(t)
        self.t = t
        if not (self.dirty or self._aged or self.conflicted):
            return None
        self.dirty = False
        self._aged = False
        st = self.store
        tips = st.sort_idx(self.live)
        cache = self.fc_cache
        if cache is None:
            f, self.conflicted = frontier_idx(st, tips, t, self.w, self.tie_break)
        else:
            key = tuple(tips)
            hit = cache.get(key)
            if hit is None:
                hit = cache[key] = frontier_idx(st, tips, t, self.w, self.tie_break)
            f, self.conflicted = hit
        if not f:
            return None
        self.frontier_list = f
        anc = st.anc
        closure = 0
        for x in f:
            closure |= anc[x]
        old = self.ledger
        new, removed = advance_ledger(st, old, closure)
        self.ledger = new
        if not removed:
            return None
        depth, app = ledger_loss(st, old, new, removed)
        return depth, app, removed, old

    # -- creation --------------------------------------------------------

    def compose(self, slot: int, y: float, payload: Payload) -> Block:
        """Block this node would create in ``slot`` (not yet inserted)."""
        st = self.store
        if self.variant == "base":
            refs = max_antichain_idx(st, self.frontier_at(slot))
            anc_r = 0
            for r in refs:
                anc_r |= st.anc[r]
            lr = select_long_ref_idx(self.view, slot, self.w, refs, anc_r)
            hist = anc_r if lr is None else anc_r | st.anc[lr]
        else:
            cands = [x for x in self.view.maximal if st.slot[x] < slot]
            f, _ = frontier_idx(st, st.sort_idx(cands), slot, self.w, self.tie_break)
            refs = max_antichain_idx(st, f)
            lr = None
            hist = 0
            for r in refs:
                hist |= st.anc[r]
        if payload_conflicts_mask(st, payload, hist):
            payload = EMPTY
        bl = st.blocks
        return new_block(slot, self.me.id, [bl[r].id for r in refs],
                         None if lr is None else bl[lr].id, payload, y)

    def adopt_own(self, b: Block) -> int:
        i = self.store.add(b)
        self.verdicts.setdefault(b.id, None)
        if not self.view.has(i):
            self._link(i)
        return i


def advance_ledger(st: BlockStore, old: int, closure: int) -> tuple[int, int]:
    """Next ledger from the previous one and the frontier closure.

    Blocks of ``old`` outside ``closure`` stay unless their history conflicts
    with ``closure``; a tip that merely aged out of the window is not a
    reorganization.  Returns ``(new, removed)``.
    """
    rest = old & ~closure
    if not rest:
        return closure, 0
    hot = closure & st.contested
    if not hot:
        return old | closure, 0
    bad = 0
    blocks = st.blocks
    for i in bits(hot):
        p = blocks[i].payload
        for tx, m in st.key_tx[p.conflict_key].items():
            if tx != p.tx_id:
                bad |= m
    bad &= ~closure
    if not bad & rest:
        return old | closure, 0
    anc = st.anc
    removed = 0
    for i in bits(rest):
        if anc[i] & bad:
            removed |= 1 << i
    return (old & ~removed) | closure, removed


def ledger_loss(st: BlockStore, old: int, new: int, removed: int) -> tuple[int, int]:
    """Depth (old positions from the first removed one) and appended count."""
    if st.ordered:
        k = (removed & -removed).bit_length() - 1
        low = (1 << k) - 1
        return (old & ~low).bit_count(), (new & ~low).bit_count()
    keys = st.keys
    first = min(bits(removed), key=keys.__getitem__)
    kf = keys[first]
    depth = sum(1 for i in bits(old) if keys[i] >= kf)
    app = sum(1 for i in bits(new) if keys[i] >= kf)
    return depth, app


def select_long_ref_idx(view: DagView, slot: int, w: int, refs, anc_r: int) -> int | None:
    st = view.store
    cand = view.members & st.range_mask(0, slot - w - 1) & ~anc_r
    if not cand:
        return None
    order = bits_desc(cand) if st.ordered else sorted(bits(cand), key=st.keys.__getitem__, reverse=True)
    for x in order:
        if not masks_conflict(st, st.anc[x], anc_r):
            return x
    return None


# ---------------------------------------------------------------------------
# operation-level wrappers


def select_long_ref(view: DagView, slot: int, w: int, R) -> int | None:
    st = view.store
    refs = [view.idx(r) for r in R]
    anc_r = 0
    for r in refs:
        anc_r |= st.anc[r]
    x = select_long_ref_idx(view, slot, w, refs, anc_r)
    return None if x is None else st.blocks[x].id


def fork_choice_update(node: NodeState, t: int) -> set[int]:
    node.dirty = True
    node.update(t)
    if not node.live:
        node.frontier_list = []
    return node.frontier


def receive_block_base(node: NodeState, b: Block) -> Reception:
    return node.receive(b)


def receive_block_ideal(node: NodeState, b: Block) -> Reception:
    return node.receive(b)


def _create(node: NodeState, slot: int, payload_oracle, oracle: RandomOracle,
            params: EligibilityParams, total_stake: float) -> Block | None:
    ok, y = eligibility(node.me, slot, params, oracle, total_stake)
    if not ok:
        return None
    p = payload_oracle(node.me.id, slot) if payload_oracle is not None else EMPTY
    b = node.compose(slot, y, p)
    node.adopt_own(b)
    fork_choice_update(node, slot)
    return b


def create_block_base(node: NodeState, slot: int, payload_oracle, oracle: RandomOracle,
                      params: EligibilityParams, total_stake: float = 1.0) -> Block | None:
    return _create(node, slot, payload_oracle, oracle, params, total_stake)


def create_block_ideal(node: NodeState, slot: int, payload_oracle, oracle: RandomOracle,
                       params: EligibilityParams, total_stake: float = 1.0) -> Block | None:
    return _create(node, slot, payload_oracle, oracle, params, total_stake)


def stake_thresholds(profiles: Mapping[int, ValidatorProfile], params: EligibilityParams,
                     total_stake: float | None = None) -> dict[int, float]:
    if total_stake is None:
        total_stake = math.fsum(p.stake for p in profiles.values())
    return {v: win_probability(p, params, total_stake) for v, p in profiles.items()}
