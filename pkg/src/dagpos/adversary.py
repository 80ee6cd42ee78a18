"""Private-branch adversary against the DAG variants.

The adversary controls one validator.  It keeps a *public view* (every honest
block plus whatever it has released) and a private branch that double-spends
the payload of a recent honest block, the *target*.  Branch blocks reference
every maximal window block whose history does not hold the target transaction,
so each one carries the whole compatible window as its weight.

Two release policies are provided:

``heuristic``
    release the branch as soon as its tip outweighs every conflicting public
    frontier tip, measured from their common ancestor with the current window.
``exhaustive``
    enumerate candidate tips and release sets, score each by the public-ledger
    removal depth it would cause, and optionally hold a comfortable lead to let
    more honest blocks pile up on the target.  The search is bounded by an
    expansion budget; when exhausted it falls back to ``heuristic``.

A branch whose target slot falls more than ``2w`` slots behind is abandoned;
its blocks stay withheld forever.
"""
from __future__ import annotations

from .dag import (EMPTY, Block, BlockStore, DagView, Payload, bits, bits_desc,
                  cca_idx, frontier_idx, max_antichain_idx, masks_conflict,
                  new_block, tips_idx, weight_idx)
from .protocol import ADVERSARY, RandomOracle, ValidatorProfile, ledger_loss
from .sim import AttackEntry, SimConfig


class BudgetExhausted(RuntimeError):
    pass


class AdversaryState:
    """Bookkeeping for the current attack."""

    __slots__ = ("withheld", "branch", "target", "payload_block", "attack_tx",
                 "anchor_slot", "released")

    def __init__(self):
        self.withheld = 0
        self.released = 0
        self.reset()

    def reset(self) -> None:
        self.branch = 0
        self.target = -1
        self.payload_block = -1
        self.attack_tx = 0
        self.anchor_slot = -1


class Adversary:
    targets_considered = 4

    def __init__(self, me: ValidatorProfile, store: BlockStore, cfg: SimConfig,
                 oracle: RandomOracle):
        self.me = me
        self.store = store
        self.w = cfg.w
        self.strategy = cfg.adversary_strategy
        self.budget = cfg.exhaustive_budget
        self.hold_margin = cfg.hold_margin
        self.tie_break = cfg.tie_break
        self.oracle = oracle
        self.pub = DagView(store)
        self.s = AdversaryState()
        self.log: list[AttackEntry] = []
        self._pub_cache: tuple[int, int, int] = (-1, -1, 0)
        self.expansions = 0

    # -- inputs from the engine ------------------------------------------

    def observe(self, i: int) -> None:
        """An honest block became public."""
        self.pub.link(i)

    def withhold(self, i: int) -> None:
        s = self.s
        bit = 1 << i
        s.withheld |= bit
        s.branch |= bit
        b = self.store.blocks[i]
        if s.target >= 0 and s.payload_block < 0 and not b.payload.is_empty:
            s.payload_block = i

    # -- helpers ---------------------------------------------------------

    def _public_ledger(self, t: int) -> int:
        """Ledger of the public view at slot ``t`` (cached per slot and size)."""
        slot, size, led = self._pub_cache
        if slot == t and size == self.pub.size:
            return led
        st = self.store
        f, _ = frontier_idx(st, tips_idx(self.pub, t, self.w), t, self.w, self.tie_break)
        led = 0
        for x in f:
            led |= st.anc[x]
        self._pub_cache = (t, self.pub.size, led)
        return led

    def _public_frontier(self, t: int) -> list[int]:
        st = self.store
        f, _ = frontier_idx(st, tips_idx(self.pub, t, self.w), t, self.w, self.tie_break)
        return f

    def _branch_anc(self) -> int:
        anc = self.store.anc
        m = 0
        for i in bits(self.s.branch):
            m |= anc[i]
        return m

    def _target_candidates(self, t: int, k: int) -> list[int]:
        st = self.store
        lo = max(t - self.w, 1)
        cand = self.pub.members & st.range_mask(lo, t - 1) & ~st.contested & ~self._branch_anc()
        out = []
        order = bits_desc(cand) if st.ordered else sorted(bits(cand), key=st.keys.__getitem__,
                                                          reverse=True)
        for i in order:
            b = st.blocks[i]
            if b.payload.is_empty or b.validator == self.me.id:
                continue
            out.append(i)
            if len(out) >= k:
                break
        return out

    def _compatible(self, t: int, target: int, tx: int) -> int:
        """Window blocks a branch block against ``target`` may reference."""
        st = self.store
        s = self.s
        pool = (self.pub.members | s.branch) & st.range_mask(t - self.w, t - 1)
        if target < 0:
            return pool
        ck = st.blocks[target].payload.conflict_key
        bad = 0
        for other, m in st.key_tx.get(ck, {}).items():
            if other != tx:
                bad |= m
        anc = st.anc
        out = 0
        for i in bits(pool):
            if not anc[i] & bad:
                out |= 1 << i
        return out

    def _long_ref(self, t: int, target: int, tx: int) -> int | None:
        st = self.store
        s = self.s
        pool = (self.pub.members | s.branch) & st.range_mask(0, t - self.w - 1)
        bad = 0
        if target >= 0:
            ck = st.blocks[target].payload.conflict_key
            for other, m in st.key_tx.get(ck, {}).items():
                if other != tx:
                    bad |= m
        order = bits_desc(pool) if st.ordered else sorted(bits(pool), key=st.keys.__getitem__,
                                                          reverse=True)
        for i in order:
            if not st.anc[i] & bad:
                return i
        return None

    def _maximal(self, comp: int) -> list[int]:
        """Blocks of ``comp`` with no short child inside ``comp``."""
        kids = self.store.short_children
        return [i for i in bits(comp) if not any((comp >> c) & 1 for c in kids[i])]

    def _refs(self, t: int, target: int, tx: int) -> tuple[list[int], int | None]:
        refs = max_antichain_idx(self.store, self._maximal(self._compatible(t, target, tx)))
        if refs:
            return refs, None
        return [], self._long_ref(t, target, tx)

    def _gap_vs_public(self, a: int, t: int) -> int | None:
        """Smallest windowed weight gap of ``a`` over conflicting public frontier tips."""
        st = self.store
        anc = st.anc
        worst = None
        for x in self._public_frontier(t):
            if not masks_conflict(st, anc[a], anc[x]):
                continue
            if (anc[a] >> x) & 1 or (anc[x] >> a) & 1:
                continue
            c = cca_idx(st, a, x)
            g = weight_idx(st, anc[a], c, self.w, t) - weight_idx(st, anc[x], c, self.w, t)
            if worst is None or g < worst:
                worst = g
        return worst

    def _hypothetical_gap(self, refs: list[int], t: int) -> int:
        """Gap a block built now on ``refs`` would have against the public frontier."""
        st = self.store
        anc = st.anc
        ha = 0
        for r in refs:
            ha |= anc[r]
        own = sum(1 for r in refs if t - self.w <= st.slot[r] <= t - 1)
        worst = None
        for x in self._public_frontier(t):
            if (ha >> x) & 1:
                continue
            common = ha & anc[x]
            if not common:
                continue
            c = st.top(common)
            g = own + weight_idx(st, ha, c, self.w, t) - weight_idx(st, anc[x], c, self.w, t)
            if worst is None or g < worst:
                worst = g
        return own if worst is None else worst

    def project(self, release: int, t: int) -> int:
        """Public-ledger removal depth caused by releasing the bitset ``release`` at ``t``."""
        st = self.store
        v = self.pub.copy()
        for i in st.sort_idx(bits(release)):
            v.link(i)
        f, _ = frontier_idx(st, tips_idx(v, t, self.w), t, self.w, self.tie_break)
        new = 0
        for x in f:
            new |= st.anc[x]
        old = self._public_ledger(t)
        removed = old & ~new
        if not removed:
            return 0
        return ledger_loss(st, old, new, removed)[0]

    def _attack_tips(self) -> list[int]:
        s = self.s
        if s.payload_block < 0:
            return []
        anc = self.store.anc
        pb = s.payload_block
        return [i for i in bits_desc(s.branch) if (anc[i] >> pb) & 1]

    def _note(self, t: int, action: str, released: int = 0, depth: int = 0) -> None:
        self.log.append(AttackEntry(t, action, self.s.anchor_slot, released, depth))

    def _expire(self, t: int) -> None:
        s = self.s
        if s.anchor_slot >= 0 and s.anchor_slot < t - 2 * self.w:
            self._note(t, "abandon")
            s.reset()

    def _start(self, t: int, target: int) -> None:
        s = self.s
        s.target = target
        s.anchor_slot = self.store.slot[target]
        s.attack_tx = int(self.oracle.generator(ADVERSARY, t).integers(1, 1 << 63))
        self._note(t, "start")

    def _release(self, t: int, a: int) -> list[int]:
        st = self.store
        s = self.s
        rel = st.anc[a] & s.withheld
        depth = self.project(rel, t)
        order = st.sort_idx(bits(rel))
        for i in order:
            self.pub.link(i)
        s.withheld &= ~rel
        s.released += len(order)
        self._note(t, "release", len(order), depth)
        s.reset()
        return order

    # -- creation --------------------------------------------------------

    def build_private(self, t: int, y: float) -> Block | None:
        self._expire(t)
        s = self.s
        st = self.store
        if s.target < 0:
            cands = self._target_candidates(t, self.targets_considered
                                            if self.strategy == "exhaustive" else 1)
            if cands:
                target = cands[0]
                if self.strategy == "exhaustive" and len(cands) > 1:
                    target = self._pick_target(t, cands)
                self._start(t, target)
        payload = EMPTY
        if s.target >= 0 and s.payload_block < 0:
            payload = Payload.of(s.attack_tx, st.blocks[s.target].payload.conflict_key)
        refs, lr = self._refs(t, s.target, s.attack_tx)
        if not refs and lr is None:
            return None
        bl = st.blocks
        return new_block(t, self.me.id, [bl[r].id for r in refs],
                         None if lr is None else bl[lr].id, payload, y)

    def _pick_target(self, t: int, cands: list[int]) -> int:
        best, best_gap = cands[0], None
        for c in cands:
            self.expansions += 1
            tx = int(self.oracle.generator(ADVERSARY, t).integers(1, 1 << 63))
            refs = max_antichain_idx(self.store, self._maximal(self._compatible(t, c, tx)))
            g = self._hypothetical_gap(refs, t)
            if best_gap is None or g > best_gap:
                best, best_gap = c, g
        return best

    # -- release decisions -----------------------------------------------

    def act(self, t: int) -> list[list[int]]:
        if self.strategy == "exhaustive":
            return self.act_exhaustive(t)
        return self.act_heuristic(t)

    def act_heuristic(self, t: int) -> list[list[int]]:
        tips = self._attack_tips()
        if not tips:
            return []
        a = tips[0]
        g = self._gap_vs_public(a, t)
        if g is None or g <= 0:
            return []
        return [self._release(t, a)]

    def act_exhaustive(self, t: int) -> list[list[int]]:
        try:
            return self._search(t, self.budget)
        except BudgetExhausted:
            self._note(t, "fallback")
            return self.act_heuristic(t)

    def _search(self, t: int, budget: int) -> list[list[int]]:
        tips = self._attack_tips()
        if not tips:
            return []
        if budget <= 0:
            raise BudgetExhausted
        st = self.store
        s = self.s
        old = self._public_ledger(t)
        bound = (old >> s.target).bit_count() if st.ordered else old.bit_count()
        used = 0
        best, best_depth = -1, 0
        for a in tips:
            used += 1
            if used > budget:
                raise BudgetExhausted
            d = self.project(st.anc[a] & s.withheld, t)
            if d > best_depth:
                best, best_depth = a, d
                if d >= bound:
                    break
        self.expansions += used
        if best < 0:
            return []
        g = self._gap_vs_public(best, t)
        near_end = s.anchor_slot < t - 2 * self.w + self.hold_margin
        if g is not None and g >= self.hold_margin and not near_end:
            self._note(t, "hold", 0, best_depth)
            return []
        return [self._release(t, best)]


def attack_log_text(log: list[AttackEntry]) -> str:
    return "".join(e.line() + "\n" for e in log)
