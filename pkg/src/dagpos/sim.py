"""Deterministic discrete-event simulator for the DAG protocol variants.

Time is continuous (seconds); slot ``s`` spans ``[s * tau, (s + 1) * tau)``.
Per slot the engine runs, in order at equal timestamps:

    deliveries (time <= boundary) -> slot-end snapshot of slot s-1
    -> slot start of s (eligibility, creation, broadcast) -> adversary wake

All honest views share one :class:`~dagpos.dag.BlockStore`.  Blocks created in
a slot are registered in ``(slot, y, id)`` order, so store indices follow the
ledger order and reorg depths can be read off with bit arithmetic.
"""
from __future__ import annotations

import dataclasses
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .dag import BlockStore, bits
from .protocol import (DELAY, STAKE, EligibilityParams, NodeState, PayloadSampler,
                       RandomOracle, ValidatorProfile, win_probability)

VARIANTS = ("ideal", "base", "praos")
STRATEGIES = ("none", "heuristic", "exhaustive")
DELAY_MODELS = ("fixed_bound", "exp_capped")


class ConfigInvalid(ValueError):
    pass


@dataclass
class SimConfig:
    n_honest: int = 1000
    adversary_stake: float = 0.30
    stake_pareto_shape: float = 1.16
    f: float = 0.25
    phi_fn: str = "praos_style"
    w: int = 30
    slot_duration: float = 1.0
    delay_mean: float = 7.5
    delay_cap: float = 30.0
    delay_model: str = "exp_capped"
    horizon_slots: int = 2000
    seed: int = 0
    variant: str = "base"
    adversary_strategy: str = "heuristic"
    p_conflict: float = 0.0
    epsilon_targets: tuple = (1e-3, 1e-6)
    tie_break: str = "larger"
    exhaustive_budget: int = 10_000
    hold_margin: int = 3
    praos_max_deficit: int = 3
    record_ledgers: bool = False
    k_live: int = 1
    calib_c1: float = 1.8
    calib_c2: float = 2.7

    def validate(self) -> "SimConfig":
        def bad(msg):
            raise ConfigInvalid(msg)

        if not isinstance(self.n_honest, int) or self.n_honest < 1:
            bad("n_honest must be a positive integer")
        if not 0.0 <= self.adversary_stake < 1.0:
            bad("adversary_stake must lie in [0, 1)")
        if not isinstance(self.w, int) or self.w < 1:
            bad("w must be an integer >= 1")
        if not isinstance(self.horizon_slots, int) or self.horizon_slots < 0:
            bad("horizon_slots must be a non-negative integer")
        if 0 < self.horizon_slots < self.w:
            bad("horizon_slots must be 0 or at least w")
        if self.f <= 0:
            bad("f must be positive")
        if self.slot_duration <= 0:
            bad("slot_duration must be positive")
        if self.delay_mean <= 0 or self.delay_cap < 0:
            bad("delay_mean must be positive and delay_cap non-negative")
        if self.stake_pareto_shape <= 0:
            bad("stake_pareto_shape must be positive")
        if self.variant not in VARIANTS:
            bad(f"variant must be one of {VARIANTS}")
        if self.adversary_strategy not in STRATEGIES:
            bad(f"adversary_strategy must be one of {STRATEGIES}")
        if self.delay_model not in DELAY_MODELS:
            bad(f"delay_model must be one of {DELAY_MODELS}")
        if self.phi_fn not in ("praos_style", "linear"):
            bad("phi_fn must be praos_style or linear")
        if self.tie_break not in ("larger", "smaller"):
            bad("tie_break must be larger or smaller")
        if not 0.0 <= self.p_conflict <= 1.0:
            bad("p_conflict must lie in [0, 1]")
        if any(not 0.0 < e < 1.0 for e in self.epsilon_targets):
            bad("epsilon_targets must lie in (0, 1)")
        if self.exhaustive_budget < 0 or self.k_live < 0:
            bad("exhaustive_budget and k_live must be non-negative")
        return self

    @property
    def delta_slots(self) -> int:
        return math.ceil(self.delay_cap / self.slot_duration)

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["epsilon_targets"] = list(self.epsilon_targets)
        return d


@dataclass(frozen=True)
class ReorgRecord:
    slot: int
    node: int
    depth: int
    replaced_by: int


@dataclass
class AttackEntry:
    slot: int
    action: str
    anchor_slot: int
    released_count: int
    projected_depth: int
    achieved_depth: int = -1

    def line(self) -> str:
        return (f"{self.slot} {self.action} {self.anchor_slot} {self.released_count} "
                f"{self.projected_depth} {self.achieved_depth}")


@dataclass
class RunTrace:
    config: SimConfig
    store: BlockStore
    n_honest: int
    tips: np.ndarray
    reorgs: list = field(default_factory=list)
    attack_log: list = field(default_factory=list)
    ledgers: list | None = None
    frontiers: list | None = None
    block_reorg_depth: dict = field(default_factory=dict)
    rate_honest: float = 0.0
    rate_adversary: float = 0.0
    events: int = 0
    chain: object = None

    @property
    def max_depth(self) -> int:
        return max((r.depth for r in self.reorgs), default=0)

    def honest_block(self, i: int) -> bool:
        return 0 <= self.store.blocks[i].validator < self.n_honest

    def ledger_at(self, node: int, slot: int) -> int:
        hist = self.ledgers[node]
        k = _last_at(hist, slot)
        return hist[k][1]

    def frontier_at(self, node: int, slot: int) -> tuple:
        hist = self.frontiers[node]
        k = _last_at(hist, slot)
        return hist[k][1]


def _last_at(hist: list, slot: int) -> int:
    lo, hi = 0, len(hist) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if hist[mid][0] <= slot:
            lo = mid
        else:
            hi = mid - 1
    return lo


# ---------------------------------------------------------------------------
# plumbing shared with the chain baseline


def make_validators(cfg: SimConfig, oracle: RandomOracle) -> list[ValidatorProfile]:
    """Pareto honest stakes normalized to 1 - alpha, plus one adversary holding alpha."""
    g = oracle.generator(STAKE)
    raw = g.pareto(cfg.stake_pareto_shape, cfg.n_honest) + 1.0
    honest = raw / raw.sum() * (1.0 - cfg.adversary_stake)
    out = [ValidatorProfile(v, float(s), True) for v, s in enumerate(honest)]
    if cfg.adversary_stake > 0:
        out.append(ValidatorProfile(cfg.n_honest, cfg.adversary_stake, False))
    return out


def sample_delays(cfg: SimConfig, oracle: RandomOracle, msg_id: int, n: int) -> np.ndarray:
    g = oracle.generator(DELAY, msg_id)
    if cfg.delay_model == "fixed_bound":
        if cfg.delay_cap == 0:
            return np.zeros(n)
        return g.uniform(0.0, cfg.delay_cap, n)
    return np.minimum(g.exponential(cfg.delay_mean, n), cfg.delay_cap)


def sample_delay(cfg: SimConfig, oracle: RandomOracle, msg_id: int, recipient: int) -> float:
    return float(sample_delays(cfg, oracle, msg_id, recipient + 1)[recipient])


DELIVER, SLOT_END, SLOT_START, WAKE = 0, 1, 2, 3


@dataclass(order=True, frozen=True)
class SimEvent:
    time: float
    rank: int
    seq: int
    kind: int = field(compare=False)
    a: int = field(compare=False, default=0)
    b: int = field(compare=False, default=0)


class EventQueue:
    """Min-heap of events ordered by (time, rank, seq)."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.popped = 0

    def push(self, time: float, kind: int, a: int = 0, b: int = 0) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, kind, self._seq, a, b))

    def pop(self) -> SimEvent:
        t, k, s, a, b = heapq.heappop(self._heap)
        self.popped += 1
        return SimEvent(t, k, s, k, a, b)

    def __len__(self) -> int:
        return len(self._heap)


def schedule_slots(q: EventQueue, horizon: int, tau: float, wake: bool) -> None:
    for s in range(1, horizon + 1):
        q.push(s * tau, SLOT_START, s)
        q.push((s + 1) * tau, SLOT_END, s)
        if wake:
            q.push(s * tau, WAKE, s)


# ---------------------------------------------------------------------------
# DAG world


class World:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.oracle = RandomOracle(cfg.seed)
        self.profiles = make_validators(cfg, self.oracle)
        mode = "ideal_public_coin" if cfg.variant == "ideal" else "base_vrf"
        self.params = EligibilityParams(cfg.f, mode, cfg.phi_fn)
        self.p = np.array([win_probability(v, self.params) for v in self.profiles])
        self.thresholds = {v.id: float(self.p[k]) for k, v in enumerate(self.profiles)}
        self.store = BlockStore()
        verdicts: dict = {}
        self.fc_cache: dict = {}
        n = cfg.n_honest
        self.nodes = [NodeState(self.profiles[v], cfg.w, cfg.variant, self.store,
                                threshold=self.thresholds.__getitem__,
                                tie_break=cfg.tie_break, verdicts=verdicts,
                                fc_cache=self.fc_cache)
                      for v in range(n)]
        self.adv = None
        if cfg.adversary_stake > 0 and cfg.adversary_strategy != "none":
            from .adversary import Adversary
            self.adv = Adversary(self.profiles[n], self.store, cfg, self.oracle)
        self.sampler = PayloadSampler(self.oracle, cfg.p_conflict)
        self.q = EventQueue()
        self.trace = RunTrace(cfg, self.store, n,
                              np.zeros((cfg.horizon_slots + 1, n), dtype=np.int32))
        self.trace.tips[0, :] = 1
        self.trace.rate_honest = float(self.p[:n].sum())
        self.trace.rate_adversary = float(self.p[n:].sum())
        if cfg.record_ledgers:
            g = self.store.genesis
            self.trace.ledgers = [[(0, self.store.anc[g])] for _ in range(n)]
            self.trace.frontiers = [[(0, (g,))] for _ in range(n)]

    def broadcast(self, i: int, origin: int, time: float) -> None:
        n = self.cfg.n_honest
        d = sample_delays(self.cfg, self.oracle, self.store.blocks[i].id, n)
        push = self.q.push
        for j in range(n):
            if j != origin:
                push(time + float(d[j]), DELIVER, j, i)

    def slot_start(self, s: int, time: float) -> None:
        cfg = self.cfg
        n = cfg.n_honest
        labels = self.oracle.labels(s, len(self.profiles))
        elig = np.flatnonzero(labels < self.p)
        made = []
        for v in elig.tolist():
            y = float(labels[v])
            if v < n:
                node = self.nodes[v]
                b = node.compose(s, y, self.sampler.draw(v, s))
                made.append((b.key, b, v))
            elif self.adv is not None:
                b = self.adv.build_private(s, y)
                if b is not None:
                    made.append((b.key, b, v))
        made.sort(key=lambda e: e[0])
        for _, b, v in made:
            i = self.store.add(b)
            if v < n:
                self.nodes[v].adopt_own(b)
                self.broadcast(i, v, time)
                if self.adv is not None:
                    self.adv.observe(i)
            else:
                self.adv.withhold(i)

    def slot_end(self, s: int) -> None:
        tr = self.trace
        row = tr.tips[s]
        rec = self.cfg.record_ledgers
        st = self.store
        self.fc_cache.clear()
        for j, node in enumerate(self.nodes):
            r = node.update(s)
            row[j] = len(node.live)
            if r is not None:
                depth, app, removed, old = r
                tr.reorgs.append(ReorgRecord(s, j, depth, app))
                bd = tr.block_reorg_depth
                for b in bits(removed):
                    d = (old >> b).bit_count() if st.ordered else depth
                    if d > bd.get(b, 0):
                        bd[b] = d
            if rec:
                led = tr.ledgers[j]
                if led[-1][1] != node.ledger:
                    led.append((s, node.ledger))
                fr = tr.frontiers[j]
                cur = tuple(node.frontier_list)
                if fr[-1][1] != cur:
                    fr.append((s, cur))

    def run(self) -> RunTrace:
        cfg = self.cfg
        q = self.q
        schedule_slots(q, cfg.horizon_slots, cfg.slot_duration, self.adv is not None)
        nodes = self.nodes
        heap = q._heap
        pop = heapq.heappop
        while heap:
            t, kind, _, a, b = pop(heap)
            q.popped += 1
            if kind == DELIVER:
                nodes[a].deliver(b)
            elif kind == SLOT_END:
                self.slot_end(a)
            elif kind == SLOT_START:
                self.slot_start(a, t)
            else:
                for group in self.adv.act(a):
                    for i in group:
                        self.broadcast(i, -1, t)
        self.trace.events = q.popped
        if self.adv is not None:
            self.trace.attack_log = self.adv.log
            fill_achieved(self.trace)
        return self.trace


def fill_achieved(trace: RunTrace) -> None:
    """Achieved depth of a release = deepest honest reorg until the next release."""
    rel = [e for e in trace.attack_log if e.action == "release"]
    if not rel:
        return
    stops = [e.slot for e in rel[1:]] + [trace.config.horizon_slots + 1]
    recs = sorted(trace.reorgs, key=lambda r: r.slot)
    for e, stop in zip(rel, stops):
        e.achieved_depth = max((r.depth for r in recs if e.slot <= r.slot < stop), default=0)


def run_simulation(config: SimConfig) -> RunTrace:
    config.validate()
    if config.variant == "praos":
        from .praos import run_praos
        return run_praos(config)
    return World(config).run()


# ---------------------------------------------------------------------------
# export


def _hex(x: int) -> str:
    return f"{x:016x}"


def export_trace(trace: RunTrace, out: IO[str]) -> None:
    """JSON-lines export: block, snapshot, reorg and attack records."""
    cfg = trace.config
    w = out.write
    w(json.dumps({"kind": "config", **cfg.to_dict()}, sort_keys=True) + "\n")
    if trace.chain is not None:
        trace.chain.export(w)
    else:
        st = trace.store
        for b in st.blocks:
            w(json.dumps({
                "kind": "block", "id": _hex(b.id), "slot": b.slot, "validator": b.validator,
                "y": repr(b.y), "short_refs": [_hex(r) for r in b.short_refs],
                "long_ref": None if b.long_ref is None else _hex(b.long_ref),
                "conflict_key": None if b.payload.is_empty else b.payload.conflict_key,
                "tx_id": None if b.payload.is_empty else b.payload.tx_id,
            }, sort_keys=True) + "\n")
    n = trace.n_honest
    for s in range(1, cfg.horizon_slots + 1):
        for j in range(n):
            rec = {"kind": "snapshot", "slot": s, "node": j, "tips": int(trace.tips[s, j])}
            if trace.ledgers is not None:
                led = trace.ledger_at(j, s)
                rec["ledger_len"] = led.bit_count()
                rec["ledger_head"] = _hex(trace.store.blocks[led.bit_length() - 1].id) \
                    if trace.store.ordered else None
                rec["frontier"] = [_hex(trace.store.blocks[x].id) for x in trace.frontier_at(j, s)]
            w(json.dumps(rec, sort_keys=True) + "\n")
    for r in trace.reorgs:
        w(json.dumps({"kind": "reorg", **dataclasses.asdict(r)}, sort_keys=True) + "\n")
    for e in trace.attack_log:
        w(json.dumps({"kind": "attack", "line": e.line()}, sort_keys=True) + "\n")


def export_trace_text(trace: RunTrace) -> str:
    import io
    buf = io.StringIO()
    export_trace(trace, buf)
    return buf.getvalue()


def iter_slots(trace: RunTrace) -> Iterable[int]:
    return range(1, trace.config.horizon_slots + 1)
