"""Single-leader longest-chain baseline run on the same engine and delay model.

Every eligible validator extends its current best tip; nodes switch chains only
on a strictly longer one (ties keep the current chain).  The withholding
adversary mines a private fork from the public tip and publishes it once it is
strictly longer than the public chain and would remove at least one honest
block; ``exhaustive`` additionally keeps a lead of two or more hidden and only
publishes when the honest chain closes in to one block.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .protocol import EligibilityParams, RandomOracle, win_probability
from .sim import (DELIVER, SLOT_END, SLOT_START, AttackEntry, EventQueue, ReorgRecord,
                  RunTrace, SimConfig, fill_achieved, make_validators, sample_delays,
                  schedule_slots)
from .dag import EMPTY, block_digest


def matched_rate(f_dag: float, expected_parallelism: float) -> float:
    """Chain production factor giving the same block-time as a DAG with the given parallelism."""
    if expected_parallelism < 1:
        raise ValueError("expected_parallelism must be >= 1")
    return f_dag / expected_parallelism


class ChainStore:
    """Blocks of every chain in one run: parent pointers plus heights."""

    def __init__(self):
        self.parent = [-1]
        self.height = [0]
        self.slot = [0]
        self.y = [0.0]
        self.validator = [-1]
        self.ids = [block_digest(0, -1, (), None, EMPTY, 0.0)]

    def __len__(self) -> int:
        return len(self.parent)

    def add(self, parent: int, slot: int, validator: int, y: float) -> int:
        i = len(self.parent)
        self.parent.append(parent)
        self.height.append(self.height[parent] + 1)
        self.slot.append(slot)
        self.y.append(y)
        self.validator.append(validator)
        self.ids.append(block_digest(slot, validator, (self.ids[parent],), None, EMPTY, y))
        return i

    def lca(self, a: int, b: int) -> int:
        h, p = self.height, self.parent
        while h[a] > h[b]:
            a = p[a]
        while h[b] > h[a]:
            b = p[b]
        while a != b:
            a, b = p[a], p[b]
        return a

    def path(self, tip: int) -> list[int]:
        out = []
        while tip >= 0:
            out.append(tip)
            tip = self.parent[tip]
        return out[::-1]

    def export(self, write) -> None:
        for i in range(len(self.parent)):
            write(json.dumps({
                "kind": "block", "id": f"{self.ids[i]:016x}", "slot": self.slot[i],
                "validator": self.validator[i], "y": repr(self.y[i]),
                "parent": None if self.parent[i] < 0 else f"{self.ids[self.parent[i]]:016x}",
            }, sort_keys=True) + "\n")


@dataclass
class ChainState:
    """One node's chain view: known blocks, best tip and deferred children."""

    known: set = field(default_factory=lambda: {0})
    best: int = 0
    waiting: dict = field(default_factory=dict)
    prev: int = 0

    def ledger(self, chain: ChainStore) -> list[int]:
        return chain.path(self.best)


def praos_receive(node: ChainState, chain: ChainStore, i: int) -> str:
    """Deliver block ``i``; returns accepted / deferred / duplicate."""
    if i in node.known:
        return "duplicate"
    p = chain.parent[i]
    if p not in node.known:
        node.waiting.setdefault(p, []).append(i)
        return "deferred"
    todo = [i]
    h = chain.height
    while todo:
        x = todo.pop()
        node.known.add(x)
        if h[x] > h[node.best]:
            node.best = x
        todo.extend(node.waiting.pop(x, ()))
    return "accepted"


def praos_create(node: ChainState, chain: ChainStore, slot: int, validator: int, y: float) -> int:
    i = chain.add(node.best, slot, validator, y)
    node.known.add(i)
    node.best = i
    return i


class ChainAdversary:
    """Private-fork withholding attacker against the longest-chain rule."""

    def __init__(self, chain: ChainStore, cfg: SimConfig, oracle: RandomOracle, me: int):
        self.chain = chain
        self.me = me
        self.oracle = oracle
        self.max_deficit = cfg.praos_max_deficit
        self.patient = cfg.adversary_strategy == "exhaustive"
        self.pub_best = 0
        self.priv: list[int] = []
        self.fork = -1
        self.log: list[AttackEntry] = []

    def observe(self, i: int) -> None:
        if self.chain.height[i] > self.chain.height[self.pub_best]:
            self.pub_best = i

    def build(self, slot: int, y: float) -> int:
        ch = self.chain
        if not self.priv:
            self.fork = self.pub_best
            self.log.append(AttackEntry(slot, "start", ch.slot[self.fork], 0, 0))
        parent = self.priv[-1] if self.priv else self.fork
        i = ch.add(parent, slot, self.me, y)
        self.priv.append(i)
        return i

    def act(self, slot: int) -> list[int]:
        if not self.priv:
            return []
        ch = self.chain
        h = ch.height
        tip = self.priv[-1]
        lead = h[tip] - h[self.pub_best]
        lost = h[self.pub_best] - h[ch.lca(tip, self.pub_best)]
        if lead > 0 and lost > 0 and (not self.patient or lead == 1):
            rel = self.priv
            self.log.append(AttackEntry(slot, "release", ch.slot[self.fork], len(rel), lost))
            self.priv = []
            self.pub_best = tip
            return rel
        if -lead > self.max_deficit:
            self.log.append(AttackEntry(slot, "abandon", ch.slot[self.fork], 0, 0))
            self.priv = []
        return []


class ChainWorld:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.oracle = RandomOracle(cfg.seed)
        self.profiles = make_validators(cfg, self.oracle)
        params = EligibilityParams(cfg.f, "base_vrf", cfg.phi_fn)
        self.p = np.array([win_probability(v, params) for v in self.profiles])
        self.chain = ChainStore()
        n = cfg.n_honest
        self.nodes = [ChainState() for _ in range(n)]
        self.adv = None
        if cfg.adversary_stake > 0 and cfg.adversary_strategy != "none":
            self.adv = ChainAdversary(self.chain, cfg, self.oracle, n)
        self.q = EventQueue()
        self.trace = RunTrace(cfg, None, n, np.zeros((cfg.horizon_slots + 1, n), dtype=np.int32))
        self.trace.tips[0, :] = 1
        self.trace.chain = self.chain
        self.trace.rate_honest = float(self.p[:n].sum())
        self.trace.rate_adversary = float(self.p[n:].sum())
        if cfg.record_ledgers:
            self.trace.ledgers = [[(0, 0)] for _ in range(n)]

    def broadcast(self, i: int, origin: int, time: float) -> None:
        n = self.cfg.n_honest
        d = sample_delays(self.cfg, self.oracle, self.chain.ids[i], n)
        for j in range(n):
            if j != origin:
                self.q.push(time + float(d[j]), DELIVER, j, i)

    def slot_start(self, s: int, time: float) -> None:
        n = self.cfg.n_honest
        labels = self.oracle.labels(s, len(self.profiles))
        elig = np.flatnonzero(labels < self.p)
        ch = self.chain
        made = []
        for v in sorted(elig.tolist(), key=lambda v: labels[v]):
            y = float(labels[v])
            if v < n:
                made.append((v, praos_create(self.nodes[v], ch, s, v, y)))
            elif self.adv is not None:
                self.adv.build(s, y)
        for v, i in made:
            self.broadcast(i, v, time)
            if self.adv is not None:
                self.adv.observe(i)

    def slot_end(self, s: int) -> None:
        ch = self.chain
        tr = self.trace
        h = ch.height
        row = tr.tips[s]
        for j, node in enumerate(self.nodes):
            row[j] = 1
            if node.best == node.prev:
                continue
            old = node.prev
            c = ch.lca(old, node.best)
            lost = h[old] - h[c]
            if lost > 0:
                tr.reorgs.append(ReorgRecord(s, j, lost, h[node.best] - h[c]))
                x = old
                while x != c:
                    d = h[old] - h[x] + 1
                    if d > tr.block_reorg_depth.get(x, 0):
                        tr.block_reorg_depth[x] = d
                    x = ch.parent[x]
            node.prev = node.best
            if tr.ledgers is not None:
                tr.ledgers[j].append((s, node.best))

    def run(self) -> RunTrace:
        cfg = self.cfg
        schedule_slots(self.q, cfg.horizon_slots, cfg.slot_duration, self.adv is not None)
        heap = self.q._heap
        nodes = self.nodes
        ch = self.chain
        while heap:
            t, kind, _, a, b = heapq.heappop(heap)
            self.q.popped += 1
            if kind == DELIVER:
                praos_receive(nodes[a], ch, b)
            elif kind == SLOT_END:
                self.slot_end(a)
            elif kind == SLOT_START:
                self.slot_start(a, t)
            else:
                for i in self.adv.act(a):
                    self.broadcast(i, -1, t)
        tr = self.trace
        tr.events = self.q.popped
        if self.adv is not None:
            tr.attack_log = self.adv.log
            fill_achieved(tr)
        return tr


def run_praos(cfg: SimConfig) -> RunTrace:
    return ChainWorld(cfg).run()
