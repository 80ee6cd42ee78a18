"""Release criteria, each at its stated scale and tolerance.

Every test prints one ``CRITERION n: PASS/FAIL | detail`` line; the lines are
repeated in the terminal summary.  The DAG runs used by criteria 6 and 7 are
shared through a module cache, so the whole file takes roughly a quarter hour
on one core.
"""
import dataclasses
import itertools
import random
import time

import numpy as np
import pytest

from conftest import record
from dagpos import dag as D
from dagpos import metrics as M
from dagpos import oracles as O
from dagpos.dag import BlockStore, DagView, NoCommonAncestor, frontier_idx, tips_idx
from dagpos.harness import compare_baseline
from dagpos.sim import SimConfig, World, export_trace_text, run_simulation

_cache: dict = {}


def big_runs():
    """200 DAG runs of 200 nodes x 2000 slots at defaults, plus matched Praos runs."""
    if "dag" not in _cache:
        base = SimConfig(n_honest=200, horizon_slots=2000)
        _cache["dag"] = [M.summarize(run_simulation(base.replace(seed=s))) for s in range(200)]
        praos = base.replace(variant="praos", f=0.05)
        _cache["praos"] = [M.summarize(run_simulation(praos.replace(seed=s)))
                           for s in range(200)]
    return _cache["dag"], _cache["praos"]


# -- 1: oracle suite --------------------------------------------------------


def test_c1_oracle_suite():
    t0 = time.time()
    bad = []
    for seed in range(1000):
        rng = random.Random(seed)
        g, w = O.random_dag(rng, rng.randint(2, 12))
        view, ids = O.to_view(g)
        inv = {v: k for k, v in ids.items()}
        tmax = max(g[x]["slot"] for x in g)
        for t in (tmax, tmax + 1, tmax + 2):
            if {inv[x] for x in D.tips_w(view, t, w)} != O.tips(g, t, w):
                bad.append(("tips", seed, t))
            front = O.frontier(g, t, w)
            if {inv[x] for x in D.preferred_frontier(view, t, w)} != front:
                bad.append(("frontier", seed, t))
            got = sorted((inv[x] for x in D.max_antichain(view, t, w)), key=lambda x: O.key(g, x))
            if got != O.max_antichain(g, O.window(g, t, w)):
                bad.append(("antichain", seed, t))
            if [inv[x] for x in D.linearize(view, ids["g"], t, w)] != O.linearize(g, "g", front):
                bad.append(("linearize", seed, t))
        names = O.topo_names(g)
        for i, j in itertools.combinations(names, 2):
            if O.comparable(g, i, j):
                continue
            try:
                c = inv[D.cca(view, ids[i], ids[j])]
            except NoCommonAncestor:
                if O.anc_star(g, i) & O.anc_star(g, j):
                    bad.append(("cca-missing", seed, i, j))
                continue
            if c != O.cca(g, i, j):
                bad.append(("cca", seed, i, j))
            for t in (None, tmax + 1):
                if D.subdag_weight(view, ids[i], ids[c], w, t) != O.subdag_weight(g, i, c, w, t):
                    bad.append(("weight", seed, i, j, t))
                if D.windowed_gap(view, ids[i], ids[j], w, t) != O.gap(g, i, j, w, t):
                    bad.append(("gap", seed, i, j, t))
                if D.histories_conflict(view, ids[i], ids[j]) != O.hist_conflict(g, i, j):
                    bad.append(("conflict", seed, i, j))
                elif D.histories_conflict(view, ids[i], ids[j]):
                    if inv[D.ctr(view, ids[i], ids[j], w, t)] != O.ctr(g, i, j, w, t):
                        bad.append(("ctr", seed, i, j, t))
    dt = time.time() - t0
    ok = record(1, not bad and dt < 60,
                f"1000 DAGs, {len(bad)} mismatches, {dt:.1f} s (limit 60 s)")
    assert ok, bad[:10]


# -- 2: Dilworth ------------------------------------------------------------


def test_c2_dilworth():
    t0 = time.time()
    bad = 0
    for seed in range(200):
        rng = random.Random(10_000 + seed)
        g, w = O.random_dag(rng, rng.randint(2, 10))
        view, ids = O.to_view(g)
        tmax = max(g[x]["slot"] for x in g)
        for t in (tmax, tmax + 1):
            width = len(D.max_antichain(view, t, w))
            cover = D.min_chain_cover(view, t, w)
            members = view.store.ids(D.window_members(view, t, w))
            covered = sorted(i for ch in cover for i in ch)
            brute_cover = O.min_chain_cover(g, O.window(g, t, w))
            brute_width = len(O.max_antichain(g, O.window(g, t, w)))
            if (width != brute_cover or width != brute_width or len(cover) != brute_cover
                    or covered != sorted(members)):
                bad += 1
    dt = time.time() - t0
    ok = record(2, bad == 0 and dt < 30,
                f"200 DAGs x 2 slots, width equals brute-force min chain cover in all but {bad}, {dt:.1f} s")
    assert ok


# -- 3: ideal tip boundedness -----------------------------------------------


def test_c3_ideal_tip_bound():
    bad = checks = 0
    for seed in range(20):
        cfg = SimConfig(n_honest=50, horizon_slots=200, variant="ideal",
                        delay_model="fixed_bound", delay_cap=0.0, adversary_stake=0.0,
                        f=0.5, seed=seed, record_ledgers=True)
        tr = run_simulation(cfg)
        st = tr.store
        by_slot: dict = {}
        for i in range(len(st)):
            by_slot.setdefault(st.slot[i], set()).add(i)
        last = by_slot[0]
        for s in range(1, cfg.horizon_slots + 1):
            last = by_slot.get(s, last)
            for j in range(cfg.n_honest):
                checks += 1
                if set(tr.frontier_at(j, s)) != last or tr.tips[s, j] != len(last):
                    bad += 1
    ok = record(3, bad == 0,
                f"{checks} (slot, node) checks, frontier equals the newest layer in all but {bad}")
    assert ok


# -- 4: common past ---------------------------------------------------------


def test_c4_dcp():
    passed = total = 0
    per_seed = []
    for seed in range(20):
        cfg = SimConfig(n_honest=50, horizon_slots=500, w=30, adversary_stake=0.3,
                        delay_cap=8.0, seed=seed, record_ledgers=True)
        assert cfg.delta_slots == 8
        tr = run_simulation(cfg)
        r = M.dcp_check(tr, 2 * cfg.delta_slots, pairs=200, seed=seed)
        passed += round(r.fraction * r.checked)
        total += r.checked
        per_seed.append(r.fraction)
    frac = passed / total
    ok = record(4, frac >= 0.95,
                f"k_D = 16, {total} sampled pairs, pooled pass fraction {frac:.3f} "
                f"(need 0.95), worst seed {min(per_seed):.3f}")
    assert ok


# -- 5: window necessity ----------------------------------------------------


def test_c5_window_necessity():
    pooled, means = {}, {}
    for mean in (15.0, 30.0, 60.0):
        cfg = SimConfig(n_honest=50, horizon_slots=500, w=30, adversary_stake=0.3, f=0.25,
                        delay_mean=mean, delay_cap=2 * mean)
        d = [run_simulation(cfg.replace(seed=s)).max_depth for s in range(50)]
        pooled[mean] = max(d)
        means[mean] = sum(d) / len(d)
    seq = [pooled[m] for m in (15.0, 30.0, 60.0)]
    mono = seq == sorted(seq)
    ratio = pooled[60.0] / max(pooled[15.0], 1)
    ok = record(5, mono and ratio >= 3,
                f"max depth over 50 seeds {seq} for 15/30/60 s, ratio {ratio:.2f} (need 3); "
                f"per-run means {[round(means[m], 1) for m in (15.0, 30.0, 60.0)]}")
    assert ok


# -- 6: exponential tail ----------------------------------------------------


def test_c6_exponential_tail():
    dag, _ = big_runs()
    rep = M.build_report(dag)
    fit = rep.fit
    ok = fit is not None and rep.fit_error is None and fit.gamma > 0 and fit.residual >= 0.8
    detail = (f"200 runs, gamma {fit.gamma:.4f}, R^2 {fit.residual:.3f}, A {fit.A:.3f}"
              if fit else f"no fit: {rep.fit_error}")
    record(6, ok, detail)
    assert ok


# -- 7: Praos comparison ----------------------------------------------------


def test_c7_praos_ratio():
    dag, praos = big_runs()
    row = compare_baseline(dag, praos, [10])[0]
    ok = row.ratio is not None and row.ratio >= 10 and (row.lower_bound or row.p_dag > 0)
    da = max(s.max_depth for s in dag)
    dp = max(s.max_depth for s in praos)
    record(7, ok,
           f"P_praos(10) {row.p_praos:.3f}, P_dag(10) {row.p_dag:.3f}, ratio {row.cell()} "
           f"(need 10); deepest DAG reorg {da}, deepest Praos reorg {dp}")
    assert ok


# -- 8: adversary ordering --------------------------------------------------


def test_c8_exhaustive_at_least_heuristic():
    h, e = [], []
    for seed in range(100):
        cfg = SimConfig(n_honest=50, horizon_slots=500, adversary_stake=0.3, seed=seed)
        h.append(run_simulation(cfg).max_depth)
        e.append(run_simulation(cfg.replace(adversary_strategy="exhaustive",
                                            exhaustive_budget=10_000)).max_depth)
    mh, me = np.mean(h), np.mean(e)
    ok = record(8, me >= mh, f"mean max depth exhaustive {me:.2f} vs heuristic {mh:.2f}, "
                             f"100 paired seeds")
    assert ok


# -- 9: calibration ---------------------------------------------------------


def test_c9_calibration_example():
    k = M.k_calibration(30, 1e-6, 1.8, 2.7)
    T = M.finality_time(k, 1.0)
    ok = record(9, k == 91 and T == 91.0, f"k = {k}, T = {T:g} s")
    assert ok


# -- 10: determinism --------------------------------------------------------


def test_c10_determinism():
    cfgs = [
        SimConfig(n_honest=40, horizon_slots=300, seed=11, record_ledgers=True),
        SimConfig(n_honest=40, horizon_slots=300, seed=12, variant="ideal",
                  adversary_stake=0.0, delay_model="fixed_bound", delay_cap=0.0),
        SimConfig(n_honest=40, horizon_slots=300, seed=13, variant="praos", f=0.05),
    ]
    same = [export_trace_text(run_simulation(c)) == export_trace_text(run_simulation(c))
            for c in cfgs]
    ok = record(10, all(same), f"base/ideal/praos exports byte-identical: {same}")
    assert ok


# -- 11: long-ref neutrality ------------------------------------------------


class _Snapshotting(World):
    def __init__(self, cfg, picks):
        super().__init__(cfg)
        self.picks = picks
        self.snaps = []

    def slot_end(self, s):
        super().slot_end(s)
        for j in self.picks.get(s, ()):
            node = self.nodes[j]
            self.snaps.append((s, node.view.copy(), list(node.frontier_list)))


def _strip_long(st: BlockStore) -> BlockStore:
    bare = BlockStore(st.blocks[st.genesis])
    for i in range(1, len(st)):
        bare.add(dataclasses.replace(st.blocks[i], long_ref=None))
    return bare


def test_c11_long_ref_neutrality():
    snaps_total = 0
    bad = long_refs = detached = 0
    per_run = 100
    for seed in range(5):
        cfg = SimConfig(n_honest=50, horizon_slots=500, seed=100 + seed)
        rng = np.random.default_rng(seed)
        picks: dict = {}
        for s, j in zip(rng.integers(cfg.w + 1, cfg.horizon_slots + 1, per_run),
                        rng.integers(0, cfg.n_honest, per_run)):
            picks.setdefault(int(s), []).append(int(j))
        world = _Snapshotting(cfg, picks)
        world.run()
        st = world.store
        long_refs += sum(1 for x in st.long if x >= 0)
        bare = _strip_long(st)
        assert [b.id for b in bare.blocks] == [b.id for b in st.blocks]
        g = 1 << bare.genesis
        for s, view, front in world.snaps:
            snaps_total += 1
            v2 = DagView(bare)
            for i in bare.sort_idx(D.bits(view.members)):
                if i != bare.genesis:
                    v2.link(i)
            tips1 = tips_idx(view, s, cfg.w)
            tips2 = tips_idx(v2, s, cfg.w)
            detached += any(not bare.anc[x] & g for x in tips2)
            f1, _ = frontier_idx(st, tips1, s, cfg.w, cfg.tie_break)
            f2, _ = frontier_idx(bare, tips2, s, cfg.w, cfg.tie_break)
            # with an empty window the node keeps its last frontier
            if sorted(f1) != sorted(f2) or (tips1 and sorted(f1) != sorted(front)):
                bad += 1
    ok = record(11, bad == 0 and snaps_total == 500,
                f"{snaps_total} snapshots over runs with {long_refs} long refs, "
                f"{bad} frontier changes, {detached} snapshots with tips cut off from genesis")
    assert ok


# -- 12: fit recovery -------------------------------------------------------


def test_c12_fit_recovery():
    good = 0
    depths = np.arange(1, 400)
    for k in range(1000):
        rng = np.random.default_rng(k)
        A = rng.uniform(0.5, 2.0)
        gamma = rng.uniform(0.1, 1.0)
        p = A * np.exp(-gamma * depths)
        counts = rng.multinomial(10_000, p / p.sum())
        surv = M.estimate_preorg(np.repeat(depths, counts).tolist(), 10_000)
        fit = M.fit_exponential(surv.table())
        good += abs(fit.gamma - gamma) <= 0.1 * gamma
    ok = record(12, good >= 900, f"gamma within 10% in {good}/1000 trials (need 900)")
    assert ok
