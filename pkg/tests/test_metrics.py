import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dagpos import metrics as M
from dagpos import oracles as O
from dagpos.sim import ReorgRecord, SimConfig, run_simulation


# -- ledger diffs -----------------------------------------------------------


def test_identical_ledgers_no_reorg():
    assert M.track_ledger(["G", "A", "B"], ["G", "A", "B"]) is None


def test_prefix_diff_depth():
    r = M.track_ledger(["G", "A", "B"], ["G", "A", "C", "D"], slot=4, node=2)
    assert r == ReorgRecord(4, 2, 1, 2)


def test_late_insertion_is_not_a_reorg():
    assert M.track_ledger(["G", "A", "C"], ["G", "A", "B", "C"]) is None


@pytest.fixture(scope="module")
def recorded():
    return run_simulation(SimConfig(n_honest=25, horizon_slots=250, delay_mean=4.0,
                                    delay_cap=16.0, seed=11, record_ledgers=True))


def test_replay_matches_online(recorded):
    assert recorded.reorgs
    assert M.replay_reorgs(recorded) == recorded.reorgs


def test_online_max_equals_brute_force(recorded):
    tr = recorded
    best = 0
    for j, hist in enumerate(tr.ledgers):
        for (_, a), (_, b) in zip(hist, hist[1:]):
            prev = sorted((i for i in range(len(tr.store)) if (a >> i) & 1),
                          key=tr.store.keys.__getitem__)
            gone = [p for p, x in enumerate(prev) if not (b >> x) & 1]
            if gone:
                best = max(best, len(prev) - gone[0])
    assert best == tr.max_depth


# -- survival ---------------------------------------------------------------


def test_no_reorgs_zero_survival():
    s = M.estimate_preorg([], 10)
    assert s(1) == 0.0 and s(5) == 0.0


def test_survival_counts():
    s = M.estimate_preorg([3, 5], 10)
    assert s(4) == pytest.approx(0.1)
    assert s(2) == pytest.approx(0.2)


@given(st.lists(st.integers(1, 40), max_size=60), st.integers(60, 200))
def test_survival_non_increasing(depths, total):
    s = M.estimate_preorg(depths, total)
    vals = [s(d) for d in range(1, 42)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# -- fit and settlement depth -----------------------------------------------


def test_exact_exponential():
    pts = [(d, math.exp(-0.5 * d)) for d in range(1, 12)]
    f = M.fit_exponential(pts)
    assert f.A == pytest.approx(1.0, abs=1e-9)
    assert f.gamma == pytest.approx(0.5, abs=1e-9)
    assert f.residual == pytest.approx(1.0)


def test_sparse_tail_bins_weigh_less():
    # one stray count far out in the tail drags the plain fit much more
    pts = [(d, math.exp(-0.5 * d)) for d in range(1, 10)] + [(30, 1e-4)]
    plain = M.fit_exponential(pts, weighted=False).gamma
    assert abs(M.fit_exponential(pts).gamma - 0.5) < abs(plain - 0.5)


def test_flat_tail_rejected():
    with pytest.raises(M.NonDecayingTail):
        M.fit_exponential([(1, 0.2), (2, 0.2), (3, 0.2)])


def test_single_point_rejected():
    with pytest.raises(M.InsufficientData):
        M.fit_exponential([(1, 0.2), (2, 0.0)])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.1, 1.0), st.integers(0, 2**31))
def test_fit_agrees_with_closed_form(A, gamma, seed):
    rng = np.random.default_rng(seed)
    pts = [(d, A * math.exp(-gamma * d) * math.exp(rng.normal(0, 0.1))) for d in range(1, 15)]
    for weighted in (True, False):
        f = M.fit_exponential(pts, weighted=weighted)
        a2, g2 = O.log_linear_fit(pts, weighted=weighted)
        assert f.gamma == pytest.approx(g2, rel=1e-9)
        assert f.A == pytest.approx(a2, rel=1e-9)


def test_settlement_depth_example():
    f = M.SettlementFit(1.0, 0.5, 1.0)
    want = next(d for d in range(100) if math.exp(-0.5 * d) <= 1e-3)
    assert M.settlement_depth(f, 1e-3) == want == 14


def test_settlement_depth_large_epsilon():
    assert M.settlement_depth(M.SettlementFit(0.5, 0.5, 1.0), 0.6) == 0


def test_empirical_depth_when_nothing_reorgs():
    assert M.settlement_depth_empirical(lambda d: 0.0, 1e-6) == 1


def test_k_calibration_example():
    k = M.k_calibration(30, 1e-6, 1.8, 2.7)
    assert k == 91
    assert M.finality_time(k, 1.0) == 91.0


def test_k_without_tail_term():
    assert M.k_calibration(30, 1.0, 1.8, 2.7) == 54


@given(st.integers(1, 500), st.floats(1e-12, 0.5))
def test_k_grows_with_window(w, eps):
    assert M.k_calibration(2 * w, eps) > M.k_calibration(w, eps)


# -- estimators on a recorded run --------------------------------------------


def test_tb_report(recorded):
    r = M.tb_estimator(recorded)
    assert r.max_tips >= 1
    assert len(r.per_slot_p50) == recorded.config.horizon_slots


def test_dcp_trivially_passes_at_full_trim(recorded):
    assert M.dcp_check(recorded, recorded.config.horizon_slots + 1, pairs=50).passed


def test_dg_dq_ranges(recorded):
    r = M.dg_dq_estimators(recorded, 10)
    assert 0.0 <= r.dg_fraction <= 1.0 and 0.0 <= r.dq_fraction <= 1.0


def test_liveness_delays_non_negative(recorded):
    r = M.liveness_estimator(recorded, 2)
    assert r.delays and min(r.delays) >= 0


def test_ideal_liveness_is_immediate():
    tr = run_simulation(SimConfig(n_honest=10, horizon_slots=60, variant="ideal",
                                  delay_model="fixed_bound", delay_cap=0.0,
                                  adversary_stake=0.0, record_ledgers=True, f=0.3))
    r = M.liveness_estimator(tr, 1)
    # a block is one step deep once the next non-empty slot references it
    assert max(r.delays) <= 1 + max(
        b - a for a, b in zip(sorted(set(tr.store.slot)), sorted(set(tr.store.slot))[1:]))


# -- summaries and reports --------------------------------------------------


def test_summary_round_trip(recorded):
    s = M.summarize(recorded)
    assert M.RunSummary.from_json(s.to_json()) == s


def test_report_monotone_and_merge_order_free():
    runs = [M.summarize(run_simulation(SimConfig(n_honest=15, horizon_slots=150, seed=s)))
            for s in range(4)]
    a = M.build_report(runs, (1e-3,), 30)
    b = M.build_report(runs[::-1], (1e-3,), 30)
    assert a.to_json() == b.to_json()
    ps = [p for _, p in a.run_phat]
    assert all(x >= y for x, y in zip(ps, ps[1:]))
    assert a.k_calibrated[1e-3] == M.k_calibration(30, 1e-3)


def test_histogram_csv_header():
    runs = [M.summarize(run_simulation(SimConfig(n_honest=10, horizon_slots=60, seed=1)))]
    text = M.histogram_csv(M.build_report(runs))
    assert text.splitlines()[0] == "depth,count,freq,phat"
