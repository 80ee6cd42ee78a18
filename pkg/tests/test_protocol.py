import pytest

from dagpos import dag as D
from dagpos import protocol as P
from dagpos.dag import EMPTY, BlockStore, DagView, Payload, new_block
from dagpos.protocol import (EligibilityParams, NodeState, PayloadSampler, RandomOracle,
                             ValidatorProfile)


def node(w=30, variant="base", store=None, vid=0, threshold=None):
    return NodeState(ValidatorProfile(vid, 0.1), w, variant, store or BlockStore(),
                     threshold=threshold)


def g_of(n):
    return n.view.genesis


# -- eligibility ------------------------------------------------------------


def test_linear_full_stake():
    v = ValidatorProfile(0, 1.0)
    assert P.win_probability(v, EligibilityParams(0.25, "base_vrf", "linear")) == 0.25


def test_praos_style_full_stake():
    v = ValidatorProfile(0, 1.0)
    assert P.win_probability(v, EligibilityParams(0.25)) == pytest.approx(0.25)


def test_eligibility_deterministic():
    v = ValidatorProfile(7, 0.3)
    prm = EligibilityParams(0.25)
    a = P.eligibility(v, 11, prm, RandomOracle(5))
    b = P.eligibility(v, 11, prm, RandomOracle(5))
    assert a == b
    assert 0.0 <= a[1] < 1.0


def test_labels_independent_of_population_size():
    o = RandomOracle(3)
    long = o.labels(4, 50).copy()
    assert RandomOracle(3).labels(4, 10).tolist() == long[:10].tolist()


# -- payloads ---------------------------------------------------------------


def test_no_conflicts_at_zero_rate():
    s = PayloadSampler(RandomOracle(1), 0.0)
    ps = [s.draw(v, slot) for slot in range(1, 30) for v in range(5)]
    assert len({p.conflict_key for p in ps}) == len(ps)


def test_forced_conflict_at_rate_one():
    s = PayloadSampler(RandomOracle(1), 1.0)
    first = s.draw(0, 1)
    second = s.draw(1, 1)
    assert first.conflicts_with(second)


def test_payload_stream_deterministic():
    a = PayloadSampler(RandomOracle(9), 0.3)
    b = PayloadSampler(RandomOracle(9), 0.3)
    assert [a.draw(v, 2) for v in range(20)] == [b.draw(v, 2) for v in range(20)]


# -- creation ---------------------------------------------------------------


def test_ineligible_slot_creates_nothing():
    n = node()
    prm = EligibilityParams(0.0)
    assert P.create_block_base(n, 1, None, RandomOracle(0), prm) is None
    assert P.create_block_ideal(n, 1, None, RandomOracle(0), prm) is None


def test_first_block_refs_genesis():
    n = node()
    prm = EligibilityParams(1.0, "ideal_public_coin")
    b = P.create_block_base(n, 1, None, RandomOracle(0), prm)
    assert b.short_refs == (g_of(n),)
    assert b.long_ref is None


def test_ideal_refs_cover_both_tips():
    n = node(variant="ideal")
    g = g_of(n)
    a = new_block(1, 1, [g], y=0.3)
    b = new_block(1, 2, [g], y=0.7)
    c = new_block(2, 3, [a.id, b.id], y=0.5)
    d = new_block(2, 4, [b.id], y=0.6)
    for x in (a, b, c, d):
        assert n.receive(x)
    out = n.compose(3, 0.5, EMPTY)
    assert {c.id, d.id} <= set(out.short_refs)


def test_conflicting_payload_dropped():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g], payload=Payload.of(1, 42))
    assert n.receive(a)
    n.update(1)
    out = n.compose(2, 0.5, Payload.of(2, 42))
    assert out.payload == EMPTY


def test_empty_window_uses_long_ref_only():
    n = node(w=3)
    g = g_of(n)
    a = new_block(1, 1, [g])
    assert n.receive(a)
    out = n.compose(10, 0.5, EMPTY)
    assert out.short_refs == ()
    assert out.long_ref == a.id


def test_no_long_ref_when_everything_reachable():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g])
    assert n.receive(a)
    n.update(1)
    out = n.compose(2, 0.5, EMPTY)
    assert out.long_ref is None


# -- long-ref selection -----------------------------------------------------


def test_long_ref_none_when_all_reachable():
    v = DagView()
    a = new_block(1, 0, [v.genesis])
    D.insert_block(v, a)
    b = new_block(40, 0, [], long_ref=a.id)
    D.insert_block(v, b)
    assert P.select_long_ref(v, 41, 30, [b.id]) is None


def test_long_ref_picks_orphan():
    v = DagView()
    g = v.genesis
    x = new_block(5, 0, [g])
    D.insert_block(v, x)
    r = new_block(40, 1, [], long_ref=g)
    D.insert_block(v, r)
    assert P.select_long_ref(v, 41, 30, [r.id]) == x.id


def test_long_ref_prefers_newest():
    v = DagView()
    g = v.genesis
    x5 = new_block(5, 0, [g])
    x9 = new_block(9, 1, [g])
    D.insert_block(v, x5)
    D.insert_block(v, x9)
    assert P.select_long_ref(v, 41, 30, []) == x9.id


# -- reception --------------------------------------------------------------


def test_duplicate_is_noop():
    n = node()
    a = new_block(1, 1, [g_of(n)])
    assert n.receive(a).status == P.ACCEPTED
    assert n.receive(a).status == P.DUPLICATE


def test_missing_parent_deferred_then_accepted():
    n = node()
    a = new_block(1, 1, [g_of(n)])
    b = new_block(2, 2, [a.id])
    assert n.receive(b).status == P.DEFERRED
    assert n.receive(a).status == P.ACCEPTED
    assert b.id in n.view


def test_frontier_recomputed_on_accept():
    n = node()
    a = new_block(1, 1, [g_of(n)])
    n.receive(a)
    assert P.fork_choice_update(n, 1) == {a.id}


def test_two_long_refs_rejected():
    n = node(w=3)
    g = g_of(n)
    a = new_block(1, 1, [g])
    n.receive(a)
    b = new_block(10, 2, [g], long_ref=a.id)
    assert n.receive(b).reason == P.TOO_MANY_LONG_REFS


def test_same_slot_ref_rejected():
    n = node()
    a = new_block(1, 1, [g_of(n)])
    n.receive(a)
    b = new_block(1, 2, [a.id])
    assert n.receive(b).reason == P.NON_POSITIVE_DISTANCE


def test_comparable_short_refs_rejected():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g])
    n.receive(a)
    b = new_block(2, 2, [a.id, g])
    assert n.receive(b).reason == P.NOT_ANTICHAIN


def test_auth_and_threshold_checked_first():
    n = node(threshold=lambda v: 0.5)
    g = g_of(n)
    forged = new_block(1, 1, [g], y=0.1, auth_valid=False)
    assert n.receive(forged).reason == P.AUTH_INVALID
    greedy = new_block(1, 1, [g], y=0.9)
    assert n.receive(greedy).reason == P.ABOVE_THRESHOLD


def test_payload_conflict_rejected():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g], payload=Payload.of(1, 3))
    n.receive(a)
    b = new_block(2, 2, [a.id], payload=Payload.of(2, 3))
    assert n.receive(b).reason == P.PAYLOAD_CONFLICT


def test_long_ref_may_be_comparable_with_short_refs():
    n = node(w=3)
    g = g_of(n)
    a = new_block(1, 1, [g])
    n.receive(a)
    b = new_block(8, 2, [], long_ref=a.id)
    n.receive(b)
    c = new_block(9, 3, [b.id], long_ref=a.id)
    assert n.receive(c)


# -- fork choice ------------------------------------------------------------


def test_single_tip_frontier():
    n = node()
    a = new_block(1, 1, [g_of(n)])
    n.receive(a)
    assert P.fork_choice_update(n, 2) == {a.id}


def test_heavier_conflicting_tip_survives():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g], y=0.3)
    b = new_block(1, 2, [g], y=0.7)
    c = new_block(2, 3, [a.id, b.id], y=0.5, payload=Payload.of(1, 9))
    d = new_block(2, 4, [b.id], y=0.6, payload=Payload.of(2, 9))
    for x in (a, b, c, d):
        n.receive(x)
    assert P.fork_choice_update(n, 3) == {c.id}


def test_non_conflicting_tips_both_kept():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g], y=0.3, payload=Payload.of(1, 1))
    b = new_block(1, 2, [g], y=0.7, payload=Payload.of(2, 2))
    n.receive(a)
    n.receive(b)
    assert P.fork_choice_update(n, 2) == {a.id, b.id}


# -- ledger bookkeeping -----------------------------------------------------


def test_aged_out_tip_is_not_a_reorg():
    n = node(w=3)
    g = g_of(n)
    a = new_block(1, 1, [g], y=0.2)
    b = new_block(1, 2, [g], y=0.4)
    n.receive(a)
    n.receive(b)
    n.update(1)
    c = new_block(2, 3, [a.id], y=0.3)
    n.receive(c)
    assert n.update(5) is None
    st = n.store
    assert (n.ledger >> st.index[b.id]) & 1


def test_conflict_loss_reports_depth():
    n = node()
    g = g_of(n)
    a = new_block(1, 1, [g], y=0.3, payload=Payload.of(1, 9))
    n.receive(a)
    assert n.update(1) is None
    x = new_block(1, 5, [g], y=0.9, payload=Payload.of(2, 9))
    y = new_block(2, 6, [x.id], y=0.5)
    n.receive(x)
    n.receive(y)
    depth, app, removed, old = n.update(2)
    assert depth == 1 and app == 2
    assert removed == 1 << n.store.index[a.id]


def test_honest_blocks_pass_honest_reception():
    from dagpos.sim import SimConfig, World
    w = World(SimConfig(n_honest=8, horizon_slots=60, delay_mean=2.0, delay_cap=6.0,
                        adversary_stake=0.0, seed=4))
    w.run()
    st = w.store
    fresh = NodeState(ValidatorProfile(99, 0.0), 30, "base", BlockStore(),
                      threshold=w.thresholds.__getitem__)
    for i in st.sort_idx(range(1, len(st))):
        assert fresh.receive(st.blocks[i]), st.blocks[i]


def test_no_honest_equivocation():
    from dagpos.sim import SimConfig, run_simulation
    tr = run_simulation(SimConfig(n_honest=20, horizon_slots=150, seed=2))
    seen = set()
    for b in tr.store.blocks[1:]:
        if b.validator < tr.n_honest:
            assert (b.validator, b.slot) not in seen
            seen.add((b.validator, b.slot))
