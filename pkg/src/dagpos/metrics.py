"""Reorg measurement, tail fitting and the protocol-property estimators.

Two reorg views are reported side by side:

* per run: the deepest reorg any honest node saw (``max_depth``), giving the
  survival ``P(max depth >= d)`` over runs;
* per block: for each honest block the deepest position at which it was ever
  removed from some honest ledger, giving the fraction of honest blocks
  reorganized at depth ``>= d``.

The exponential tail fit uses the per-block view by default; see
:func:`build_report`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .dag import bits
from .sim import ReorgRecord, RunTrace


class InsufficientData(ValueError):
    pass


class NonDecayingTail(ValueError):
    pass


@dataclass(frozen=True)
class SettlementFit:
    A: float
    gamma: float
    residual: float          # R^2 of the log-linear fit


# ---------------------------------------------------------------------------
# reorg tracking


def track_ledger(prev: Sequence, cur: Sequence, slot: int = 0, node: int = 0,
                 key: Callable | None = None) -> ReorgRecord | None:
    """Reorg between two consecutive linearized ledgers of one node.

    A reorg happens when a block of ``prev`` is missing from ``cur``; its depth
    is the number of ``prev`` positions from the first missing block on.
    Blocks merely inserted into ``cur`` (late arrivals) are not reorgs.
    """
    keep = set(cur)
    for pos, x in enumerate(prev):
        if x not in keep:
            if key is None:
                app = len(cur) - pos
            else:
                kx = key(x)
                app = sum(1 for c in cur if key(c) >= kx)
            return ReorgRecord(slot, node, len(prev) - pos, app)
    return None


def linearized(trace: RunTrace, mask: int) -> list[int]:
    """Anchored (genesis) linearization of a ledger bitset: key order."""
    return trace.store.sort_idx(bits(mask))


def replay_reorgs(trace: RunTrace) -> list[ReorgRecord]:
    """Offline re-diff of the recorded per-slot ledgers (needs ``record_ledgers``)."""
    if trace.ledgers is None:
        raise ValueError("trace was run without record_ledgers")
    out = []
    keys = trace.store.keys
    for j, hist in enumerate(trace.ledgers):
        prev = linearized(trace, hist[0][1])
        for slot, mask in hist[1:]:
            cur = linearized(trace, mask)
            r = track_ledger(prev, cur, slot, j, key=keys.__getitem__)
            if r is not None:
                out.append(r)
            prev = cur
    out.sort(key=lambda r: (r.slot, r.node))
    return out


class Survival:
    """Empirical survival ``d -> P(depth >= d)`` over a fixed number of observations."""

    def __init__(self, depths: Iterable[int], total: int):
        if total <= 0:
            raise ValueError("total_observations must be positive")
        self.total = total
        ds = sorted(int(d) for d in depths)
        self._sorted = np.array(ds, dtype=np.int64)
        self.max_depth = ds[-1] if ds else 0

    def count(self, d: int) -> int:
        return int(len(self._sorted) - np.searchsorted(self._sorted, d, side="left"))

    def __call__(self, d: int) -> float:
        return self.count(d) / self.total

    def table(self, upto: int | None = None) -> list[tuple[int, float]]:
        upto = self.max_depth if upto is None else upto
        return [(d, self(d)) for d in range(1, upto + 1)]


def estimate_preorg(records: Iterable, total_observations: int) -> Survival:
    """P(d) = share of observations whose max reorg depth is at least d."""
    depths = [r.depth if isinstance(r, ReorgRecord) else r for r in records]
    return Survival(depths, total_observations)


# ---------------------------------------------------------------------------
# tail fit and finality


def fit_exponential(points: Iterable[tuple[float, float]], weighted: bool = True) -> SettlementFit:
    """Least-squares line through ``(d, ln freq)`` over the nonzero bins.

    A frequency estimated from ``n`` observations has ``Var(ln p) ~ 1 / (n p)``,
    so by default each bin is weighted by its frequency; sparse tail bins then
    stop dominating the slope.  ``weighted=False`` gives the plain fit.
    """
    pts = [(float(d), float(p)) for d, p in points if p > 0]
    if len(pts) < 2 or len({d for d, _ in pts}) < 2:
        raise InsufficientData("need at least two depths with nonzero frequency")
    x = np.array([d for d, _ in pts])
    p = np.array([q for _, q in pts])
    y = np.log(p)
    wt = p if weighted else np.ones_like(p)
    slope, intercept = np.polyfit(x, y, 1, w=np.sqrt(wt))
    if slope >= -1e-12:      # flat within rounding counts as flat
        raise NonDecayingTail(f"log-frequency slope {slope:.4g} is not negative")
    pred = intercept + slope * x
    ybar = float((wt * y).sum() / wt.sum())
    ss_res = float((wt * (y - pred) ** 2).sum())
    ss_tot = float((wt * (y - ybar) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return SettlementFit(float(math.exp(intercept)), float(-slope), r2)


def settlement_depth(fit: SettlementFit, epsilon: float) -> int:
    """Smallest d >= 0 with A exp(-gamma d) <= epsilon."""
    if fit.gamma <= 0:
        raise NonDecayingTail("gamma must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    d = max(0, math.ceil(math.log(fit.A / epsilon) / fit.gamma))
    # guard the float boundary in both directions
    while d > 0 and fit.A * math.exp(-fit.gamma * (d - 1)) <= epsilon:
        d -= 1
    while fit.A * math.exp(-fit.gamma * d) > epsilon:
        d += 1
    return d


def settlement_depth_empirical(phat: Callable[[int], float], epsilon: float,
                               max_depth: int = 10_000) -> int:
    """Smallest d >= 1 with phat(d) <= epsilon."""
    for d in range(1, max_depth + 1):
        if phat(d) <= epsilon:
            return d
    raise NonDecayingTail("empirical tail never drops below epsilon")


def k_calibration(w: int, epsilon: float, C1: float = 1.8, C2: float = 2.7) -> int:
    """Confirmation depth C1 w + C2 ln(1/eps), rounded to the nearest integer."""
    if C1 <= 0 or C2 <= 0:
        raise ValueError("C1 and C2 must be positive")
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return math.floor(C1 * w + C2 * math.log(1.0 / epsilon) + 0.5)


def finality_time(k: int, slot_duration: float = 1.0) -> float:
    return k * slot_duration


# ---------------------------------------------------------------------------
# protocol-property estimators


@dataclass
class TBReport:
    max_tips: int
    p99: float
    per_slot_p50: list
    per_slot_p99: list
    beta_ideal: float
    beta_base: float
    within_ideal: bool
    within_base: bool


def tb_estimator(trace: RunTrace, c: float = 4.0) -> TBReport:
    tips = trace.tips[1:] if len(trace.tips) > 1 else trace.tips
    lam = trace.rate_honest + trace.rate_adversary
    delta = max(trace.config.delta_slots, 1)
    if tips.size == 0:
        return TBReport(1, 1.0, [], [], c * lam, c * lam * delta, True, True)
    p99 = float(np.percentile(tips, 99))
    bi, bb = c * lam, c * lam * delta
    return TBReport(int(tips.max()), p99,
                    np.percentile(tips, 50, axis=1).tolist(),
                    np.percentile(tips, 99, axis=1).tolist(),
                    bi, bb, p99 <= max(bi, 1.0), p99 <= max(bb, 1.0))


def _closure(trace: RunTrace, frontier: Iterable[int]) -> int:
    anc = trace.store.anc
    m = 0
    for x in frontier:
        m |= anc[x]
    return m


@dataclass
class DCPResult:
    passed: bool
    fraction: float
    checked: int


def dcp_check(trace: RunTrace, k_D: int, pairs: int = 400, seed: int = 0) -> DCPResult:
    """Sampled common-prefix check on trimmed pasts of two honest views."""
    if trace.frontiers is None:
        raise ValueError("trace was run without record_ledgers")
    n = trace.n_honest
    H = trace.config.horizon_slots
    if n < 2:
        raise ValueError("need at least two honest nodes")
    st = trace.store
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(pairs):
        p, q = rng.integers(n, size=2)
        t1, t2 = sorted(rng.integers(1, H + 1, size=2))
        a = _closure(trace, trace.frontier_at(int(p), int(t1))) & st.range_mask(0, t1 - k_D)
        b = _closure(trace, trace.frontier_at(int(q), int(t2))) & st.range_mask(0, t2 - k_D)
        ok += (a & ~b) == 0
    frac = ok / pairs if pairs else 1.0
    return DCPResult(ok == pairs, frac, pairs)


@dataclass
class DGDQ:
    dg_fraction: float
    dg_rate: float
    dq_fraction: float


def dg_dq_estimators(trace: RunTrace, ell: int) -> DGDQ:
    """Growth and quality estimates over consecutive intervals of ``ell`` slots."""
    H = trace.config.horizon_slots
    if not 1 <= ell <= max(H, 1):
        raise ValueError("interval must lie in [1, horizon]")
    if trace.frontiers is None:
        raise ValueError("trace was run without record_ledgers")
    st = trace.store
    delta = trace.config.delta_slots
    honest_made = included = 0
    rates = []
    new_h = new_all = 0
    prev_union = 0
    for a in range(1, H + 1, ell):
        b = min(a + ell - 1, H)
        made = [i for i in bits(st.range_mask(a, b)) if trace.honest_block(i)]
        t = min(b + delta, H)
        union = 0
        for j in range(trace.n_honest):
            union |= _closure(trace, trace.frontier_at(j, t))
        inc = sum(1 for i in made if (union >> i) & 1)
        if made:
            honest_made += len(made)
            included += inc
        rates.append(inc / ell)
        end_union = 0
        for j in range(trace.n_honest):
            end_union |= _closure(trace, trace.frontier_at(j, b))
        fresh = end_union & ~prev_union
        for i in bits(fresh):
            new_all += 1
            new_h += trace.honest_block(i) or i == st.genesis
        prev_union |= end_union
    return DGDQ(included / honest_made if honest_made else 1.0,
                min(rates) if rates else 0.0,
                new_h / new_all if new_all else 1.0)


@dataclass
class LivenessReport:
    k: int
    delays: list
    censored: int
    quantiles: dict = field(default_factory=dict)


def k_deep_mask(trace: RunTrace, frontier: Iterable[int], k: int) -> int:
    """Blocks at least ``k`` short-reference steps below some frontier tip."""
    st = trace.store
    layer = 0
    for f in frontier:
        layer |= 1 << f
    for _ in range(k):
        nxt = 0
        for x in bits(layer):
            nxt |= st.smask[x]
        layer = nxt
        if not layer:
            return 0
    out = 0
    for x in bits(layer):
        out |= st.sanc[x]
    return out


def liveness_estimator(trace: RunTrace, k: int | None = None) -> LivenessReport:
    """Slots until each honest block is k-deep under every honest frontier."""
    if trace.frontiers is None:
        raise ValueError("trace was run without record_ledgers")
    k = trace.config.k_live if k is None else k
    st = trace.store
    honest = [i for i in range(len(st.blocks)) if trace.honest_block(i)]
    if k == 0:
        return LivenessReport(0, [0] * len(honest), 0, {"p50": 0.0, "p99": 0.0, "max": 0.0})
    first: dict[int, int] = {}
    everywhere = (1 << len(st.blocks)) - 1
    for j in range(trace.n_honest):
        seen = 0
        for slot, fr in trace.frontiers[j]:
            m = k_deep_mask(trace, fr, k) & ~seen
            seen |= m
            for i in bits(m):
                if first.get(i, -1) < slot:
                    first[i] = slot
        everywhere &= seen
    delays, censored = [], 0
    for i in honest:
        if not (everywhere >> i) & 1:
            censored += 1
        else:
            delays.append(first[i] - st.slot[i])
    q = {}
    if delays:
        arr = np.array(delays)
        q = {"p50": float(np.percentile(arr, 50)), "p99": float(np.percentile(arr, 99)),
             "max": float(arr.max())}
    return LivenessReport(k, delays, censored, q)


# ---------------------------------------------------------------------------
# per-run summaries and merged reports


@dataclass
class RunSummary:
    seed: int
    variant: str
    horizon: int
    max_depth: int
    n_blocks: int
    n_honest_blocks: int
    reorg_events: dict          # depth -> number of reorg records
    block_depths: dict          # depth -> number of honest blocks whose deepest removal was that
    tips_max: int
    tips_p99: float
    tips_mean: float
    rate_honest: float
    rate_adversary: float
    releases: int

    def to_json(self) -> str:
        d = asdict(self)
        d["reorg_events"] = {str(k): v for k, v in sorted(self.reorg_events.items())}
        d["block_depths"] = {str(k): v for k, v in sorted(self.block_depths.items())}
        return json.dumps(d, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        d = json.loads(text)
        d["reorg_events"] = {int(k): v for k, v in d["reorg_events"].items()}
        d["block_depths"] = {int(k): v for k, v in d["block_depths"].items()}
        return cls(**d)


def summarize(trace: RunTrace) -> RunSummary:
    cfg = trace.config
    ev: dict[int, int] = {}
    for r in trace.reorgs:
        ev[r.depth] = ev.get(r.depth, 0) + 1
    if trace.chain is not None:
        ch = trace.chain
        n_blocks = len(ch)
        is_h = [0 <= v < trace.n_honest for v in ch.validator]
    else:
        n_blocks = len(trace.store)
        is_h = [trace.honest_block(i) for i in range(n_blocks)]
    bd: dict[int, int] = {}
    for i, d in trace.block_reorg_depth.items():
        if is_h[i]:
            bd[d] = bd.get(d, 0) + 1
    tips = trace.tips[1:] if len(trace.tips) > 1 else trace.tips
    return RunSummary(
        seed=cfg.seed, variant=cfg.variant, horizon=cfg.horizon_slots,
        max_depth=trace.max_depth, n_blocks=n_blocks, n_honest_blocks=sum(is_h),
        reorg_events=ev, block_depths=bd,
        tips_max=int(tips.max()) if tips.size else 1,
        tips_p99=float(np.percentile(tips, 99)) if tips.size else 1.0,
        tips_mean=float(tips.mean()) if tips.size else 1.0,
        rate_honest=trace.rate_honest, rate_adversary=trace.rate_adversary,
        releases=sum(1 for e in trace.attack_log if e.action == "release"))


@dataclass
class MetricsReport:
    runs: int
    run_hist: dict              # max depth -> runs
    run_phat: list              # (d, P(max depth >= d))
    block_phat: list            # (d, share of honest blocks reorganized at depth >= d)
    event_hist: dict            # depth -> reorg records
    tips_max: int
    tips_p99: float
    fit: SettlementFit | None
    fit_error: str | None
    d_star: dict                # epsilon -> predictive depth
    d_star_empirical: dict      # epsilon -> empirical depth (per-block view)
    k_calibrated: dict          # epsilon -> k
    slot_duration: float = 1.0

    def phat(self, d: int) -> float:
        for dd, p in self.run_phat:
            if dd == d:
                return p
        return 0.0 if d > 0 else 1.0

    def to_json(self) -> str:
        d = asdict(self)
        d["run_hist"] = {str(k): v for k, v in sorted(self.run_hist.items())}
        d["event_hist"] = {str(k): v for k, v in sorted(self.event_hist.items())}
        d["d_star"] = {repr(k): v for k, v in self.d_star.items()}
        d["d_star_empirical"] = {repr(k): v for k, v in self.d_star_empirical.items()}
        d["k_calibrated"] = {repr(k): v for k, v in self.k_calibrated.items()}
        d["final_time"] = {repr(k): finality_time(v, self.slot_duration)
                           for k, v in self.k_calibrated.items()}
        return json.dumps(d, sort_keys=True, indent=1)


def merge_counts(dicts: Iterable[dict]) -> dict:
    out: dict = {}
    for d in dicts:
        for k, v in d.items():
            out[k] = out.get(k, 0) + v
    return dict(sorted(out.items()))


def block_survival(summaries: Sequence[RunSummary]) -> list[tuple[int, float]]:
    hist = merge_counts(s.block_depths for s in summaries)
    total = sum(s.n_honest_blocks for s in summaries)
    if not hist or total == 0:
        return []
    top = max(hist)
    out, tail = [], 0
    for d in range(top, 0, -1):
        tail += hist.get(d, 0)
        out.append((d, tail / total))
    return out[::-1]


def build_report(summaries: Sequence[RunSummary], epsilons: Sequence[float] = (1e-3, 1e-6),
                 w: int = 30, C1: float = 1.8, C2: float = 2.7,
                 slot_duration: float = 1.0) -> MetricsReport:
    n = len(summaries)
    if n == 0:
        raise InsufficientData("no runs")
    surv = estimate_preorg([s.max_depth for s in summaries if s.max_depth > 0], n)
    run_hist = merge_counts({s.max_depth: 1} for s in summaries)
    bsurv = block_survival(summaries)
    fit, err = None, None
    try:
        fit = fit_exponential(bsurv)
    except (InsufficientData, NonDecayingTail) as exc:
        err = f"{type(exc).__name__}: {exc}"
    bmap = dict(bsurv)
    d_star = {e: settlement_depth(fit, e) for e in epsilons} if fit else {}
    d_emp = {e: settlement_depth_empirical(lambda d: bmap.get(d, 0.0), e) for e in epsilons}
    return MetricsReport(
        runs=n, run_hist=run_hist, run_phat=surv.table(), block_phat=bsurv,
        event_hist=merge_counts(s.reorg_events for s in summaries),
        tips_max=max(s.tips_max for s in summaries),
        tips_p99=max(s.tips_p99 for s in summaries),
        fit=fit, fit_error=err, d_star=d_star, d_star_empirical=d_emp,
        k_calibrated={e: k_calibration(w, e, C1, C2) for e in epsilons},
        slot_duration=slot_duration)


# ---------------------------------------------------------------------------
# writers


def _csv(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def histogram_csv(report: MetricsReport) -> str:
    n = report.runs
    top = max(report.run_hist) if report.run_hist else 0
    phat = dict(report.run_phat)
    rows = []
    for d in range(1, top + 1):
        c = report.run_hist.get(d, 0)
        rows.append((d, c, repr(c / n), repr(phat.get(d, 0.0))))
    return _csv(rows, ("depth", "count", "freq", "phat"))


def tips_csv(trace: RunTrace) -> str:
    t = trace.tips
    rows = ((s, j, int(t[s, j])) for s in range(1, t.shape[0]) for j in range(t.shape[1]))
    return _csv(rows, ("slot", "node", "tips"))
