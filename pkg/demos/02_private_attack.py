"""Watch a withholding adversary work against a small network.

The adversary holds 30% of the stake, picks a recent honest payment as its
target, and builds a private branch that spends the same coin.  The branch is
published once it outweighs the honest side.  The log shows each attack from
start to release (or abandonment) and how deep the public ledger was cut.
"""
import sys

from dagpos.sim import SimConfig, run_simulation

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
cfg = SimConfig(n_honest=50, horizon_slots=400, adversary_stake=0.3, seed=seed)
tr = run_simulation(cfg)

print(f"seed {seed}: {len(tr.store) - 1} blocks, honest rate {tr.rate_honest:.3f}/slot, "
      f"adversary rate {tr.rate_adversary:.3f}/slot")
print("\nslot  action   target-slot  released  depth")
for e in tr.attack_log:
    if e.action in ("start", "hold"):
        continue
    print(f"{e.slot:4d}  {e.action:8s} {e.anchor_slot:6d}      {e.released_count:5d}   "
          f"{max(e.achieved_depth, 0):4d}")

hits = sorted({r.depth for r in tr.reorgs})
print(f"\nreorg depths seen by honest nodes: {hits}")
print(f"deepest: {tr.max_depth}")

print("\nsame seeds, heuristic vs exhaustive release search:")
for s in range(seed, seed + 5):
    base = cfg.replace(seed=s)
    h = run_simulation(base).max_depth
    x = run_simulation(base.replace(adversary_strategy="exhaustive")).max_depth
    print(f"  seed {s}: heuristic {h:3d}   exhaustive {x:3d}")
