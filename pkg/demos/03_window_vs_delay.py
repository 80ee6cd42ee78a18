"""How network delay interacts with the 30-slot reference window.

Each row raises the mean broadcast delay (the cap is twice the mean, so the
worst-case delay in slots is 2x the mean).  Past the window, honest blocks can
arrive too late to be short-referenced at all.  Runs are short; pass a seed
count as the first argument for more.
"""
import sys

import numpy as np

from dagpos.sim import SimConfig, run_simulation

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 6
print(" mean  worst-case  regime     mean max depth   max tips")
for mean in (2.0, 7.5, 15.0, 30.0, 60.0):
    cfg = SimConfig(n_honest=50, horizon_slots=300, w=30, delay_mean=mean, delay_cap=2 * mean)
    runs = [run_simulation(cfg.replace(seed=s)) for s in range(seeds)]
    depth = np.mean([r.max_depth for r in runs])
    tips = max(int(r.tips.max()) for r in runs)
    regime = "w >= delay" if cfg.w >= cfg.delta_slots else "w < delay"
    print(f"{mean:5.1f}  {cfg.delta_slots:6d} slots  {regime:10s} {depth:10.1f}  {tips:10d}")
