"""From raw reorg counts to a confirmation depth.

Pools a few runs, fits an exponential to the per-block survival curve, and
reads off the depth at which the fitted reorg probability drops below each
target.  The closed-form calibration for the same window is printed next to
it for comparison.
"""
import sys

from dagpos import metrics as M
from dagpos.harness import histogram_csv
from dagpos.sim import SimConfig, run_simulation

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 15
cfg = SimConfig(n_honest=50, horizon_slots=600, adversary_stake=0.3)
runs = [M.summarize(run_simulation(cfg.replace(seed=s))) for s in range(seeds)]
rep = M.build_report(runs, (1e-3, 1e-6), cfg.w)

if rep.fit is None:
    print("no usable fit:", rep.fit_error)
else:
    f = rep.fit
    print(f"fit: P(depth >= d) ~ {f.A:.3f} * exp(-{f.gamma:.3f} d), R^2 {f.residual:.3f}")
for eps in (1e-3, 1e-6):
    fitted = rep.d_star.get(eps, "n/a")
    print(f"eps {eps:g}: fitted depth {fitted}, empirical {rep.d_star_empirical[eps]}, "
          f"calibrated k {rep.k_calibrated[eps]} ({M.finality_time(rep.k_calibrated[eps]):g} s)")
print()
rows = histogram_csv(rep).splitlines()
print(rows[0])
print("\n".join(r for r in rows[1:] if r.split(",")[1] != "0"))
