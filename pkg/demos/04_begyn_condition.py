"""Uniform convergence of the mixed second difference fails on grid-aligned points.

For fixed t the normalized mixed difference converges to the fBm value, but
on the points t = m h it stays off by an amount that does not shrink with h.
A plot-ready CSV of both tracks is written next to this script.
"""

# %%
import csv
from pathlib import Path

from orey.conditions import begyn_3e, begyn_3e_bifbm
from orey.kernels import CovarianceModel

rep = begyn_3e(CovarianceModel.sfbm(0.7))
print(f"candidate limit {rep.limit:.6f}")

# %% fixed t: residual falls like h^(4 - 2H)
for t, rows in rep.fixed.items():
    h, _, res = rows[-1]
    print(f"t={t}: residual {res:.2e} at h={h:.1e}, fitted rate {rep.fixed_rate[t]:.2f}")

# %% grid-aligned t = m h: residual is frozen at a nonzero constant
for m, rows in rep.aligned.items():
    print(f"m={m}: residual {rows[-1][2]:+.6f}  closed form {rep.aligned_closed[m]:+.6f}")
print("verdict:", rep.verdict.value)

# %% bifractional Brownian motion: the same effect, absent when K = 1
for K in (0.5, 1.0):
    b = begyn_3e_bifbm(0.6, K)
    print(f"K={K}: direct {b.direct_limit:+.6f}  closed form {b.derived:+.6f}")

# %%
out = Path(__file__).with_name("begyn_tracks.csv")
with open(out, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["track", "key", "h", "D", "residual"])
    for t, rows in rep.fixed.items():
        w.writerows(["fixed", t, *r] for r in rows)
    for m, rows in rep.aligned.items():
        w.writerows(["aligned", m, *r] for r in rows)
print("wrote", out)
