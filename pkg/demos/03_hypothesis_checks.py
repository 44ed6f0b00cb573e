"""Check the CLT hypotheses for subfractional Brownian motion using exact expectations only."""

# %%
import json

from orey.cli import dumps
from orey.conditions import check_bias, check_fbm_gap, verify
from orey.kernels import CovarianceModel

model = CovarianceModel.sfbm(0.3)
grid = (32, 64, 128, 256, 512)

# %% distance to the fBm with the same index: the d sums decay like 1/n
sums, slopes, verdict = check_fbm_gap(model, grid)
for n, s in sums.items():
    print(f"n={n:4d}  d_n={s.d_n:.3e}  d_2n={s.d_2n:.3e}  c={s.c:.3e}")
print("log-log slopes:", {k: round(v, 3) for k, v in slopes.items()}, verdict.value)

# %% the bias term sqrt(n)(E V_in/(in) - 1) vanishes like n^{-1/2}
stats, slopes, verdict = check_bias(model, grid)
for n, (b1, b2) in stats.items():
    print(f"n={n:4d}  level n: {b1:+.5f}  level 2n: {b2:+.5f}")
print("slopes:", [round(s, 3) for s in slopes], verdict.value)

# %% full report, as the CLI writes it
report = verify(model, n_grid=grid)
print(json.dumps(json.loads(dumps(report.to_dict()))["verdicts"], indent=1))
