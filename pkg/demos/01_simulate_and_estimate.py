"""Simulate one trajectory per process family and estimate its Orey index."""

# %%
import numpy as np

from orey.estimator import gamma_hat, scaled_qv, scaled_qv_limit
from orey.kernels import CovarianceModel
from orey.pathgen import simulate

models = [
    CovarianceModel.fbm(0.35),
    CovarianceModel.sfbm(0.7),
    CovarianceModel.bifbm(0.8, 0.6),
]

# %% one path of 2n = 4096 steps each; the estimator only sees the samples
n = 2048
for model in models:
    path = simulate(model, 2 * n, seed=2024)
    est = gamma_hat(path, ci=0.95)
    print(
        f"{model.spec():24s} generator={path.generator.value:16s} "
        f"true={model.orey_gamma:.3f}  estimate={est.gamma_hat:.3f}  "
        f"95% CI=({est.ci_low:.3f}, {est.ci_high:.3f})"
    )

# %% the scaled quadratic variation settles on kappa^2 (4 - 2^{2 gamma}) T
for model in models:
    path = simulate(model, 2**13, seed=7)
    print(f"{model.spec():24s} scaled QV={scaled_qv(path, model):.4f}  limit={scaled_qv_limit(model):.4f}")

# %% the estimate does not care about the units of the path
path = simulate(models[1], 2 * n, seed=1)
print("rescaled by 2^20:", gamma_hat(path).gamma_hat == gamma_hat(path.scaled(2.0**20)).gamma_hat)
print("first values:", np.round(path.values[:5], 5))
