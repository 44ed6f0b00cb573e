"""The limiting covariance of the pair (V_n, V_2n) and how fast exact finite-n values reach it."""

# %%
import numpy as np

from orey.asymptotics import sigma_matrix
from orey.kernels import CovarianceModel
from orey.quadvar import aggregates

# %% the limit across the Orey-index range
print(" gamma   Sigma11   Sigma12   sigma^2      J   tail bound")
for g in (0.1, 0.3, 0.5, 0.7, 0.9):
    r = sigma_matrix(g)
    print(f"{g:6.2f} {r.Sigma11:9.5f} {r.Sigma12:9.5f} {r.sigma_gamma_sq:9.5f} {r.truncation_J:6d}   {r.tail_bound:.1e}")

# %% exact n * cov(V_in/(in), V_jn/(jn)) from the Isserlis identities, for fBm and sfBm
g = 0.7
target = sigma_matrix(g).matrix()
for model in (CovarianceModel.fbm(g), CovarianceModel.sfbm(g)):
    print(model.spec())
    for n in (32, 128, 512, 2048):
        m = aggregates(model, n).scaled_cov_matrix()
        print(f"  n={n:5d}  max |n cov - Sigma| = {np.max(np.abs(m - target)):.5f}")
