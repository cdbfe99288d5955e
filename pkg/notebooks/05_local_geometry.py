# %% [markdown]
# # Local geometry diagnostics
#
# Closed-form Hessian quadratic form, its sampled bracketing near the truth,
# the sampling-deviation inequality driven by ||Omega - pJ||, and the
# gradient finite-difference check.

# %%
import numpy as np

from vanillamc import diagnostics as dg
from vanillamc.harness import instance
from vanillamc.problem import project_omega, sample_mask
from vanillamc.solver import FactorPair

gt, mask = instance(150, 130, 2, 2.0, 0.6, seed=0)
frac, samples = dg.hessian_bounds_check(gt, mask, 200, seed=0, return_samples=True)
ratio = np.array([s.quad_form / s.direction_norm_sq for s in samples])
print(f"form/||D||^2 in [{ratio.min():.2f}, {ratio.max():.2f}]; "
      f"bounds [{gt.sigmar / 5:.2f}, {5 * gt.sigma1:.1f}]; fraction inside {frac}")

# %%
rng = np.random.default_rng(0)
fp = FactorPair(gt.U + 0.1 * rng.standard_normal(gt.U.shape), gt.V + 0.1 * rng.standard_normal(gt.V.shape))
D = FactorPair(rng.standard_normal(gt.U.shape), rng.standard_normal(gt.V.shape))
q = dg.hessian_quadratic_form(fp, D, gt.M, mask)
print("closed form vs second difference:", q, dg.second_difference(fp, D, project_omega(gt.M, mask), mask))
print("gradient FD check:", dg.gradient_fd_check(fp, project_omega(gt.M, mask), mask))

# %%
ns = [50, 100, 200, 400]
gaps = [np.mean([dg.spectral_gap(sample_mask(n, n, 0.3, seed=s)) for s in range(5)]) for n in ns]
print("||Omega - pJ||:", np.round(gaps, 2), " fitted exponent", round(dg.fit_exponent(ns, gaps), 3))

# %%
m = sample_mask(60, 60, 0.3, seed=1)
A, B, C, E = (rng.standard_normal((60, 2)) for _ in range(4))
print("|deviation|", round(abs(dg.sampling_deviation(A, C, B, E, m)), 2), "<= bound", round(dg.deviation_bound(A, C, B, E, m), 2))
