# %% [markdown]
# # Planted low-rank problems and Bernoulli masks
#
# A ground truth is a rank-r matrix M = U V^T with balanced factors
# (U^T U = V^T V = diag(sigma)). Masks observe each entry independently.

# %%
import numpy as np

from vanillamc.problem import generate_ground_truth, incoherence, project_omega, sample_mask

gt = generate_ground_truth(120, 100, 3, kappa=4.0, seed=0)
print("singular values:", gt.singulars)           # geometric from kappa down to 1
print("kappa =", gt.kappa, " mu =", round(gt.mu, 3))
print("balanced:", np.allclose(gt.U.T @ gt.U, gt.V.T @ gt.V))

# %%
# incoherence runs from 1 (flat) to n/r (a coordinate basis)
print(incoherence(np.eye(10)[:, :2]), "vs", round(gt.mu, 3))

# %%
mask = sample_mask(120, 100, 0.3, seed=1)
sd = np.sqrt(mask.observed.size * 0.3 * 0.7)
print(f"observed {mask.count}, expected {0.3 * mask.observed.size:.0f} +- {sd:.1f}")
dof = gt.r * (gt.n1 + gt.n2 - gt.r)
print("degrees of freedom:", dof, " observations per dof:", round(mask.count / dof, 1))

# %%
obs = project_omega(gt.M, mask)
print("fraction of zeroed entries:", np.mean(obs == 0).round(3))

# %%
# masks and truths serialise to JSON and come back bit for bit
back = type(mask).loads(mask.dumps())
print("round trip ok:", np.array_equal(back.observed, mask.observed))
