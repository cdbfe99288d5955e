# %% [markdown]
# # Leave-one-out sequences
#
# Sequence l runs gradient descent on an objective where row l (or column
# l - n1) is fully observed. It is independent of the sampling on that
# row/column yet stays close to the main sequence, which is what controls
# the row-wise error of the main iterates.

# %%
import numpy as np

from vanillamc.harness import instance
from vanillamc.leaveoneout import track
from vanillamc.problem import project_omega
from vanillamc.solver import default_step_size, spectral_init

gt, mask = instance(60, 50, 2, 2.0, 0.5, seed=3)
_, s0 = spectral_init(project_omega(gt.M, mask), mask, gt.r, return_singulars=True)
eta = default_step_size(s0[0], s0[-1])[1]

diags = track(gt, mask, eta, 2000, record_every=250)
print("   t   spec_err  max_rowwise  max_pairdist  two_inf_err")
for d in diags:
    print(f"{d.t:5d}  {d.main_err_spec:.3e}  {d.max_rowwise_err:.3e}    {d.max_pair_dist_frob:.3e}     {d.main_err_2inf:.3e}")

# %%
# with every entry observed all n1 + n2 sequences coincide with the main one
gt1, full = instance(30, 20, 2, 2.0, 1.0, seed=0)
print("p = 1 pair distances:", {d.max_pair_dist_frob for d in track(gt1, full, eta, 20)})

# %%
# large problems: follow a subset of indices only
sub = track(gt, mask, eta, 200, record_every=200, indices=np.arange(0, 110, 10))
print("subsampled:", sub[-1].subsampled, " max rowwise over subset:", f"{sub[-1].max_rowwise_err:.3e}")
