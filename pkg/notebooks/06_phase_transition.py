# %% [markdown]
# # Phase-transition sweep
#
# The harness runs a seeded grid and writes sweep.csv, per-run trajectories
# and a summary. The same config file drives ``vanillamc run --config``.

# %%
import tempfile
from pathlib import Path

from vanillamc.harness import execute, parse_config_text, planned_runs

cfg = parse_config_text("""
n1 = 30
n2 = 25
r = 2
kappa = 1.0
p = [0.1, 0.2, 0.3, 0.5, 0.8]
seeds = 0..3
max_iters = 20000
record_every = 50
variant = both
""")
print(planned_runs(cfg), "runs")

# %%
out = Path(tempfile.mkdtemp())
execute(cfg, output_dir=out)
print((out / "sweep.csv").read_text())
print(len(list((out / "trajectories").iterdir())), "trajectory files in", out)
