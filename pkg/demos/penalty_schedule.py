"""Watch the penalty loop pull the precoder onto the SINR constraints.

Each outer loop doubles alpha; the max residual |h^H F_RF f - zeta|^2
should fall until it drops below tol_outer.

Run: python demos/penalty_schedule.py
"""
import numpy as np

from mbol import optimizer
from mbol.channel import sample_channels
from mbol.scenario import desk_scenario, trial_rng

cfg = desk_scenario(n_rf=4, n_beams=2, sinr_thresholds_db=(10.0, 10.0))
ch = sample_channels(cfg, trial_rng(1, 0))

passes = []
result = optimizer.optimize(cfg, ch, trial_rng(1, 0, 1), callback=lambda d: passes.append(d.objective[-1]))
diag = result.diagnostics

print(" outer      alpha   residual")
for k, (a, r) in enumerate(zip(diag.alpha, diag.outer_residual)):
    print(f"{k:6d} {a:10.3g} {r:10.3e}")
print("inner passes:", len(passes), " logged objective increases:", len(diag.monotonicity_violations))
print("warnings:", diag.warnings or "none")
print("final SINR (dB):", np.round(10 * np.log10(diag.final_sinr), 2))
