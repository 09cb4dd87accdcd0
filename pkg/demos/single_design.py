"""Design one hybrid precoder and look at what it does.

Run: python demos/single_design.py
"""
import numpy as np

from mbol import metrics, optimizer
from mbol.channel import sample_channels
from mbol.scenario import desk_scenario, trial_rng

# A 16-antenna array with 5 RF chains serves 2 users at -60 and -40 deg
# and points 3 beams into the object sector [30, 50] deg.
cfg = desk_scenario(sinr_thresholds_db=(3.0, 3.0))
ch = sample_channels(cfg, trial_rng(cfg.seed, 0))
print("beam angles (deg):", np.round(np.rad2deg(cfg.beam_angles_rad), 2))
print("channel gains |h|^2 / noise:", np.round(np.sum(np.abs(ch.H) ** 2, 0) / ch.noise_powers, 2))

p, w, diag = optimizer.optimize(cfg, ch, trial_rng(cfg.seed, 0, 1))
print(f"converged: {diag.converged} after {len(diag.outer_residual)} outer loops, "
      f"{sum(diag.rcg_iterations)} RCG iterations, {diag.wall_clock:.2f} s")
print("final penalty residual:", f"{diag.final_residual:.2e}")
print("SINR (dB):", np.round(10 * np.log10(metrics.sinrs(ch, p)), 2), "target", cfg.sinr_thresholds_db)
print("transmit power (mW):", round(p.power, 6), "budget", round(cfg.p_tx_lin, 6))

chi = metrics.beampattern_gain(p, cfg.beam_angles_rad)
print("gain at the beams:", np.round(chi, 3), "MSE weights:", np.round(w.w, 3))

# The sensing-only design is an upper bound on the beam gains.
radar, _ = optimizer.radar_only(cfg, rng=trial_rng(cfg.seed, 0, 1))
print("linear SBP  proposed %.3f  radar-only %.3f" % (
    metrics.sbp_linear(p, cfg.beam_angles_rad), metrics.sbp_linear(radar, cfg.beam_angles_rad)))

# Coarse text beampattern: one row per 10 deg.
ang, gdb = metrics.beampattern_sweep(p, np.arange(-90, 91, 10))
for a, g in zip(ang, gdb):
    print(f"{a:6.0f} deg {g:7.2f} dB " + "#" * max(0, int(g + 20)))
