"""A few-trial version of the SBP-versus-power study.

The full study is `mbol power-sweep`; this keeps the trial count small so
it finishes in about a minute, and prints the curves instead of a CSV.

Run: python demos/small_power_sweep.py
"""
from mbol import harness

spec = harness.default_spec("power-sweep", trials=5)
table = harness.run_power_sweep(spec)

for label in ("gamma=0dB", "gamma=10dB"):
    p, y = table.curve("proposed", "sbp_linear", label)
    print(f"proposed {label:11s}", " ".join(f"{v:7.3f}" for v in y))
p, y = table.curve("radar_only", "sbp_linear", "")
print(f"radar-only {'':9s}", " ".join(f"{v:7.3f}" for v in y))
print("P_t (dBm)            ", " ".join(f"{v:7.1f}" for v in p))
print("config hash", table.meta["config_hash"], "failures", len(table.failures))
for w in table.warnings:
    print("warning:", w)
