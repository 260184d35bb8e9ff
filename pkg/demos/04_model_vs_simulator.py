#!/usr/bin/env python3
"""Validation in one picture: analytic curves against the SPS simulator.

Runs one desk-scale scenario (0.1 vehicles/m, 20 dBm, 10 Hz, 4 sub-channels),
overlays the model on the simulated per-bin shares, and reports the mean
absolute deviation per quantity.  The full 12-scenario campaign is available
through ``cv2x-mode4 compare`` or the acceptance test suite.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cv2x_mode4 import AnalyticModel, Outcome, ScenarioConfig, mad, run

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

cfg = ScenarioConfig(beta=0.1)
ring = 2000.0
stats = run(cfg, duration_s=13.0, length_m=ring, seed=1, warmup_s=3.0)
model = AnalyticModel(cfg)
curve = model.curve(stats.bin_centers, ring_length_m=ring)

quantities = [
    ("PDR", stats.pdr, [b.pdr for b in curve]),
    ("half-duplex", stats.share(Outcome.HD), [b.hd for b in curve]),
    ("sensing", stats.share(Outcome.SEN), [b.sen for b in curve]),
    ("propagation", stats.share(Outcome.PRO), [b.pro for b in curve]),
    ("collision", stats.share(Outcome.COL), [b.col for b in curve]),
]
print(f"CBR: simulated {stats.cbr:.3f}, analytic {model.cbr:.3f}")
for name, sim_vals, ana_vals in quantities:
    print(f"MAD({name}) = {mad(sim_vals, ana_vals):.2f}%")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
ax1.plot(stats.bin_centers, stats.pdr, "o", ms=3, label="simulated")
ax1.plot(stats.bin_centers, [b.pdr for b in curve], "-", label="analytic")
ax1.set_xlabel("distance [m]")
ax1.set_ylabel("PDR")
ax1.legend()
ax1.grid(alpha=0.3)

for name, sim_vals, ana_vals, color in [
        ("sensing", stats.share(Outcome.SEN), [b.sen for b in curve], "tab:green"),
        ("collision", stats.share(Outcome.COL), [b.col for b in curve], "tab:red"),
        ("propagation", stats.share(Outcome.PRO), [b.pro for b in curve], "tab:purple")]:
    ax2.plot(stats.bin_centers, sim_vals, "o", ms=3, color=color)
    ax2.plot(stats.bin_centers, ana_vals, "-", color=color, label=name)
ax2.set_xlabel("distance [m]")
ax2.set_ylabel("loss share")
ax2.legend()
ax2.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(out / "model_vs_simulator.png", dpi=120)
print(f"\nwrote {out / 'model_vs_simulator.png'}")
