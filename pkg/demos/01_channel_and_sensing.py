#!/usr/bin/env python3
"""Channel basics: pathloss, packet sensing ratio and the sensing loss.

Plots the default log-distance channel and the probability that a packet
arrives above the -90.4 dBm sensing threshold, for both transmit powers
used in the standard evaluations.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cv2x_mode4 import PathlossModel, RadioConfig, pathloss_db, psr, sensing_loss

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

path = PathlossModel()
d = np.linspace(1.0, 1200.0, 600)

print(f"channel: PL(d) = {path.reference_loss_db} + {path.exponent_coeff}*log10(d) dB")
print(f"{'d [m]':>8} {'PL [dB]':>9} {'PSR@20dBm':>10} {'PSR@23dBm':>10}")
for probe in (50, 100, 200, 400, 473, 600, 800, 1000):
    row = [pathloss_db(probe, path)]
    for p_t in (20.0, 23.0):
        row.append(psr(probe, RadioConfig(tx_power_dbm=p_t), path))
    print(f"{probe:>8} {row[0]:>9.1f} {row[1]:>10.3f} {row[2]:>10.3f}")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(d, pathloss_db(d, path))
ax1.set_xlabel("distance [m]")
ax1.set_ylabel("pathloss [dB]")
ax1.grid(alpha=0.3)

for p_t, style in [(20.0, "-"), (23.0, "--")]:
    radio = RadioConfig(tx_power_dbm=p_t)
    ax2.plot(d, psr(d, radio, path), style, label=f"PSR, {p_t:g} dBm")
    ax2.plot(d, sensing_loss(d, radio, path), style, alpha=0.4,
             label=f"sensing loss, {p_t:g} dBm")
ax2.set_xlabel("distance [m]")
ax2.set_ylabel("probability")
ax2.legend()
ax2.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(out / "channel_and_sensing.png", dpi=120)
print(f"\nwrote {out / 'channel_and_sensing.png'}")
