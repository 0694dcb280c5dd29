"""
Link geometry of a truck pass
=============================

A transmitter on a rooftop sends to a receiver on a truck about 650 m away.
We look at how fast the line of sight turns, how fast the time of flight
drifts, and where the 30.6 dB of loss comes from.
"""

import numpy as np

from qkdlab.linkgeom import (PAPER_BUDGET, BeamModel, angular_rate, aperture_coupling_loss,
                             beam_radius_at, fit_m2, leo_max_angular_rate, paper_trajectory, time_of_flight,
                             tof_rate)

# the pass: per-second GPS-like fixes with velocities
traj, tx = paper_trajectory(10.0)
t = np.linspace(0, 9.9, 100)

rate = angular_rate(traj, tx, t)
print(f"line-of-sight rate: mean {rate.mean():.3f} deg/s, max {rate.max():.3f} deg/s")
print(f"LEO at 600 km, zenith:  {leo_max_angular_rate(600e3):.3f} deg/s")

# Time of flight and its drift. 15 ns/s is more than one 12.5 ns pulse
# period per second, so the receiver has to undo it before matching slots.
rx = traj.position[0]
print(f"\ntime of flight at t=0: {time_of_flight(tx, rx) * 1e6:.4f} us")
drift = np.asarray(tof_rate(traj, tx, t)) * 1e9
print(f"ToF drift: {drift.mean():.2f} ns/s")

# %%
# Diffraction
# -----------
# An ideal Gaussian with a 5 mm waist radius barely spreads over 650 m. A
# 12 cm spot needs a beam quality factor well above one.
ideal = BeamModel(5e-3)
w_ideal = beam_radius_at(ideal, 650.0)
print(f"\nideal spot radius at 650 m: {w_ideal * 100:.2f} cm, "
      f"aperture loss {aperture_coupling_loss(w_ideal, 0.0254):.2f} dB")

m2 = fit_m2(5e-3, 532e-9, 650.0, 0.06)
print(f"M^2 for a 12 cm spot: {m2:.2f}, aperture loss {aperture_coupling_loss(0.06, 0.0254):.2f} dB")

# %%
# Loss budget
# -----------
for name in ("diffraction_dB", "tx_pointing_turbulence_dB", "rx_pointing_dB", "fixed_dB"):
    print(f"  {name:28s} {getattr(PAPER_BUDGET, name):5.1f} dB")
print(f"  {'total':28s} {PAPER_BUDGET.total_dB:5.1f} dB")
