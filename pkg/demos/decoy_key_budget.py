"""
From measured gains to a secret key
===================================

Signal, decoy and vacuum statistics bound what a single photon did in the
channel. From there the asymptotic key length follows, and a sigma-shift
heuristic tells how long a run would need for a finite-size key.
"""

from qkdlab.keyproc import DecoyInputs, asymptotic_key_length, decoy_bounds
from qkdlab.keyproc.keyrate import RunStatistics, finite_size_duration

measured = DecoyInputs(mu=0.495, nu=0.120, Q_mu=5.86e-5, Q_nu=1.5e-5, E_mu=0.0655, E_nu=0.0549, Y0=1.35e-7)
est = decoy_bounds(measured)
print(f"Q1 >= {est.Q1_lower:.3e}   e1 <= {est.e1_upper:.2%}")

# %%
# Key length
# ----------
# 5844 sifted signal bits after four good seconds, reconciled at f = 1.15.
for f in (1.05, 1.10, 1.15, 1.20):
    n = asymptotic_key_length(5844, measured.Q_mu, est, measured.E_mu, f)
    print(f"f = {f:.2f}: {n:4d} secure bits")

# %%
# Finite size
# -----------
# 80 MHz pulses, mostly signal, with sparse decoys.
stats = RunStatistics(measured, 8e7 * 0.62, 8e7 * 0.07, 8e7 * 0.31)
res = finite_size_duration(stats, sigmas=10)
print(f"\n10-sigma finite-size key needs about {res.duration:.0f} s of the same link")
