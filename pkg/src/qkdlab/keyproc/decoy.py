"""Vacuum + weak-decoy bounds on single-photon yield and error rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NoSinglePhotonBoundError

E0_VACUUM = 0.5


@dataclass(frozen=True)
class DecoyInputs:
    mu: float
    nu: float
    Q_mu: float
    Q_nu: float
    E_mu: float
    E_nu: float
    Y0: float

    def __post_init__(self):
        if not self.mu > self.nu > 0:
            raise ValueError("need mu > nu > 0")
        for name in ("Q_mu", "Q_nu"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        for name in ("E_mu", "E_nu"):
            if not 0 <= getattr(self, name) <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5]")
        if self.Y0 < 0:
            raise ValueError("Y0 must be nonnegative")


@dataclass(frozen=True)
class DecoyEstimate:
    Y1_lower: float
    Q1_lower: float
    e1_upper: float
    clamped: tuple[str, ...] = ()


def decoy_bounds(d: DecoyInputs) -> DecoyEstimate:
    """Lower-bound Y1 and Q1 and upper-bound e1 from signal, decoy and vacuum statistics.

    Raises NoSinglePhotonBoundError when the Y1 bound is not positive.
    """
    mu, nu, Y0 = d.mu, d.nu, d.Y0
    y1 = (mu / (mu * nu - nu * nu)) * (
        d.Q_nu * math.exp(nu)
        - d.Q_mu * math.exp(mu) * nu * nu / (mu * mu)
        - (mu * mu - nu * nu) / (mu * mu) * Y0
    )
    if not y1 > 0:
        raise NoSinglePhotonBoundError(f"single-photon yield bound is {y1:.3e}")
    clamped = []
    if y1 > 1:
        y1, clamped = 1.0, clamped + ["Y1_lower"]
    q1 = y1 * mu * math.exp(-mu)
    if q1 > d.Q_mu:
        q1, clamped = d.Q_mu, clamped + ["Q1_lower"]
    e1 = (d.E_nu * d.Q_nu * math.exp(nu) - E0_VACUUM * Y0) / (y1 * nu)
    if e1 < 0:
        e1, clamped = 0.0, clamped + ["e1_upper"]
    elif e1 > 0.5:
        e1, clamped = 0.5, clamped + ["e1_upper"]
    return DecoyEstimate(y1, q1, e1, tuple(clamped))


def poisson_gains(mu: float, yields, errors=None):
    """Gain and QBER of a Poisson source given photon-number yields Y_n (and error rates e_n).

    Sums the series to the length of ``yields``; used as a forward-model oracle.
    """
    yields = np.asarray(yields, dtype=float)
    n = np.arange(len(yields))
    w = np.exp(-mu) * mu**n / np.array([math.factorial(int(k)) for k in n], dtype=float)
    Q = float(np.sum(w * yields))
    if errors is None:
        return Q
    E = float(np.sum(w * yields * np.asarray(errors, dtype=float)) / Q)
    return Q, E


def channel_yields(eta: float, Y0: float, e_det: float, nmax: int = 40):
    """Photon-number yields and error rates of a lossy channel with threshold detection."""
    n = np.arange(nmax)
    eta_n = 1.0 - (1.0 - eta) ** n
    Y = Y0 + eta_n - Y0 * eta_n
    e = np.where(Y > 0, (E0_VACUUM * Y0 + e_det * eta_n - Y0 * eta_n * E0_VACUUM) / np.where(Y > 0, Y, 1), E0_VACUUM)
    return Y, e
