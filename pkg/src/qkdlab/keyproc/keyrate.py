"""Binary entropy, asymptotic key length and a sigma-shift finite-size duration heuristic."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decoy import DecoyEstimate, DecoyInputs, decoy_bounds
from ..errors import NoSinglePhotonBoundError


def binary_entropy(x):
    """H2(x) in bits, with H2(0) = H2(1) = 0. Works elementwise on arrays."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("binary entropy is defined on [0, 1]")
    inner = (arr > 0) & (arr < 1)
    safe = np.where(inner, arr, 0.5)
    h = np.where(inner, -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe), 0.0)
    return float(h) if h.ndim == 0 else h


def key_fraction(Q_mu: float, est: DecoyEstimate, E_mu: float, f: float) -> float:
    """Secure bits per sifted signal bit, before flooring and clamping."""
    return (est.Q1_lower / Q_mu) * (1.0 - binary_entropy(est.e1_upper)) - f * binary_entropy(E_mu)


def asymptotic_key_length(n_sifted_signal: int, Q_mu: float, est: DecoyEstimate,
                          E_mu: float, f: float, round_to_bytes: bool = False) -> int:
    """floor(n * [(Q1/Q_mu)(1 - H2(e1)) - f H2(E_mu)]), clamped at zero."""
    L = math.floor(n_sifted_signal * key_fraction(Q_mu, est, E_mu, f))
    L = max(L, 0)
    if round_to_bytes:
        L -= L % 8
    return L


@dataclass(frozen=True)
class RunStatistics:
    """Per-second averages from which a finite-size duration is extrapolated.

    Pulse rates are emitted pulses per second for each intensity class;
    gains are per emitted pulse; ``sift_fraction`` is sifted/detected for
    signal pulses.
    """

    inputs: DecoyInputs
    signal_pulses_per_s: float
    decoy_pulses_per_s: float
    vacuum_pulses_per_s: float
    sift_fraction: float = 0.5
    f: float = 1.15

    def scaled(self, factor: float) -> "RunStatistics":
        """Same link with every pulse rate multiplied by ``factor``."""
        return replace(self, signal_pulses_per_s=self.signal_pulses_per_s * factor,
                       decoy_pulses_per_s=self.decoy_pulses_per_s * factor,
                       vacuum_pulses_per_s=self.vacuum_pulses_per_s * factor)


@dataclass(frozen=True)
class FiniteSizeResult:
    duration: float  # seconds, math.inf when no duration suffices
    key_rate: float  # secure bits per second with shifted parameters at that duration
    shifted: DecoyInputs | None = None


def shifted_inputs(stats: RunStatistics, T: float, sigmas: float) -> DecoyInputs:
    """Parameters moved ``sigmas`` standard errors in the key-reducing direction after T seconds."""
    d = stats.inputs
    Ns, Nd, Nv = (stats.signal_pulses_per_s * T, stats.decoy_pulses_per_s * T,
                  stats.vacuum_pulses_per_s * T)

    def gain_se(Q, N):
        return math.sqrt(Q * (1 - Q) / N) if N > 0 else math.inf

    def qber_se(E, Q, N):
        n = Q * N * stats.sift_fraction
        return math.sqrt(E * (1 - E) / n) if n > 0 else math.inf

    return DecoyInputs(
        mu=d.mu, nu=d.nu,
        Q_mu=min(d.Q_mu + sigmas * gain_se(d.Q_mu, Ns), 1 - 1e-12),
        Q_nu=max(d.Q_nu - sigmas * gain_se(d.Q_nu, Nd), 1e-300),
        E_mu=min(d.E_mu + sigmas * qber_se(d.E_mu, d.Q_mu, Ns), 0.5),
        E_nu=min(d.E_nu + sigmas * qber_se(d.E_nu, d.Q_nu, Nd), 0.5),
        Y0=d.Y0 + sigmas * gain_se(max(d.Y0, 1.0 / max(Nv, 1.0)), Nv),
    )


def _shifted_rate(stats: RunStatistics, T: float, sigmas: float):
    try:
        sh = shifted_inputs(stats, T, sigmas)
        est = decoy_bounds(sh)
    except (NoSinglePhotonBoundError, ValueError):
        return -math.inf, None
    frac = key_fraction(sh.Q_mu, est, sh.E_mu, stats.f)
    sifted_per_s = stats.inputs.Q_mu * stats.signal_pulses_per_s * stats.sift_fraction
    return frac * sifted_per_s, sh


def finite_size_duration(stats: RunStatistics, sigmas: float = 10.0,
                         max_duration: float = 1e9) -> FiniteSizeResult:
    """Shortest duration (whole seconds) at which the sigma-shifted key rate turns positive.

    Standard errors shrink as 1/sqrt(T), so the shifted rate grows with T;
    the crossing is bracketed by doubling and refined by bisection.
    Returns an infinite duration when even ``max_duration`` is not enough.
    """
    if sigmas < 0:
        raise ValueError("sigmas must be nonnegative")
    rate_inf, _ = _shifted_rate(stats, math.inf, 0.0) if sigmas == 0 else _shifted_rate(stats, max_duration, sigmas)
    if rate_inf <= 0:
        return FiniteSizeResult(math.inf, 0.0, None)
    if sigmas == 0:
        return FiniteSizeResult(1.0, rate_inf, stats.inputs)
    lo, hi = 0.0, 1.0
    while _shifted_rate(stats, hi, sigmas)[0] <= 0:
        lo, hi = hi, hi * 2
    while hi - lo > 1.0:
        mid = math.floor((lo + hi) / 2)
        if mid <= lo:
            break
        if _shifted_rate(stats, mid, sigmas)[0] > 0:
            hi = mid
        else:
            lo = mid
    rate, sh = _shifted_rate(stats, hi, sigmas)
    return FiniteSizeResult(float(hi), rate, sh)


PAPER_INPUTS = DecoyInputs(mu=0.495, nu=0.120, Q_mu=5.86e-5, Q_nu=1.5e-5,
                           E_mu=0.0655, E_nu=0.0549, Y0=1.35e-7)
PAPER_ESTIMATE = DecoyEstimate(Y1_lower=3.72e-5 / (0.495 * math.exp(-0.495)),
                               Q1_lower=3.72e-5, e1_upper=0.0585)
