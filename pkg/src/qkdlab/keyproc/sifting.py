"""Receiver outcome resolution, basis sifting, per-second selection and parameter estimation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..qkdsim import DECOY, OPEN, SIGNAL, VACUUM, TruthLog
from .decoy import DecoyInputs


@dataclass(frozen=True, eq=False)
class ReceiverOutcomes:
    """One row per detected slot: measured basis and bit; ``double`` marks a coin-flip resolution."""

    slot: np.ndarray
    basis: np.ndarray
    bit: np.ndarray
    double: np.ndarray

    def __len__(self):
        return len(self.slot)


def resolve_clicks(slot, channel, seed: int = 0) -> ReceiverOutcomes:
    """Collapse accepted clicks per slot into a single (basis, bit).

    Channels 0..3 are H, V, D, A. When both detectors of a basis fire the bit
    is a fair coin; when both bases fire the basis is a fair coin first.
    """
    slot = np.asarray(slot, dtype=np.int64)
    channel = np.asarray(channel, dtype=np.int64)
    if slot.size == 0:
        z = np.zeros(0, np.uint8)
        return ReceiverOutcomes(np.zeros(0, np.int64), z, z, np.zeros(0, bool))
    uniq, inv = np.unique(slot, return_inverse=True)
    mask = np.zeros(uniq.size, dtype=np.int64)
    np.bitwise_or.at(mask, inv, 1 << channel)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    coin_basis = rng.integers(0, 2, size=uniq.size)
    coin_bit = rng.integers(0, 2, size=uniq.size)
    z_hits = mask & 0b0011
    x_hits = (mask >> 2) & 0b0011
    both_bases = (z_hits > 0) & (x_hits > 0)
    basis = np.where(both_bases, coin_basis, (x_hits > 0).astype(np.int64))
    hits = np.where(basis == 0, z_hits, x_hits)
    double = (hits == 0b11) | both_bases
    bit = np.where(hits == 0b11, coin_bit, (hits == 0b10).astype(np.int64))
    return ReceiverOutcomes(uniq, basis.astype(np.uint8), bit.astype(np.uint8), double)


@dataclass(frozen=True, eq=False)
class SiftedBlock:
    tx_bits: np.ndarray
    rx_bits: np.ndarray
    cls: np.ndarray  # SIGNAL or DECOY per bit
    second: np.ndarray  # whole second of the slot
    slot: np.ndarray

    def __post_init__(self):
        n = len(self.tx_bits)
        if any(len(a) != n for a in (self.rx_bits, self.cls, self.second, self.slot)):
            raise ValueError("sifted arrays must have equal lengths")
        if np.any(self.cls == VACUUM):
            raise ValueError("vacuum slots carry no key bits")

    def __len__(self):
        return len(self.tx_bits)

    def select(self, mask) -> "SiftedBlock":
        m = np.asarray(mask, dtype=bool)
        return SiftedBlock(self.tx_bits[m], self.rx_bits[m], self.cls[m], self.second[m], self.slot[m])

    def of_class(self, cls: int) -> "SiftedBlock":
        return self.select(self.cls == cls)

    def per_second_counts(self, n_seconds: int) -> np.ndarray:
        return np.bincount(self.second, minlength=n_seconds)[:n_seconds]

    @property
    def qber(self) -> float:
        return float(np.mean(self.tx_bits != self.rx_bits)) if len(self) else float("nan")


def _empty_block() -> SiftedBlock:
    z = np.zeros(0, np.uint8)
    return SiftedBlock(z, z, z, np.zeros(0, np.int64), np.zeros(0, np.int64))


def matched_rows(truth: TruthLog, outcomes: ReceiverOutcomes) -> tuple[np.ndarray, np.ndarray]:
    """Outcome indices that pair with a transmitter record, and the record rows."""
    rows = truth.lookup(outcomes.slot)
    hit = np.nonzero(rows >= 0)[0]
    return hit, rows[hit]


def sift(truth: TruthLog, outcomes: ReceiverOutcomes, pulse_rate: float) -> SiftedBlock:
    """Keep open-chopper signal and decoy slots where both sides used the same basis."""
    if len(outcomes) == 0 or len(truth) == 0:
        return _empty_block()
    idx, rows = matched_rows(truth, outcomes)
    keep = ((truth.fate[rows] == OPEN) & (truth.cls[rows] != VACUUM)
            & (truth.basis[rows] == outcomes.basis[idx]))
    idx, rows = idx[keep], rows[keep]
    slots = outcomes.slot[idx]
    return SiftedBlock(truth.bit[rows].astype(np.uint8), outcomes.bit[idx].astype(np.uint8),
                       truth.cls[rows].astype(np.uint8),
                       np.floor(slots / pulse_rate).astype(np.int64), slots)


def snr_filter(per_second_counts, threshold: float) -> np.ndarray:
    """Indices of seconds whose count is strictly greater than ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.nonzero(np.asarray(per_second_counts) > threshold)[0]


@dataclass(frozen=True)
class MeasuredStatistics:
    inputs: DecoyInputs
    raw_bits: int  # open-slot signal detections
    sifted_bits: int  # basis-matched signal bits
    sifted_decoy_bits: int
    emitted: tuple[int, int, int]
    detected: tuple[int, int, int]


def measure_statistics(truth: TruthLog, outcomes: ReceiverOutcomes, emitted, seconds,
                       mu: float, nu: float, pulse_rate: float) -> MeasuredStatistics:
    """Gains per emitted pulse, sifted QBERs and vacuum yield over the selected seconds.

    ``emitted`` is an (n_seconds, 3) array of pulses sent per class.
    """
    seconds = np.asarray(seconds, dtype=np.int64)
    emitted = np.asarray(emitted)
    n_emit = emitted[seconds].sum(axis=0) if seconds.size else np.zeros(3, np.int64)
    idx, rows = matched_rows(truth, outcomes)
    sec = np.floor(outcomes.slot[idx] / pulse_rate).astype(np.int64)
    sel = np.isin(sec, seconds) & (truth.fate[rows] == OPEN)
    idx, rows = idx[sel], rows[sel]
    cls = truth.cls[rows]
    det = np.bincount(cls, minlength=3)
    match = truth.basis[rows] == outcomes.basis[idx]
    err = truth.bit[rows] != outcomes.bit[idx]

    def qber(c):
        # small samples can exceed one half; that carries no more information than 0.5
        m = match & (cls == c)
        return min(float(err[m].mean()), 0.5) if m.any() else 0.5

    with np.errstate(divide="ignore", invalid="ignore"):
        gains = np.where(n_emit > 0, det / np.maximum(n_emit, 1), 0.0)
    inputs = DecoyInputs(mu=mu, nu=nu, Q_mu=float(gains[SIGNAL]), Q_nu=float(gains[DECOY]),
                         E_mu=qber(SIGNAL), E_nu=qber(DECOY), Y0=float(gains[VACUUM]))
    return MeasuredStatistics(inputs, int(det[SIGNAL]), int((match & (cls == SIGNAL)).sum()),
                              int((match & (cls == DECOY)).sum()), tuple(int(v) for v in n_emit),
                              tuple(int(v) for v in det))
