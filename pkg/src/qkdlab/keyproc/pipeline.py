"""From a sifted block and measured statistics to a final secret key."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..qkdsim import SIGNAL
from .decoy import DecoyEstimate, decoy_bounds
from .keyrate import asymptotic_key_length, binary_entropy
from .ldpc import ReconciliationParams, error_correct
from .privacy import privacy_amplify
from .sifting import MeasuredStatistics, SiftedBlock


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    raw_bits: int
    sifted: np.ndarray  # receiver's sifted signal bits
    corrected: np.ndarray
    final: np.ndarray
    leaked_bits: int
    ec_efficiency: float
    estimate: DecoyEstimate
    discarded_frames: int = 0

    def lengths(self) -> tuple[int, int, int, int]:
        return self.raw_bits, len(self.sifted), len(self.corrected), len(self.final)


def extract_key(block: SiftedBlock, stats: MeasuredStatistics,
                params: ReconciliationParams = ReconciliationParams(), pa_seed: int = 0,
                round_to_bytes: bool = False) -> KeyMaterial:
    """Reconcile the signal bits, bound the single-photon part and compress.

    The key length uses the leakage actually spent on reconciliation, i.e.
    the realized efficiency in place of a nominal one. Frames that fail to
    decode are dropped before privacy amplification.

    Raises NoSinglePhotonBoundError when the decoy analysis gives no
    single-photon yield.
    """
    est = decoy_bounds(stats.inputs)
    sig = block.of_class(SIGNAL)
    tx, rx = sig.tx_bits, sig.rx_bits
    if len(rx) == 0:
        empty = np.zeros(0, np.uint8)
        return KeyMaterial(stats.raw_bits, rx, empty, empty, 0, math.inf, est)
    d = stats.inputs
    ec = error_correct(tx, rx, d.E_mu, params)
    kept = ~ec.discarded
    corrected = ec.corrected[kept]
    f = ec.efficiency if math.isfinite(ec.efficiency) else 1.0
    n = len(corrected)
    if d.E_mu > 0:
        length = asymptotic_key_length(n, d.Q_mu, est, d.E_mu, f, round_to_bytes)
    else:
        length = max(0, math.floor(n * (est.Q1_lower / d.Q_mu) * (1 - binary_entropy(est.e1_upper)))
                     - ec.leaked_bits)
    length = min(length, n)
    final = privacy_amplify(corrected, length, pa_seed) if length > 0 else np.zeros(0, np.uint8)
    return KeyMaterial(stats.raw_bits, rx, corrected, final, ec.leaked_bits, ec.efficiency, est,
                       ec.failed_frames)
