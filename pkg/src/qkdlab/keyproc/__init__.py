"""Classical post-processing: sifting, decoy bounds, reconciliation, privacy amplification."""
from .decoy import DecoyEstimate, DecoyInputs, channel_yields, decoy_bounds, poisson_gains
from .keyrate import (FiniteSizeResult, RunStatistics, asymptotic_key_length, binary_entropy,
                      finite_size_duration, key_fraction)
from .ldpc import ReconciliationParams, ReconciliationResult, error_correct
from .pipeline import KeyMaterial, extract_key
from .privacy import bits_to_hex, bits_to_str, privacy_amplify, str_to_bits
from .sifting import (MeasuredStatistics, ReceiverOutcomes, SiftedBlock, measure_statistics,
                      resolve_clicks, sift, snr_filter)
