import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdlab.keyproc import DecoyEstimate, asymptotic_key_length, binary_entropy, decoy_bounds
from qkdlab.keyproc.keyrate import (PAPER_ESTIMATE, PAPER_INPUTS, RunStatistics, finite_size_duration,
                                    key_fraction, shifted_inputs)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)
    np.testing.assert_allclose(binary_entropy(np.array([0.25, 0.75])), [0.811278] * 2, atol=1e-6)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


@given(st.floats(0, 1))
def test_binary_entropy_symmetric(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


def test_key_length_reference_point():
    est = decoy_bounds(PAPER_INPUTS)
    L = asymptotic_key_length(5844, PAPER_INPUTS.Q_mu, est, PAPER_INPUTS.E_mu, 1.15)
    assert 155 <= L <= 185
    # tabulated single-photon figures give the top of the bracket
    assert asymptotic_key_length(5844, PAPER_INPUTS.Q_mu, PAPER_ESTIMATE, PAPER_INPUTS.E_mu, 1.15) == 172
    assert L / 4.0 == pytest.approx(40, rel=0.15)


def test_key_length_longhand():
    est = DecoyEstimate(1e-4, 4.5e-5, 0.03)
    frac = (4.5e-5 / 6e-5) * (1 - binary_entropy(0.03)) - 1.2 * binary_entropy(0.035)
    assert frac > 0
    assert asymptotic_key_length(10000, 6e-5, est, 0.035, 1.2) == math.floor(10000 * frac)


def test_key_length_clamps_and_rounds():
    est = DecoyEstimate(1e-4, 3e-5, 0.06)
    assert asymptotic_key_length(1000, 6e-5, est, 0.2, 1.2) == 0
    assert asymptotic_key_length(10001, 6e-5, est, 0.04, 1.1, round_to_bytes=True) % 8 == 0


@given(st.floats(1.0, 1.5), st.floats(1e-3, 0.4))
def test_key_fraction_decreases_with_f_and_qber(f, e):
    est = DecoyEstimate(1e-4, 3e-5, 0.05)
    assert key_fraction(6e-5, est, e, f + 0.1) < key_fraction(6e-5, est, e, f)
    assert key_fraction(6e-5, est, e + 0.01, f) < key_fraction(6e-5, est, e, f)


def _stats():
    return RunStatistics(PAPER_INPUTS, 8e7 * 0.62, 8e7 * 0.07, 8e7 * 0.31)


def test_finite_size_order_of_magnitude():
    res = finite_size_duration(_stats())
    assert 5e3 <= res.duration <= 5e4
    assert res.key_rate > 0


def test_finite_size_is_minimal():
    res = finite_size_duration(_stats())
    sh = shifted_inputs(_stats(), res.duration - 1, 10.0)
    est = decoy_bounds(sh)
    assert key_fraction(sh.Q_mu, est, sh.E_mu, 1.15) <= 0


def test_finite_size_scales_inverse_with_rate():
    a = finite_size_duration(_stats()).duration
    b = finite_size_duration(_stats().scaled(2.0)).duration
    assert b == pytest.approx(a / 2, rel=0.01)


def test_finite_size_zero_sigma_and_hopeless_link():
    assert finite_size_duration(_stats(), sigmas=0).duration == 1.0
    bad = RunStatistics(PAPER_INPUTS.__class__(0.495, 0.12, 5.86e-5, 1.5e-5, 0.2, 0.2, 1.35e-7), 1e7, 1e6, 1e6)
    assert math.isinf(finite_size_duration(bad).duration)
    with pytest.raises(ValueError):
        finite_size_duration(_stats(), sigmas=-1)


def test_shifted_inputs_move_against_the_key():
    sh = shifted_inputs(_stats(), 100.0, 3.0)
    d = PAPER_INPUTS
    assert sh.Q_mu > d.Q_mu and sh.Q_nu < d.Q_nu and sh.E_mu > d.E_mu and sh.Y0 > d.Y0
