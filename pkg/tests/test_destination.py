import math

import numpy as np
import pytest

from marcsim import ConfigurationError
from marcsim.destination import (
    AnalogDetector,
    ReceptionSet,
    RecoveryResult,
    analog_nc_destination_detect,
    count_bit_errors,
    recover,
)
from marcsim.fec import DEFAULT_CODE, conv_encode
from marcsim.modem import Modulation, SymbolBlock, bpsk_map, qam_map
from marcsim.relay import SchemeConfig, SchemeKind, RxMode, analog_nc_forward

S = 1.0 / math.sqrt(2.0)


def test_count_bit_errors_examples():
    assert count_bit_errors([1, 0, 1, 1], [1, 0, 1, 1]) == 0
    assert count_bit_errors([0] * 8, [1] * 8) == 8
    assert count_bit_errors([1, 0, 1, 1], [1, 1, 1, 0]) == 2


def test_count_bit_errors_matches_positional_oracle():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, 257).astype(np.uint8)
    b = rng.integers(0, 2, 257).astype(np.uint8)
    oracle = sum(int(x != y) for x, y in zip(a, b))
    assert count_bit_errors(a, b) == oracle


def test_count_bit_errors_length_mismatch():
    with pytest.raises(ValueError):
        count_bit_errors([1, 0], [1, 0, 1])


def _noiseless_reception_dmnc(b1, b2, with_direct=True):
    relay = qam_map(b1 ^ b2)
    return ReceptionSet(
        relay_block=relay,
        relay_branch_used=SchemeKind.DMNC,
        direct_s1=qam_map(b1) if with_direct else None,
        direct_s2=qam_map(b2) if with_direct else None,
    )


DMNC_SUP = SchemeConfig(SchemeKind.DMNC, relay_rx_mode=RxMode.SUPERPOSED)


def test_recover_noiseless_zero_errors():
    rng = np.random.default_rng(1)
    b1 = rng.integers(0, 2, 16).astype(np.uint8)
    b2 = rng.integers(0, 2, 16).astype(np.uint8)
    res = recover(_noiseless_reception_dmnc(b1, b2), DMNC_SUP, None, Modulation.QAM4, (b1, b2))
    assert res.per_source_bit_errors == (0, 0)
    assert np.array_equal(res.est_s1, b1)
    assert np.array_equal(res.est_s2, b2)


def test_recover_no_direct_reports_xor_only():
    rng = np.random.default_rng(2)
    b1 = rng.integers(0, 2, 10).astype(np.uint8)
    b2 = rng.integers(0, 2, 10).astype(np.uint8)
    res = recover(
        _noiseless_reception_dmnc(b1, b2, with_direct=False),
        DMNC_SUP, None, Modulation.QAM4, (b1, b2),
    )
    assert res.per_source_bit_errors is None
    assert res.est_s1 is None and res.est_s2 is None
    assert res.xor_bit_errors == 0


def test_recover_missing_s2_direct_still_recovers_s2():
    # S2's estimate needs only the relay XOR and S1's direct link.
    rng = np.random.default_rng(3)
    b1 = rng.integers(0, 2, 12).astype(np.uint8)
    b2 = rng.integers(0, 2, 12).astype(np.uint8)
    rec = ReceptionSet(
        relay_block=qam_map(b1 ^ b2),
        relay_branch_used=SchemeKind.DMNC,
        direct_s1=qam_map(b1),
        direct_s2=None,
    )
    res = recover(rec, DMNC_SUP, None, Modulation.QAM4, (b1, b2))
    assert np.array_equal(res.est_s2, b2)
    assert res.per_source_bit_errors == (None, 0)
    assert res.est_s1 is None


def test_recover_relabeling_symmetry():
    rng = np.random.default_rng(4)
    b1 = rng.integers(0, 2, 14).astype(np.uint8)
    b2 = rng.integers(0, 2, 14).astype(np.uint8)
    res = recover(_noiseless_reception_dmnc(b1, b2), DMNC_SUP, None, Modulation.QAM4, (b1, b2))
    swapped = recover(_noiseless_reception_dmnc(b2, b1), DMNC_SUP, None, Modulation.QAM4, (b2, b1))
    assert np.array_equal(res.est_s1, swapped.est_s2)
    assert np.array_equal(res.est_s2, swapped.est_s1)


def test_reception_requires_relay_or_both_directs():
    with pytest.raises(ConfigurationError):
        ReceptionSet(relay_block=None, relay_branch_used=SchemeKind.DMNC,
                     direct_s1=qam_map(np.array([0, 0], dtype=np.uint8)), direct_s2=None)


# --- analog destination -------------------------------------------------------

def _analog_setup(b1, b2, coded=False):
    code = DEFAULT_CODE if coded else None
    tx1 = conv_encode(b1, code).bits if coded else b1
    tx2 = conv_encode(b2, code).bits if coded else b2
    x1, x2 = bpsk_map(tx1), bpsk_map(tx2)
    combined = SymbolBlock(x1.tx_samples + x2.tx_samples, Modulation.BPSK)
    fwd = analog_nc_forward(combined)
    beta = math.sqrt(float(np.mean(np.abs(combined.samples) ** 2)))
    gains = (1.0 / beta, 1.0 / beta)
    return fwd, gains, code


def test_analog_cancellation_noiseless_exact():
    rng = np.random.default_rng(5)
    b1 = rng.integers(0, 2, 32).astype(np.uint8)
    b2 = rng.integers(0, 2, 32).astype(np.uint8)
    fwd, gains, _ = _analog_setup(b1, b2)
    est1, est2 = analog_nc_destination_detect(fwd, (b1, b2), gains, Modulation.BPSK)
    assert np.array_equal(est1, b1)
    assert np.array_equal(est2, b2)


def test_analog_cancellation_single_error_is_localized():
    rng = np.random.default_rng(6)
    b1 = rng.integers(0, 2, 32).astype(np.uint8)
    b2 = rng.integers(0, 2, 32).astype(np.uint8)
    fwd, gains, _ = _analog_setup(b1, b2)
    b1_wrong = b1.copy()
    b1_wrong[7] ^= 1
    # Residual at position 7 is off by exactly 2*(g1/g2)*x1[7] after equalizing.
    g1, g2 = gains
    residual = (fwd.samples - g1 * bpsk_map(b1_wrong).samples) / g2
    x1, x2 = bpsk_map(b1).samples, bpsk_map(b2).samples
    off = residual - x2
    assert np.allclose(off[7], 2.0 * (g1 / g2) * x1[7])
    mask = np.ones(32, dtype=bool)
    mask[7] = False
    assert np.allclose(off[mask], 0.0)
    _, est2 = analog_nc_destination_detect(fwd, (b1_wrong, b2), gains, Modulation.BPSK)
    assert count_bit_errors(est2, b2) <= 1


def test_analog_zero_relay_falls_back_to_direct():
    b1 = np.array([1, 0, 1], dtype=np.uint8)
    b2 = np.array([0, 0, 1], dtype=np.uint8)
    est1, est2 = analog_nc_destination_detect(None, (b1, b2), (0, 0), Modulation.BPSK)
    assert np.array_equal(est1, b1)
    assert np.array_equal(est2, b2)


def test_recover_analog_xor_demap_noiseless():
    rng = np.random.default_rng(7)
    b1 = rng.integers(0, 2, 20).astype(np.uint8)
    b2 = rng.integers(0, 2, 20).astype(np.uint8)
    fwd, gains, _ = _analog_setup(b1, b2)
    rec = ReceptionSet(
        relay_block=fwd,
        relay_branch_used=SchemeKind.ANALOG_NC,
        direct_s1=bpsk_map(b1),
        direct_s2=bpsk_map(b2),
        analog_gains=gains,
    )
    scheme = SchemeConfig(SchemeKind.ANALOG_NC, relay_rx_mode=RxMode.ORTHOGONAL)
    res = recover(rec, scheme, None, Modulation.BPSK, (b1, b2))
    assert res.per_source_bit_errors == (0, 0)


def test_recover_analog_cancellation_noiseless():
    rng = np.random.default_rng(8)
    b1 = rng.integers(0, 2, 20).astype(np.uint8)
    b2 = rng.integers(0, 2, 20).astype(np.uint8)
    fwd, gains, _ = _analog_setup(b1, b2)
    rec = ReceptionSet(
        relay_block=fwd,
        relay_branch_used=SchemeKind.ANALOG_NC,
        direct_s1=bpsk_map(b1),
        direct_s2=bpsk_map(b2),
        analog_gains=gains,
    )
    scheme = SchemeConfig(SchemeKind.ANALOG_NC, relay_rx_mode=RxMode.ORTHOGONAL)
    res = recover(rec, scheme, None, Modulation.BPSK, (b1, b2), AnalogDetector.CANCELLATION)
    assert res.per_source_bit_errors == (0, 0)


def test_recover_analog_cancellation_needs_directs():
    rng = np.random.default_rng(9)
    b1 = rng.integers(0, 2, 8).astype(np.uint8)
    b2 = rng.integers(0, 2, 8).astype(np.uint8)
    fwd, gains, _ = _analog_setup(b1, b2)
    rec = ReceptionSet(relay_block=fwd, relay_branch_used=SchemeKind.ANALOG_NC, analog_gains=gains)
    scheme = SchemeConfig(SchemeKind.ANALOG_NC, relay_rx_mode=RxMode.ORTHOGONAL)
    with pytest.raises(ConfigurationError):
        recover(rec, scheme, None, Modulation.BPSK, (b1, b2), AnalogDetector.CANCELLATION)


def test_recover_analog_needs_gains():
    b = np.array([0, 1], dtype=np.uint8)
    rec = ReceptionSet(
        relay_block=bpsk_map(b),
        relay_branch_used=SchemeKind.ANALOG_NC,
        direct_s1=bpsk_map(b),
        direct_s2=bpsk_map(b),
    )
    scheme = SchemeConfig(SchemeKind.ANALOG_NC, relay_rx_mode=RxMode.ORTHOGONAL)
    with pytest.raises(ConfigurationError):
        recover(rec, scheme, None, Modulation.BPSK, (b, b))


def test_recover_coded_chain_noiseless():
    rng = np.random.default_rng(10)
    b1 = rng.integers(0, 2, 25).astype(np.uint8)
    b2 = rng.integers(0, 2, 25).astype(np.uint8)
    relay = bpsk_map(conv_encode(b1 ^ b2, DEFAULT_CODE).bits)
    rec = ReceptionSet(
        relay_block=relay,
        relay_branch_used=SchemeKind.QDF_NC,
        direct_s1=bpsk_map(conv_encode(b1, DEFAULT_CODE).bits),
        direct_s2=bpsk_map(conv_encode(b2, DEFAULT_CODE).bits),
    )
    scheme = SchemeConfig(SchemeKind.QDF_NC)
    res = recover(rec, scheme, DEFAULT_CODE, Modulation.BPSK, (b1, b2))
    assert res.per_source_bit_errors == (0, 0)
    assert res.direct_bit_errors == (0, 0)
    assert res.xor_bit_errors == 0
