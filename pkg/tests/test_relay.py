import math

import numpy as np
import pytest

from marcsim import ConfigurationError
from marcsim.fec import DEFAULT_CODE, conv_encode, viterbi_decode
from marcsim.modem import Modulation, SymbolBlock, bpsk_map, demap, qam_map
from marcsim.relay import (
    Quantizer,
    RxMode,
    SchemeConfig,
    SchemeKind,
    adaptive_select,
    analog_nc_forward,
    df_nc_forward,
    dmnc_forward,
    equivalent_noise_stats,
    estimate_ber_proxy,
    estimate_raw_ber,
    qdf_nc_forward,
    quantize,
)

S = 1.0 / math.sqrt(2.0)


# --- analog normalization ---------------------------------------------------

def test_analog_unit_energy_input_unchanged():
    blk = SymbolBlock(np.array([1.0, -1.0, 1j, -1j]), Modulation.BPSK)
    out = analog_nc_forward(blk)
    assert np.allclose(out.samples, blk.samples)


def test_analog_hand_computed_rms():
    blk = SymbolBlock(np.array([2.0 + 0j, 0.0 + 0j]), Modulation.BPSK)
    out = analog_nc_forward(blk)
    assert np.allclose(out.samples, [math.sqrt(2.0), 0.0])
    assert np.mean(np.abs(out.samples) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_analog_scale_invariance():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    a = analog_nc_forward(SymbolBlock(x, Modulation.QAM4))
    b = analog_nc_forward(SymbolBlock(3.7 * x, Modulation.QAM4))
    assert np.allclose(a.samples, b.samples, atol=1e-12)


def test_analog_zero_block_rejected():
    with pytest.raises(ValueError):
        analog_nc_forward(SymbolBlock(np.zeros(4, dtype=complex), Modulation.BPSK))


# --- quantizer ---------------------------------------------------------------

def test_quantizer_error_bound():
    q = Quantizer(bits=8, clip=4.0)
    rng = np.random.default_rng(1)
    x = rng.uniform(-6, 6, 5000) + 1j * rng.uniform(-6, 6, 5000)
    out = quantize(SymbolBlock(x, Modulation.BPSK), q)
    for part in (np.real, np.imag):
        clamped = np.clip(part(x), -q.clip, q.clip)
        assert np.all(np.abs(part(out.samples) - clamped) <= q.step / 2 + 1e-12)


def test_quantizer_clipping():
    q = Quantizer(bits=4, clip=2.0)
    out = quantize(SymbolBlock(np.array([100.0 + 0j]), Modulation.BPSK), q)
    assert out.samples[0].real == pytest.approx(2.0 - q.step / 2)


def test_quantizer_tie_snaps_to_lower_level():
    q = Quantizer(bits=2, clip=2.0)  # levels -1.5, -0.5, 0.5, 1.5; boundaries -1, 0, 1
    out = quantize(SymbolBlock(np.array([0.0 + 1j]), Modulation.BPSK), q)
    assert out.samples[0].real == pytest.approx(-0.5)
    assert out.samples[0].imag == pytest.approx(0.5)


def test_quantizer_levels_symmetric():
    q = Quantizer(bits=3, clip=4.0)
    assert np.allclose(q.levels, -q.levels[::-1])


def test_one_bit_quantizer_preserves_hard_decisions():
    rng = np.random.default_rng(2)
    y = SymbolBlock(rng.standard_normal(2000) + 1j * rng.standard_normal(2000), Modulation.QAM4, scale=S)
    q = Quantizer.fit(1, y.samples)
    assert np.array_equal(demap(quantize(y, q)), demap(y))


# --- forwarding pipelines ----------------------------------------------------

def test_dmnc_orthogonal_xors_and_remaps():
    y1 = qam_map(np.array([0, 0], dtype=np.uint8))
    y2 = qam_map(np.array([1, 1], dtype=np.uint8))
    fwd = dmnc_forward((y1, y2), Modulation.QAM4)
    assert np.allclose(fwd.samples, qam_map(np.array([1, 1], dtype=np.uint8)).samples)


def test_dmnc_identical_streams_give_zero_word():
    y = qam_map(np.array([1, 0, 0, 1], dtype=np.uint8))
    fwd = dmnc_forward((y, y), Modulation.QAM4)
    assert np.allclose(fwd.samples, np.full(2, -1 + 1j))


def test_dmnc_superposed_bpsk_boundary_map():
    y = SymbolBlock(np.array([2.0, 0.0, -2.0]), Modulation.BPSK)
    fwd = dmnc_forward(y, Modulation.BPSK)
    assert np.allclose(fwd.samples, [-1.0, 1.0, -1.0])


def test_dmnc_length_mismatch_rejected():
    y1 = qam_map(np.array([0, 0], dtype=np.uint8))
    y2 = qam_map(np.array([0, 0, 1, 1], dtype=np.uint8))
    with pytest.raises(ValueError):
        dmnc_forward((y1, y2), Modulation.QAM4)


def _coded_blocks(info1, info2, code=DEFAULT_CODE):
    x1 = bpsk_map(conv_encode(info1, code).bits)
    x2 = bpsk_map(conv_encode(info2, code).bits)
    return x1, x2


def test_df_noiseless_forwards_encoded_xor():
    rng = np.random.default_rng(3)
    b1 = rng.integers(0, 2, 24).astype(np.uint8)
    b2 = rng.integers(0, 2, 24).astype(np.uint8)
    y1, y2 = _coded_blocks(b1, b2)
    fwd = df_nc_forward(y1, y2, DEFAULT_CODE, Modulation.BPSK)
    expect = bpsk_map(conv_encode(b1 ^ b2, DEFAULT_CODE).bits)
    assert np.allclose(fwd.samples, expect.samples)


def test_df_equal_sources_forward_zero_info():
    b = np.ones(16, dtype=np.uint8)
    y1, y2 = _coded_blocks(b, b)
    fwd = df_nc_forward(y1, y2, DEFAULT_CODE, Modulation.BPSK)
    assert np.allclose(fwd.samples, -np.ones(2 * (16 + 5)))


def test_df_corrects_within_radius():
    rng = np.random.default_rng(4)
    b1 = rng.integers(0, 2, 30).astype(np.uint8)
    b2 = rng.integers(0, 2, 30).astype(np.uint8)
    y1, y2 = _coded_blocks(b1, b2)
    noisy = y1.samples.copy()
    flips = rng.choice(noisy.size, 3, replace=False)  # within (d_free-1)/2 = 3
    noisy[flips] *= -1
    y1_noisy = SymbolBlock(noisy, Modulation.BPSK)
    clean = df_nc_forward(y1, y2, DEFAULT_CODE, Modulation.BPSK)
    fwd = df_nc_forward(y1_noisy, y2, DEFAULT_CODE, Modulation.BPSK)
    assert np.allclose(fwd.samples, clean.samples)


def test_qdf_noiseless_equals_df():
    rng = np.random.default_rng(5)
    b1 = rng.integers(0, 2, 20).astype(np.uint8)
    b2 = rng.integers(0, 2, 20).astype(np.uint8)
    y1, y2 = _coded_blocks(b1, b2)
    q = Quantizer(bits=2, clip=2.0)
    fwd_q = qdf_nc_forward(y1, y2, q, DEFAULT_CODE, Modulation.BPSK)
    fwd_d = df_nc_forward(y1, y2, DEFAULT_CODE, Modulation.BPSK)
    assert np.allclose(fwd_q.samples, fwd_d.samples)


def test_qdf_one_bit_equals_df_on_noisy_blocks():
    rng = np.random.default_rng(6)
    b1 = rng.integers(0, 2, 40).astype(np.uint8)
    b2 = rng.integers(0, 2, 40).astype(np.uint8)
    y1, y2 = _coded_blocks(b1, b2)
    noisy1 = SymbolBlock(y1.samples + 0.6 * rng.standard_normal(len(y1)), Modulation.BPSK)
    noisy2 = SymbolBlock(y2.samples + 0.6 * rng.standard_normal(len(y2)), Modulation.BPSK)
    q = Quantizer.fit(1, np.concatenate([noisy1.samples, noisy2.samples]))
    fwd_q = qdf_nc_forward(noisy1, noisy2, q, DEFAULT_CODE, Modulation.BPSK)
    fwd_d = df_nc_forward(noisy1, noisy2, DEFAULT_CODE, Modulation.BPSK)
    assert np.allclose(fwd_q.samples, fwd_d.samples)


def test_qdf_all_zero_sources():
    b = np.zeros(12, dtype=np.uint8)
    y1, y2 = _coded_blocks(b, b)
    q = Quantizer(bits=3, clip=4.0)
    fwd = qdf_nc_forward(y1, y2, q, DEFAULT_CODE, Modulation.BPSK)
    assert np.allclose(fwd.samples, -np.ones(2 * (12 + 5)))


# --- equivalent noise stats and error estimators ------------------------------

def test_equivalent_noise_all_agree():
    b = np.array([1.0, -1.0, 1.0, -1.0])
    assert equivalent_noise_stats(b, b) == (0.0, 0.0)


def test_equivalent_noise_all_disagree():
    b = np.array([1.0, -1.0, 1.0])
    mu, s2 = equivalent_noise_stats(b, -b)
    assert mu == pytest.approx(2.0)
    assert s2 == pytest.approx(0.0)


def test_equivalent_noise_half_disagree():
    b = np.array([1.0, 1.0, -1.0, -1.0])
    ref = np.array([1.0, -1.0, -1.0, 1.0])
    mu, s2 = equivalent_noise_stats(b, ref)
    assert mu == pytest.approx(1.0)
    assert s2 == pytest.approx(1.0)


def test_equivalent_noise_validation():
    with pytest.raises(ValueError):
        equivalent_noise_stats(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        equivalent_noise_stats(np.array([1.0, 0.5]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        equivalent_noise_stats(np.array([1.0]), np.array([1.0, -1.0]))


def test_mismatch_formula_thirty_of_hundred():
    # 30 disagreements out of 100 positions: mu_z = 0.6, proxy = mu_z/2 = 0.30.
    clean = np.ones(100)
    raw = np.ones(100)
    raw[:30] = -1.0
    mu, _ = equivalent_noise_stats(clean, raw)
    assert mu / 2.0 == pytest.approx(0.30)


def test_ber_proxy_zero_on_noiseless():
    b = np.random.default_rng(7).integers(0, 2, 50).astype(np.uint8)
    y = bpsk_map(conv_encode(b, DEFAULT_CODE).bits)
    assert estimate_ber_proxy(y, DEFAULT_CODE, Modulation.BPSK) == 0.0


def test_ber_proxy_matches_independent_recount():
    rng = np.random.default_rng(8)
    b = rng.integers(0, 2, 100).astype(np.uint8)
    clean_tx = bpsk_map(conv_encode(b, DEFAULT_CODE).bits)
    y = SymbolBlock(clean_tx.samples + 0.8 * rng.standard_normal(len(clean_tx)), Modulation.BPSK)
    proxy = estimate_ber_proxy(y, DEFAULT_CODE, Modulation.BPSK)
    raw = demap(y)
    redecoded = conv_encode(viterbi_decode(raw, 100, DEFAULT_CODE), DEFAULT_CODE).bits
    assert proxy == pytest.approx(np.mean(redecoded != raw))
    assert 0.0 <= proxy <= 1.0


def test_ber_proxy_monotone_in_snr():
    rng = np.random.default_rng(9)
    means = []
    for snr_db in (0.0, 4.0, 8.0, 12.0):
        sigma = math.sqrt(10 ** (-snr_db / 10) / 2)
        vals = []
        for _ in range(40):
            b = rng.integers(0, 2, 200).astype(np.uint8)
            x = bpsk_map(conv_encode(b, DEFAULT_CODE).bits)
            y = SymbolBlock(
                x.samples + sigma * (rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x))),
                Modulation.BPSK,
            )
            vals.append(estimate_ber_proxy(y, DEFAULT_CODE, Modulation.BPSK))
        means.append(np.mean(vals))
    assert means[0] > means[1] > means[2] > means[3]


def test_raw_ber_estimate_tracks_channel_error_rate():
    rng = np.random.default_rng(10)
    n = 40_000
    bits = rng.integers(0, 2, n).astype(np.uint8)
    x = bpsk_map(bits)
    for snr_db in (-6.0, 0.0, 6.0):
        nv = 10 ** (-snr_db / 10)
        sigma = math.sqrt(nv / 2)
        y = SymbolBlock(
            x.samples + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n)),
            Modulation.BPSK,
        )
        est = estimate_raw_ber(y, nv)
        theory = 0.5 * math.erfc(math.sqrt(10 ** (snr_db / 10)))
        assert est == pytest.approx(theory, rel=0.05, abs=2e-3)


def test_raw_ber_estimate_zero_noise():
    y = bpsk_map(np.array([0, 1], dtype=np.uint8))
    assert estimate_raw_ber(y, 0.0) == 0.0


# --- adaptive selection --------------------------------------------------------

def test_adaptive_select_above_threshold():
    d = adaptive_select(0.35, 0.2)
    assert d.chosen is SchemeKind.QDF_NC
    assert d.p_ber == 0.35
    assert d.mu_z == pytest.approx(0.7)
    assert d.sigma2_z == pytest.approx(4 * 0.35 * 0.65)


def test_adaptive_select_below_threshold():
    assert adaptive_select(0.10, 0.2).chosen is SchemeKind.ANALOG_NC


def test_adaptive_select_boundary_is_analog():
    assert adaptive_select(0.2, 0.2).chosen is SchemeKind.ANALOG_NC


def test_adaptive_select_range_validation():
    with pytest.raises(ValueError):
        adaptive_select(1.5, 0.2)
    with pytest.raises(ValueError):
        adaptive_select(0.2, -0.1)


def test_scheme_config_validation():
    with pytest.raises(ConfigurationError):
        SchemeConfig(SchemeKind.ADAPTIVE)  # missing p_th
    with pytest.raises(ConfigurationError):
        SchemeConfig(SchemeKind.ADAPTIVE, p_th=1.5)
    with pytest.raises(ConfigurationError):
        SchemeConfig(SchemeKind.QDF_NC, relay_rx_mode=RxMode.SUPERPOSED)
    with pytest.raises(ConfigurationError):
        SchemeConfig(SchemeKind.DF_NC, relay_rx_mode=RxMode.SUPERPOSED)


def test_xor_involution_at_scheme_level():
    # Recovering either source from the forwarded XOR message is exact for
    # noiseless digital schemes.
    rng = np.random.default_rng(11)
    for _ in range(10):
        b1 = rng.integers(0, 2, 12).astype(np.uint8)
        b2 = rng.integers(0, 2, 12).astype(np.uint8)
        y1, y2 = _coded_blocks(b1, b2)
        fwd = df_nc_forward(y1, y2, DEFAULT_CODE, Modulation.BPSK)
        xor_info = viterbi_decode(demap(fwd), 12, DEFAULT_CODE)
        assert np.array_equal(xor_info ^ b1, b2)
        assert np.array_equal(xor_info ^ b2, b1)
