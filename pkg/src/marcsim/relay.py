"""Relay-side forwarding schemes and the adaptive per-packet selector.

All digital pipelines operate on equalized receptions (perfect CSI at the
relay), so their hard decisions do not depend on the channel phase.  The
analog scheme never detects anything: it normalizes its reception to unit
average energy and retransmits it.

The adaptive selector compares a per-packet error-probability estimate
against a threshold ``p_th``: above the threshold the relay regenerates
(QDF-NC), otherwise it forwards the analog normalized sum.  Two estimators
are provided:

* :func:`estimate_raw_ber` - averages the per-bit error probability implied
  by each received sample and the known noise level.  It spans [0, 0.5] and
  is the statistic the selector uses.
* :func:`estimate_ber_proxy` - the fraction of hard decisions that disagree
  with the re-encoded Viterbi decision.  Useful as a decode-quality
  diagnostic, but it is capped near the code's covering fraction (~0.13 for
  the default rate-1/2 code) because the decoder always returns the nearest
  codeword, so it cannot discriminate channels worse than that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import ConfigurationError
from .fec import CodeConfig, conv_encode, viterbi_decode
from .modem import Modulation, SymbolBlock, demap, joint_xor_demap, map_bits


class SchemeKind(str, Enum):
    ANALOG_NC = "analog-nc"
    DMNC = "dmnc"
    DF_NC = "df-nc"
    QDF_NC = "qdf-nc"
    ADAPTIVE = "adaptive"


class RxMode(str, Enum):
    ORTHOGONAL = "orthogonal"
    SUPERPOSED = "superposed"


@dataclass(frozen=True)
class SchemeConfig:
    """Choice of relay scheme with its parameters."""

    kind: SchemeKind
    p_th: float | None = None
    quantizer_bits: int = 3
    relay_rx_mode: RxMode = RxMode.ORTHOGONAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        object.__setattr__(self, "relay_rx_mode", RxMode(self.relay_rx_mode))
        if self.kind is SchemeKind.ADAPTIVE:
            if self.p_th is None:
                raise ConfigurationError("adaptive scheme requires p_th")
            if not 0.0 <= self.p_th <= 1.0:
                raise ConfigurationError("p_th must be in [0, 1]")
        if self.quantizer_bits < 1:
            raise ConfigurationError("quantizer_bits must be >= 1")
        if self.kind in (SchemeKind.DF_NC, SchemeKind.QDF_NC, SchemeKind.ADAPTIVE):
            if self.relay_rx_mode is not RxMode.ORTHOGONAL:
                raise ConfigurationError(f"{self.kind.value} requires orthogonal relay reception")


@dataclass(frozen=True)
class Quantizer:
    """Uniform midrise scalar quantizer over [-clip, clip], per re/im part."""

    bits: int
    clip: float

    def __post_init__(self) -> None:
        if self.bits < 1:
            raise ValueError("quantizer bits must be >= 1")
        if not self.clip > 0:
            raise ValueError("clip range must be positive")

    @property
    def n_levels(self) -> int:
        return 1 << self.bits

    @property
    def step(self) -> float:
        return 2.0 * self.clip / self.n_levels

    @property
    def levels(self) -> np.ndarray:
        """Reconstruction points, symmetric about 0."""
        return -self.clip + (np.arange(self.n_levels) + 0.5) * self.step

    @classmethod
    def fit(cls, bits: int, samples, noise_var: float = 0.0) -> "Quantizer":
        """Data-driven range: 4 * (block RMS + per-dimension noise std).

        Keeps the clipping probability negligible at any simulated SNR
        without requiring a configured range.
        """
        x = np.ascontiguousarray(getattr(samples, "samples", samples), dtype=np.complex128)
        rms = math.sqrt(float(np.mean(np.abs(x) ** 2))) if x.size else 1.0
        clip = 4.0 * (rms + math.sqrt(max(noise_var, 0.0) / 2.0))
        return cls(bits=bits, clip=clip if clip > 0 else 1.0)

    def _quantize_real(self, x: np.ndarray) -> np.ndarray:
        # Cell index via ceil-minus-one so a value exactly on a cell boundary
        # (equidistant between two levels) snaps to the lower level.
        k = np.ceil((x + self.clip) / self.step) - 1.0
        k = np.clip(k, 0, self.n_levels - 1)
        return -self.clip + (k + 0.5) * self.step


def quantize(block: SymbolBlock, q: Quantizer) -> SymbolBlock:
    """Clamp and snap each sample's re and im independently."""
    re = q._quantize_real(np.real(block.samples))
    im = q._quantize_real(np.imag(block.samples))
    return SymbolBlock(samples=re + 1j * im, modulation=block.modulation, scale=block.scale)


def analog_nc_forward(y_r: SymbolBlock) -> SymbolBlock:
    """Normalize the reception by its RMS so the forwarded energy is 1."""
    power = float(np.mean(np.abs(y_r.samples) ** 2))
    if power == 0.0:
        raise ValueError("cannot normalize an all-zero block")
    beta = math.sqrt(power)
    return SymbolBlock(samples=y_r.samples / beta, modulation=y_r.modulation, scale=1.0)


def _xor_remap(xor_bits: np.ndarray, modulation: Modulation) -> SymbolBlock:
    return map_bits(xor_bits, modulation)


def dmnc_forward(
    reception,
    modulation: Modulation,
    gain1: complex = 1.0,
    gain2: complex = 1.0,
) -> SymbolBlock:
    """De-map, XOR and re-map without any decoding.

    ``reception`` is either a pair of equalized per-source blocks
    (orthogonal reception) or a single superposed block, in which case the
    XOR bits are detected directly on the superposed constellation using the
    given effective gains.
    """
    if isinstance(reception, SymbolBlock):
        xor_bits = joint_xor_demap(reception, modulation, gain1, gain2)
    else:
        y1, y2 = reception
        if len(y1) != len(y2):
            raise ValueError("per-source receptions must have equal length")
        xor_bits = demap(y1) ^ demap(y2)
    return _xor_remap(xor_bits, modulation)


def _infer_info_length(n_coded_bits: int, code: CodeConfig) -> int:
    n_tuples, rem = divmod(n_coded_bits, code.n_outputs)
    info_length = n_tuples - code.memory
    if rem or info_length < 1:
        raise ValueError("reception length is not a codeword length for this code")
    return info_length


def df_nc_forward(
    y1: SymbolBlock,
    y2: SymbolBlock,
    code: CodeConfig,
    modulation: Modulation,
    info_length: int | None = None,
) -> SymbolBlock:
    """Decode both streams, XOR the information bits, re-encode, re-map."""
    r1, r2 = demap(y1), demap(y2)
    if info_length is None:
        info_length = _infer_info_length(r1.size, code)
    b1 = viterbi_decode(r1, info_length, code)
    b2 = viterbi_decode(r2, info_length, code)
    return _xor_remap(conv_encode(b1 ^ b2, code).bits, modulation)


def qdf_nc_forward(
    y1: SymbolBlock,
    y2: SymbolBlock,
    q: Quantizer,
    code: CodeConfig,
    modulation: Modulation,
    info_length: int | None = None,
) -> SymbolBlock:
    """Quantize, decode, XOR, re-encode, re-map."""
    return df_nc_forward(quantize(y1, q), quantize(y2, q), code, modulation, info_length)


def equivalent_noise_stats(hard_bits, reference_bits) -> tuple[float, float]:
    """Sample mean and variance of the equivalent noise 1 - b*b_hat.

    Both inputs are bipolar (+/-1) sequences of equal length.  The mean is
    twice the mismatch fraction; the variance uses the same 1/N norm.
    """
    b = np.ascontiguousarray(hard_bits, dtype=np.float64)
    ref = np.ascontiguousarray(reference_bits, dtype=np.float64)
    if b.size == 0 or ref.size == 0:
        raise ValueError("equivalent noise stats need nonempty inputs")
    if b.shape != ref.shape:
        raise ValueError("sequences must have equal length")
    if np.any(np.abs(b) != 1.0) or np.any(np.abs(ref) != 1.0):
        raise ValueError("sequences must be bipolar (+/-1)")
    z = 1.0 - b * ref
    mu = float(np.mean(z))
    sigma2 = float(np.mean((z - mu) ** 2))
    return mu, sigma2


def _bipolar(bits: np.ndarray) -> np.ndarray:
    return 2.0 * bits.astype(np.float64) - 1.0


def estimate_ber_proxy(
    y_r: SymbolBlock,
    code: CodeConfig,
    modulation: Modulation,
    info_length: int | None = None,
) -> float:
    """Fraction of raw hard decisions the decoder's re-encoded word corrects.

    De-maps the block, decodes, re-encodes, and returns half the mean of the
    equivalent noise between the cleaned and raw bipolar decisions.  Zero on
    a noiseless block; see the module docstring for the saturation caveat.
    """
    raw = demap(y_r)
    if info_length is None:
        info_length = _infer_info_length(raw.size, code)
    decoded = viterbi_decode(raw, info_length, code)
    clean = conv_encode(decoded, code).bits
    mu, _ = equivalent_noise_stats(_bipolar(clean), _bipolar(raw))
    return mu / 2.0


def estimate_raw_ber(block: SymbolBlock, noise_var: float) -> float:
    """Average per-bit error probability implied by the received samples.

    For each constellation dimension the posterior error probability of the
    hard decision is 1 / (1 + exp(|L|)) with L the channel LLR computed from
    the known noise level (perfect CSI); the packet estimate is the average.
    Spans [0, 0.5); exactly 0 when the noise variance is 0.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be >= 0")
    if noise_var == 0.0:
        return 0.0
    amp = block.scale
    per_dim_var = noise_var / 2.0
    if Modulation(block.modulation) is Modulation.BPSK:
        dims = np.abs(np.real(block.samples))
    else:
        dims = np.abs(block.samples.view(np.float64))
    llr_mag = np.minimum(2.0 * amp * dims / per_dim_var, 700.0)  # exp overflow guard
    return float(np.mean(1.0 / (1.0 + np.exp(llr_mag))))


@dataclass(frozen=True)
class RelayDecision:
    """Outcome of the adaptive selection for one packet."""

    chosen: SchemeKind
    p_ber: float
    mu_z: float
    sigma2_z: float


def adaptive_select(p_ber: float, p_th: float) -> RelayDecision:
    """Regenerate (QDF-NC) iff the error probability strictly exceeds p_th.

    Equality takes the analog branch.  The reported mu/sigma^2 are the
    moments of the two-point equivalent-noise process implied by p_ber.
    """
    if not 0.0 <= p_ber <= 1.0:
        raise ValueError("p_ber must be in [0, 1]")
    if not 0.0 <= p_th <= 1.0:
        raise ValueError("p_th must be in [0, 1]")
    chosen = SchemeKind.QDF_NC if p_ber > p_th else SchemeKind.ANALOG_NC
    return RelayDecision(
        chosen=chosen,
        p_ber=p_ber,
        mu_z=2.0 * p_ber,
        sigma2_z=4.0 * p_ber * (1.0 - p_ber),
    )


def adaptive_relay_forward(
    y1_raw: SymbolBlock,
    y2_raw: SymbolBlock,
    y1_eq: SymbolBlock,
    y2_eq: SymbolBlock,
    scheme: SchemeConfig,
    code: CodeConfig,
    info_length: int,
    noise_var1: float,
    noise_var2: float,
) -> tuple[SymbolBlock, RelayDecision]:
    """Per-packet switch between QDF-NC and the analog normalized sum.

    The decision statistic is the worse of the two streams' estimated raw
    error probabilities (computed on the equalized receptions), so the
    decoder only runs when at least one stream looks unreliable enough to
    need regeneration.  The analog branch forwards the normalized sum of the
    raw receptions; the QDF branch re-maps with BPSK.
    """
    p_ber = max(estimate_raw_ber(y1_eq, noise_var1), estimate_raw_ber(y2_eq, noise_var2))
    decision = adaptive_select(p_ber, scheme.p_th)
    if decision.chosen is SchemeKind.QDF_NC:
        q = Quantizer.fit(
            scheme.quantizer_bits,
            np.concatenate([y1_eq.samples, y2_eq.samples]),
            max(noise_var1, noise_var2),
        )
        forwarded = qdf_nc_forward(y1_eq, y2_eq, q, code, Modulation.BPSK, info_length)
    else:
        combined = SymbolBlock(
            samples=y1_raw.samples + y2_raw.samples, modulation=y1_raw.modulation, scale=1.0
        )
        forwarded = analog_nc_forward(combined)
    return forwarded, decision
