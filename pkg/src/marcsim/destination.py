"""Receiver-side detection, decoding and XOR recovery of both sources.

The destination first detects each direct link, then turns the relay block
into an estimate of the XOR message and cross-recovers: source 2 is the XOR
message combined with the direct estimate of source 1, and vice versa.  For
the analog relay signal the XOR message is read straight off the superposed
constellation by default; a self-interference-cancellation detector (rebuild
one source from its direct estimate, subtract, detect the residual) is
available as an alternative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import ConfigurationError
from .fec import CodeConfig, conv_encode, viterbi_decode
from .modem import Modulation, SymbolBlock, demap, joint_xor_demap, map_bits
from .relay import SchemeConfig, SchemeKind


class Topology(str, Enum):
    DIRECT = "direct"
    NO_DIRECT = "no-direct"


class AnalogDetector(str, Enum):
    XOR_DEMAP = "xor-demap"
    CANCELLATION = "cancellation"


@dataclass(frozen=True)
class ReceptionSet:
    """Everything the destination hears for one packet, already equalized.

    ``relay_block`` is the R->D reception with the relay link gain removed.
    When the relay forwarded an analog sum, ``analog_gains`` holds the
    effective complex amplitude of each source's unscaled constellation
    point inside that block (sqrt(P)*h*scale/beta).
    """

    relay_block: SymbolBlock | None
    relay_branch_used: SchemeKind
    direct_s1: SymbolBlock | None = None
    direct_s2: SymbolBlock | None = None
    analog_gains: tuple[complex, complex] | None = None

    def __post_init__(self) -> None:
        if self.relay_block is None and (self.direct_s1 is None or self.direct_s2 is None):
            raise ConfigurationError("reception needs a relay block or both direct links")

    @property
    def has_direct(self) -> bool:
        return self.direct_s1 is not None or self.direct_s2 is not None


@dataclass(frozen=True)
class RecoveryResult:
    """Per-source estimates and error counts for one packet.

    Without direct links only the XOR message can be checked, so the
    per-source fields are None and ``xor_bit_errors`` carries the count.
    A source whose recovery needs a missing direct link gets a None entry.
    """

    est_s1: np.ndarray | None = field(default=None, repr=False)
    est_s2: np.ndarray | None = field(default=None, repr=False)
    per_source_bit_errors: tuple[int | None, int | None] | None = None
    direct_bit_errors: tuple[int | None, int | None] | None = None
    xor_bit_errors: int | None = None


def count_bit_errors(estimate, truth) -> int:
    """Hamming distance between two equal-length bit sequences."""
    a = np.ascontiguousarray(getattr(estimate, "bits", estimate), dtype=np.uint8)
    b = np.ascontiguousarray(getattr(truth, "bits", truth), dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError("sequences must have equal length")
    return int(np.count_nonzero(a != b))


def _detect_info(block: SymbolBlock, code: CodeConfig | None, info_length: int) -> np.ndarray:
    bits = demap(block)
    if code is None:
        return bits
    return viterbi_decode(bits, info_length, code)


def _decode_xor_bits(xor_coded: np.ndarray, code: CodeConfig | None, info_length: int) -> np.ndarray:
    if code is None:
        return xor_coded
    # The code is linear, so the XOR of two codewords decodes to the XOR of
    # the information words.
    return viterbi_decode(xor_coded, info_length, code)


def analog_nc_destination_detect(
    relay_block: SymbolBlock | None,
    direct_estimates: tuple[np.ndarray, np.ndarray],
    gains: tuple[complex, complex],
    modulation: Modulation,
    code: CodeConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Self-interference cancellation on the analog relay block.

    Rebuilds each source's transmit signal from its direct-link estimate,
    subtracts it from the relay block, and detects the other source in the
    residual.  With a dead relay (no block, or both gains zero) the direct
    estimates are returned unchanged.
    """
    b1d, b2d = direct_estimates
    g1, g2 = complex(gains[0]), complex(gains[1])
    if relay_block is None or (g1 == 0 and g2 == 0):
        return np.asarray(b1d, dtype=np.uint8), np.asarray(b2d, dtype=np.uint8)

    def rebuild(info_bits: np.ndarray) -> np.ndarray:
        coded = conv_encode(info_bits, code).bits if code is not None else info_bits
        return map_bits(coded, modulation).samples

    info_length = len(b1d)

    def detect_other(own_bits: np.ndarray, g_own: complex, g_other: complex, fallback: np.ndarray):
        if g_other == 0:
            return np.asarray(fallback, dtype=np.uint8)
        residual = (relay_block.samples - g_own * rebuild(own_bits)) / g_other
        block = SymbolBlock(samples=residual, modulation=modulation, scale=1.0)
        return _detect_info(block, code, info_length)

    est_s2 = detect_other(b1d, g1, g2, b2d)
    est_s1 = detect_other(b2d, g2, g1, b1d)
    return est_s1, est_s2


def recover(
    reception: ReceptionSet,
    scheme: SchemeConfig,
    code: CodeConfig | None,
    modulation: Modulation,
    truth: tuple,
    analog_detector: AnalogDetector = AnalogDetector.XOR_DEMAP,
) -> RecoveryResult:
    """Recover both source messages and count bit errors against the truth.

    The final per-source estimate is the XOR-assisted path: the relay's XOR
    message combined with the other source's direct estimate.  Direct-only
    error counts are reported alongside for comparison.
    """
    b1 = np.ascontiguousarray(getattr(truth[0], "bits", truth[0]), dtype=np.uint8)
    b2 = np.ascontiguousarray(getattr(truth[1], "bits", truth[1]), dtype=np.uint8)
    if b1.size != b2.size:
        raise ValueError("source packets must have equal length")
    info_length = int(b1.size)
    branch = SchemeKind(reception.relay_branch_used)
    analog_detector = AnalogDetector(analog_detector)

    if branch is SchemeKind.ANALOG_NC and reception.analog_gains is None:
        raise ConfigurationError("analog relay block needs its effective gains")

    b1d = b2d = None
    if reception.direct_s1 is not None:
        b1d = _detect_info(reception.direct_s1, code, info_length)
    if reception.direct_s2 is not None:
        b2d = _detect_info(reception.direct_s2, code, info_length)

    if reception.relay_block is None:
        # Dead relay (e.g. zero relay power): only the direct estimates exist.
        return RecoveryResult(
            est_s1=b1d,
            est_s2=b2d,
            per_source_bit_errors=(count_bit_errors(b1d, b1), count_bit_errors(b2d, b2)),
            direct_bit_errors=(count_bit_errors(b1d, b1), count_bit_errors(b2d, b2)),
        )

    if branch is SchemeKind.ANALOG_NC and analog_detector is AnalogDetector.CANCELLATION:
        if b1d is None or b2d is None:
            raise ConfigurationError(
                "cancellation detection needs both direct links to rebuild from"
            )
        est_s1, est_s2 = analog_nc_destination_detect(
            reception.relay_block, (b1d, b2d), reception.analog_gains, modulation, code
        )
        return RecoveryResult(
            est_s1=est_s1,
            est_s2=est_s2,
            per_source_bit_errors=(count_bit_errors(est_s1, b1), count_bit_errors(est_s2, b2)),
            direct_bit_errors=(count_bit_errors(b1d, b1), count_bit_errors(b2d, b2)),
        )

    if branch is SchemeKind.ANALOG_NC:
        g1, g2 = reception.analog_gains
        xor_coded = joint_xor_demap(reception.relay_block.samples, modulation, g1, g2)
        xor_hat = _decode_xor_bits(xor_coded, code, info_length)
    else:
        xor_hat = _decode_xor_bits(demap(reception.relay_block), code, info_length)

    if not reception.has_direct:
        return RecoveryResult(xor_bit_errors=count_bit_errors(xor_hat, b1 ^ b2))

    est_s1 = xor_hat ^ b2d if b2d is not None else None
    est_s2 = xor_hat ^ b1d if b1d is not None else None
    return RecoveryResult(
        est_s1=est_s1,
        est_s2=est_s2,
        per_source_bit_errors=(
            None if est_s1 is None else count_bit_errors(est_s1, b1),
            None if est_s2 is None else count_bit_errors(est_s2, b2),
        ),
        direct_bit_errors=(
            None if b1d is None else count_bit_errors(b1d, b1),
            None if b2d is None else count_bit_errors(b2d, b2),
        ),
        xor_bit_errors=count_bit_errors(xor_hat, b1 ^ b2),
    )
