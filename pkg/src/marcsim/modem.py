"""Bit/symbol mapping for BPSK and 4-QAM, plus the superposed XOR de-mapper.

4-QAM uses the symbol order 0:-1+j, 1:-1-j, 2:1+j, 3:1-j with the first bit
of each pair as the MSB (symbol index = 2*b_msb + b_lsb).  Constellation
points are stored unscaled; the block's ``scale`` field carries the amplitude
normalization (1/sqrt(2) for 4-QAM) that makes the transmitted average
symbol energy exactly 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import sqrt

import numpy as np

from . import ConfigurationError


class Modulation(str, Enum):
    BPSK = "bpsk"
    QAM4 = "qam4"


BPSK_POINTS = np.array([-1.0 + 0.0j, 1.0 + 0.0j])
QAM4_POINTS = np.array([-1.0 + 1.0j, -1.0 - 1.0j, 1.0 + 1.0j, 1.0 - 1.0j])

_SCALE = {Modulation.BPSK: 1.0, Modulation.QAM4: 1.0 / sqrt(2.0)}
_BITS_PER_SYMBOL = {Modulation.BPSK: 1, Modulation.QAM4: 2}


def tx_scale(modulation: Modulation) -> float:
    """Amplitude applied at transmit so average symbol energy is 1."""
    return _SCALE[Modulation(modulation)]


def bits_per_symbol(modulation: Modulation) -> int:
    return _BITS_PER_SYMBOL[Modulation(modulation)]


@dataclass(frozen=True)
class SymbolBlock:
    """A block of complex baseband samples plus its modulation and scale."""

    samples: np.ndarray = field(repr=False)
    modulation: Modulation
    scale: float = 1.0

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-d")
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise ValueError("samples must be finite")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "modulation", Modulation(self.modulation))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def tx_samples(self) -> np.ndarray:
        """Samples with the transmit scale applied (what goes on the air)."""
        return self.samples * self.scale


def _as_bit_array(bits) -> np.ndarray:
    arr = np.ascontiguousarray(getattr(bits, "bits", bits), dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bits must be 1-d")
    if arr.size and arr.max() > 1:
        raise ValueError("bits must be 0 or 1")
    return arr


def bpsk_map(bits) -> SymbolBlock:
    """Map bit b to the real sample 2b - 1."""
    b = _as_bit_array(bits)
    return SymbolBlock(samples=2.0 * b - 1.0, modulation=Modulation.BPSK, scale=1.0)


def bpsk_demap(block: SymbolBlock) -> np.ndarray:
    """Sign decision on the real part; a tie at exactly 0 resolves to bit 1."""
    return (np.real(block.samples) / block.scale >= 0.0).astype(np.uint8)


def qam_map(bits) -> SymbolBlock:
    """Map bit pairs to 4-QAM symbols; first bit of the pair is the MSB."""
    b = _as_bit_array(bits)
    if b.size % 2 != 0:
        raise ValueError("4-QAM needs an even number of bits")
    pairs = b.reshape(-1, 2)
    idx = 2 * pairs[:, 0].astype(np.intp) + pairs[:, 1]
    return SymbolBlock(samples=QAM4_POINTS[idx], modulation=Modulation.QAM4, scale=tx_scale(Modulation.QAM4))


def _nearest_index(samples: np.ndarray, points: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, so equidistant samples resolve to the
    # lowest symbol index.
    d = np.abs(samples[:, None] - points[None, :])
    return np.argmin(d, axis=1)


def qam_demap(block: SymbolBlock) -> np.ndarray:
    """Nearest-constellation-point decisions after undoing the block scale."""
    idx = _nearest_index(block.samples / block.scale, QAM4_POINTS)
    out = np.empty((idx.size, 2), dtype=np.uint8)
    out[:, 0] = idx >> 1
    out[:, 1] = idx & 1
    return out.reshape(-1)


def demap(block: SymbolBlock) -> np.ndarray:
    """Demap a block with the rule matching its modulation."""
    if block.modulation is Modulation.BPSK:
        return bpsk_demap(block)
    return qam_demap(block)


def map_bits(bits, modulation: Modulation) -> SymbolBlock:
    """Map bits with the given modulation."""
    if Modulation(modulation) is Modulation.BPSK:
        return bpsk_map(bits)
    return qam_map(bits)


@lru_cache(maxsize=256)  # fading draws give fresh gains every packet
def _pair_table(modulation: Modulation, gain1: complex, gain2: complex):
    """Superposed constellation gain1*p_i + gain2*p_j with XOR labels.

    Pairs are ordered by XOR label so that argmin's first-minimum rule
    breaks distance ties toward the lowest label; for unit-gain BPSK this
    makes the decision exactly |Re(y)| >= 1 -> XOR 0.
    """
    pts = BPSK_POINTS if modulation is Modulation.BPSK else QAM4_POINTS
    m = len(pts)
    pairs = sorted(((i ^ j, i, j) for i in range(m) for j in range(m)))
    sums = np.array([gain1 * pts[i] + gain2 * pts[j] for _, i, j in pairs])
    xors = np.array([x for x, _, _ in pairs], dtype=np.intp)
    return sums, xors


def joint_xor_demap(
    superposed_samples,
    modulation: Modulation,
    gain1: complex = 1.0,
    gain2: complex = 1.0,
) -> np.ndarray:
    """Detect the XOR of the two transmitted bit labels from a superposition.

    ``gain1``/``gain2`` are the effective complex amplitudes multiplying each
    source's unscaled constellation point inside the received samples
    (i.e. sqrt(P)*h*scale and any relay normalization).  Detection is ML over
    all transmit pairs, returning the XOR of the detected pair's bit labels;
    for unit-gain BPSK this reduces to |Re(y)| >= 1 -> XOR 0.
    """
    try:
        modulation = Modulation(modulation)
    except ValueError as exc:
        raise ConfigurationError(f"unknown modulation: {modulation!r}") from exc
    samples = np.ascontiguousarray(
        getattr(superposed_samples, "samples", superposed_samples), dtype=np.complex128
    )
    sums, xors = _pair_table(modulation, complex(gain1), complex(gain2))
    lab = xors[_nearest_index(samples, sums)]
    if modulation is Modulation.BPSK:
        return lab.astype(np.uint8)
    out = np.empty((lab.size, 2), dtype=np.uint8)
    out[:, 0] = lab >> 1
    out[:, 1] = lab & 1
    return out.reshape(-1)
