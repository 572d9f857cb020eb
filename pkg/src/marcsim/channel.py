"""AWGN and flat block-Rayleigh link models with exact SNR calibration.

SNR is defined as Es/N0 at the receiver input with unit transmit symbol
energy, so the complex noise variance is N0 = 10**(-snr_db/10) (N0/2 per
real dimension).  ``snr_db = inf`` is the noiseless sentinel.  In block
fading one coefficient h = alpha * exp(-j*theta) is drawn per packet per
link, with alpha Rayleigh (E[alpha^2] = 1) and theta uniform on (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .modem import Modulation, SymbolBlock, tx_scale


class ChannelKind(str, Enum):
    AWGN = "awgn"
    RAYLEIGH_BLOCK = "rayleigh"


class LinkId(str, Enum):
    S1_TO_R = "S1R"
    S2_TO_R = "S2R"
    S1_TO_D = "S1D"
    S2_TO_D = "S2D"
    R_TO_D = "RD"


@dataclass(frozen=True)
class ChannelConfig:
    """Channel kind plus per-node transmit powers (defaults 1)."""

    kind: ChannelKind = ChannelKind.AWGN
    p_s1: float = 1.0
    p_s2: float = 1.0
    p_r: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if min(self.p_s1, self.p_s2) <= 0 or self.p_r < 0:
            raise ValueError("source powers must be > 0 and relay power >= 0")


@dataclass(frozen=True)
class ChannelDraw:
    """One realization of a link: coefficient, noise variance, SNR point."""

    h: complex
    noise_var: float
    snr_db: float
    link_id: LinkId


def noise_variance(snr_db: float) -> float:
    """Complex noise variance N0 for unit symbol energy; 0 at infinite SNR."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def draw_channel(
    config: ChannelConfig,
    link_id: LinkId,
    snr_db: float,
    rng: np.random.Generator,
) -> ChannelDraw:
    """Draw the per-packet link coefficient (h = 1 exactly in AWGN mode)."""
    if config.kind is ChannelKind.AWGN:
        h = 1.0 + 0.0j
    else:
        alpha = math.sqrt(rng.exponential(1.0))  # |h|^2 ~ Exp(1), E[alpha^2] = 1
        theta = rng.uniform(-math.pi, math.pi)
        h = alpha * complex(math.cos(theta), -math.sin(theta))
    return ChannelDraw(h=h, noise_var=noise_variance(snr_db), snr_db=snr_db, link_id=LinkId(link_id))


def _complex_noise(n: int, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    if noise_var == 0.0:
        return np.zeros(n, dtype=np.complex128)
    sigma = math.sqrt(noise_var / 2.0)
    return rng.standard_normal(n) * sigma + 1j * (rng.standard_normal(n) * sigma)


def apply_link(
    block: SymbolBlock,
    draw: ChannelDraw,
    power: float,
    rng: np.random.Generator,
) -> SymbolBlock:
    """y = sqrt(power) * h * x + z with z circularly symmetric CN(0, noise_var).

    The transmit scale is applied here; received blocks carry scale 1.
    """
    if len(block) == 0:
        raise ValueError("cannot transmit an empty block")
    y = math.sqrt(power) * draw.h * block.tx_samples
    y = y + _complex_noise(len(block), draw.noise_var, rng)
    return SymbolBlock(samples=y, modulation=block.modulation, scale=1.0)


def superpose(
    block1: SymbolBlock,
    block2: SymbolBlock,
    draw1: ChannelDraw,
    draw2: ChannelDraw,
    noise_var: float,
    rng: np.random.Generator,
    power1: float = 1.0,
    power2: float = 1.0,
) -> SymbolBlock:
    """Simultaneous reception of both sources with a single noise draw."""
    if len(block1) != len(block2):
        raise ValueError("superposed blocks must have equal length")
    y = math.sqrt(power1) * draw1.h * block1.tx_samples
    y = y + math.sqrt(power2) * draw2.h * block2.tx_samples
    y = y + _complex_noise(len(block1), noise_var, rng)
    return SymbolBlock(samples=y, modulation=block1.modulation, scale=1.0)


def equalize(block: SymbolBlock, draw: ChannelDraw, power: float = 1.0) -> SymbolBlock:
    """Undo the known link gain, restoring the scaled-constellation domain.

    The returned block carries the modulation's canonical transmit scale so
    the demappers can undo it; its noise variance is
    ``draw.noise_var / (power * |h|^2)``.
    """
    g = math.sqrt(power) * draw.h
    if g == 0:
        raise ValueError("cannot equalize a zero-gain link")
    return SymbolBlock(
        samples=block.samples / g,
        modulation=block.modulation,
        scale=tx_scale(Modulation(block.modulation)),
    )


def equalized_noise_var(draw: ChannelDraw, power: float = 1.0) -> float:
    """Noise variance seen in the equalized domain of ``equalize``."""
    return draw.noise_var / (power * abs(draw.h) ** 2)
