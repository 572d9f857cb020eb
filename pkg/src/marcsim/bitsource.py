"""Deterministic generation of random information packets for the two sources.

Every random quantity in the simulator is drawn from a counter-based Philox
generator keyed by ``(master_seed, stream_index)``.  Distinct stream indices
give statistically independent streams, so each (SNR point, packet, link)
unit of work can own a private stream and be simulated in any order, on any
number of workers, with bit-identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SOURCE_IDS = ("S1", "S2")


@dataclass(frozen=True)
class RngStream:
    """Handle for one independent random stream.

    The same ``(master_seed, stream_index)`` pair always yields the same
    sample sequence; ``generator()`` returns a fresh generator positioned at
    the start of the stream every time it is called.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.master_seed & 0xFFFFFFFFFFFFFFFF, self.stream_index & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Packet:
    """A finite sequence of information bits from one source in one slot."""

    bits: np.ndarray
    source_id: str

    def __post_init__(self) -> None:
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size == 0:
            raise ValueError("packet bits must be a nonempty 1-d sequence")
        if np.any(bits > 1):
            raise ValueError("packet bits must be 0 or 1")
        if self.source_id not in SOURCE_IDS:
            raise ValueError(f"source_id must be one of {SOURCE_IDS}")
        object.__setattr__(self, "bits", bits)

    @property
    def length(self) -> int:
        return int(self.bits.size)


def generate_packet(length: int, source_id: str, rng: RngStream | np.random.Generator) -> Packet:
    """Draw ``length`` i.i.d. uniform bits for the given source.

    Accepts either an :class:`RngStream` (re-derives the stream, so the same
    stream always produces the same packet) or a live generator.
    """
    if length < 1:
        raise ValueError("packet length must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    bits = gen.integers(0, 2, size=length, dtype=np.uint8)
    return Packet(bits=bits, source_id=source_id)
