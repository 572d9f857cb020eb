"""Convolutional encoder and hard-decision Viterbi decoder.

Rate 1/n feedforward codes with zero-tail termination.  Generators are
given as octal integers read MSB-first over ``constraint_length`` register
taps (the usual simulator convention), so the encoder's impulse response per
branch is the zero-padded binary expansion of the generator.

The shipped default is ``CodeConfig(6, (0o23, 0o35))``.  Note that 0o23 and
0o35 only occupy 5 bits, so under the 6-tap reading both generators have a
zero leading tap; the code is then a one-step-delayed version of the 5-tap
code, with identical distance properties.  ``K5_CODE`` provides the 5-tap
reading of the same generator pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import ConfigurationError


@dataclass(frozen=True)
class CodeConfig:
    """Feedforward convolutional code: rate 1/len(generators), zero-tail."""

    constraint_length: int
    generators: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "generators", tuple(int(g) for g in self.generators))
        if self.constraint_length < 2:
            raise ConfigurationError("constraint_length must be >= 2")
        if len(self.generators) < 2:
            raise ConfigurationError("need at least 2 generators")
        for g in self.generators:
            if g <= 0:
                raise ConfigurationError("generators must be positive")
            if g.bit_length() > self.constraint_length:
                raise ConfigurationError(
                    f"generator 0o{g:o} does not fit in {self.constraint_length} bits"
                )

    @property
    def n_outputs(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_outputs

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    def codeword_length(self, info_length: int) -> int:
        return self.n_outputs * (info_length + self.memory)

    def taps(self) -> np.ndarray:
        """Tap matrix, shape (n_outputs, K), MSB of each generator first."""
        K = self.constraint_length
        return np.array(
            [[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in self.generators],
            dtype=np.uint8,
        )


DEFAULT_CODE = CodeConfig(6, (0o23, 0o35))
K5_CODE = CodeConfig(5, (0o23, 0o35))


@dataclass(frozen=True)
class Codeword:
    """Encoded bit sequence plus the information length it encodes."""

    bits: np.ndarray = field(repr=False)
    info_length: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", np.ascontiguousarray(self.bits, dtype=np.uint8))


def _as_bits(bits) -> np.ndarray:
    arr = np.ascontiguousarray(getattr(bits, "bits", bits), dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be 1-d")
    return arr


def conv_encode(bits, code: CodeConfig = DEFAULT_CODE) -> Codeword:
    """Encode with zero-tail termination (state starts and ends at zero).

    Output length is ``n_outputs * (info_length + K - 1)``, with the per-branch
    output bits interleaved generator-by-generator.
    """
    u = _as_bits(bits)
    if u.size == 0:
        raise ValueError("cannot encode an empty packet")
    if np.any(u > 1):
        raise ValueError("input bits must be 0 or 1")
    padded = np.concatenate([u, np.zeros(code.memory, dtype=np.uint8)])
    T = padded.size
    out = np.empty((T, code.n_outputs), dtype=np.uint8)
    for j, taps in enumerate(code.taps()):
        out[:, j] = np.convolve(padded, taps)[:T] & 1
    return Codeword(bits=out.reshape(-1), info_length=int(u.size))


@lru_cache(maxsize=16)
def _output_table(code: CodeConfig) -> np.ndarray:
    """Packed branch outputs, shape (n_states, 2); bit j is generator j."""
    K = code.constraint_length
    n_states = 1 << (K - 1)
    table = np.zeros((n_states, 2), dtype=np.int64)
    for s in range(n_states):
        for u in (0, 1):
            reg = (u << (K - 1)) | s
            sym = 0
            for j, g in enumerate(code.generators):
                sym |= (bin(reg & g).count("1") & 1) << j
            table[s, u] = sym
    return table


@njit(cache=True)
def _viterbi_kernel(rx_sym, out_table, K):
    """Hard-decision add-compare-select with zero-state start and end.

    Ties keep the branch whose dropped register bit is 0, so results are
    deterministic regardless of call order or worker count.
    """
    n_states = out_table.shape[0]
    T = rx_sym.shape[0]
    BIG = np.int64(1) << 50
    pm = np.full(n_states, BIG, dtype=np.int64)
    pm[0] = 0
    new_pm = np.empty(n_states, dtype=np.int64)
    dec = np.zeros((T, n_states), dtype=np.uint8)
    state_mask = n_states - 1
    for t in range(T):
        r = rx_sym[t]
        for ns in range(n_states):
            # Predecessor register values are 2*ns and 2*ns + 1; the low bit
            # is the register bit dropped by the shift, the high bit (after
            # masking) is the input that caused the transition.
            reg = 2 * ns
            prev = reg & state_mask
            u = reg >> (K - 1)
            best = pm[prev]
            if best < BIG:
                d = out_table[prev, u] ^ r
                c = 0
                while d:
                    c += d & 1
                    d >>= 1
                best = best + c
            best_dec = 0
            reg = 2 * ns + 1
            prev = reg & state_mask
            u = reg >> (K - 1)
            cand = pm[prev]
            if cand < BIG:
                d = out_table[prev, u] ^ r
                c = 0
                while d:
                    c += d & 1
                    d >>= 1
                cand = cand + c
            if cand < best:
                best = cand
                best_dec = 1
            new_pm[ns] = best
            dec[t, ns] = best_dec
        pm[:] = new_pm
    u_hat = np.zeros(T, dtype=np.uint8)
    s = 0
    for t in range(T - 1, -1, -1):
        reg = 2 * s + dec[t, s]
        u_hat[t] = reg >> (K - 1)
        s = reg & state_mask
    return u_hat


def viterbi_decode(received_bits, info_length: int, code: CodeConfig = DEFAULT_CODE) -> np.ndarray:
    """Maximum-likelihood (minimum Hamming distance) zero-tail decoding.

    ``received_bits`` must contain exactly ``code.codeword_length(info_length)``
    hard decisions.  Returns the decoded information bits.
    """
    r = _as_bits(received_bits)
    expected = code.codeword_length(info_length)
    if r.size != expected:
        raise ValueError(
            f"received length {r.size} does not match codeword length {expected} "
            f"for info_length={info_length}"
        )
    n_out = code.n_outputs
    groups = r.reshape(-1, n_out).astype(np.int64)
    rx_sym = np.zeros(groups.shape[0], dtype=np.int64)
    for j in range(n_out):
        rx_sym |= groups[:, j] << j
    u_hat = _viterbi_kernel(rx_sym, _output_table(code), code.constraint_length)
    return u_hat[:info_length].astype(np.uint8)
