"""Monte Carlo engine: per-(scheme, SNR) packet loops, stopping, aggregation.

Every (SNR point, packet, purpose) triple owns a private counter-based RNG
stream derived from the master seed, so results are bit-identical no matter
how the work is scheduled, and different schemes run under the same seed see
the same packets and the same channel noise (paired comparisons).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ConfigurationError
from .bitsource import Packet, RngStream, generate_packet
from .channel import (
    ChannelConfig,
    LinkId,
    apply_link,
    draw_channel,
    equalize,
    equalized_noise_var,
    noise_variance,
    superpose,
)
from .destination import AnalogDetector, ReceptionSet, Topology, recover
from .fec import CodeConfig, conv_encode, viterbi_decode
from .modem import Modulation, SymbolBlock, demap, map_bits, tx_scale
from .relay import (
    Quantizer,
    RxMode,
    SchemeConfig,
    SchemeKind,
    adaptive_relay_forward,
    analog_nc_forward,
    df_nc_forward,
    dmnc_forward,
    qdf_nc_forward,
)

# RNG stream slots within one (point, packet) unit of work.
_SLOT_S1_BITS = 0
_SLOT_S2_BITS = 1
_SLOT_S1R = 2
_SLOT_S2R = 3
_SLOT_S1D = 4
_SLOT_S2D = 5
_SLOT_RD = 6
_SLOT_RELAY_SUM = 7


def _stream(master_seed: int, point_index: int, packet_index: int, slot: int) -> np.random.Generator:
    index = (point_index << 44) | (packet_index << 4) | slot
    return RngStream(master_seed, index).generator()


@dataclass(frozen=True)
class BerRecord:
    """Accumulated counts for one (scheme, SNR) cell."""

    scheme: str
    snr_db: float
    bits_simulated: int
    bit_errors: int
    packets: int
    qdf_selected: int = 0
    adaptive: bool = False

    def __post_init__(self) -> None:
        if self.bit_errors > self.bits_simulated:
            raise ValueError("bit_errors cannot exceed bits_simulated")
        if self.qdf_selected > self.packets:
            raise ValueError("qdf_selected cannot exceed packets")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_simulated if self.bits_simulated else 0.0

    @property
    def qdf_selected_fraction(self) -> float | None:
        if not self.adaptive:
            return None
        return self.qdf_selected / self.packets if self.packets else 0.0


def wilson_half_width(errors: int, n: int, z: float = 3.0) -> float:
    """Half-width of the Wilson score interval for errors/n."""
    if n <= 0:
        return 0.0
    p = errors / n
    denom = 1.0 + z * z / n
    return z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom


def wilson_interval(errors: int, n: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval (lo, hi) for errors/n."""
    if n <= 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = wilson_half_width(errors, n, z)
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class SweepConfig:
    """Complete description of one BER-vs-SNR curve.

    ``scheme=None`` selects the point-to-point reference mode (single
    source straight to the destination, no relay), which exists so measured
    curves can be checked against the closed-form AWGN BER.
    ``min_bit_errors=0`` disables early stopping.
    """

    snr_grid: tuple[float, ...]
    scheme: SchemeConfig | None
    channel: ChannelConfig = ChannelConfig()
    code: CodeConfig | None = None
    modulation: Modulation = Modulation.BPSK
    packet_len: int = 1000
    master_seed: int = 1
    packets_max: int = 2000
    min_bit_errors: int = 100
    topology: Topology = Topology.DIRECT
    analog_detector: AnalogDetector = AnalogDetector.XOR_DEMAP
    report_direct: bool = False
    label: str | None = None

    def __post_init__(self) -> None:
        grid = tuple(float(s) for s in self.snr_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("snr_grid must be strictly increasing")
        object.__setattr__(self, "snr_grid", grid)
        object.__setattr__(self, "modulation", Modulation(self.modulation))
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "analog_detector", AnalogDetector(self.analog_detector))
        if self.packets_max < 1:
            raise ConfigurationError("packets_max must be >= 1")
        if self.packet_len < 1:
            raise ConfigurationError("packet_len must be >= 1")
        if self.min_bit_errors < 0:
            raise ConfigurationError("min_bit_errors must be >= 0")
        if self.scheme is not None:
            kind = self.scheme.kind
            if kind in (SchemeKind.DF_NC, SchemeKind.QDF_NC, SchemeKind.ADAPTIVE) and self.code is None:
                raise ConfigurationError(f"{kind.value} requires a channel code")
            if self.topology is Topology.NO_DIRECT:
                if kind is SchemeKind.ANALOG_NC and self.analog_detector is AnalogDetector.CANCELLATION:
                    raise ConfigurationError(
                        "cancellation detection is undefined without direct links"
                    )
        if self.code is not None and self.modulation is Modulation.QAM4:
            if self.code.codeword_length(self.packet_len) % 2 != 0:
                raise ConfigurationError("codeword length must be even for 4-QAM")

    @property
    def curve_label(self) -> str:
        if self.label is not None:
            return self.label
        if self.scheme is None:
            return "p2p"
        if self.scheme.kind is SchemeKind.ADAPTIVE:
            return f"adaptive-pth{self.scheme.p_th:g}"
        return self.scheme.kind.value


def _transmit_bits(pkt: Packet, config: SweepConfig) -> SymbolBlock:
    bits = conv_encode(pkt.bits, config.code).bits if config.code is not None else pkt.bits
    return map_bits(bits, config.modulation)


def _simulate_p2p_packet(config, snr_db, point_index, packet_index) -> tuple[int, int]:
    pkt = generate_packet(
        config.packet_len, "S1", _stream(config.master_seed, point_index, packet_index, _SLOT_S1_BITS)
    )
    x = _transmit_bits(pkt, config)
    rng = _stream(config.master_seed, point_index, packet_index, _SLOT_S1D)
    draw = draw_channel(config.channel, LinkId.S1_TO_D, snr_db, rng)
    y = apply_link(x, draw, config.channel.p_s1, rng)
    est = demap(equalize(y, draw, config.channel.p_s1))
    if config.code is not None:
        est = viterbi_decode(est, config.packet_len, config.code)
    return int(np.count_nonzero(est != pkt.bits)), config.packet_len


def _simulate_packet(
    config: SweepConfig, snr_db: float, point_index: int, packet_index: int
) -> tuple[int, int, bool]:
    """Run one packet end to end; returns (bit_errors, bits, qdf_chosen)."""
    if config.scheme is None:
        errors, bits = _simulate_p2p_packet(config, snr_db, point_index, packet_index)
        return errors, bits, False
    pkt1 = generate_packet(
        config.packet_len, "S1", _stream(config.master_seed, point_index, packet_index, _SLOT_S1_BITS)
    )
    pkt2 = generate_packet(
        config.packet_len, "S2", _stream(config.master_seed, point_index, packet_index, _SLOT_S2_BITS)
    )
    result, branch = _run_chain(config, snr_db, point_index, packet_index, pkt1, pkt2)
    qdf_chosen = (
        config.scheme.kind is SchemeKind.ADAPTIVE and branch is SchemeKind.QDF_NC
    )
    if config.topology is Topology.NO_DIRECT:
        return result.xor_bit_errors, config.packet_len, qdf_chosen
    counts = result.direct_bit_errors if config.report_direct else result.per_source_bit_errors
    return counts[0] + counts[1], 2 * config.packet_len, qdf_chosen


def run_packet_pair(
    config: SweepConfig,
    snr_db: float,
    bits1,
    bits2,
    point_index: int = 0,
    packet_index: int = 0,
):
    """Drive the full chain for one chosen packet pair; returns the recovery.

    Exists so exact end-to-end cases (known inputs, noiseless sentinel) can
    be exercised without going through the random bit source.
    """
    if config.scheme is None:
        raise ConfigurationError("packet-pair simulation needs a relay scheme")
    pkt1 = Packet(bits=np.asarray(bits1, dtype=np.uint8), source_id="S1")
    pkt2 = Packet(bits=np.asarray(bits2, dtype=np.uint8), source_id="S2")
    if pkt1.length != config.packet_len or pkt2.length != config.packet_len:
        raise ValueError("packet bits must match config.packet_len")
    result, _ = _run_chain(config, snr_db, point_index, packet_index, pkt1, pkt2)
    return result


def _run_chain(
    config: SweepConfig,
    snr_db: float,
    point_index: int,
    packet_index: int,
    pkt1: Packet,
    pkt2: Packet,
):
    """Source -> channels -> relay -> destination for one packet pair."""
    seed = config.master_seed
    ch = config.channel
    scheme = config.scheme
    mod = config.modulation
    nv = noise_variance(snr_db)
    scale = tx_scale(mod)

    x1 = _transmit_bits(pkt1, config)
    x2 = _transmit_bits(pkt2, config)

    rng_s1r = _stream(seed, point_index, packet_index, _SLOT_S1R)
    rng_s2r = _stream(seed, point_index, packet_index, _SLOT_S2R)
    d_s1r = draw_channel(ch, LinkId.S1_TO_R, snr_db, rng_s1r)
    d_s2r = draw_channel(ch, LinkId.S2_TO_R, snr_db, rng_s2r)

    superposed = scheme.relay_rx_mode is RxMode.SUPERPOSED
    if superposed:
        y_r = superpose(
            x1, x2, d_s1r, d_s2r, nv,
            _stream(seed, point_index, packet_index, _SLOT_RELAY_SUM),
            ch.p_s1, ch.p_s2,
        )
        y1_raw = y2_raw = None
    else:
        y1_raw = apply_link(x1, d_s1r, ch.p_s1, rng_s1r)
        y2_raw = apply_link(x2, d_s2r, ch.p_s2, rng_s2r)

    # Relay processing.
    branch = scheme.kind
    analog_combined = None
    if scheme.kind is SchemeKind.ANALOG_NC:
        analog_combined = y_r if superposed else SymbolBlock(
            samples=y1_raw.samples + y2_raw.samples, modulation=mod, scale=1.0
        )
        forwarded = analog_nc_forward(analog_combined)
    elif scheme.kind is SchemeKind.DMNC:
        if superposed:
            g1 = math.sqrt(ch.p_s1) * d_s1r.h * scale
            g2 = math.sqrt(ch.p_s2) * d_s2r.h * scale
            forwarded = dmnc_forward(y_r, mod, g1, g2)
        else:
            forwarded = dmnc_forward(
                (equalize(y1_raw, d_s1r, ch.p_s1), equalize(y2_raw, d_s2r, ch.p_s2)), mod
            )
    else:
        y1_eq = equalize(y1_raw, d_s1r, ch.p_s1)
        y2_eq = equalize(y2_raw, d_s2r, ch.p_s2)
        nv1 = equalized_noise_var(d_s1r, ch.p_s1)
        nv2 = equalized_noise_var(d_s2r, ch.p_s2)
        if scheme.kind is SchemeKind.DF_NC:
            forwarded = df_nc_forward(y1_eq, y2_eq, config.code, mod, config.packet_len)
        elif scheme.kind is SchemeKind.QDF_NC:
            q = Quantizer.fit(
                scheme.quantizer_bits,
                np.concatenate([y1_eq.samples, y2_eq.samples]),
                max(nv1, nv2),
            )
            forwarded = qdf_nc_forward(y1_eq, y2_eq, q, config.code, Modulation.BPSK, config.packet_len)
        else:  # ADAPTIVE
            forwarded, decision = adaptive_relay_forward(
                y1_raw, y2_raw, y1_eq, y2_eq, scheme, config.code, config.packet_len, nv1, nv2
            )
            branch = decision.chosen
            if branch is SchemeKind.ANALOG_NC:
                analog_combined = SymbolBlock(
                    samples=y1_raw.samples + y2_raw.samples, modulation=mod, scale=1.0
                )

    # Relay to destination hop.
    rng_rd = _stream(seed, point_index, packet_index, _SLOT_RD)
    d_rd = draw_channel(ch, LinkId.R_TO_D, snr_db, rng_rd)
    if ch.p_r > 0:
        y_rd = apply_link(forwarded, d_rd, ch.p_r, rng_rd)
        g_rd = math.sqrt(ch.p_r) * d_rd.h
        relay_eq = SymbolBlock(
            samples=y_rd.samples / g_rd, modulation=forwarded.modulation, scale=forwarded.scale
        )
    else:
        relay_eq = None

    analog_gains = None
    if branch is SchemeKind.ANALOG_NC:
        if relay_eq is None:
            analog_gains = (0.0 + 0.0j, 0.0 + 0.0j)
        else:
            beta = math.sqrt(float(np.mean(np.abs(analog_combined.samples) ** 2)))
            analog_gains = (
                math.sqrt(ch.p_s1) * d_s1r.h * scale / beta,
                math.sqrt(ch.p_s2) * d_s2r.h * scale / beta,
            )

    direct_s1 = direct_s2 = None
    if config.topology is Topology.DIRECT:
        rng_s1d = _stream(seed, point_index, packet_index, _SLOT_S1D)
        rng_s2d = _stream(seed, point_index, packet_index, _SLOT_S2D)
        d_s1d = draw_channel(ch, LinkId.S1_TO_D, snr_db, rng_s1d)
        d_s2d = draw_channel(ch, LinkId.S2_TO_D, snr_db, rng_s2d)
        direct_s1 = equalize(apply_link(x1, d_s1d, ch.p_s1, rng_s1d), d_s1d, ch.p_s1)
        direct_s2 = equalize(apply_link(x2, d_s2d, ch.p_s2, rng_s2d), d_s2d, ch.p_s2)

    reception = ReceptionSet(
        relay_block=relay_eq,
        relay_branch_used=branch,
        direct_s1=direct_s1,
        direct_s2=direct_s2,
        analog_gains=analog_gains,
    )
    result = recover(
        reception, scheme, config.code, mod, (pkt1, pkt2), config.analog_detector
    )
    return result, branch


def run_point(config: SweepConfig, snr_db: float, point_index: int = 0) -> BerRecord:
    """Simulate one (scheme, SNR) cell until packets_max or enough errors."""
    errors = 0
    bits = 0
    packets = 0
    qdf_selected = 0
    for packet_index in range(config.packets_max):
        e, b, qdf = _simulate_packet(config, snr_db, point_index, packet_index)
        errors += e
        bits += b
        packets += 1
        qdf_selected += int(qdf)
        if config.min_bit_errors > 0 and errors >= config.min_bit_errors:
            break
    return BerRecord(
        scheme=config.curve_label,
        snr_db=snr_db,
        bits_simulated=bits,
        bit_errors=errors,
        packets=packets,
        qdf_selected=qdf_selected,
        adaptive=config.scheme is not None and config.scheme.kind is SchemeKind.ADAPTIVE,
    )


def _run_point_task(args) -> tuple[int, int, BerRecord]:
    config_index, point_index, config, snr_db = args
    return config_index, point_index, run_point(config, snr_db, point_index)


def _run_grid(tasks, threads: int):
    """Run (config_index, point_index, config, snr) tasks, in order of index."""
    results: dict[tuple[int, int], BerRecord] = {}
    if threads <= 1 or len(tasks) <= 1:
        for t in tasks:
            ci, pi, rec = _run_point_task(t)
            results[(ci, pi)] = rec
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for ci, pi, rec in pool.map(_run_point_task, tasks):
                results[(ci, pi)] = rec
    return results


def run_sweep(config: SweepConfig, threads: int = 1) -> list[BerRecord]:
    """One BerRecord per grid point, independent streams per point."""
    tasks = [(0, i, config, snr) for i, snr in enumerate(config.snr_grid)]
    results = _run_grid(tasks, threads)
    return [results[(0, i)] for i in range(len(config.snr_grid))]


@dataclass(frozen=True)
class ComparisonTable:
    """Aligned BER curves for several schemes over a shared grid."""

    snr_grid: tuple[float, ...]
    runs: tuple[tuple[str, tuple[BerRecord, ...]], ...]
    ci_z: float = 3.0

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.runs)

    def records_for(self, label: str) -> tuple[BerRecord, ...]:
        for run_label, records in self.runs:
            if run_label == label:
                return records
        raise KeyError(label)

    def flat_records(self) -> list[BerRecord]:
        out: list[BerRecord] = []
        for _, records in self.runs:
            out.extend(records)
        return out

    def rows(self) -> list[dict]:
        """One row per SNR point with (ber, ci_half_width) per scheme."""
        table = []
        for i, snr in enumerate(self.snr_grid):
            row: dict = {"snr_db": snr}
            for label, records in self.runs:
                rec = records[i]
                row[label] = (rec.ber, wilson_half_width(rec.bit_errors, rec.bits_simulated, self.ci_z))
            table.append(row)
        return table


def compare_schemes(configs, threads: int = 1, ci_z: float = 3.0) -> ComparisonTable:
    """Run several configs sharing grid, channel and seed; align the results."""
    configs = list(configs)
    if not configs:
        raise ValueError("need at least one config to compare")
    first = configs[0]
    for cfg in configs[1:]:
        if cfg.snr_grid != first.snr_grid:
            raise ValueError("all configs must share the same snr_grid")
        if cfg.channel != first.channel:
            raise ValueError("all configs must share the same channel")
        if cfg.master_seed != first.master_seed:
            raise ValueError("all configs must share the same master_seed")
    tasks = [
        (ci, pi, cfg, snr)
        for ci, cfg in enumerate(configs)
        for pi, snr in enumerate(cfg.snr_grid)
    ]
    results = _run_grid(tasks, threads)
    runs = tuple(
        (cfg.curve_label, tuple(results[(ci, pi)] for pi in range(len(cfg.snr_grid))))
        for ci, cfg in enumerate(configs)
    )
    return ComparisonTable(snr_grid=first.snr_grid, runs=runs, ci_z=ci_z)
