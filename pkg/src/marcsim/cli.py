"""Command-line front end: presets, sweeps, CSV/JSON emission, manifests.

The three presets reproduce the comparative experiments:

* ``fig6`` - DmNC vs analog-NC, uncoded 4-QAM, superposed relay reception,
  AWGN, 0..20 dB.
* ``fig7`` - analog-NC vs DF-NC vs QDF-NC, rate-1/2 coded BPSK, orthogonal
  relay reception, AWGN, 0..20 dB.
* ``fig8`` - analog-NC, QDF-NC and the adaptive scheme at thresholds
  0.2/0.3/0.4, coded BPSK, AWGN.  The grid extends down to -16 dB so every
  threshold's switch from QDF-NC to analog-NC falls inside the sweep.

A JSON manifest is written next to every result file; ``--from-manifest``
re-runs it and reproduces the results byte for byte.

Exit codes: 0 success, 1 runtime/IO failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from datetime import datetime, timezone

from . import ConfigurationError, __version__
from .channel import ChannelConfig, ChannelKind
from .destination import AnalogDetector, Topology
from .fec import CodeConfig, DEFAULT_CODE
from .harness import BerRecord, SweepConfig, compare_schemes, wilson_half_width
from .modem import Modulation, bits_per_symbol
from .relay import RxMode, SchemeConfig, SchemeKind

CSV_HEADER = "scheme,snr_db,bits,errors,ber,ci_half_width,packets,qdf_selected_fraction"
ENV_SEED = "MARC_SIM_SEED"
DEFAULT_SEED = 1
CI_Z = 3.0

FIG8_THRESHOLDS = (0.2, 0.3, 0.4)


def _parse_code(text: str) -> CodeConfig:
    """Parse 'K:g1,g2[,...]' with the generators in octal, e.g. '6:23,35'."""
    try:
        k_part, gens_part = text.split(":")
        generators = tuple(int(g, 8) for g in gens_part.split(","))
        return CodeConfig(int(k_part), generators)
    except (ValueError, ConfigurationError) as exc:
        raise argparse.ArgumentTypeError(f"invalid --code {text!r}: {exc}") from exc


def _pth(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"--pth must be in [0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marc-sim",
        description="Monte Carlo BER simulator for the two-source relay channel "
        "with network-coded forwarding schemes.",
    )
    what = parser.add_argument_group("experiment selection")
    what.add_argument("--preset", choices=["fig6", "fig7", "fig8"],
                      help="run a canned multi-scheme comparison")
    what.add_argument("--scheme",
                      choices=[k.value for k in SchemeKind] + ["p2p"],
                      help="run a single scheme (p2p = no-relay reference)")
    what.add_argument("--from-manifest", metavar="PATH",
                      help="re-run the experiment described by a manifest file")

    sweep = parser.add_argument_group("sweep parameters")
    sweep.add_argument("--snr-start", type=float, default=0.0)
    sweep.add_argument("--snr-stop", type=float, default=20.0)
    sweep.add_argument("--snr-step", type=float, default=2.0)
    sweep.add_argument("--snr-ref", choices=["es", "eb"], default="es",
                       help="interpret the grid as Es/N0 (default) or Eb/N0")
    sweep.add_argument("--packets", type=int, default=2000, metavar="N",
                       help="maximum packets per SNR point")
    sweep.add_argument("--packet-len", type=int, default=1000, metavar="BITS")
    sweep.add_argument("--min-errors", type=int, default=100, metavar="N",
                       help="stop a point early after this many bit errors (0 disables)")
    sweep.add_argument("--seed", type=int, default=None,
                       help=f"master seed (falls back to ${ENV_SEED}, then {DEFAULT_SEED})")

    system = parser.add_argument_group("system parameters")
    system.add_argument("--channel", choices=[k.value for k in ChannelKind], default="awgn")
    system.add_argument("--mod", choices=[m.value for m in Modulation], default="bpsk")
    system.add_argument("--code", type=_parse_code, default=None, metavar="K:G1,G2",
                        help="convolutional code, octal generators (e.g. 6:23,35)")
    system.add_argument("--uncoded", action="store_true",
                        help="force no channel code even where a default would apply")
    system.add_argument("--rx-mode", choices=[m.value for m in RxMode], default=None,
                        help="relay reception mode (default: per-scheme)")
    system.add_argument("--topology", choices=[t.value for t in Topology], default="direct")
    system.add_argument("--pth", type=_pth, default=None,
                        help="adaptive threshold (fig8 default: 0.2 0.3 0.4)")
    system.add_argument("--quantizer-bits", type=int, default=3)
    system.add_argument("--analog-detector", choices=[d.value for d in AnalogDetector],
                        default="xor-demap",
                        help="how the destination detects the analog relay block")
    system.add_argument("--report-direct", action="store_true",
                        help="count direct-link BER instead of the XOR-assisted path")
    system.add_argument("--doppler", type=float, default=None,
                        help="recorded in the manifest; unused by the shipped channels")
    system.add_argument("--slot-duration", type=float, default=None,
                        help="recorded in the manifest; unused")

    out = parser.add_argument_group("output")
    out.add_argument("--out", default="results.csv", metavar="PATH")
    out.add_argument("--format", choices=["csv", "json"], default="csv")
    out.add_argument("--threads", type=int, default=1)
    return parser


def _resolve_seed(seed_arg) -> int:
    if seed_arg is not None:
        return int(seed_arg)
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigurationError(f"${ENV_SEED} must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    if step <= 0:
        raise ConfigurationError("--snr-step must be positive")
    if stop < start:
        raise ConfigurationError("--snr-stop must be >= --snr-start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(start + i * step for i in range(n))


def _es_grid(grid: tuple[float, ...], snr_ref: str, code: CodeConfig | None,
             modulation: Modulation) -> tuple[float, ...]:
    """Convert an Eb/N0 grid to the Es/N0 the channel model works in."""
    if snr_ref == "es":
        return grid
    rate = code.rate if code is not None else 1.0
    shift = 10.0 * math.log10(rate * bits_per_symbol(modulation))
    return tuple(s + shift for s in grid)


def _default_rx_mode(kind: SchemeKind) -> RxMode:
    if kind in (SchemeKind.ANALOG_NC, SchemeKind.DMNC):
        return RxMode.SUPERPOSED
    return RxMode.ORTHOGONAL


def preset_configs(
    name: str,
    seed: int,
    *,
    channel: str | ChannelKind = ChannelKind.AWGN,
    packet_len: int = 1000,
    min_errors: int = 100,
    packets_max: int | None = None,
    pth: float | None = None,
    quantizer_bits: int = 3,
    code: CodeConfig | None = None,
    topology: str | Topology = Topology.DIRECT,
    analog_detector: str | AnalogDetector = AnalogDetector.XOR_DEMAP,
    report_direct: bool = False,
) -> list[SweepConfig]:
    """Sweep configurations for one of the canned comparisons.

    fig6: analog-NC vs DmNC, uncoded 4-QAM, superposed reception, 0..20 dB
    with no early stopping (>= 1.2e6 counted bits per point).
    fig7: analog-NC vs DF-NC vs QDF-NC, coded BPSK, orthogonal, 0..20 dB.
    fig8: analog-NC, QDF-NC and adaptive at p_th 0.2/0.3/0.4 (or a single
    --pth), coded BPSK, -16..20 dB so every threshold's switch point is on
    the grid.
    """
    common = dict(
        channel=ChannelConfig(kind=ChannelKind(channel)),
        master_seed=seed,
        packet_len=packet_len,
        topology=Topology(topology),
        analog_detector=AnalogDetector(analog_detector),
        report_direct=report_direct,
    )
    if name == "fig6":
        kwargs = dict(
            snr_grid=_grid(0.0, 20.0, 2.0), code=None, modulation=Modulation.QAM4,
            packets_max=packets_max or 600, min_bit_errors=0, **common,
        )
        return [
            SweepConfig(scheme=SchemeConfig(SchemeKind.ANALOG_NC, relay_rx_mode=RxMode.SUPERPOSED), **kwargs),
            SweepConfig(scheme=SchemeConfig(SchemeKind.DMNC, relay_rx_mode=RxMode.SUPERPOSED), **kwargs),
        ]
    code = code or DEFAULT_CODE
    orth_analog = SchemeConfig(SchemeKind.ANALOG_NC, relay_rx_mode=RxMode.ORTHOGONAL)
    if name == "fig7":
        kwargs = dict(
            snr_grid=_grid(0.0, 20.0, 2.0), code=code, modulation=Modulation.BPSK,
            packets_max=packets_max or 1000, min_bit_errors=min_errors, **common,
        )
        return [
            SweepConfig(scheme=orth_analog, **kwargs),
            SweepConfig(scheme=SchemeConfig(SchemeKind.DF_NC), **kwargs),
            SweepConfig(scheme=SchemeConfig(SchemeKind.QDF_NC, quantizer_bits=quantizer_bits), **kwargs),
        ]
    if name == "fig8":
        kwargs = dict(
            snr_grid=_grid(-16.0, 20.0, 2.0), code=code, modulation=Modulation.BPSK,
            packets_max=packets_max or 1000, min_bit_errors=min_errors, **common,
        )
        thresholds = [pth] if pth is not None else list(FIG8_THRESHOLDS)
        configs = [
            SweepConfig(scheme=orth_analog, **kwargs),
            SweepConfig(scheme=SchemeConfig(SchemeKind.QDF_NC, quantizer_bits=quantizer_bits), **kwargs),
        ]
        configs += [
            SweepConfig(
                scheme=SchemeConfig(SchemeKind.ADAPTIVE, p_th=th, quantizer_bits=quantizer_bits),
                **kwargs,
            )
            for th in thresholds
        ]
        return configs
    raise ConfigurationError(f"unknown preset {name!r}")


def _preset_configs(name: str, ns, seed: int) -> list[SweepConfig]:
    return preset_configs(
        name,
        seed,
        channel=ns.channel,
        packet_len=ns.packet_len,
        min_errors=ns.min_errors,
        pth=ns.pth,
        quantizer_bits=ns.quantizer_bits,
        code=ns.code,
        topology=ns.topology,
        analog_detector=ns.analog_detector,
        report_direct=ns.report_direct,
    )


def _single_configs(ns, seed: int) -> list[SweepConfig]:
    grid = _grid(ns.snr_start, ns.snr_stop, ns.snr_step)
    if ns.uncoded:
        code = None
    elif ns.code is not None:
        code = ns.code
    elif ns.scheme in ("df-nc", "qdf-nc", "adaptive"):
        code = DEFAULT_CODE
    else:
        code = None
    modulation = Modulation(ns.mod)
    grid = _es_grid(grid, ns.snr_ref, code, modulation)
    channel = ChannelConfig(kind=ChannelKind(ns.channel))
    common = dict(
        snr_grid=grid, channel=channel, code=code, modulation=modulation,
        packet_len=ns.packet_len, master_seed=seed, packets_max=ns.packets,
        min_bit_errors=ns.min_errors, topology=Topology(ns.topology),
        analog_detector=AnalogDetector(ns.analog_detector),
        report_direct=ns.report_direct,
    )
    if ns.scheme == "p2p":
        return [SweepConfig(scheme=None, **common)]
    kind = SchemeKind(ns.scheme)
    if kind is SchemeKind.ADAPTIVE and ns.pth is None:
        raise ConfigurationError("--scheme adaptive requires --pth")
    rx = RxMode(ns.rx_mode) if ns.rx_mode is not None else _default_rx_mode(kind)
    scheme = SchemeConfig(
        kind=kind, p_th=ns.pth, quantizer_bits=ns.quantizer_bits, relay_rx_mode=rx
    )
    return [SweepConfig(scheme=scheme, **common)]


# --- manifest (de)serialization -------------------------------------------

def _config_to_dict(cfg: SweepConfig) -> dict:
    d: dict = {
        "snr_grid": list(cfg.snr_grid),
        "scheme": None,
        "channel": {"kind": cfg.channel.kind.value, "p_s1": cfg.channel.p_s1,
                    "p_s2": cfg.channel.p_s2, "p_r": cfg.channel.p_r},
        "code": None,
        "modulation": cfg.modulation.value,
        "packet_len": cfg.packet_len,
        "master_seed": cfg.master_seed,
        "packets_max": cfg.packets_max,
        "min_bit_errors": cfg.min_bit_errors,
        "topology": cfg.topology.value,
        "analog_detector": cfg.analog_detector.value,
        "report_direct": cfg.report_direct,
        "label": cfg.label,
    }
    if cfg.scheme is not None:
        d["scheme"] = {
            "kind": cfg.scheme.kind.value,
            "p_th": cfg.scheme.p_th,
            "quantizer_bits": cfg.scheme.quantizer_bits,
            "relay_rx_mode": cfg.scheme.relay_rx_mode.value,
        }
    if cfg.code is not None:
        d["code"] = {
            "constraint_length": cfg.code.constraint_length,
            "generators": [oct(g) for g in cfg.code.generators],
        }
    return d


def _config_from_dict(d: dict) -> SweepConfig:
    scheme = None
    if d["scheme"] is not None:
        scheme = SchemeConfig(
            kind=SchemeKind(d["scheme"]["kind"]),
            p_th=d["scheme"]["p_th"],
            quantizer_bits=d["scheme"]["quantizer_bits"],
            relay_rx_mode=RxMode(d["scheme"]["relay_rx_mode"]),
        )
    code = None
    if d["code"] is not None:
        code = CodeConfig(
            d["code"]["constraint_length"],
            tuple(int(g, 8) for g in d["code"]["generators"]),
        )
    return SweepConfig(
        snr_grid=tuple(d["snr_grid"]),
        scheme=scheme,
        channel=ChannelConfig(kind=ChannelKind(d["channel"]["kind"]),
                              p_s1=d["channel"]["p_s1"], p_s2=d["channel"]["p_s2"],
                              p_r=d["channel"]["p_r"]),
        code=code,
        modulation=Modulation(d["modulation"]),
        packet_len=d["packet_len"],
        master_seed=d["master_seed"],
        packets_max=d["packets_max"],
        min_bit_errors=d["min_bit_errors"],
        topology=Topology(d["topology"]),
        analog_detector=AnalogDetector(d["analog_detector"]),
        report_direct=d["report_direct"],
        label=d["label"],
    )


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Everything needed to re-run an experiment bit-identically."""

    configs: tuple[SweepConfig, ...]
    out_path: str
    out_format: str
    threads: int
    master_seed: int
    preset: str | None = None
    doppler: float | None = None
    slot_duration: float | None = None
    tool_version: str = __version__
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "tool": "marc-sim",
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "master_seed": self.master_seed,
            "preset": self.preset,
            "threads": self.threads,
            "out_path": self.out_path,
            "out_format": self.out_format,
            "doppler": self.doppler,
            "slot_duration": self.slot_duration,
            "configs": [_config_to_dict(c) for c in self.configs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            configs=tuple(_config_from_dict(c) for c in d["configs"]),
            out_path=d["out_path"],
            out_format=d["out_format"],
            threads=d["threads"],
            master_seed=d["master_seed"],
            preset=d.get("preset"),
            doppler=d.get("doppler"),
            slot_duration=d.get("slot_duration"),
            tool_version=d.get("tool_version", __version__),
            timestamp=d.get("timestamp", ""),
        )


def parse_args(argv) -> RunManifest:
    """Validate a command line into a manifest (no simulation yet)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.from_manifest:
        with open(ns.from_manifest) as fh:
            manifest = RunManifest.from_dict(json.load(fh))
        return dataclasses.replace(manifest, timestamp=_now())
    if (ns.preset is None) == (ns.scheme is None):
        parser.error("choose exactly one of --preset or --scheme (or --from-manifest)")
    if ns.threads < 1:
        parser.error("--threads must be >= 1")
    seed = _resolve_seed(ns.seed)
    if ns.preset:
        configs = _preset_configs(ns.preset, ns, seed)
    else:
        configs = _single_configs(ns, seed)
    return RunManifest(
        configs=tuple(configs),
        out_path=ns.out,
        out_format=ns.format,
        threads=ns.threads,
        master_seed=seed,
        preset=ns.preset,
        doppler=ns.doppler,
        slot_duration=ns.slot_duration,
        timestamp=_now(),
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


# --- result emission --------------------------------------------------------

def _record_row(rec: BerRecord) -> dict:
    frac = rec.qdf_selected_fraction
    return {
        "scheme": rec.scheme,
        "snr_db": rec.snr_db,
        "bits": rec.bits_simulated,
        "errors": rec.bit_errors,
        "ber": rec.ber,
        "ci_half_width": wilson_half_width(rec.bit_errors, rec.bits_simulated, CI_Z),
        "packets": rec.packets,
        "qdf_selected_fraction": frac,
    }


def emit_results(records, fmt: str, path: str) -> None:
    """Write records as CSV (fixed header) or JSON, full float precision."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    rows = [_record_row(r) for r in records]
    if fmt == "csv":
        lines = [CSV_HEADER]
        for row in rows:
            frac = "" if row["qdf_selected_fraction"] is None else repr(row["qdf_selected_fraction"])
            lines.append(
                f"{row['scheme']},{row['snr_db']!r},{row['bits']},{row['errors']},"
                f"{row['ber']!r},{row['ci_half_width']!r},{row['packets']},{frac}"
            )
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps({"records": rows}, indent=2) + "\n"
    else:
        raise ConfigurationError(f"unknown output format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)


def manifest_path_for(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".manifest.json"


def run_manifest(manifest: RunManifest) -> list[BerRecord]:
    """Execute all sweeps in the manifest and return flat records."""
    table = compare_schemes(manifest.configs, threads=manifest.threads, ci_z=CI_Z)
    return table.flat_records()


def run_preset(
    name: str,
    out_path: str,
    fmt: str = "csv",
    seed: int = DEFAULT_SEED,
    threads: int = 1,
    **preset_kwargs,
) -> list[BerRecord]:
    """Run a canned comparison and write its result and manifest files."""
    manifest = RunManifest(
        configs=tuple(preset_configs(name, seed, **preset_kwargs)),
        out_path=out_path,
        out_format=fmt,
        threads=threads,
        master_seed=seed,
        preset=name,
        timestamp=_now(),
    )
    records = run_manifest(manifest)
    emit_results(records, fmt, out_path)
    with open(manifest_path_for(out_path), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
        fh.write("\n")
    return records


def main(argv=None) -> int:
    try:
        manifest = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigurationError as exc:
        print(f"marc-sim: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"marc-sim: {exc}", file=sys.stderr)
        return 1
    try:
        records = run_manifest(manifest)
        emit_results(records, manifest.out_format, manifest.out_path)
        with open(manifest_path_for(manifest.out_path), "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
            fh.write("\n")
    except ConfigurationError as exc:
        print(f"marc-sim: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"marc-sim: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest.out_path} ({len(records)} records)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
