"""Monte Carlo link-level simulator for a two-source multiple access relay channel.

Two sources transmit to a destination, helped by a relay that forwards a
network-coded version of what it hears.  Five forwarding schemes are
implemented (analog-NC, DmNC, DF-NC, QDF-NC and a per-packet adaptive
selector), together with BPSK/4-QAM modems, a terminated convolutional code
with hard-decision Viterbi decoding, AWGN and block-Rayleigh channels, and a
deterministic, seedable sweep harness that emits BER-vs-SNR tables.
"""

__version__ = "0.1.0"


class ConfigurationError(ValueError):
    """Raised when a configuration is internally inconsistent or unsupported."""


from .bitsource import Packet, RngStream, generate_packet
from .fec import CodeConfig, Codeword, DEFAULT_CODE, conv_encode, viterbi_decode
from .modem import (
    Modulation,
    SymbolBlock,
    bpsk_demap,
    bpsk_map,
    joint_xor_demap,
    qam_demap,
    qam_map,
)
from .channel import (
    ChannelConfig,
    ChannelDraw,
    ChannelKind,
    LinkId,
    apply_link,
    draw_channel,
    equalize,
    superpose,
)
from .relay import (
    Quantizer,
    RelayDecision,
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
from .destination import (
    AnalogDetector,
    ReceptionSet,
    RecoveryResult,
    Topology,
    analog_nc_destination_detect,
    count_bit_errors,
    recover,
)
from .harness import (
    BerRecord,
    SweepConfig,
    compare_schemes,
    run_point,
    run_sweep,
    wilson_half_width,
)

__all__ = [
    "AnalogDetector",
    "BerRecord",
    "ChannelConfig",
    "ChannelDraw",
    "ChannelKind",
    "CodeConfig",
    "Codeword",
    "ConfigurationError",
    "DEFAULT_CODE",
    "LinkId",
    "Modulation",
    "Packet",
    "Quantizer",
    "ReceptionSet",
    "RecoveryResult",
    "RelayDecision",
    "RngStream",
    "RxMode",
    "SchemeConfig",
    "SchemeKind",
    "SweepConfig",
    "SymbolBlock",
    "Topology",
    "adaptive_select",
    "analog_nc_destination_detect",
    "analog_nc_forward",
    "apply_link",
    "bpsk_demap",
    "bpsk_map",
    "compare_schemes",
    "conv_encode",
    "count_bit_errors",
    "df_nc_forward",
    "dmnc_forward",
    "draw_channel",
    "equalize",
    "equivalent_noise_stats",
    "estimate_ber_proxy",
    "estimate_raw_ber",
    "generate_packet",
    "joint_xor_demap",
    "qam_demap",
    "qam_map",
    "qdf_nc_forward",
    "quantize",
    "recover",
    "run_point",
    "run_sweep",
    "superpose",
    "viterbi_decode",
    "wilson_half_width",
]
