"""Coded modulation over regenerated relay spans.

Building blocks for studying links where an inline unit makes symbol
decisions (or rescales the waveform) midway: hard-decision transition
matrices, equivalent-channel demapping, achievable-rate sweeps, spatially
coupled LDPC codes with windowed decoding, and containers that let the
midpoint splice its own traffic into a passing codeword.
"""

from .channel import (
    AwgnSegment,
    DmcMatrix,
    LinkModel,
    RelayFunction,
    apply_relay,
    compose_dmc,
    hd_decide,
    nearest_index,
    scale_relay_equivalent_snr,
    snr_for_hop,
    transition_matrix,
    transmit,
)
from .constellation import (
    Constellation,
    bit_level_sets,
    bits_for_indices,
    build_constellation,
    indices_for_bits,
)
from .container import (
    Container,
    destination_decode,
    plan_container,
    relay_add,
    select_llrs,
)
from .demapper import Demapper, piecewise_linear_fit
from .errors import (
    CollisionError,
    ConfigError,
    NumericalDegeneracyError,
    RelaycmError,
    UnsupportedMethodError,
)
from .gmi import (
    GmiEstimate,
    RelayGmiEvaluator,
    gmi_from_llrs,
    gmi_with_optimal_scale,
    optimal_llr_scale,
    required_snr2_db,
    single_hop_gmi,
)
from .scldpc import SpatiallyCoupledCode, build_code, decode, design_rate

__version__ = "0.1.0"

__all__ = [
    "AwgnSegment",
    "CollisionError",
    "ConfigError",
    "Constellation",
    "Container",
    "Demapper",
    "DmcMatrix",
    "GmiEstimate",
    "LinkModel",
    "NumericalDegeneracyError",
    "RelayFunction",
    "RelayGmiEvaluator",
    "RelaycmError",
    "SpatiallyCoupledCode",
    "UnsupportedMethodError",
    "apply_relay",
    "bit_level_sets",
    "bits_for_indices",
    "build_code",
    "build_constellation",
    "compose_dmc",
    "decode",
    "design_rate",
    "destination_decode",
    "gmi_from_llrs",
    "gmi_with_optimal_scale",
    "hd_decide",
    "indices_for_bits",
    "nearest_index",
    "optimal_llr_scale",
    "plan_container",
    "piecewise_linear_fit",
    "relay_add",
    "required_snr2_db",
    "scale_relay_equivalent_snr",
    "select_llrs",
    "single_hop_gmi",
    "snr_for_hop",
    "transition_matrix",
    "transmit",
]
