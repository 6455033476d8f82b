"""Error exponents and Monte Carlo validation for state-dependent channels
with encoder side information: erasure and list decoding under a
parameterized threshold rule, exact lattice min-max search, and a random
binning code simulator with conditionally constant composition codewords.
"""

from .channel import Channel
from .codec import (
    Codebook,
    CodeParams,
    DecodeKind,
    DecodeOutput,
    DecoderConfig,
    DecoderWorkspace,
    LambdaDesign,
    SubCode,
    build_codebook,
    check_unambiguous,
    decode,
    encode,
    load_codebook,
    metric,
    qualifier_counts,
    quantize_design,
    save_codebook,
)
from .core import (
    Alphabet,
    ConditionalDistribution,
    Distribution,
    JointSystem,
    Mode,
    SequenceType,
    auxiliary_alphabet,
    empirical_type,
    enumerate_types,
    joint_empirical_type,
    log_type_class_size,
    type_class_size,
)
from .exponents import (
    ExponentQuery,
    ExponentResult,
    SweepPoint,
    e1_erasure,
    e1_list,
    e2_erasure,
    e2_list,
    exponent_pair,
    inner_min,
    objective_value,
    random_binning_exponent,
    sweep,
)
from .info import (
    clip_plus,
    conditional_kl,
    entropy,
    i_star_us,
    j_functional,
    kl_divergence,
    mutual_information,
)
from .sim import (
    ComparisonReport,
    ExponentEstimate,
    SimStats,
    TrialConfig,
    TrialRecords,
    compare_to_bound,
    default_slack,
    empirical_exponent,
    run_trials,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "Channel",
    "Codebook",
    "CodeParams",
    "ComparisonReport",
    "ConditionalDistribution",
    "DecodeKind",
    "DecodeOutput",
    "DecoderConfig",
    "DecoderWorkspace",
    "Distribution",
    "ExponentEstimate",
    "ExponentQuery",
    "ExponentResult",
    "JointSystem",
    "LambdaDesign",
    "Mode",
    "SequenceType",
    "SimStats",
    "SubCode",
    "SweepPoint",
    "TrialConfig",
    "TrialRecords",
    "auxiliary_alphabet",
    "build_codebook",
    "check_unambiguous",
    "clip_plus",
    "compare_to_bound",
    "conditional_kl",
    "decode",
    "default_slack",
    "e1_erasure",
    "e1_list",
    "e2_erasure",
    "e2_list",
    "empirical_exponent",
    "empirical_type",
    "encode",
    "entropy",
    "enumerate_types",
    "exponent_pair",
    "i_star_us",
    "inner_min",
    "j_functional",
    "joint_empirical_type",
    "kl_divergence",
    "load_codebook",
    "log_type_class_size",
    "metric",
    "mutual_information",
    "objective_value",
    "qualifier_counts",
    "quantize_design",
    "random_binning_exponent",
    "run_trials",
    "save_codebook",
    "sweep",
    "type_class_size",
]
