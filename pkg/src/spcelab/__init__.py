"""spcelab: simulation laboratory for spin-polarization coincidence experiments.

Three rival generators for the same experiment (exact two-qubit singlet,
contextual analyzer-smearing, local hidden-variable responses) plus the
analysis side: CHSH estimation, factorization checks, and non-parametric
ensemble-purity tests on outcome time-series.
"""

__version__ = "0.1.0"

from .backend import backend_name, available_backends
from .directions import Direction, as_direction, orthonormal_frame, random_directions
from .errors import (
    SpceLabError,
    DomainError,
    ParameterError,
    ContractError,
    DataError,
    ConfigError,
    SeriesParseError,
)
from .streams import substream, stream_key
from .quantum import (
    TwoQubitState,
    Outcome,
    build_singlet,
    spin_axis_state,
    joint_probability,
    outcome_distribution,
    correlation,
    reduce_on_outcome,
    singlet_probability_from_dot,
    sample_trial,
    sample_trials,
    sample_singlet_trials,
)
from .contextual import (
    CapDistribution,
    ExperimentSetting,
    Estimate,
    sample_cap_direction,
    sample_cap_directions,
    smeared_probability,
    smeared_distribution,
    anti_correlation_gap,
    quadrature_probability,
    sample_contextual_trial,
    sample_contextual_trials,
)
from .lrhv import (
    AtomicEnsemble,
    SphereEnsemble,
    DeterministicSignResponse,
    StochasticResponse,
    linear_response,
    lrhv_probability,
    lrhv_correlation,
    contextual_probability,
    FactorizationReport,
    check_factorization,
    TableKernel,
    load_table_kernel,
    ProtocolTables,
    protocol_tables,
    run_protocol,
    sample_series,
)
from .series import TimeSeries, TrialRecord, ND_TOKEN
from .series_io import read_series, write_series, series_text
from .chsh import (
    ChshSettings,
    ChshReport,
    CorrelationEstimate,
    chsh_from_model,
    chsh_from_counts,
    chsh_from_series,
    correlation_from_counts,
)
from .purity import (
    PurityConfig,
    PurityReport,
    PuritySuiteResult,
    purity_suite,
    runs_test,
    homogeneity_test,
    half_split_test,
    random_subensembles,
)
from .config import ExperimentConfig, SettingSpec, load_config
from .harness import (
    RunManifest,
    AnalysisResult,
    SweepResult,
    simulate,
    analyze,
    sweep,
    load_manifest,
    write_report,
)

__all__ = [
    "__version__",
    "backend_name",
    "available_backends",
    "Direction",
    "as_direction",
    "orthonormal_frame",
    "random_directions",
    "SpceLabError",
    "DomainError",
    "ParameterError",
    "ContractError",
    "DataError",
    "ConfigError",
    "SeriesParseError",
    "substream",
    "stream_key",
    "TwoQubitState",
    "Outcome",
    "build_singlet",
    "spin_axis_state",
    "joint_probability",
    "outcome_distribution",
    "correlation",
    "reduce_on_outcome",
    "singlet_probability_from_dot",
    "sample_trial",
    "sample_trials",
    "sample_singlet_trials",
    "CapDistribution",
    "ExperimentSetting",
    "Estimate",
    "sample_cap_direction",
    "sample_cap_directions",
    "smeared_probability",
    "smeared_distribution",
    "anti_correlation_gap",
    "quadrature_probability",
    "sample_contextual_trial",
    "sample_contextual_trials",
    "AtomicEnsemble",
    "SphereEnsemble",
    "DeterministicSignResponse",
    "StochasticResponse",
    "linear_response",
    "lrhv_probability",
    "lrhv_correlation",
    "contextual_probability",
    "FactorizationReport",
    "check_factorization",
    "TableKernel",
    "load_table_kernel",
    "ProtocolTables",
    "protocol_tables",
    "run_protocol",
    "sample_series",
    "TimeSeries",
    "TrialRecord",
    "ND_TOKEN",
    "read_series",
    "write_series",
    "series_text",
    "ChshSettings",
    "ChshReport",
    "CorrelationEstimate",
    "chsh_from_model",
    "chsh_from_counts",
    "chsh_from_series",
    "correlation_from_counts",
    "PurityConfig",
    "PurityReport",
    "PuritySuiteResult",
    "purity_suite",
    "runs_test",
    "homogeneity_test",
    "half_split_test",
    "random_subensembles",
    "ExperimentConfig",
    "SettingSpec",
    "load_config",
    "RunManifest",
    "AnalysisResult",
    "SweepResult",
    "simulate",
    "analyze",
    "sweep",
    "load_manifest",
    "write_report",
]
