"""Emitter localization from multi-station frequency-domain snapshots.

The library models a stationary emitter of an unknown signal observed by
synchronized stations through dense multipath. It provides the statistical
channel model, a concentrated-likelihood position search with a projected
gradient phase solver, a phase-aligned window combiner that shrinks that
search, the matching position error bound, and a Monte Carlo benchmark
harness with a command line front end.
"""
from .channel import (
    ChannelCovariance,
    ChannelRealization,
    ClusterChannelParams,
    ExpPdpParams,
    FrequencyGrid,
    Pdp,
    cached_channel_covariance,
    channel_covariance,
    eigen_factor,
    empirical_pdp,
    exp_pdp,
    frequency_response,
    sample_cluster_channel,
    sample_rayleigh_channel,
    steering_matrix,
    steering_vector,
)
from .crlb import (
    CrlbResult,
    FimResult,
    covariance_R,
    crlb_position,
    fim,
    woodbury_inverse,
    woodbury_logdet,
)
from .cwc import (
    CombinedObservationSet,
    combine_magnitudes,
    cwc_combine,
    usage_cwc_estimate,
)
from .errors import (
    ConfigurationError,
    DegenerateChannelError,
    DelayRangeError,
    MplocError,
    RankDeficiencyError,
    ValidationError,
)
from .estimator import (
    CandidateSet,
    UsageResult,
    cost_c1,
    cost_matrix,
    estimate_magnitudes,
    usage_estimate,
)
from .geometry import (
    SPEED_OF_LIGHT,
    GeometryConfig,
    Position,
    Scenario,
    sample_scenario,
    toa,
    toa_array,
)
from .gpm import GpmConfig, GpmResult, gpm_solve, gpm_solve_batch, leading_eigenvector
from .harness import (
    DEEP_GPM_CONFIG,
    SWEEP_GPM_CONFIG,
    BaselineResult,
    ChannelConfig,
    RunConfig,
    SearchConfig,
    SignalConfig,
    SweepResult,
    TrialRecord,
    baseline_estimate,
    delay_spread_variant,
    emit_results,
    run_monte_carlo,
)
from .signal import (
    ObservationSet,
    TransmitSignal,
    gen_flat_psk,
    gen_white,
    noise_variance_for_snr,
    synthesize_observations,
)

__version__ = "0.1.0"

__all__ = [
    "DEEP_GPM_CONFIG",
    "SPEED_OF_LIGHT",
    "SWEEP_GPM_CONFIG",
    "BaselineResult",
    "CandidateSet",
    "ChannelConfig",
    "ChannelCovariance",
    "ChannelRealization",
    "ClusterChannelParams",
    "CombinedObservationSet",
    "ConfigurationError",
    "CrlbResult",
    "DegenerateChannelError",
    "DelayRangeError",
    "ExpPdpParams",
    "FimResult",
    "FrequencyGrid",
    "GeometryConfig",
    "GpmConfig",
    "GpmResult",
    "MplocError",
    "ObservationSet",
    "Pdp",
    "Position",
    "RankDeficiencyError",
    "RunConfig",
    "Scenario",
    "SearchConfig",
    "SignalConfig",
    "SweepResult",
    "TransmitSignal",
    "TrialRecord",
    "UsageResult",
    "ValidationError",
    "baseline_estimate",
    "cached_channel_covariance",
    "channel_covariance",
    "combine_magnitudes",
    "cost_c1",
    "cost_matrix",
    "covariance_R",
    "crlb_position",
    "cwc_combine",
    "delay_spread_variant",
    "eigen_factor",
    "emit_results",
    "empirical_pdp",
    "estimate_magnitudes",
    "exp_pdp",
    "fim",
    "frequency_response",
    "gen_flat_psk",
    "gen_white",
    "gpm_solve",
    "gpm_solve_batch",
    "leading_eigenvector",
    "noise_variance_for_snr",
    "run_monte_carlo",
    "sample_cluster_channel",
    "sample_rayleigh_channel",
    "sample_scenario",
    "steering_matrix",
    "steering_vector",
    "synthesize_observations",
    "toa",
    "toa_array",
    "usage_cwc_estimate",
    "usage_estimate",
    "woodbury_inverse",
    "woodbury_logdet",
]
