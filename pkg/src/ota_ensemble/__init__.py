"""Over-the-air private ensemble inference: simulator and privacy accountant."""

from .accounting import (
    AmplifiedPrivacyParams,
    MechanismParams,
    PrivacyGuarantee,
    Sensitivity,
    amplification_params,
    analytic_gm_delta,
    calibrate_sigma,
    full_participation_delta,
    per_client_noise_std,
    random_participation_delta,
    std_normal_cdf,
)
from .channel import (
    MIN_GAIN,
    ChannelRound,
    ReceivedSignal,
    channel_noise_std_for_snr,
    draw_channel_gains,
    sample_participants,
    threshold_for_participation,
    transmit_oac,
    transmit_orthogonal,
)
from .config import SweepGrid, build_sweep_grid, load_single_cell, load_sweep_grid
from .ensemble import (
    Decision,
    NoisyContribution,
    ScoreVector,
    add_privacy_noise,
    belief_prediction,
    cis_decide,
    to_one_hot,
    vote_prediction,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DataFormatError,
    ParameterError,
    ProtocolViolationError,
)
from .harness import (
    METHODS,
    RAYLEIGH_UNIT_SCALE,
    CellResult,
    ExperimentConfig,
    FileSource,
    ResultRow,
    RoundRecord,
    SyntheticSource,
    audit_csv,
    channel_use_count,
    macro_f1_of_records,
    materialize_dataset,
    results_csv,
    round_rng,
    run_cell,
    run_round,
    run_sweep,
    summary_csv,
)
from .metrics import macro_f1
from .providers import (
    ScoreDataset,
    SyntheticModelSpec,
    generate_synthetic,
    load_score_dataset,
    save_score_dataset,
    select_best_client,
)

__version__ = "0.1.0"
