"""End-to-end round driver, baseline runners, sweeps, and CSV reporting.

One inference round follows the transmission protocol in order: sample the
participant set (gain threshold plus optional thinning), compute each
participant's local prediction, add calibrated privacy noise, transmit
(superposed or orthogonal), aggregate, argmax.

Reproducibility: every (seed, sample) pair owns a dedicated random
substream, so results are byte-identical for any worker count. The
substream is deliberately shared across sweep cells and methods -- common
random numbers pair the comparisons, which keeps ordering and trend checks
stable at desk-scale sample counts. Within a round the draw order is fixed:
channel gains, optional thinning, the n x k client-noise block, then
channel noise last.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .accounting import PrivacyGuarantee, calibrate_sigma, per_client_noise_std
from .channel import (
    MIN_GAIN,
    ChannelRound,
    channel_noise_std_for_snr,
    draw_channel_gains,
    sample_participants,
    threshold_for_participation,
    transmit_oac,
    transmit_orthogonal,
)
from .ensemble import Decision, NoisyContribution, cis_decide
from .errors import ConfigError, ParameterError
from .metrics import macro_f1
from .providers import (
    TEST,
    ScoreDataset,
    SyntheticModelSpec,
    generate_synthetic,
    load_score_dataset,
    select_best_client,
)

METHODS = ("oac_vote", "oac_belief", "orth_vote", "orth_belief", "best_client")

RAYLEIGH_UNIT_SCALE = 1.0 / math.sqrt(2.0)  # E|h|^2 = 1

# Domain separator so round streams never collide with other consumers of
# the same seed integers.
_ROUND_STREAM_TAG = 0x0AC5EED


@dataclass(frozen=True)
class FileSource:
    """Dataset read from a score-table file."""

    path: str
    validation_fraction: float = 0.1


@dataclass(frozen=True)
class SyntheticSource:
    """Dataset produced by the synthetic classifier generator."""

    spec: SyntheticModelSpec
    num_samples: int
    num_classes: int
    class_balance: tuple[float, ...] | None = None
    validation_fraction: float = 0.1


DatasetSource = Union[FileSource, SyntheticSource]


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep cell: a method under fixed channel and privacy settings."""

    method: str
    epsilon: float
    snr_db: float
    participation_p: float
    num_clients: int
    seeds: tuple[int, ...]
    dataset: DatasetSource
    delta: float = 1e-5
    power_scale: float = 1.0
    fading_scale: float = RAYLEIGH_UNIT_SCALE
    extra_participation_prob: float = 1.0
    orth_full_noise: bool = True
    count_abstained_as_error: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (self.epsilon > 0.0):
            raise ConfigError(f"epsilon must be positive (inf allowed), got {self.epsilon}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must be in (0, 1), got {self.delta}")
        if math.isnan(self.snr_db):
            raise ConfigError("snr_db must not be NaN")
        if not (0.0 < self.participation_p <= 1.0):
            raise ConfigError(
                f"participation_p must be in (0, 1], got {self.participation_p}"
            )
        if self.num_clients < 1:
            raise ConfigError(f"num_clients must be >= 1, got {self.num_clients}")
        if not (self.power_scale > 0.0):
            raise ConfigError(f"power_scale must be positive, got {self.power_scale}")
        if not (self.fading_scale > 0.0):
            raise ConfigError(f"fading_scale must be positive, got {self.fading_scale}")
        if not (0.0 < self.extra_participation_prob <= 1.0):
            raise ConfigError(
                f"extra_participation_prob must be in (0, 1], "
                f"got {self.extra_participation_prob}"
            )
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds or any(s < 0 for s in seeds):
            raise ConfigError(f"seeds must be a non-empty list of ints >= 0, got {self.seeds}")
        object.__setattr__(self, "seeds", seeds)


@dataclass(frozen=True)
class ResultRow:
    """One (cell, seed) outcome, matching the output CSV columns."""

    method: str
    epsilon: float
    snr_db: float
    participation_p: float
    seed: int
    macro_f1: float
    mean_participants: float
    abstained_rounds: int
    channel_uses_per_query: int


@dataclass(frozen=True)
class RoundRecord:
    """Audit record of one inference round; decision 0 means abstained."""

    sample_index: int
    label: int
    decision: int
    participants: tuple[int, ...]
    tie: bool
    channel_uses: int
    transmit_energy: float


@dataclass(frozen=True)
class CellResult:
    """A ResultRow plus the per-round audit records it was computed from."""

    config: ExperimentConfig
    seed: int
    row: ResultRow
    records: tuple[RoundRecord, ...]


def channel_use_count(method: str, num_participants: int, num_classes: int) -> int:
    """Channel uses one query costs: k superposed, |P_t| * k orthogonal."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}")
    if num_participants < 0 or num_classes < 0:
        raise ParameterError("counts must be >= 0")
    if method.startswith("orth"):
        return num_participants * num_classes
    return num_classes


@functools.lru_cache(maxsize=None)
def materialize_dataset(source: DatasetSource) -> ScoreDataset:
    """Build (and cache) the dataset a source describes."""
    if isinstance(source, FileSource):
        return load_score_dataset(source.path, source.validation_fraction)
    if isinstance(source, SyntheticSource):
        return generate_synthetic(
            source.spec,
            source.num_samples,
            source.num_classes,
            source.class_balance,
            source.validation_fraction,
        )
    raise ConfigError(f"unknown dataset source type {type(source).__name__}")


@functools.lru_cache(maxsize=None)
def _calibrated_sigma(epsilon: float, delta: float, p: float, n: int) -> float:
    return calibrate_sigma(PrivacyGuarantee(epsilon, delta), p, n)


@dataclass(frozen=True)
class _CellRuntime:
    method: str
    num_clients: int
    num_classes: int
    power_scale: float
    fading_scale: float
    threshold: float
    extra: float
    sigma: float
    sigma_channel: float
    orth_full_noise: bool
    best_client: int  # 0-based; -1 when unused
    scores: np.ndarray
    labels: np.ndarray


def _build_runtime(config: ExperimentConfig, dataset: ScoreDataset) -> _CellRuntime:
    if dataset.num_clients != config.num_clients:
        raise ConfigError(
            f"config expects {config.num_clients} clients but the dataset "
            f"has {dataset.num_clients}"
        )
    if math.isinf(config.epsilon):
        sigma = 0.0
    elif config.method == "best_client":
        # A dedicated always-on transmitter gets no participation
        # amplification; calibrate as if p = 1.
        sigma = _calibrated_sigma(config.epsilon, config.delta, 1.0, 1)
    else:
        sigma = _calibrated_sigma(
            config.epsilon, config.delta, config.participation_p, config.num_clients
        )
    best = select_best_client(dataset) - 1 if config.method == "best_client" else -1
    if config.method == "best_client":
        # dedicated transmitter: no participation rule, only the MIN_GAIN guard
        threshold = 0.0
    else:
        threshold = threshold_for_participation(config.participation_p, config.fading_scale)
    return _CellRuntime(
        method=config.method,
        num_clients=config.num_clients,
        num_classes=dataset.num_classes,
        power_scale=config.power_scale,
        fading_scale=config.fading_scale,
        threshold=threshold,
        extra=config.extra_participation_prob,
        sigma=sigma,
        sigma_channel=channel_noise_std_for_snr(
            config.snr_db, dataset.num_classes, config.power_scale
        ),
        orth_full_noise=config.orth_full_noise,
        best_client=best,
        scores=dataset.scores,
        labels=dataset.labels,
    )


def round_rng(seed: int, sample_index: int) -> np.random.Generator:
    """The dedicated random stream of one (seed, sample) round."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(_ROUND_STREAM_TAG, int(seed), int(sample_index)))
    )


def _client_noise_std(rt: _CellRuntime, num_participants: int) -> float:
    if rt.sigma == 0.0:
        return 0.0
    if rt.method.startswith("oac"):
        return per_client_noise_std(rt.sigma, num_participants)
    if rt.method.startswith("orth") and not rt.orth_full_noise:
        return per_client_noise_std(rt.sigma, num_participants)
    # Orthogonal clients and the best-client baseline are individually
    # observable, so each release must carry the full noise scale alone.
    return rt.sigma


def _execute_round(rt: _CellRuntime, t: int, rng: np.random.Generator) -> RoundRecord:
    k = rt.num_classes
    label = int(rt.labels[t])
    gains = draw_channel_gains(rt.num_clients, rt.fading_scale, rng)
    round_ = ChannelRound(
        gains=gains,
        participation_threshold=rt.threshold,
        extra_participation_prob=rt.extra,
        power_scale=rt.power_scale,
        channel_noise_std=rt.sigma_channel,
    )
    if rt.method == "best_client":
        # The selected client always transmits, subject only to the
        # inversion power guard.
        if abs(gains[rt.best_client]) >= MIN_GAIN:
            participants = np.array([rt.best_client], dtype=np.intp)
        else:
            participants = np.array([], dtype=np.intp)
    else:
        participants = sample_participants(round_, rng)

    if participants.size == 0:
        return RoundRecord(
            sample_index=t,
            label=label,
            decision=0,
            participants=(),
            tie=False,
            channel_uses=channel_use_count(rt.method, 0, k),
            transmit_energy=0.0,
        )

    zeta = rng.standard_normal((rt.num_clients, k))
    num_p = int(participants.size)
    if rt.method.endswith("vote"):
        winners = np.argmax(rt.scores[participants, t], axis=1)
        preds = np.zeros((num_p, k))
        preds[np.arange(num_p), winners] = 1.0
    else:
        preds = rt.scores[participants, t]
    noise_std = _client_noise_std(rt, num_p)
    noisy = preds + noise_std * zeta[participants]
    contributions = [NoisyContribution(noisy[j], noise_std) for j in range(num_p)]

    if rt.method.startswith("orth"):
        decoded = transmit_orthogonal(contributions, participants, round_, rng)
        values = np.sum(decoded, axis=0)
        energy = float(
            np.sum(
                (rt.power_scale * noisy) ** 2
                / np.abs(gains[participants])[:, None] ** 2
            )
        )
    else:
        received = transmit_oac(
            contributions, participants, round_, rng, num_classes=k
        )
        values = received.values
        energy = received.total_transmit_energy
    decision = cis_decide(values, rt.power_scale)
    return RoundRecord(
        sample_index=t,
        label=label,
        decision=decision.class_index,
        participants=tuple(int(i) for i in participants),
        tie=bool(np.sum(values == values.max()) > 1),
        channel_uses=channel_use_count(rt.method, num_p, k),
        transmit_energy=energy,
    )


def run_round(
    sample_index: int,
    config: ExperimentConfig,
    dataset: ScoreDataset,
    rng: np.random.Generator,
) -> Decision | None:
    """Run one inference round on a test sample; None means abstained."""
    if dataset.split_tags[sample_index] != TEST:
        raise ParameterError(f"sample {sample_index} is not test-tagged")
    record = _execute_round(_build_runtime(config, dataset), int(sample_index), rng)
    return Decision(record.decision) if record.decision else None


def run_cell(
    config: ExperimentConfig, seed: int, dataset: ScoreDataset | None = None
) -> CellResult:
    """Full pass of one sweep cell over the test split, for one seed."""
    if dataset is None:
        dataset = materialize_dataset(config.dataset)
    rt = _build_runtime(config, dataset)
    records = tuple(
        _execute_round(rt, int(t), round_rng(seed, int(t)))
        for t in dataset.test_indices
    )
    row = ResultRow(
        method=config.method,
        epsilon=config.epsilon,
        snr_db=config.snr_db,
        participation_p=config.participation_p,
        seed=int(seed),
        macro_f1=macro_f1_of_records(records, config.count_abstained_as_error),
        mean_participants=float(np.mean([len(r.participants) for r in records])),
        abstained_rounds=sum(1 for r in records if r.decision == 0),
        channel_uses_per_query=channel_use_count(
            config.method, config.num_clients, dataset.num_classes
        ),
    )
    return CellResult(config=config, seed=int(seed), row=row, records=records)


def macro_f1_of_records(
    records: Sequence[RoundRecord], count_abstained_as_error: bool = False
) -> float:
    """Recompute a cell's macro-F1 from its audit records.

    Abstained rounds are dropped by default; in count-as-error mode they
    keep their sentinel 0 decision and cost recall. All rounds abstained
    scores 0.
    """
    preds = np.array([r.decision for r in records], dtype=np.int64)
    labels = np.array([r.label for r in records], dtype=np.int64)
    if not count_abstained_as_error:
        mask = preds > 0
        if not mask.any():
            return 0.0
        preds, labels = preds[mask], labels[mask]
    return macro_f1(preds, labels)


def _run_cell_job(job: tuple[ExperimentConfig, int]) -> CellResult:
    config, seed = job
    try:
        return run_cell(config, seed)
    except Exception as exc:
        # keep the exception type (the CLI maps types to exit codes) but
        # name the offending cell
        exc.args = (
            f"cell (method={config.method}, epsilon={config.epsilon}, "
            f"snr_db={config.snr_db}, p={config.participation_p}, "
            f"seed={seed}): {exc}",
        )
        raise


def run_sweep(
    cells: Sequence[ExperimentConfig], workers: int = 1
) -> list[CellResult]:
    """Run every (cell, seed) pair; output order and content are
    independent of the worker count."""
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    jobs = [(cell, seed) for cell in cells for seed in cell.seeds]
    if not jobs:
        raise ParameterError("empty sweep: no cells")
    if workers == 1:
        return [_run_cell_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell_job, jobs))


# ---------------------------------------------------------------------------
# CSV reporting


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


RESULT_COLUMNS = (
    "method",
    "epsilon",
    "snr_db",
    "p",
    "seed",
    "macro_f1",
    "mean_participants",
    "abstained_rounds",
    "channel_uses_per_query",
)


def results_csv(results: Sequence[CellResult]) -> str:
    """The per-seed result table, one row per (cell, seed)."""
    lines = [",".join(RESULT_COLUMNS)]
    for res in results:
        r = res.row
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.method,
                    float(r.epsilon),
                    float(r.snr_db),
                    float(r.participation_p),
                    r.seed,
                    float(r.macro_f1),
                    float(r.mean_participants),
                    r.abstained_rounds,
                    r.channel_uses_per_query,
                )
            )
        )
    return "\n".join(lines) + "\n"


def summary_csv(results: Sequence[CellResult]) -> str:
    """Across-seed mean and sample standard deviation per cell."""
    order: list[tuple] = []
    groups: dict[tuple, list[float]] = {}
    for res in results:
        r = res.row
        key = (r.method, r.epsilon, r.snr_db, r.participation_p)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r.macro_f1)
    lines = ["method,epsilon,snr_db,p,num_seeds,mean_macro_f1,std_macro_f1"]
    for key in order:
        vals = np.array(groups[key])
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    key[0],
                    float(key[1]),
                    float(key[2]),
                    float(key[3]),
                    vals.size,
                    float(vals.mean()),
                    std,
                )
            )
        )
    return "\n".join(lines) + "\n"


def audit_csv(results: Sequence[CellResult]) -> str:
    """Per-round audit log; macro_f1 in the result table is recomputable
    from these rows."""
    lines = [
        "method,epsilon,snr_db,p,seed,sample_index,label,decision,tie,"
        "num_participants,participants,channel_uses,transmit_energy"
    ]
    for res in results:
        r = res.row
        prefix = (
            f"{r.method},{_fmt(float(r.epsilon))},{_fmt(float(r.snr_db))},"
            f"{_fmt(float(r.participation_p))},{r.seed}"
        )
        for rec in res.records:
            lines.append(
                f"{prefix},{rec.sample_index},{rec.label},{rec.decision},"
                f"{int(rec.tie)},{len(rec.participants)},"
                f"{'|'.join(str(i) for i in rec.participants)},"
                f"{rec.channel_uses},{_fmt(rec.transmit_energy)}"
            )
    return "\n".join(lines) + "\n"
