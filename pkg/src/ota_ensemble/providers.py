"""Sources of per-client, per-sample score vectors.

Two providers: a text score-table format for precomputed predictions, and a
synthetic classifier generator that replaces model training. Each client in
the generator boosts the true-class logit by its skill and perturbs all
logits with its own independent Gaussian stream, so client errors are
independent -- the property that makes ensembling work.

Score-table file format (all decimals with '.', no locale dependence)::

    n,m,k            header: clients, samples, classes
    <label>          m lines, 1-based true labels
    <s1,...,sk>      n*m score rows in client-major order
                     (client 1's m samples, then client 2's, ...)

Validation/test tags are not stored in the file; the loader tags the first
``int(m * validation_fraction)`` samples as validation, the rest as test.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataFormatError, ParameterError
from .metrics import macro_f1

VALIDATION = "validation"
TEST = "test"

_ROW_SUM_TOLERANCE = 1e-6
_EXACT_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SyntheticModelSpec:
    """Knobs of the synthetic classifier generator.

    ``per_client_skill`` is the logit boost each client gives the true
    class; ``logit_noise_std`` scales the per-client logit perturbations.
    """

    per_client_skill: tuple[float, ...]
    logit_noise_std: float
    rng_seed: int

    def __post_init__(self):
        skill = tuple(float(s) for s in self.per_client_skill)
        if len(skill) < 1:
            raise ParameterError("need at least one client skill value")
        if not all(np.isfinite(skill)):
            raise ParameterError("skill values must be finite")
        if self.logit_noise_std < 0.0:
            raise ParameterError(f"logit_noise_std must be >= 0, got {self.logit_noise_std}")
        object.__setattr__(self, "per_client_skill", skill)

    @property
    def num_clients(self) -> int:
        return len(self.per_client_skill)


@dataclass(frozen=True)
class ScoreDataset:
    """Validated n x m x k score tensor with labels and split tags."""

    scores: np.ndarray
    labels: np.ndarray
    split_tags: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        tags = np.asarray(self.split_tags)
        if scores.ndim != 3:
            raise DataFormatError(f"scores must be n x m x k, got shape {scores.shape}")
        n, m, k = scores.shape
        if k < 2:
            raise DataFormatError(f"need at least 2 classes, got {k}")
        if labels.shape != (m,):
            raise DataFormatError(f"labels must have length {m}, got shape {labels.shape}")
        if tags.shape != (m,):
            raise DataFormatError(f"split_tags must have length {m}, got shape {tags.shape}")
        bad_tags = set(tags.tolist()) - {VALIDATION, TEST}
        if bad_tags:
            raise DataFormatError(f"unknown split tags: {sorted(bad_tags)}")
        if not np.all(np.isfinite(scores)):
            i, t, _ = np.unravel_index(
                int(np.argmin(np.isfinite(scores))), scores.shape
            )
            raise DataFormatError(f"non-finite score for client {i + 1}, sample {t + 1}")
        if np.any(scores < 0.0):
            i, t, _ = np.unravel_index(int(np.argmin(scores)), scores.shape)
            raise DataFormatError(f"negative score for client {i + 1}, sample {t + 1}")
        sums = scores.sum(axis=2)
        off = np.abs(sums - 1.0)
        if np.any(off > _ROW_SUM_TOLERANCE):
            i, t = np.unravel_index(int(np.argmax(off)), off.shape)
            raise DataFormatError(
                f"scores for client {i + 1}, sample {t + 1} sum to {sums[i, t]}, "
                f"expected 1 within {_ROW_SUM_TOLERANCE}"
            )
        # Renormalize only rows that need it, so normalization is a no-op on
        # already-normalized data and save/load roundtrips are bit-exact.
        needs = off > _EXACT_SUM_TOLERANCE
        if np.any(needs):
            scores[needs] /= sums[needs][:, None]
        if labels.size and (labels.min() < 1 or labels.max() > k):
            t = int(np.argmax((labels < 1) | (labels > k)))
            raise DataFormatError(f"label {labels[t]} for sample {t + 1} outside [1, {k}]")
        for arr in (scores, labels, tags):
            arr.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "split_tags", tags)

    @property
    def num_clients(self) -> int:
        return int(self.scores.shape[0])

    @property
    def num_samples(self) -> int:
        return int(self.scores.shape[1])

    @property
    def num_classes(self) -> int:
        return int(self.scores.shape[2])

    @property
    def validation_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split_tags == VALIDATION)

    @property
    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split_tags == TEST)


def _positional_tags(m: int, validation_fraction: float) -> np.ndarray:
    if not (0.0 <= validation_fraction < 1.0):
        raise ParameterError(
            f"validation_fraction must be in [0, 1), got {validation_fraction}"
        )
    n_val = int(m * validation_fraction)
    tags = np.array([TEST] * m, dtype="U10")
    tags[:n_val] = VALIDATION
    return tags


def load_score_dataset(path, validation_fraction: float = 0.1) -> ScoreDataset:
    """Parse and validate a score-table file (format in the module docstring)."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) != 3:
        raise DataFormatError(f"{path}: header must be 'n,m,k', got {lines[0]!r}")
    try:
        n, m, k = (int(v) for v in header)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-integer header field: {exc}") from exc
    if n < 1 or m < 1 or k < 2:
        raise DataFormatError(f"{path}: header out of range: n={n}, m={m}, k={k}")
    expected = 1 + m + n * m
    if len(lines) < expected:
        raise DataFormatError(f"{path}: expected {expected} lines, found {len(lines)}")

    labels = np.empty(m, dtype=np.int64)
    for t in range(m):
        try:
            labels[t] = int(lines[1 + t])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {t + 2}: bad label: {exc}") from exc

    scores = np.empty((n, m, k), dtype=np.float64)
    for i in range(n):
        for t in range(m):
            line_no = 1 + m + i * m + t
            fields = lines[line_no].split(",")
            if len(fields) != k:
                raise DataFormatError(
                    f"{path}: line {line_no + 1} (client {i + 1}, sample {t + 1}): "
                    f"expected {k} scores, got {len(fields)}"
                )
            try:
                scores[i, t] = [float(v) for v in fields]
            except ValueError as exc:
                raise DataFormatError(
                    f"{path}: line {line_no + 1} (client {i + 1}, sample {t + 1}): "
                    f"bad score: {exc}"
                ) from exc
    return ScoreDataset(
        scores=scores,
        labels=labels,
        split_tags=_positional_tags(m, validation_fraction),
    )


def save_score_dataset(dataset: ScoreDataset, path) -> None:
    """Write the score-table format; floats use repr so reloads are bit-exact."""
    out = [f"{dataset.num_clients},{dataset.num_samples},{dataset.num_classes}"]
    out.extend(str(int(v)) for v in dataset.labels)
    for i in range(dataset.num_clients):
        for t in range(dataset.num_samples):
            out.append(",".join(repr(float(v)) for v in dataset.scores[i, t]))
    Path(path).write_text("\n".join(out) + "\n")


def generate_synthetic(
    spec: SyntheticModelSpec,
    m: int,
    k: int,
    class_balance: Sequence[float] | None = None,
    validation_fraction: float = 0.1,
) -> ScoreDataset:
    """Draw labels and per-client softmax scores; bit-reproducible per seed.

    Client i's score row for sample t is softmax over logits
    skill_i * onehot(label_t) + noise, with the noise from a stream spawned
    per client so adding clients never disturbs existing ones.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if class_balance is None:
        balance = np.full(k, 1.0 / k)
    else:
        balance = np.asarray(class_balance, dtype=np.float64)
        if balance.shape != (k,):
            raise ParameterError(f"class_balance must have length {k}")
        if np.any(balance < 0.0) or abs(float(balance.sum()) - 1.0) > 1e-9:
            raise ParameterError("class_balance must be non-negative and sum to 1")

    root = np.random.SeedSequence(spec.rng_seed)
    label_ss, noise_ss = root.spawn(2)
    labels = np.random.default_rng(label_ss).choice(k, size=m, p=balance) + 1
    one_hot = (labels[:, None] == np.arange(1, k + 1)).astype(np.float64)

    n = spec.num_clients
    scores = np.empty((n, m, k), dtype=np.float64)
    for i, child in enumerate(noise_ss.spawn(n)):
        rng = np.random.default_rng(child)
        logits = spec.per_client_skill[i] * one_hot
        logits += spec.logit_noise_std * rng.standard_normal((m, k))
        logits -= logits.max(axis=1, keepdims=True)
        np.exp(logits, out=logits)
        scores[i] = logits / logits.sum(axis=1, keepdims=True)
    return ScoreDataset(
        scores=scores,
        labels=labels,
        split_tags=_positional_tags(m, validation_fraction),
    )


def select_best_client(dataset: ScoreDataset) -> int:
    """1-based index of the client with the best validation macro-F1.

    Ties go to the lowest client index; invariant under permuting samples.
    """
    val = dataset.validation_indices
    if val.size == 0:
        raise ParameterError("dataset has no validation-tagged samples")
    truth = dataset.labels[val]
    f1s = np.empty(dataset.num_clients)
    for i in range(dataset.num_clients):
        preds = np.argmax(dataset.scores[i, val], axis=1) + 1
        f1s[i] = macro_f1(preds, truth)
    return int(np.argmax(f1s)) + 1
