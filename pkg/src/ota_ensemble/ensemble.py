"""Score vectors, the two ensemble prediction rules, noise injection, and the
server-side argmax decision.

Class indices are 1-based throughout. Every argmax breaks ties toward the
lowest class index, on the client side and on the server side alike, so runs
are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Inputs whose L1 norm misses 1 by more than this are rejected; anything
# closer is renormalized exactly.
SUM_TOLERANCE = 1e-6


def _as_readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScoreVector:
    """A client's normalized class beliefs: k non-negative entries, L1 = 1."""

    scores: np.ndarray

    def __post_init__(self):
        arr = np.array(self.scores, dtype=np.float64)
        if arr.ndim != 1:
            raise ParameterError(f"scores must be 1-dimensional, got shape {arr.shape}")
        if arr.size < 2:
            raise ParameterError(f"need at least 2 classes, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("scores must be finite")
        if np.any(arr < 0.0):
            j = int(np.argmin(arr))
            raise ParameterError(f"score for class {j + 1} is negative: {arr[j]}")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ParameterError(f"scores sum to {total}, expected 1 within {SUM_TOLERANCE}")
        if abs(total - 1.0) > 1e-12:  # no-op on already-normalized input
            arr /= total
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def num_classes(self) -> int:
        return int(self.scores.size)


@dataclass(frozen=True)
class NoisyContribution:
    """A client's released vector g = f + m and the noise scale that made it."""

    values: np.ndarray
    noise_std_used: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _as_readonly(self.values))
        if self.noise_std_used < 0.0:
            raise ParameterError(f"noise_std_used must be >= 0, got {self.noise_std_used}")


@dataclass(frozen=True)
class Decision:
    """The class index (1-based) the server decides on."""

    class_index: int

    def __post_init__(self):
        if self.class_index < 1:
            raise ParameterError(f"class_index must be >= 1, got {self.class_index}")


def to_one_hot(index: int, length: int) -> np.ndarray:
    """One-hot vector of the given length with a 1 at the 1-based index."""
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length}")
    if not 1 <= index <= length:
        raise ParameterError(f"index {index} out of range [1, {length}]")
    out = np.zeros(length, dtype=np.float64)
    out[index - 1] = 1.0
    return out


def belief_prediction(scores: ScoreVector) -> np.ndarray:
    """Belief summation transmits the raw score vector."""
    return np.array(scores.scores, dtype=np.float64)


def vote_prediction(scores: ScoreVector) -> np.ndarray:
    """Majority voting transmits a one-hot vote for the locally best class."""
    best = int(np.argmax(scores.scores))  # first maximum = lowest class index
    return to_one_hot(best + 1, scores.num_classes)


def add_privacy_noise(
    prediction: np.ndarray, noise_std: float, rng: np.random.Generator
) -> NoisyContribution:
    """Add i.i.d. zero-mean Gaussian noise per coordinate.

    noise_std may be 0, in which case the values come back unchanged. The
    draw is consumed from ``rng`` either way, so a fixed stream position
    yields a fixed output.
    """
    if noise_std < 0.0:
        raise ParameterError(f"noise_std must be >= 0, got {noise_std}")
    prediction = np.asarray(prediction, dtype=np.float64)
    values = prediction + rng.normal(0.0, noise_std, size=prediction.shape)
    return NoisyContribution(values=values, noise_std_used=noise_std)


def cis_decide(received: np.ndarray, power_scale: float) -> Decision:
    """Argmax decision on the received aggregate.

    Dividing by the positive power scale cannot change the argmax, so the
    decision is computed on the raw vector. An all-equal vector decides
    class 1 under the lowest-index tie rule.
    """
    if not (power_scale > 0.0):
        raise ParameterError(f"power_scale must be positive, got {power_scale}")
    received = np.asarray(received, dtype=np.float64)
    if received.ndim != 1 or received.size < 1:
        raise ParameterError(f"received must be a non-empty vector, got shape {received.shape}")
    if not np.all(np.isfinite(received)):
        raise ParameterError("received vector must be finite")
    return Decision(class_index=int(np.argmax(received)) + 1)
