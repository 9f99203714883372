"""Wireless-medium simulation: Rayleigh fading gains, threshold-based random
participation, channel-inverted transmission, over-the-air superposition with
AWGN, and the orthogonal-transmission baseline.

Channel gains are complex circular Gaussians (Rayleigh magnitude); each
client knows its own gain perfectly and pre-scales by power_scale / gain, so
after superposition the effective channel is the identity. The received
aggregate is therefore computed in its channel-inverted closed form
power_scale * sum(g_i) + noise: with perfect CSI the cancellation is exact,
and simulating the float residue of an idealized analog medium would only
add rounding artifacts. Per-sender signals are still materialized for
transmit-energy accounting, where the inversion cost is real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensemble import NoisyContribution
from .errors import ParameterError, ProtocolViolationError

# Clients below this gain magnitude never transmit, whatever the threshold:
# inverting a near-zero channel would need unbounded power.
MIN_GAIN = 1e-6


@dataclass(frozen=True)
class ChannelRound:
    """Per-round channel state and participation rule."""

    gains: np.ndarray
    participation_threshold: float = 0.0
    extra_participation_prob: float = 1.0
    power_scale: float = 1.0
    channel_noise_std: float = 0.0

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=np.complex128)
        if gains.ndim != 1 or gains.size < 1:
            raise ParameterError(f"gains must be a non-empty vector, got shape {gains.shape}")
        object.__setattr__(self, "gains", gains)
        if self.participation_threshold < 0.0:
            raise ParameterError(
                f"participation_threshold must be >= 0, got {self.participation_threshold}"
            )
        if not (0.0 < self.extra_participation_prob <= 1.0):
            raise ParameterError(
                f"extra_participation_prob must be in (0, 1], got {self.extra_participation_prob}"
            )
        if not (self.power_scale > 0.0):
            raise ParameterError(f"power_scale must be positive, got {self.power_scale}")
        if self.channel_noise_std < 0.0:
            raise ParameterError(
                f"channel_noise_std must be >= 0, got {self.channel_noise_std}"
            )

    @property
    def num_clients(self) -> int:
        return int(self.gains.size)


@dataclass(frozen=True)
class ReceivedSignal:
    """The aggregate the server receives, plus simulator-side metadata.

    ``num_participants`` and ``total_transmit_energy`` are bookkeeping the
    simulated server never looks at; an empty round is flagged by
    num_participants == 0 (the values are then pure channel noise).
    """

    values: np.ndarray
    num_participants: int
    total_transmit_energy: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)


def draw_channel_gains(
    n: int, fading_scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw n complex gains with i.i.d. N(0, fading_scale^2) real/imag parts.

    The magnitude is Rayleigh; E|h|^2 = 2 * fading_scale^2, so
    fading_scale = 1/sqrt(2) gives unit average power.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not (fading_scale > 0.0):
        raise ParameterError(f"fading_scale must be positive, got {fading_scale}")
    parts = rng.standard_normal((2, n))
    return fading_scale * (parts[0] + 1j * parts[1])


def threshold_for_participation(target_p: float, fading_scale: float) -> float:
    """Gain threshold tau with P(|h| >= tau) = target_p under Rayleigh fading."""
    if not (0.0 < target_p <= 1.0):
        raise ParameterError(f"target_p must be in (0, 1], got {target_p}")
    if not (fading_scale > 0.0):
        raise ParameterError(f"fading_scale must be positive, got {fading_scale}")
    return fading_scale * math.sqrt(-2.0 * math.log(target_p))


def sample_participants(round_: ChannelRound, rng: np.random.Generator) -> np.ndarray:
    """Indices of clients that participate this round.

    A client participates when its gain magnitude clears both the
    participation threshold and the MIN_GAIN guard, and (only if extra
    thinning is configured below 1) an independent Bernoulli accepts it.
    """
    mags = np.abs(round_.gains)
    mask = mags >= max(round_.participation_threshold, MIN_GAIN)
    if round_.extra_participation_prob < 1.0:
        mask &= rng.random(round_.num_clients) < round_.extra_participation_prob
    return np.flatnonzero(mask)


def _check_senders(
    contributions: Sequence[NoisyContribution],
    participants: Sequence[int],
    round_: ChannelRound,
) -> np.ndarray:
    participants = np.asarray(participants, dtype=np.intp)
    if len(contributions) != participants.size:
        raise ParameterError(
            f"{len(contributions)} contributions for {participants.size} participants"
        )
    if participants.size == 0:
        return participants
    if participants.min() < 0 or participants.max() >= round_.num_clients:
        raise ParameterError("participant index out of range")
    mags = np.abs(round_.gains[participants])
    floor = max(round_.participation_threshold, MIN_GAIN)
    if np.any(mags < floor):
        bad = int(participants[int(np.argmin(mags))])
        raise ProtocolViolationError(
            f"client {bad} transmitted with gain magnitude {mags.min():.3e} "
            f"below the participation floor {floor:.3e}"
        )
    lengths = {c.values.size for c in contributions}
    if len(lengths) != 1:
        raise ParameterError(f"contributions have mixed lengths {sorted(lengths)}")
    return participants


def transmit_oac(
    contributions: Sequence[NoisyContribution],
    participants: Sequence[int],
    round_: ChannelRound,
    rng: np.random.Generator,
    *,
    num_classes: int | None = None,
) -> ReceivedSignal:
    """Superpose channel-inverted transmissions and add receiver AWGN.

    Every sender i transmits y_i = A * g_i / h_i; the server receives
    sum_i h_i y_i + n = A * sum_i g_i + n, using k channel uses total.
    With no participants the result is pure noise (num_participants = 0);
    ``num_classes`` then sizes the noise-only signal.
    """
    participants = _check_senders(contributions, participants, round_)
    if participants.size == 0:
        if num_classes is None:
            raise ParameterError("empty round: num_classes is required to size the signal")
        noise = rng.normal(0.0, round_.channel_noise_std, size=num_classes)
        return ReceivedSignal(values=noise, num_participants=0, total_transmit_energy=0.0)
    g_mat = np.stack([c.values for c in contributions])
    k = g_mat.shape[1]
    sent = round_.power_scale * g_mat
    y = sent / round_.gains[participants, None]
    energy = float(np.sum(np.abs(y) ** 2))
    values = np.sum(sent, axis=0) + rng.normal(0.0, round_.channel_noise_std, size=k)
    return ReceivedSignal(
        values=values,
        num_participants=int(participants.size),
        total_transmit_energy=energy,
    )


def transmit_orthogonal(
    contributions: Sequence[NoisyContribution],
    participants: Sequence[int],
    round_: ChannelRound,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Each participant gets its own k channel uses; returns decoded vectors.

    Participant i's decoded vector is A * g_i + n_i with independent AWGN
    per channel (|P_t| * k channel uses in total). Aggregation of the
    decoded vectors is up to the caller.
    """
    participants = _check_senders(contributions, participants, round_)
    if participants.size == 0:
        return []
    out = []
    for contribution in contributions:
        sent = round_.power_scale * contribution.values
        noise = rng.normal(0.0, round_.channel_noise_std, size=sent.size)
        out.append(sent + noise)
    return out


def channel_noise_std_for_snr(
    snr_db: float, num_classes: int, power_scale: float = 1.0
) -> float:
    """Receiver noise scale realizing a channel SNR in dB.

    Convention: SNR = A^2 * P_sig / sigma_channel^2 with P_sig = 1/k, the
    mean per-coordinate power of an L1-normalized score vector under a
    uniform-belief convention. snr_db = inf gives a noiseless channel.
    """
    if num_classes < 1:
        raise ParameterError(f"num_classes must be >= 1, got {num_classes}")
    if not (power_scale > 0.0):
        raise ParameterError(f"power_scale must be positive, got {power_scale}")
    if math.isnan(snr_db):
        raise ParameterError("snr_db must not be NaN")
    signal_power = power_scale**2 / num_classes
    return math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
