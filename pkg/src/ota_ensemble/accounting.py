"""Closed-form (epsilon, delta) accounting for the over-the-air ensemble mechanism.

The aggregate the inference server sees is a sum of L1-normalized score
vectors plus Gaussian noise, so the guarantee follows the analytic Gaussian
mechanism: with power scale A the worst-case L2 sensitivity is sqrt(2)*A and
the effective noise scale is sigma*A, which makes delta independent of A.
Random client participation with probability p amplifies the guarantee
through the conditional sampling probability eta = p / (1 - (1-p)^n).

All functions here are pure; they can be called concurrently without any
shared state. Guarantees are per inference round -- composition across
repeated queries of the same models is deliberately not provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import log_ndtr

from .errors import CalibrationError, ParameterError

_SQRT2 = math.sqrt(2.0)
# Largest double strictly below 1; delta is reported in [0, 1).
_DELTA_MAX = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class PrivacyGuarantee:
    """An (epsilon, delta) differential-privacy target."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 <= self.delta < 1.0):
            raise ParameterError(f"delta must be in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class MechanismParams:
    """Aggregate noise scale and participation settings of the mechanism.

    ``sigma`` is the noise scale of the aggregate seen by the server; each
    participating client contributes variance sigma^2 / |P_t|.
    """

    sigma: float
    participation_p: float = 1.0
    num_clients: int = 1

    def __post_init__(self):
        if not (self.sigma > 0.0):
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not (0.0 < self.participation_p <= 1.0):
            raise ParameterError(
                f"participation_p must be in (0, 1], got {self.participation_p}"
            )
        if self.num_clients < 1:
            raise ParameterError(f"num_clients must be >= 1, got {self.num_clients}")


@dataclass(frozen=True)
class Sensitivity:
    """L2 sensitivity of the noiseless aggregate at a given power scale."""

    l2_sensitivity: float
    power_scale: float

    def __post_init__(self):
        if not (self.power_scale > 0.0):
            raise ParameterError(f"power_scale must be positive, got {self.power_scale}")
        expected = _SQRT2 * self.power_scale
        if not math.isclose(self.l2_sensitivity, expected, rel_tol=1e-12):
            raise ParameterError(
                f"l2_sensitivity {self.l2_sensitivity} != sqrt(2)*power_scale {expected}"
            )

    @classmethod
    def for_power_scale(cls, power_scale: float) -> "Sensitivity":
        """Worst case for L1-normalized score vectors: two disjoint one-hots."""
        return cls(l2_sensitivity=_SQRT2 * power_scale, power_scale=power_scale)


@dataclass(frozen=True)
class AmplifiedPrivacyParams:
    """Sampling probability eta and the inner epsilon fed to the p=1 bound."""

    eta: float
    inner_epsilon: float


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, accurate in both tails via erfc."""
    return 0.5 * math.erfc(-x / _SQRT2)


def _hockey_stick(a: float, b: float, epsilon: float) -> float:
    # Phi(a-b) - e^eps * Phi(-a-b). The second term is evaluated in log
    # space; eps + log Phi(-(a+b)) <= 0 always holds because (a+b)^2/2 >= ab
    # = eps/2, so the exp cannot overflow.
    upper = std_normal_cdf(a - b)
    lower = math.exp(epsilon + float(log_ndtr(-(a + b))))
    return min(max(upper - lower, 0.0), _DELTA_MAX)


def analytic_gm_delta(epsilon: float, sensitivity: float, noise_std: float) -> float:
    """Exact delta of a Gaussian mechanism with the given L2 sensitivity.

    Returns the smallest delta for which adding N(0, noise_std^2 I) to a
    function with L2 sensitivity ``sensitivity`` is (epsilon, delta)-DP.
    Sensitivity zero means neighboring outputs coincide, so delta is 0.
    """
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ParameterError(f"epsilon must be positive and finite, got {epsilon}")
    if not (noise_std > 0.0):
        raise ParameterError(f"noise_std must be positive, got {noise_std}")
    if sensitivity < 0.0:
        raise ParameterError(f"sensitivity must be non-negative, got {sensitivity}")
    if sensitivity == 0.0:
        return 0.0
    a = sensitivity / (2.0 * noise_std)
    b = epsilon * noise_std / sensitivity
    return _hockey_stick(a, b, epsilon)


def full_participation_delta(epsilon: float, sigma: float) -> float:
    """Delta of one inference round when every client participates.

    Equals ``analytic_gm_delta`` with sensitivity sqrt(2)*A and noise scale
    sigma*A; the power scale cancels, so it is not a parameter.
    """
    if not (sigma > 0.0):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return analytic_gm_delta(epsilon, _SQRT2, sigma)


def amplification_params(
    epsilon_prime: float, participation_p: float, num_clients: int
) -> AmplifiedPrivacyParams:
    """Subsampling amplification constants for a target epsilon_prime.

    eta is the probability that a fixed client participates given that the
    round is non-empty; the inner epsilon satisfies
    e^epsilon_prime - 1 = eta * (e^epsilon - 1). Both reduce to the identity
    when p = 1 or n = 1.
    """
    if not (epsilon_prime > 0.0 and math.isfinite(epsilon_prime)):
        raise ParameterError(f"epsilon must be positive and finite, got {epsilon_prime}")
    if not (0.0 < participation_p <= 1.0):
        raise ParameterError(f"participation_p must be in (0, 1], got {participation_p}")
    if num_clients < 1:
        raise ParameterError(f"num_clients must be >= 1, got {num_clients}")
    if participation_p == 1.0 or num_clients == 1:
        return AmplifiedPrivacyParams(eta=1.0, inner_epsilon=epsilon_prime)
    # 1 - (1-p)^n via expm1/log1p to stay accurate for small p.
    non_empty = -math.expm1(num_clients * math.log1p(-participation_p))
    eta = participation_p / non_empty
    inner = math.log1p(math.expm1(epsilon_prime) / eta)
    return AmplifiedPrivacyParams(eta=eta, inner_epsilon=inner)


def random_participation_delta(epsilon_prime: float, params: MechanismParams) -> float:
    """Delta of one round under independent participation with probability p.

    Amplification never hurts: the result is at most
    ``full_participation_delta(epsilon_prime, sigma)``, with equality at
    p = 1 or n = 1.
    """
    amp = amplification_params(
        epsilon_prime, params.participation_p, params.num_clients
    )
    if amp.eta == 1.0:
        return full_participation_delta(epsilon_prime, params.sigma)
    delta = amp.eta * full_participation_delta(amp.inner_epsilon, params.sigma)
    return min(delta, _DELTA_MAX)


def per_client_noise_std(sigma: float, participants: int) -> float:
    """Noise each of |P_t| participants adds so the aggregate has scale sigma."""
    if not (sigma > 0.0):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if participants < 1:
        raise ParameterError(f"participants must be >= 1, got {participants}")
    return sigma / math.sqrt(participants)


def calibrate_sigma(
    target: PrivacyGuarantee,
    participation_p: float,
    num_clients: int,
    tolerance: float = 1e-9,
    *,
    sigma_ceiling: float = 1e12,
) -> float:
    """Smallest sigma meeting the target guarantee, by bracketed bisection.

    Exploits strict monotonicity of delta in sigma. The returned sigma*
    satisfies delta(sigma*) in [target.delta - tolerance, target.delta]
    whenever the target is attainable. ``tolerance`` is measured on delta.

    Raises CalibrationError when target.delta is 0 (a Gaussian mechanism
    cannot reach it) or the bracket would exceed ``sigma_ceiling``. If the
    target delta exceeds the supremum of delta over sigma (possible for
    small p, where the supremum is eta < 1), any positive sigma qualifies
    and the lower end of the search range is returned.
    """
    if target.delta == 0.0:
        raise CalibrationError("delta = 0 is unachievable with Gaussian noise")
    if not (tolerance > 0.0):
        raise ParameterError(f"tolerance must be positive, got {tolerance}")

    def delta_at(sigma: float) -> float:
        return random_participation_delta(
            target.epsilon,
            MechanismParams(sigma, participation_p, num_clients),
        )

    lo, hi = 1e-4, 1e4
    while delta_at(hi) > target.delta:
        hi *= 10.0
        if hi > sigma_ceiling:
            raise CalibrationError(
                f"no sigma <= {sigma_ceiling} reaches delta <= {target.delta} "
                f"at epsilon = {target.epsilon}"
            )
    while delta_at(lo) <= target.delta:
        lo /= 10.0
        if lo < 1e-15:
            # Every positive sigma satisfies the target.
            return lo
    for _ in range(500):
        if target.delta - delta_at(hi) <= tolerance:
            return hi
        mid = math.sqrt(lo * hi)
        if delta_at(mid) <= target.delta:
            hi = mid
        else:
            lo = mid
    raise CalibrationError(
        f"bisection failed to reach tolerance {tolerance} for target "
        f"(epsilon={target.epsilon}, delta={target.delta})"
    )
