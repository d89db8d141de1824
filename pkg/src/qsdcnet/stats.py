"""Closed-form error-rate predictions, rate estimates and abort decisions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError

Z95 = 1.96


@dataclass(frozen=True)
class RateEstimate:
    errors: int
    samples: int
    rate: float
    ci95: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "errors": self.errors,
            "samples": self.samples,
            "rate": self.rate,
            "ci95": list(self.ci95),
        }

    @classmethod
    def from_dict(cls, data: dict) -> RateEstimate:
        return cls(data["errors"], data["samples"], data["rate"], tuple(data["ci95"]))


class Decision(str, Enum):
    CONTINUE = "continue"
    ABORT = "abort"


def theoretical_eve_error_rate(d: int, M: int) -> float:
    """Error rate an intercept-resend attacker leaves when users pick among ``M`` MUBs.

    ``(M*d + 1 - M - d) / (M*d)``, i.e. ``(M-1)/M * (d-1)/d``.
    """
    if d < 2 or not (1 <= M <= d + 1):
        raise DomainError(f"need d >= 2 and 1 <= M <= d+1, got d={d}, M={M}")
    return (M * d + 1 - M - d) / (M * d)


def bell_disturbance_rate(d: int) -> float:
    """Bell-outcome error after a single-photon projective measurement on one half.

    Projecting one half of a maximally entangled state leaves overlap ``1/d``
    with the original, independent of the basis.
    """
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    return (d - 1) / d


def estimate_rate(errors: int, samples: int) -> RateEstimate:
    if samples < 1:
        raise DomainError("estimate_rate needs at least one sample")
    if not (0 <= errors <= samples):
        raise DomainError(f"errors={errors} outside [0, {samples}]")
    rate = errors / samples
    half = Z95 * math.sqrt(rate * (1 - rate) / samples)
    return RateEstimate(errors, samples, rate, (max(0.0, rate - half), min(1.0, rate + half)))


def binomial_sigma(p: float, samples: int) -> float:
    return math.sqrt(p * (1 - p) / samples)


def detection_probability(epsilon: float, n_samples: int) -> float:
    """Chance that at least one of ``n_samples`` independent checks shows an error."""
    if not (0.0 <= epsilon <= 1.0):
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    if n_samples < 0:
        raise DomainError("negative sample count")
    return 1.0 - (1.0 - epsilon) ** n_samples


def abort_decision(estimate: RateEstimate, epsilon_t: float) -> Decision:
    # strict: a rate exactly at the threshold continues
    return Decision.ABORT if estimate.rate > epsilon_t else Decision.CONTINUE
