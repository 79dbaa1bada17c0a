"""Forward (posted, time-dependent) pricing: the operator's ex-ante price and
the users' price-taking demand response."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .market import ArrayLike, DemandModel, DemandRealization, MarketConfig, payoff

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ForwardOutcome:
    """Result of one slot under the posted price alone."""

    posted_price: float
    demands: np.ndarray
    payments: np.ndarray
    payoffs: np.ndarray
    total_demand: float


@dataclass(frozen=True)
class AdmissionCheck:
    """Whether the posted price admits every user for every realization.

    Truthiness follows ``holds``. ``choke`` is set when the weakest user's
    lowest willingness to pay is zero, so no positive price can admit them.
    """

    holds: bool
    threshold: float
    choke: bool = False

    def __bool__(self) -> bool:
        return self.holds


def optimal_forward_price(model: DemandModel, slot: int, config: MarketConfig) -> float:
    """Lowest price at which worst-case aggregate demand still fits in ``Q``.

    With every user at the top of their willingness-to-pay range the
    aggregate demand ``sum((theta_mean + spread) / p - 1)`` equals ``Q``
    exactly, which gives ``p = sum(theta_mean + spread) / (Q + I)``.
    """
    config.check_slot(slot)
    if model.num_users != config.num_users:
        raise ValueError(f"model has {model.num_users} users, config has {config.num_users}")
    top = math.fsum(model.upper_at(slot))
    if top <= 0:
        raise ValueError(f"demand model is identically zero at slot {slot}; no positive price exists")
    return top / (config.total_resource + config.num_users)


def admission_condition_holds(model: DemandModel, slot: int, config: MarketConfig) -> AdmissionCheck:
    """Check ``Q > sum(theta_mean + spread) / min(theta_mean - spread) - I``.

    Equivalent to the optimal forward price lying strictly below every
    user's lowest possible willingness to pay. The minimum is taken over
    users directly, so no particular user ordering is required. A failing
    check is logged as a warning only; the simulation proceeds with the
    zero-demand clamp.
    """
    config.check_slot(slot)
    weakest = float(np.min(model.lower_at(slot)))
    top = math.fsum(model.upper_at(slot))
    if weakest <= 0:
        log.warning("slot %d: weakest user has zero willingness to pay (choke)", slot)
        return AdmissionCheck(holds=False, threshold=math.inf, choke=True)
    threshold = top / weakest - config.num_users
    holds = config.total_resource > threshold
    if not holds:
        log.warning(
            "slot %d: Q=%g does not exceed admission threshold %g; some users may be priced out",
            slot,
            config.total_resource,
            threshold,
        )
    return AdmissionCheck(holds=holds, threshold=threshold)


def user_demand(theta: ArrayLike, unit_price: ArrayLike) -> ArrayLike:
    """Payoff-maximizing quantity ``max(theta / unit_price - 1, 0)``."""
    theta_a = np.asarray(theta, dtype=float)
    price_a = np.asarray(unit_price, dtype=float)
    if np.any(price_a <= 0):
        raise ValueError("unit_price must be positive")
    if np.any(theta_a < 0):
        raise ValueError("theta must be nonnegative")
    result = np.maximum(theta_a / price_a - 1.0, 0.0)
    return float(result) if result.ndim == 0 else result


def forward_outcome(realization: DemandRealization, posted_price: float, config: MarketConfig) -> ForwardOutcome:
    """Batch the demand response and payoffs of every user at ``posted_price``."""
    if realization.num_users != config.num_users:
        raise ValueError(f"realization has {realization.num_users} users, config has {config.num_users}")
    theta = realization.theta
    demands = user_demand(theta, posted_price)
    payments = posted_price * demands
    payoffs = payoff(theta, demands, posted_price)
    return ForwardOutcome(
        posted_price=float(posted_price),
        demands=demands,
        payments=payments,
        payoffs=payoffs,
        total_demand=math.fsum(demands),
    )
