"""Shared market types and the per-user payoff / demand-sampling primitives.

Slots are numbered ``1..H`` throughout the public API. ``DemandModel`` stores
``[user][slot]`` grids and translates slot numbers to column indices
internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class MarketConfig:
    """Global market parameters.

    Attributes:
        total_resource: capacity ``Q`` shared by all users in every slot.
        num_users: number of users ``I``.
        num_slots: horizon length ``H``.
    """

    total_resource: float
    num_users: int
    num_slots: int

    def __post_init__(self):
        # Q = 0 is allowed: the forward price stays well defined (choke price).
        if not np.isfinite(self.total_resource) or self.total_resource < 0:
            raise ValueError(f"total_resource must be finite and >= 0, got {self.total_resource}")
        if self.num_users < 1:
            raise ValueError(f"num_users must be >= 1, got {self.num_users}")
        if self.num_slots < 1:
            raise ValueError(f"num_slots must be >= 1, got {self.num_slots}")

    def check_slot(self, slot: int) -> None:
        if not 1 <= slot <= self.num_slots:
            raise IndexError(f"slot {slot} outside 1..{self.num_slots}")


@dataclass(frozen=True, eq=False)
class DemandModel:
    """Willingness-to-pay statistics, shape ``(num_users, num_slots)``.

    ``theta_mean`` is the per-unit mean willingness to pay and ``theta_spread``
    the half-width of its bounded, zero-mean deviation.
    """

    theta_mean: np.ndarray
    theta_spread: np.ndarray

    def __post_init__(self):
        mean = np.array(self.theta_mean, dtype=float)
        spread = np.array(self.theta_spread, dtype=float)
        if mean.ndim != 2 or mean.shape != spread.shape:
            raise ValueError(
                f"theta_mean and theta_spread must be 2-D with equal shapes, got {mean.shape} and {spread.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(spread))):
            raise ValueError("demand statistics must be finite")
        if np.any(spread < 0):
            raise ValueError("theta_spread must be nonnegative")
        if np.any(mean - spread < 0):
            raise ValueError("theta_mean - theta_spread must be nonnegative")
        mean.setflags(write=False)
        spread.setflags(write=False)
        object.__setattr__(self, "theta_mean", mean)
        object.__setattr__(self, "theta_spread", spread)

    @property
    def num_users(self) -> int:
        return self.theta_mean.shape[0]

    @property
    def num_slots(self) -> int:
        return self.theta_mean.shape[1]

    def _column(self, slot: int) -> int:
        if not 1 <= slot <= self.num_slots:
            raise IndexError(f"slot {slot} outside 1..{self.num_slots}")
        return slot - 1

    def mean_at(self, slot: int) -> np.ndarray:
        return self.theta_mean[:, self._column(slot)]

    def spread_at(self, slot: int) -> np.ndarray:
        return self.theta_spread[:, self._column(slot)]

    def lower_at(self, slot: int) -> np.ndarray:
        return self.mean_at(slot) - self.spread_at(slot)

    def upper_at(self, slot: int) -> np.ndarray:
        return self.mean_at(slot) + self.spread_at(slot)

    def __eq__(self, other):
        if not isinstance(other, DemandModel):
            return NotImplemented
        return np.array_equal(self.theta_mean, other.theta_mean) and np.array_equal(
            self.theta_spread, other.theta_spread
        )


@dataclass(frozen=True, eq=False)
class DemandRealization:
    """Realized willingness to pay of every user in one slot."""

    theta: np.ndarray
    slot: int = 0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 1:
            raise ValueError("theta must be a 1-D array")
        if np.any(theta < 0):
            raise ValueError("realized willingness to pay must be nonnegative")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def num_users(self) -> int:
        return self.theta.shape[0]


def payoff(theta: ArrayLike, quantity: ArrayLike, unit_price: ArrayLike) -> ArrayLike:
    """User payoff ``theta * ln(1 + quantity) - unit_price * quantity``.

    Broadcasts over numpy arrays. Raises ``ValueError`` if any input is
    negative.
    """
    theta_a, quantity_a, price_a = (np.asarray(v, dtype=float) for v in (theta, quantity, unit_price))
    if np.any(theta_a < 0) or np.any(quantity_a < 0) or np.any(price_a < 0):
        raise ValueError("payoff inputs must be nonnegative")
    result = theta_a * np.log1p(quantity_a) - price_a * quantity_a
    return float(result) if result.ndim == 0 else result


def sample_demand(model: DemandModel, slot: int, rng: np.random.Generator) -> DemandRealization:
    """Draw every user's willingness to pay for ``slot``.

    Each draw is uniform on ``[mean - spread, mean + spread]``; one uniform is
    consumed per user, in user order, so a seeded generator reproduces the
    same realization bit for bit.
    """
    lower = model.lower_at(slot)
    upper = model.upper_at(slot)
    u = rng.random(model.num_users)
    theta = lower + (upper - lower) * u
    # lower + width*u can round one ulp past the bound
    theta = np.clip(theta, lower, upper)
    return DemandRealization(theta=theta, slot=slot)


def uniform_demand_model(
    lo: float,
    hi: float,
    num_users: int,
    num_slots: int,
    per_slot_hi_rule: Optional[Callable[[int], float]] = None,
) -> DemandModel:
    """Identical users whose willingness to pay is uniform on ``[lo, hi]``.

    If ``per_slot_hi_rule`` is given it maps a slot number ``h`` to the upper
    bound for that slot and ``hi`` is ignored, e.g. ``lambda h: 2 * h``.
    """
    if lo < 0:
        raise ValueError(f"lo must be >= 0, got {lo}")
    if num_users < 1 or num_slots < 1:
        raise ValueError("num_users and num_slots must be >= 1")
    highs = np.array(
        [per_slot_hi_rule(h) if per_slot_hi_rule is not None else hi for h in range(1, num_slots + 1)],
        dtype=float,
    )
    if np.any(highs < lo):
        bad = int(np.argmax(highs < lo)) + 1
        raise ValueError(f"upper bound {highs[bad - 1]} below lower bound {lo} at slot {bad}")
    mean_row = (lo + highs) / 2.0
    spread_row = (highs - lo) / 2.0
    return DemandModel(
        theta_mean=np.tile(mean_row, (num_users, 1)),
        theta_spread=np.tile(spread_row, (num_users, 1)),
    )
