"""Reverse ("name-your-own-price") pricing layered on a posted price.

Stage III: the operator spreads the leftover capacity over users in
proportion to their posted-price demand, fixes a minimum participation price
and hides a bid-acceptance threshold drawn uniformly between that minimum and
the posted price. Stage IV: each user decides whether the larger bundle is
worth bidding on and, if so, names the bid that maximizes expected payoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .forward import ForwardOutcome
from .market import ArrayLike, DemandRealization, MarketConfig, payoff

_MAX_NUDGES = 256


@dataclass(frozen=True)
class PMinPolicy:
    """How the operator picks the minimum participation price.

    ``lemma1`` uses the smallest price that never earns less than the posted
    price on any accepted trade, ``posted * total_demand / Q``. ``ratio``
    uses ``value * posted``; ``absolute`` uses ``value`` itself.
    """

    kind: str = "lemma1"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("lemma1", "ratio", "absolute"):
            raise ValueError(f"unknown p_min policy {self.kind!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"p_min policy value must be finite and >= 0, got {self.value}")
        if self.kind == "ratio" and self.value > 1:
            raise ValueError(f"p_min ratio must lie in [0, 1], got {self.value}")

    @classmethod
    def lemma1(cls) -> "PMinPolicy":
        return cls("lemma1")

    @classmethod
    def ratio(cls, r: float) -> "PMinPolicy":
        return cls("ratio", float(r))

    @classmethod
    def absolute(cls, a: float) -> "PMinPolicy":
        return cls("absolute", float(a))

    @classmethod
    def parse(cls, text: str) -> "PMinPolicy":
        """Parse ``lemma1``, ``ratio:R`` / ``ratio R`` or ``absolute:A`` / ``absolute A``."""
        parts = text.replace(":", " ").split()
        if not parts:
            raise ValueError("empty p_min policy")
        kind = parts[0].lower()
        if kind == "lemma1":
            if len(parts) != 1:
                raise ValueError(f"lemma1 takes no argument: {text!r}")
            return cls.lemma1()
        if kind in ("ratio", "absolute") and len(parts) == 2:
            return cls(kind, float(parts[1]))
        raise ValueError(f"cannot parse p_min policy {text!r}")

    def __str__(self) -> str:
        if self.kind == "lemma1":
            return "lemma1"
        return f"{self.kind}:{self.value!r}"


@dataclass(frozen=True, eq=False)
class ReverseSetup:
    """Operator's Stage-III announcement for one slot."""

    recommended: np.ndarray
    min_price: float
    posted_price: float
    residual: float
    active: bool


@dataclass(frozen=True, eq=False)
class SettlementResult:
    """Stage-IV outcome. Rejected bidders and non-participants keep their
    posted-price contract."""

    bids: np.ndarray
    participants: np.ndarray
    threshold: float
    accepted: np.ndarray
    allocations: np.ndarray
    payments: np.ndarray
    payoffs: np.ndarray


def residual_resource(total_demand: float, config: MarketConfig) -> float:
    """Capacity left after posted-price demand, ``max(Q - total_demand, 0)``."""
    if total_demand < 0:
        raise ValueError("total_demand must be nonnegative")
    return max(config.total_resource - total_demand, 0.0)


def recommend_allocations(demands: np.ndarray, config: MarketConfig) -> np.ndarray:
    """Proportional residual recommendation ``x_i = s_i + s_i / sum(s) * Q_r``.

    Every user keeps at least their posted-price demand and the recommended
    bundles clear the market. The residual handed out is trimmed by a few ulps
    when rounding would push ``fsum(x)`` above ``Q``, so the capacity bound
    holds exactly in floating point.
    """
    s = np.asarray(demands, dtype=float)
    if np.any(s < 0):
        raise ValueError("demands must be nonnegative")
    total = math.fsum(s)
    residual = residual_resource(total, config)
    if total == 0 or residual == 0:
        return s.copy()
    share = s / total
    extra = residual
    x = s + share * extra
    nudges = 0
    while math.fsum(x) > config.total_resource:
        extra = math.nextafter(extra, 0.0) if nudges < _MAX_NUDGES else extra * (1 - 1e-12)
        x = s + share * extra
        nudges += 1
    return x


def lemma1_min_price(posted_price: float, total_demand: float, config: MarketConfig) -> float:
    """Smallest minimum price that keeps every accepted trade at or above
    its posted-price revenue: ``posted_price * total_demand / Q``."""
    if config.total_resource <= 0:
        raise ValueError("minimum price bound needs total_resource > 0")
    return posted_price * total_demand / config.total_resource


def indifference_price(theta: ArrayLike, recommended_x: ArrayLike, demand_s: ArrayLike, posted_price: float) -> ArrayLike:
    """Unit price at which bundle ``x`` pays off exactly as much as ``s`` at
    the posted price: ``[theta * ln((1 + x) / (1 + s)) + p * s] / x``."""
    x = np.asarray(recommended_x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("recommended bundle must be positive")
    theta_a = np.asarray(theta, dtype=float)
    s = np.asarray(demand_s, dtype=float)
    v = (theta_a * (np.log1p(x) - np.log1p(s)) + posted_price * s) / x
    return float(v) if v.ndim == 0 else v


def participation_set(realization: DemandRealization, setup: ReverseSetup, demands: np.ndarray) -> np.ndarray:
    """Users whose indifference price reaches the minimum participation price."""
    if not setup.active:
        raise ValueError("reverse stage is inactive for this slot")
    x = setup.recommended
    s = np.asarray(demands, dtype=float)
    flags = np.zeros(x.shape, dtype=bool)
    bundle = x > 0
    if np.any(bundle):
        v = indifference_price(realization.theta[bundle], x[bundle], s[bundle], setup.posted_price)
        flags[bundle] = setup.min_price <= v
    return flags


def optimal_bid(
    theta: ArrayLike,
    recommended_x: ArrayLike,
    demand_s: ArrayLike,
    posted_price: float,
    min_price: float,
) -> ArrayLike:
    """Expected-payoff maximizing bid of a participating user.

    ``b = [theta * ln((1 + x) / (1 + s)) + s * p + x * p_min] / (2 x)``, the
    midpoint of the minimum price and the indifference price, clamped into
    ``[p_min, p]`` against rounding. Raises ``ValueError`` for users outside
    the participation set.
    """
    x = np.asarray(recommended_x, dtype=float)
    v = np.asarray(indifference_price(theta, x, demand_s, posted_price))
    if np.any(min_price > v):
        raise ValueError("optimal_bid called for a non-participant (min_price above indifference price)")
    theta_a = np.asarray(theta, dtype=float)
    s = np.asarray(demand_s, dtype=float)
    b = (theta_a * (np.log1p(x) - np.log1p(s)) + s * posted_price + x * min_price) / (2.0 * x)
    b = np.clip(b, min_price, posted_price)
    return float(b) if b.ndim == 0 else b


def acceptance_probability(bid: ArrayLike, min_price: float, posted_price: float) -> ArrayLike:
    """Chance a bid clears a threshold uniform on ``[min_price, posted_price]``."""
    if not min_price < posted_price:
        raise ValueError("acceptance probability needs min_price < posted_price")
    prob = np.clip((np.asarray(bid, dtype=float) - min_price) / (posted_price - min_price), 0.0, 1.0)
    return float(prob) if prob.ndim == 0 else prob


def expected_bid_payoff(
    bid: ArrayLike,
    theta: float,
    recommended_x: float,
    demand_s: float,
    posted_price: float,
    min_price: float,
) -> ArrayLike:
    """Expected payoff of naming ``bid`` for bundle ``x``.

    Accepted with probability ``(b - p_min) / (p - p_min)`` at payoff
    ``payoff(theta, x, b)``; otherwise the user keeps ``s`` at the posted
    price. ``bid`` may be an array (e.g. a search grid).
    """
    if not min_price < posted_price:
        raise ValueError("expected bid payoff needs min_price < posted_price")
    b = np.asarray(bid, dtype=float)
    if np.any(b < min_price) or np.any(b > posted_price):
        raise ValueError("bid must lie in [min_price, posted_price]")
    width = posted_price - min_price
    value = payoff(theta, recommended_x, b) * (b - min_price) / width + payoff(
        theta, demand_s, posted_price
    ) * (posted_price - b) / width
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def resolve_min_price(policy: PMinPolicy, forward: ForwardOutcome, recommended: np.ndarray, config: MarketConfig) -> float:
    """Minimum participation price under ``policy`` for this slot."""
    p = forward.posted_price
    if policy.kind == "ratio":
        return policy.value * p
    if policy.kind == "absolute":
        return policy.value
    if config.total_resource <= 0:
        return p
    p_min = lemma1_min_price(p, forward.total_demand, config)
    # The bound makes p_min * x_i == p * s_i in exact arithmetic; step up by
    # ulps until it also holds after rounding.
    s = forward.demands
    for _ in range(_MAX_NUDGES):
        if not np.any(p_min * recommended < p * s):
            break
        p_min = math.nextafter(p_min, math.inf)
    return p_min


def build_reverse_setup(forward: ForwardOutcome, config: MarketConfig, policy: Optional[PMinPolicy] = None) -> ReverseSetup:
    """Stage III. The setup is inactive when nobody bought at the posted
    price or the minimum price leaves no room below the posted price."""
    policy = policy or PMinPolicy.lemma1()
    recommended = recommend_allocations(forward.demands, config)
    min_price = resolve_min_price(policy, forward, recommended, config)
    active = forward.total_demand > 0 and min_price < forward.posted_price
    return ReverseSetup(
        recommended=recommended,
        min_price=float(min_price),
        posted_price=forward.posted_price,
        residual=residual_resource(forward.total_demand, config),
        active=bool(active),
    )


def place_bids(realization: DemandRealization, setup: ReverseSetup, demands: np.ndarray, participants: np.ndarray) -> np.ndarray:
    """Optimal bids for participants and zero for everybody else."""
    bids = np.zeros(setup.recommended.shape, dtype=float)
    if np.any(participants):
        bids[participants] = optimal_bid(
            realization.theta[participants],
            setup.recommended[participants],
            np.asarray(demands, dtype=float)[participants],
            setup.posted_price,
            setup.min_price,
        )
    return bids


def draw_threshold(setup: ReverseSetup, rng: np.random.Generator) -> float:
    """One hidden threshold for the slot, uniform on ``[min_price, posted_price]``."""
    return float(setup.min_price + (setup.posted_price - setup.min_price) * rng.random())


def settle(
    realization: DemandRealization,
    setup: ReverseSetup,
    demands: np.ndarray,
    bids: np.ndarray,
    rng: np.random.Generator,
) -> SettlementResult:
    """Stage IV. Draw the slot's threshold and settle every user.

    A participant whose bid is at least the threshold receives the
    recommended bundle and pays the bid per unit; everyone else keeps the
    posted-price contract.
    """
    if not setup.active:
        raise ValueError("reverse stage is inactive for this slot")
    s = np.asarray(demands, dtype=float)
    b = np.asarray(bids, dtype=float)
    participants = participation_set(realization, setup, s)
    if np.any(b[~participants] != 0):
        raise ValueError("non-participants must bid 0")
    if np.any(b[participants] < setup.min_price) or np.any(b[participants] > setup.posted_price):
        raise ValueError("participant bids must lie in [min_price, posted_price]")
    threshold = draw_threshold(setup, rng)
    accepted = participants & (b >= threshold)
    x = setup.recommended
    p = setup.posted_price
    theta = realization.theta
    forward_payoffs = payoff(theta, s, p)
    return SettlementResult(
        bids=b.copy(),
        participants=participants,
        threshold=threshold,
        accepted=accepted,
        allocations=np.where(accepted, x, s),
        payments=np.where(accepted, b * x, p * s),
        payoffs=np.where(accepted, payoff(theta, x, b), forward_payoffs),
    )


def forward_settlement(forward: ForwardOutcome) -> SettlementResult:
    """Settlement of a slot where the reverse stage did not run."""
    n = forward.demands.shape[0]
    return SettlementResult(
        bids=np.zeros(n),
        participants=np.zeros(n, dtype=bool),
        threshold=math.nan,
        accepted=np.zeros(n, dtype=bool),
        allocations=forward.demands,
        payments=forward.payments,
        payoffs=forward.payoffs,
    )
