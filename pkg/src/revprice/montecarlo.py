"""Seeded Monte Carlo over the full four-stage game.

Every realization owns a generator derived from ``(seed, slot, index)``, so
results do not depend on execution order or worker count, and the two
schemes are always compared on the same demand draws.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, List, Optional, Sequence

import numpy as np

from .forward import ForwardOutcome, admission_condition_holds, forward_outcome, optimal_forward_price
from .market import DemandModel, DemandRealization, MarketConfig, sample_demand
from .reverse import (
    PMinPolicy,
    ReverseSetup,
    SettlementResult,
    acceptance_probability,
    build_reverse_setup,
    forward_settlement,
    participation_set,
    place_bids,
    settle,
)

__all__ = [
    "GameTrace",
    "Scheme",
    "SlotMetrics",
    "SweepPoint",
    "acceptance_probability",
    "iter_traces",
    "play_realization",
    "realization_rng",
    "run_horizon",
    "run_pmin_sweep",
    "run_slot",
]


class Scheme(str, Enum):
    FORWARD_ONLY = "forward_only"
    REVERSE_ON_FORWARD = "reverse_on_forward"


BOTH_SCHEMES = (Scheme.FORWARD_ONLY, Scheme.REVERSE_ON_FORWARD)


@dataclass(frozen=True)
class SlotMetrics:
    """Per-slot averages over realizations for one scheme.

    The ``se_*`` fields are standard errors of the corresponding means;
    ``avg_participants`` and ``avg_accepted`` count users per realization and
    ``share_with_participants`` is the fraction of realizations in which at
    least one user bid (all three are 0 for the forward-only scheme).
    """

    slot: int
    scheme: Scheme
    avg_demand: float
    avg_revenue: float
    avg_payoff: float
    avg_utilization: float
    num_realizations: int
    admission_warning: bool
    se_demand: float = 0.0
    se_revenue: float = 0.0
    se_payoff: float = 0.0
    avg_residual: float = 0.0
    avg_participants: float = 0.0
    avg_accepted: float = 0.0
    share_with_participants: float = 0.0


@dataclass(frozen=True)
class SweepPoint:
    ratio: float
    forward: SlotMetrics
    reverse: SlotMetrics


@dataclass(frozen=True, eq=False)
class GameTrace:
    """Everything that happened in one realization of one slot."""

    slot: int
    index: int
    realization: DemandRealization
    forward: ForwardOutcome
    setup: ReverseSetup
    settlement: SettlementResult


def realization_rng(seed: int, slot: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, slot, index]))


def play_realization(
    config: MarketConfig,
    model: DemandModel,
    slot: int,
    posted_price: float,
    policy: PMinPolicy,
    rng: np.random.Generator,
    index: int = 0,
) -> GameTrace:
    """Play Stages II-IV once. The demand draw is taken from ``rng`` before
    the threshold, so the forward outcome is identical whether or not the
    reverse stage runs."""
    realization = sample_demand(model, slot, rng)
    forward = forward_outcome(realization, posted_price, config)
    setup = build_reverse_setup(forward, config, policy)
    if setup.active:
        participants = participation_set(realization, setup, forward.demands)
        bids = place_bids(realization, setup, forward.demands, participants)
        result = settle(realization, setup, forward.demands, bids, rng)
    else:
        result = forward_settlement(forward)
    return GameTrace(slot=slot, index=index, realization=realization, forward=forward, setup=setup, settlement=result)


def _chunks(n: int, workers: int) -> List[range]:
    size = max(1, math.ceil(n / max(1, workers)))
    return [range(lo, min(lo + size, n)) for lo in range(0, n, size)]


def iter_traces(
    config: MarketConfig,
    model: DemandModel,
    slot: int,
    policy: Optional[PMinPolicy] = None,
    num_realizations: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> Iterator[GameTrace]:
    """Yield the traces of ``num_realizations`` independent games, in index order."""
    if num_realizations < 1:
        raise ValueError("num_realizations must be >= 1")
    policy = policy or PMinPolicy.lemma1()
    price = optimal_forward_price(model, slot, config)

    def run(indices: range) -> List[GameTrace]:
        return [
            play_realization(config, model, slot, price, policy, realization_rng(seed, slot, i), i)
            for i in indices
        ]

    chunks = _chunks(num_realizations, workers)
    if workers <= 1 or len(chunks) == 1:
        for chunk in chunks:
            yield from run(chunk)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for batch in pool.map(run, chunks):
            yield from batch


class _Totals:
    """Per-realization totals, stored by realization index."""

    def __init__(self, n: int):
        self.forward = np.zeros((n, 3))
        self.reverse = np.zeros((n, 3))
        self.residual = np.zeros(n)
        self.participants = np.zeros(n)
        self.accepted = np.zeros(n)

    def record(self, trace: GameTrace) -> None:
        i = trace.index
        f, r = trace.forward, trace.settlement
        self.forward[i] = (f.total_demand, math.fsum(f.payments), math.fsum(f.payoffs))
        self.reverse[i] = (math.fsum(r.allocations), math.fsum(r.payments), math.fsum(r.payoffs))
        self.residual[i] = trace.setup.residual
        self.participants[i] = np.count_nonzero(r.participants)
        self.accepted[i] = np.count_nonzero(r.accepted)


def _collect(traces: Iterable[GameTrace], n: int) -> _Totals:
    totals = _Totals(n)
    for trace in traces:
        totals.record(trace)
    return totals


def _metrics(
    slot: int,
    scheme: Scheme,
    totals: _Totals,
    config: MarketConfig,
    warning: bool,
) -> SlotMetrics:
    table = totals.forward if scheme is Scheme.FORWARD_ONLY else totals.reverse
    n = table.shape[0]
    means = table.mean(axis=0)
    ses = table.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(3)
    # a constant column has no sampling error; std() would report mean rounding
    ses[np.ptp(table, axis=0) == 0] = 0.0
    q = config.total_resource
    utilization = float(means[0] / q) if q > 0 else 0.0
    reverse = scheme is Scheme.REVERSE_ON_FORWARD
    return SlotMetrics(
        slot=slot,
        scheme=scheme,
        avg_demand=float(means[0]),
        avg_revenue=float(means[1]),
        avg_payoff=float(means[2]),
        avg_utilization=min(max(utilization, 0.0), 1.0),
        num_realizations=n,
        admission_warning=warning,
        se_demand=float(ses[0]),
        se_revenue=float(ses[1]),
        se_payoff=float(ses[2]),
        avg_residual=float(totals.residual.mean()),
        avg_participants=float(totals.participants.mean()) if reverse else 0.0,
        avg_accepted=float(totals.accepted.mean()) if reverse else 0.0,
        share_with_participants=float(np.mean(totals.participants > 0)) if reverse else 0.0,
    )


def _slot_both(config, model, slot, policy, num_realizations, seed, workers):
    warning = not admission_condition_holds(model, slot, config)
    totals = _collect(iter_traces(config, model, slot, policy, num_realizations, seed, workers), num_realizations)
    return {scheme: _metrics(slot, scheme, totals, config, warning) for scheme in BOTH_SCHEMES}


def run_slot(
    config: MarketConfig,
    model: DemandModel,
    slot: int,
    scheme: Scheme,
    p_min_policy: Optional[PMinPolicy] = None,
    num_realizations: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> SlotMetrics:
    """Average one scheme's totals over ``num_realizations`` games at ``slot``."""
    return _slot_both(config, model, slot, p_min_policy, num_realizations, seed, workers)[Scheme(scheme)]


def run_horizon(
    config: MarketConfig,
    model: DemandModel,
    schemes: Sequence[Scheme] = BOTH_SCHEMES,
    p_min_policy: Optional[PMinPolicy] = None,
    num_realizations: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> List[SlotMetrics]:
    """One row per (slot, scheme), slots ascending, schemes in the given order.

    Both schemes at a slot are computed from the same realizations.
    """
    schemes = [Scheme(s) for s in schemes]
    rows = []
    for slot in range(1, config.num_slots + 1):
        both = _slot_both(config, model, slot, p_min_policy, num_realizations, seed, workers)
        rows.extend(both[s] for s in schemes)
    return rows


def run_pmin_sweep(
    config: MarketConfig,
    model: DemandModel,
    slot: int,
    ratios: Sequence[float],
    num_realizations: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> List[SweepPoint]:
    """Vary the minimum price as a fraction of the posted price at one slot.

    Every ratio reuses the same demand draws; the forward-only metrics are
    therefore identical across points.
    """
    points = []
    for r in ratios:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"ratio {r} outside [0, 1]")
        both = _slot_both(config, model, slot, PMinPolicy.ratio(r), num_realizations, seed, workers)
        points.append(SweepPoint(ratio=float(r), forward=both[Scheme.FORWARD_ONLY], reverse=both[Scheme.REVERSE_ON_FORWARD]))
    return points
