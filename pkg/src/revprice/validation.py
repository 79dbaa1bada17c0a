"""Self-checks: brute-force oracles against the closed forms, plus the
settlement invariants on simulated games.

The oracles never call the closed-form bid or demand rules. They maximize
the objective on a 10^4-point grid and zoom into the bracket around the best
point a few times, so the reported argmax is limited by rounding noise
rather than grid spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import reverse
from .config import ScenarioConfig
from .forward import optimal_forward_price, user_demand
from .market import payoff
from .montecarlo import iter_traces, realization_rng
from .reverse import PMinPolicy, acceptance_probability, draw_threshold, expected_bid_payoff, indifference_price

GRID_POINTS = 10_000
ZOOM_ROUNDS = 4
ARGMAX_TOL = 1e-6
VALUE_TOL = 1e-9
CLEARING_TOL = 1e-9
SIGMA_LIMIT = 3.0

BidRule = Callable[..., float]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail}"


def grid_argmax(objective: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> float:
    """Argmax of ``objective`` on ``[lo, hi]`` by repeated grid refinement."""
    best = lo
    for _ in range(ZOOM_ROUNDS + 1):
        grid = np.linspace(lo, hi, GRID_POINTS)
        k = int(np.argmax(objective(grid)))
        best = float(grid[k])
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, GRID_POINTS - 1)]
        if hi <= lo:
            break
    return best


def grid_demand(theta: float, unit_price: float, upper: float) -> float:
    """Brute-force maximizer of the user payoff over ``[0, upper]``.

    Each refinement round compares payoff increments against the bracket
    midpoint, ``theta * ln((1 + q) / (1 + c)) - p * (q - c)``, which keeps the
    flat top of the payoff from drowning in cancellation error.
    """
    lo, hi = 0.0, upper
    best = lo
    for _ in range(ZOOM_ROUNDS + 1):
        c = 0.5 * (lo + hi)
        grid = np.linspace(lo, hi, GRID_POINTS)
        gain = theta * np.log1p((grid - c) / (1.0 + c)) - unit_price * (grid - c)
        k = int(np.argmax(gain))
        best = float(grid[k])
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, GRID_POINTS - 1)]
        if hi <= lo:
            break
    return best


def random_bid_instance(rng: np.random.Generator):
    """A participant state ``(theta, x, s, p, p_min)`` with ``p_min <= v``."""
    p = rng.uniform(0.05, 5.0)
    theta = rng.uniform(0.0, 25.0 * p)
    s = user_demand(theta, p)
    x = s + rng.uniform(0.0, 3.0) * s + rng.uniform(0.01, 2.0)
    v = indifference_price(theta, x, s, p)
    p_min = rng.uniform(0.0, v)
    return theta, x, s, p, p_min


def check_bid_optimality(num_instances: int, seed: int, bid_rule: Optional[BidRule] = None) -> CheckResult:
    bid_rule = bid_rule or reverse.optimal_bid
    rng = np.random.default_rng([seed, 1])
    worst_arg = 0.0
    worst_gap = -math.inf
    for _ in range(num_instances):
        theta, x, s, p, p_min = random_bid_instance(rng)
        bid = float(bid_rule(theta, x, s, p, p_min))
        if not p_min <= bid <= p:
            return CheckResult("bid_optimality", False, math.inf, f"bid {bid} outside [{p_min}, {p}]")
        objective = lambda b: expected_bid_payoff(b, theta, x, s, p, p_min)  # noqa: E731
        best = grid_argmax(objective, p_min, p)
        worst_arg = max(worst_arg, abs(bid - best))
        grid_best = float(np.max(objective(np.linspace(p_min, p, GRID_POINTS))))
        worst_gap = max(worst_gap, grid_best - objective(bid))
    passed = worst_arg <= ARGMAX_TOL and worst_gap <= VALUE_TOL
    return CheckResult(
        "bid_optimality",
        passed,
        worst_arg,
        f"max |bid - grid argmax| = {worst_arg:.3e} (tol {ARGMAX_TOL:g}), max grid excess = {worst_gap:.3e}",
    )


def check_demand_optimality(num_instances: int, seed: int) -> CheckResult:
    rng = np.random.default_rng([seed, 2])
    worst_arg = 0.0
    worst_gap = -math.inf
    for _ in range(num_instances):
        p = rng.uniform(0.05, 5.0)
        theta = rng.uniform(0.0, 25.0 * p)
        s = user_demand(theta, p)
        upper = 4.0 * s + 4.0
        best = grid_demand(theta, p, upper)
        worst_arg = max(worst_arg, abs(s - best))
        grid = np.linspace(0.0, upper, GRID_POINTS)
        worst_gap = max(worst_gap, float(np.max(payoff(theta, grid, p))) - payoff(theta, s, p))
    passed = worst_arg <= ARGMAX_TOL and worst_gap <= VALUE_TOL
    return CheckResult(
        "demand_optimality",
        passed,
        worst_arg,
        f"max |demand - grid argmax| = {worst_arg:.3e} (tol {ARGMAX_TOL:g}), max grid excess = {worst_gap:.3e}",
    )


def check_bid_concavity(num_instances: int, seed: int) -> CheckResult:
    rng = np.random.default_rng([seed, 3])
    worst = -math.inf
    for _ in range(num_instances):
        theta, x, s, p, p_min = random_bid_instance(rng)
        lo, hi = np.sort(rng.uniform(p_min, p, 2))
        mid = 0.5 * (lo + hi)
        f = expected_bid_payoff(np.array([lo, mid, hi]), theta, x, s, p, p_min)
        second = f[0] - 2.0 * f[1] + f[2]
        # Exact curvature is -2x/(p - p_min); scale to remove the spacing.
        step = 0.5 * (hi - lo)
        if step > 0:
            worst = max(worst, second / step**2 * (p - p_min) / (2.0 * x))
    passed = worst <= 0.0
    return CheckResult("bid_concavity", passed, worst, f"max normalized second difference = {worst:.3e} (must be <= 0)")


def check_acceptance_law(config: ScenarioConfig, draws: int = 100_000) -> CheckResult:
    market, model = config.market(), config.demand_model()
    p = optimal_forward_price(model, 1, market)
    setup = reverse.ReverseSetup(recommended=np.ones(market.num_users), min_price=0.3 * p, posted_price=p, residual=0.0, active=True)
    bid = setup.min_price + 0.37 * (p - setup.min_price)
    rng = realization_rng(config.master_seed, 0, 0)
    hits = sum(bid >= draw_threshold(setup, rng) for _ in range(draws))
    prob = acceptance_probability(bid, setup.min_price, p)
    se = math.sqrt(prob * (1 - prob) / draws)
    z = abs(hits / draws - prob) / se
    return CheckResult(
        "acceptance_law", z <= SIGMA_LIMIT, z, f"|freq - prob| = {z:.2f} standard errors over {draws} draws (limit {SIGMA_LIMIT:g})"
    )


def check_forward_saturation(config: ScenarioConfig) -> CheckResult:
    market, model = config.market(), config.demand_model()
    worst = 0.0
    for slot in range(1, market.num_slots + 1):
        p = optimal_forward_price(model, slot, market)
        worst_case = math.fsum(model.upper_at(slot) / p - 1.0)
        worst = max(worst, abs(worst_case - market.total_resource))
    return CheckResult(
        "forward_saturation", worst <= CLEARING_TOL, worst, f"max |worst-case demand - Q| = {worst:.3e} (tol {CLEARING_TOL:g})"
    )


def check_settlement_invariants(config: ScenarioConfig) -> CheckResult:
    """Per-user and per-realization dominance with the minimum price at the
    revenue-neutral bound. Comparisons are exact."""
    market, model = config.market(), config.demand_model()
    q = market.total_resource
    policy = PMinPolicy.lemma1()
    failures: List[str] = []
    pairs = 0
    clearing_gap = 0.0
    for slot in range(1, market.num_slots + 1):
        for trace in iter_traces(market, model, slot, policy, config.num_realizations, config.master_seed):
            f, r = trace.forward, trace.settlement
            pairs += f.demands.shape[0]
            acc = r.accepted
            if np.any(r.payments[acc] < f.payments[acc]):
                failures.append(f"slot {slot} #{trace.index}: accepted payment below posted-price payment")
            if np.any(r.payoffs[r.participants] < f.payoffs[r.participants]):
                failures.append(f"slot {slot} #{trace.index}: participant payoff below posted-price payoff")
            if np.any(r.allocations < f.demands):
                failures.append(f"slot {slot} #{trace.index}: allocation below posted-price demand")
            if math.fsum(r.allocations) > q or f.total_demand > q:
                failures.append(f"slot {slot} #{trace.index}: capacity exceeded")
            if not (
                math.fsum(r.payments) >= math.fsum(f.payments)
                and math.fsum(r.payoffs) >= math.fsum(f.payoffs)
                and math.fsum(r.allocations) >= f.total_demand
            ):
                failures.append(f"slot {slot} #{trace.index}: scheme totals not dominant")
            if trace.setup.active and trace.setup.residual > 0 and np.array_equal(acc, r.participants) and np.all(r.participants[f.demands > 0]):
                clearing_gap = max(clearing_gap, abs(math.fsum(r.allocations) - q))
    if clearing_gap > CLEARING_TOL:
        failures.append(f"market clearing gap {clearing_gap:.3e}")
    detail = f"{pairs} user-realization pairs, {len(failures)} violations, max clearing gap {clearing_gap:.3e}"
    if failures:
        detail += "; first: " + failures[0]
    return CheckResult("settlement_invariants", not failures, float(len(failures)), detail)


def run_validation(
    config: ScenarioConfig,
    num_instances: int = 1000,
    bid_rule: Optional[BidRule] = None,
) -> List[CheckResult]:
    seed = config.master_seed
    return [
        check_bid_optimality(num_instances, seed, bid_rule),
        check_demand_optimality(num_instances, seed),
        check_bid_concavity(num_instances, seed),
        check_acceptance_law(config),
        check_forward_saturation(config),
        check_settlement_invariants(config),
    ]
