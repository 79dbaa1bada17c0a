"""Forward pricing with and without a reverse (name-your-own-price) stage."""

from .forward import AdmissionCheck, ForwardOutcome, admission_condition_holds, forward_outcome, optimal_forward_price, user_demand
from .market import DemandModel, DemandRealization, MarketConfig, payoff, sample_demand, uniform_demand_model
from .montecarlo import GameTrace, Scheme, SlotMetrics, SweepPoint, run_horizon, run_pmin_sweep, run_slot
from .reverse import (
    PMinPolicy,
    ReverseSetup,
    SettlementResult,
    acceptance_probability,
    build_reverse_setup,
    expected_bid_payoff,
    indifference_price,
    lemma1_min_price,
    optimal_bid,
    participation_set,
    recommend_allocations,
    residual_resource,
    settle,
)

__version__ = "0.1.0"
