import math

import numpy as np
import pytest

from revprice.config import parse_config
from revprice.validation import (
    check_bid_concavity,
    check_bid_optimality,
    check_demand_optimality,
    grid_argmax,
    grid_demand,
    run_validation,
)

TINY = """\
num_users = 5
total_resource = 40
num_slots = 2
theta_low = 1
theta_high_rule = linear:2,0
num_realizations = 10
master_seed = 3
"""


def test_grid_argmax_on_known_quadratic():
    assert grid_argmax(lambda b: -(b - 0.3141592653589793) ** 2, 0.0, 1.0) == pytest.approx(math.pi / 10, abs=1e-10)


def test_grid_argmax_at_boundary():
    assert grid_argmax(lambda b: b, 2.0, 5.0) == 5.0


def test_grid_demand_on_closed_form_case():
    # theta = 3, p = 1: maximizer of 3 ln(1+q) - q is q = 2
    assert grid_demand(3.0, 1.0, 12.0) == pytest.approx(2.0, abs=1e-10)
    assert grid_demand(0.5, 1.0, 4.0) == 0.0


def test_checks_pass_for_the_real_rules():
    for check in (check_bid_optimality(200, 1), check_demand_optimality(200, 1), check_bid_concavity(200, 1)):
        assert check.passed, check.line()


def test_midpoint_rule_without_floor_fails():
    def posted_midpoint(theta, x, s, p, p_min):
        return np.asarray((p_min + p) / 2.0)

    result = check_bid_optimality(50, 1, posted_midpoint)
    assert not result.passed
    assert result.line().startswith("FAIL bid_optimality")


def test_run_validation_reports_every_check():
    results = run_validation(parse_config(TINY), num_instances=50)
    assert [r.name for r in results] == [
        "bid_optimality",
        "demand_optimality",
        "bid_concavity",
        "acceptance_law",
        "forward_saturation",
        "settlement_invariants",
    ]
    assert all(r.passed for r in results)
