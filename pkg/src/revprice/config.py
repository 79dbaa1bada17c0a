"""Scenario files: flat ``key = value`` lines with ``#`` comments.

Example (the default experiment)::

    num_users = 100
    total_resource = 1000
    num_slots = 10
    theta_low = 1
    theta_high_rule = linear:2,0      # hi(h) = 2h
    p_min_policy = lemma1
    num_realizations = 1000
    master_seed = 20150101
    sweep_slot = 5
    sweep_ratios = 0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .market import DemandModel, MarketConfig, uniform_demand_model
from .reverse import PMinPolicy

REQUIRED_KEYS = (
    "num_users",
    "total_resource",
    "num_slots",
    "theta_low",
    "theta_high_rule",
    "num_realizations",
    "master_seed",
)
OPTIONAL_KEYS = ("p_min_policy", "sweep_slot", "sweep_ratios")


class ConfigError(ValueError):
    """Invalid or incomplete scenario. ``key`` names the offending entry."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class HighRule:
    """Upper willingness-to-pay bound ``slope * h + intercept`` for slot ``h``."""

    slope: float = 0.0
    intercept: float = 0.0

    def __call__(self, slot: int) -> float:
        return self.slope * slot + self.intercept

    @classmethod
    def parse(cls, text: str) -> "HighRule":
        text = text.strip()
        kind, _, args = text.partition(":")
        kind = kind.strip().lower()
        try:
            if not args:
                return cls(0.0, float(kind))
            if kind == "constant":
                return cls(0.0, float(args))
            if kind == "linear":
                a, b = (float(v) for v in args.split(","))
                return cls(a, b)
        except ValueError:
            pass
        raise ValueError(f"expected constant:C, linear:A,B or a number, got {text!r}")

    def __str__(self) -> str:
        if self.slope == 0:
            return f"constant:{self.intercept!r}"
        return f"linear:{self.slope!r},{self.intercept!r}"


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int
    total_resource: float
    num_slots: int
    theta_low: float
    theta_high_rule: HighRule
    num_realizations: int
    master_seed: int
    p_min_policy: PMinPolicy = field(default_factory=PMinPolicy.lemma1)
    sweep_slot: Optional[int] = None
    sweep_ratios: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        for key in ("num_users", "num_slots", "num_realizations"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1", key)
        if not math.isfinite(self.total_resource) or self.total_resource < 0:
            raise ConfigError("total_resource must be finite and >= 0", "total_resource")
        if not math.isfinite(self.theta_low) or self.theta_low < 0:
            raise ConfigError("theta_low must be finite and >= 0", "theta_low")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0", "master_seed")
        for h in range(1, self.num_slots + 1):
            if not self.theta_high_rule(h) >= self.theta_low:
                raise ConfigError(f"theta_high_rule gives {self.theta_high_rule(h)} < theta_low at slot {h}", "theta_high_rule")
        if self.sweep_slot is not None and not 1 <= self.sweep_slot <= self.num_slots:
            raise ConfigError(f"sweep_slot must lie in 1..{self.num_slots}", "sweep_slot")
        if self.sweep_ratios is not None:
            if not self.sweep_ratios:
                raise ConfigError("sweep_ratios is empty", "sweep_ratios")
            if any(not 0.0 <= r <= 1.0 for r in self.sweep_ratios):
                raise ConfigError("sweep_ratios must lie in [0, 1]", "sweep_ratios")

    def market(self) -> MarketConfig:
        return MarketConfig(total_resource=self.total_resource, num_users=self.num_users, num_slots=self.num_slots)

    def demand_model(self) -> DemandModel:
        return uniform_demand_model(self.theta_low, self.theta_low, self.num_users, self.num_slots, self.theta_high_rule)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, master_seed=seed)

    def to_text(self) -> str:
        lines = [
            f"num_users = {self.num_users}",
            f"total_resource = {self.total_resource!r}",
            f"num_slots = {self.num_slots}",
            f"theta_low = {self.theta_low!r}",
            f"theta_high_rule = {self.theta_high_rule}",
            f"p_min_policy = {self.p_min_policy}",
            f"num_realizations = {self.num_realizations}",
            f"master_seed = {self.master_seed}",
        ]
        if self.sweep_slot is not None:
            lines.append(f"sweep_slot = {self.sweep_slot}")
        if self.sweep_ratios is not None:
            lines.append("sweep_ratios = " + ",".join(repr(r) for r in self.sweep_ratios))
        return "\n".join(lines) + "\n"


def parse_pairs(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        pairs[key] = value
    return pairs


def _convert(key: str, value: str, kind):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}", key) from None


def parse_config(text: str) -> ScenarioConfig:
    pairs = parse_pairs(text)
    for key in REQUIRED_KEYS:
        if key not in pairs:
            raise ConfigError(f"missing required key {key!r}", key)
    kwargs = dict(
        num_users=_convert("num_users", pairs["num_users"], int),
        total_resource=_convert("total_resource", pairs["total_resource"], float),
        num_slots=_convert("num_slots", pairs["num_slots"], int),
        theta_low=_convert("theta_low", pairs["theta_low"], float),
        theta_high_rule=_convert("theta_high_rule", pairs["theta_high_rule"], HighRule.parse),
        num_realizations=_convert("num_realizations", pairs["num_realizations"], int),
        master_seed=_convert("master_seed", pairs["master_seed"], int),
    )
    if "p_min_policy" in pairs:
        kwargs["p_min_policy"] = _convert("p_min_policy", pairs["p_min_policy"], PMinPolicy.parse)
    if "sweep_slot" in pairs:
        kwargs["sweep_slot"] = _convert("sweep_slot", pairs["sweep_slot"], int)
    if "sweep_ratios" in pairs:
        kwargs["sweep_ratios"] = tuple(
            _convert("sweep_ratios", v.strip(), float) for v in pairs["sweep_ratios"].split(",") if v.strip()
        )
    return ScenarioConfig(**kwargs)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a scenario file. ``OSError`` propagates unchanged."""
    return parse_config(Path(path).read_text())


DEFAULT_SCENARIO = """\
num_users = 100
total_resource = 1000
num_slots = 10
theta_low = 1
theta_high_rule = linear:2,0
p_min_policy = lemma1
num_realizations = 1000
master_seed = 20150101
sweep_slot = 5
sweep_ratios = 0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1
"""


def default_config() -> ScenarioConfig:
    return parse_config(DEFAULT_SCENARIO)
