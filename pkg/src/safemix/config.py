"""Run configuration: a TOML file with a versioned schema."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .environments import SUITES, ConfigError
from .histories import dyadic
from .mentors import LIBRARY
from .novelty import PREDICATES
from .planning import choose_horizon

SCHEMA = 1
OUT_ENV = "SAFEMIX_OUT"


@dataclass
class RunConfig:
    suite: str = "bandit2"
    budget: int = 0  # hell augmentation: every stop program of at most this many bits
    gamma: float = 0.9
    L: float = 0
    T: int = 100
    mentors: list = field(default_factory=lambda: ["good", "mediocre"])
    mentor_weights: list = field(default_factory=lambda: ["1/2", "1/2"])
    default_mentor: str = ""
    epsilon: str = "1/2"
    suboptimality: float = 0.1  # gap counted by the eps-suboptimal step metric
    tolerance: float = 0.01
    horizon: int = 6
    horizon_cap: int = 48
    eta: str = "schedule"  # "schedule" (t^(-1/3)) or "off"
    policy: str = "gh"  # "gh", "uniform" or "mentor:<id>"
    seeds: list = field(default_factory=lambda: list(range(30)))
    record_novelty: bool = True
    novelty_budget: int = 16
    novelty_fuel: int = 10_000
    extra_stop_programs: list = field(default_factory=list)
    alpha_steps: list = field(default_factory=lambda: [1, 2, 4])
    regret_grid: list = field(default_factory=lambda: [1000, 10000, 100000])
    predicates: list = field(default_factory=lambda: ["escape-codeword"])
    out_dir: str = ""
    name: str = "run"
    schema: int = SCHEMA

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schema != SCHEMA:
            raise ConfigError(f"config schema {self.schema} is not supported (expected {SCHEMA})")
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.L < 0:
            raise ConfigError("L must be >= 0")
        dyadic(self.L)
        if self.T < 0 or self.budget < 0:
            raise ConfigError("T and budget must be >= 0")
        if len(self.mentors) != len(self.mentor_weights) or not self.mentors:
            raise ConfigError("give one weight per mentor")
        for m in self.mentors:
            if m not in LIBRARY[self.suite]:
                raise ConfigError(f"no mentor {m!r} for suite {self.suite!r}")
        if sum(Fraction(w) for w in self.mentor_weights) != 1:
            raise ConfigError("mentor weights must sum to exactly 1")
        if self.default_mentor and self.default_mentor not in self.mentors:
            raise ConfigError("default mentor must be one of the mentors")
        if self.eta not in ("schedule", "off"):
            raise ConfigError("eta must be 'schedule' or 'off'")
        if not (self.policy in ("gh", "uniform") or self.policy.startswith("mentor:")):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.horizon < 1 or self.tolerance <= 0:
            raise ConfigError("horizon must be >= 1 and tolerance > 0")
        for p in self.predicates:
            if p not in PREDICATES:
                raise ConfigError(f"unknown predicate {p!r}")
        if isinstance(self.seeds, int):
            self.seeds = list(range(self.seeds))

    @property
    def max_horizon(self) -> int:
        return max(self.horizon, min(self.horizon_cap, choose_horizon(self.gamma, self.L, self.tolerance)))

    def model_config(self) -> dict:
        return {
            "suite": self.suite,
            "budget": self.budget,
            "L": self.L,
            "extra_stop_programs": list(self.extra_stop_programs),
        }

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig(**d)

    def output_root(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV, "runs"))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        flat = dict(d.get("run", {}))
        flat.update({k: v for k, v in d.items() if k != "run"})
        unknown = set(flat) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**flat)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(tomllib.loads(text))
