"""Configuration for heisenberg-freiman.

This module provides configuration management for:
1. Budgets (caps on product-set sizes, word enumeration and closures)
2. Harness runs (prime, density exponent, pipeline, seed, codomain model)

Key design principles:
- Config is optional (every command runs from flags alone)
- Rationals are written exactly, as "num/den" strings
- Validation happens before any computation, with the offending key in the message
- FREIMAN_BUDGET in the environment overrides the word-enumeration budgets
"""

import logging
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Literal

from ruamel.yaml import YAML

from heisenberg_freiman.exact import MAX_MODULUS, is_prime, parse_rational

logger = logging.getLogger(__name__)

BUDGET_ENV_VAR = "FREIMAN_BUDGET"

Pipeline = Literal["s6", "s7"]

# Older names of the two pipelines, still accepted on input
PIPELINE_ALIASES = {"section4": "s6", "section3": "s7"}

THETA_MIN = {"s6": Fraction(43, 44), "s7": Fraction(11, 12)}


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range."""


def budget_override() -> int | None:
    """Word budget from FREIMAN_BUDGET, if set."""
    raw = os.environ.get(BUDGET_ENV_VAR, "").strip()
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{BUDGET_ENV_VAR} must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigError(f"{BUDGET_ENV_VAR} must be positive, got {value}")
    return value


@dataclass
class Budgets:
    """Caps on the work any single operation may do."""

    product_set: int = 100_000_000  # elements of one product set
    words: int = 100_000_000  # signed words of a Freiman check
    audit_words: int = 100_000_000  # signed words of the audit's Freiman s check
    closure: int = 1 << 26  # elements of a generated subgroup
    triple_samples: int = 100_000  # sampled triples for double commutators
    threads: int = 1

    _KEYS = {
        "productSet": "product_set",
        "words": "words",
        "auditWords": "audit_words",
        "closure": "closure",
        "tripleSamples": "triple_samples",
        "threads": "threads",
    }

    @classmethod
    def from_dict(cls, data: dict | None) -> "Budgets":
        """Create Budgets from a YAML mapping with camelCase keys."""
        values = {}
        for key, value in (data or {}).items():
            if key not in cls._KEYS:
                raise ConfigError(f"Unknown budget key '{key}'")
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"Budget '{key}' must be a positive integer, got {value!r}")
            values[cls._KEYS[key]] = value
        return cls(**values)

    def with_environment(self) -> "Budgets":
        """Apply FREIMAN_BUDGET to the word budgets."""
        override = budget_override()
        if override is None:
            return self
        logger.info(f"{BUDGET_ENV_VAR}={override} overrides the word budgets")
        return replace(self, words=override, audit_words=override)


def _rational(data: dict, key: str, default: Fraction | None = None) -> Fraction:
    if key not in data:
        if default is None:
            raise ConfigError(f"Config missing '{key}' field")
        return default
    try:
        return parse_rational(data[key])
    except ValueError as e:
        raise ConfigError(f"'{key}': {e}") from e


def _optional_int(data: dict, key: str) -> int | None:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    return value


@dataclass
class HarnessConfig:
    """One harness run at a concrete prime.

    pipeline "s6" follows the argument with Freiman 6-isomorphisms
    (43/44 <= theta <= 1); "s7" the comparison argument with Freiman
    7-isomorphisms (11/12 <= theta <= 1, slab exponent below 1).
    """

    p: int
    theta: Fraction
    epsilon: Fraction = Fraction(1, 100)
    seed: int = 0
    pipeline: Pipeline = "s6"
    slab_width: int | None = None  # overrides ceil(p^alpha)
    z1: int | None = None  # defaults to min Z
    model: str = "identity"
    budgets: Budgets = field(default_factory=Budgets)

    @classmethod
    def from_dict(cls, data: dict) -> "HarnessConfig":
        if not isinstance(data, dict):
            raise ConfigError("Harness config must be a mapping")
        if "p" not in data:
            raise ConfigError("Config missing 'p' field")
        pipeline = str(data.get("pipeline", "s6"))
        config = cls(
            p=_optional_int(data, "p"),
            theta=_rational(data, "theta"),
            epsilon=_rational(data, "epsilon", Fraction(1, 100)),
            seed=_optional_int(data, "seed") or 0,
            pipeline=PIPELINE_ALIASES.get(pipeline, pipeline),
            slab_width=_optional_int(data, "slabWidth"),
            z1=_optional_int(data, "z1"),
            model=str(data.get("model", "identity")),
            budgets=Budgets.from_dict(data.get("budgets")),
        )
        config.validate()
        return config

    @classmethod
    def load(cls, config_path: Path, overrides: dict | None = None) -> "HarnessConfig":
        """Load a harness config from YAML.

        Keys in `overrides` (command-line flags) replace the file's values.

        Raises:
            FileNotFoundError: If the file doesn't exist
            ConfigError: If the config is invalid
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise FileNotFoundError(
                f"Config file not found: {config_path}. See config.example.yaml for format."
            )
        yaml = YAML(typ="safe")
        with config_path.open() as f:
            data = yaml.load(f)
        if not data:
            raise ConfigError(f"Config file {config_path} is empty or invalid YAML")
        config = cls.from_dict({**data.get("harness", data), **(overrides or {})})
        logger.info(f"Loaded {config.pipeline} harness config for p={config.p} from {config_path}")
        return config

    @property
    def alpha(self) -> Fraction:
        """Slab exponent used to build A0."""
        from heisenberg_freiman.pipeline import alpha0, alpha_s7

        if self.pipeline == "s7":
            return alpha_s7(self.theta)
        return alpha0(self.theta) + self.epsilon

    def validate(self) -> None:
        """Check ranges before any computation.

        Raises:
            ConfigError: Naming the offending field
        """
        if self.pipeline not in THETA_MIN:
            raise ConfigError(f"'pipeline' must be s6 or s7, got {self.pipeline!r}")
        if not isinstance(self.p, int) or not is_prime(self.p):
            raise ConfigError(f"'p' must be a prime, got {self.p!r}")
        if self.p >= MAX_MODULUS:
            raise ConfigError(f"'p' must be below 2^21, got {self.p}")
        low = THETA_MIN[self.pipeline]
        if not low <= self.theta <= 1:
            raise ConfigError(
                f"'theta' = {self.theta} outside the {self.pipeline} range [{low}, 1]"
            )
        if self.epsilon <= 0:
            raise ConfigError(f"'epsilon' must be positive, got {self.epsilon}")
        alpha = self.alpha
        if not 0 <= alpha < 1:
            raise ConfigError(
                f"theta = {self.theta} gives slab exponent alpha = {alpha}; need 0 <= alpha < 1"
            )
        if self.slab_width is not None and not 1 <= self.slab_width <= self.p:
            raise ConfigError(f"'slabWidth' must lie in [1, p], got {self.slab_width}")
        if self.z1 is not None and not 0 <= self.z1 < self.p:
            raise ConfigError(f"'z1' must lie in [0, p), got {self.z1}")

    def echo(self) -> dict:
        """JSON-friendly view of the config for reports."""
        return {
            "p": self.p,
            "theta": f"{self.theta.numerator}/{self.theta.denominator}",
            "epsilon": f"{self.epsilon.numerator}/{self.epsilon.denominator}",
            "seed": self.seed,
            "pipeline": self.pipeline,
            "slab_width": self.slab_width,
            "z1": self.z1,
            "model": self.model,
            "budgets": {
                "product_set": self.budgets.product_set,
                "words": self.budgets.words,
                "audit_words": self.budgets.audit_words,
                "closure": self.budgets.closure,
                "triple_samples": self.budgets.triple_samples,
                "threads": self.budgets.threads,
            },
        }
