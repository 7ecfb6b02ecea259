"""Configuration management for FairGuide."""

import os
import yaml
from typing import Dict, List, Optional, Any, Tuple
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError


INIT_MODES = ("kmeans", "random")


@dataclass
class GuideConfig:
    """Hyperparameters of the link-addition loop."""
    budget: int = 0  # total links to add (Delta)
    batch_k: int = 100  # links added per iteration
    alpha: float = 0.1  # restart probability of the propagation
    k_steps: int = 10  # propagation depth K
    communities: int = 10  # number of pseudo communities C
    beta: float = 4.0  # cross-group boost
    tau: float = 1.0  # Gumbel temperature
    epsilon: float = 1e-12  # underflow guard inside the log
    seed: int = 10
    exact_degree: bool = True  # False = frozen-degree fast mode
    block_rows: int = 256  # rows of candidate scores materialized at once
    init_mode: str = "kmeans"  # "random" skips the autoencoder and draws labels uniformly
    single_shot: bool = False  # spend the whole budget from one gradient


@dataclass
class AutoencoderConfig:
    """Feature autoencoder used to seed the communities."""
    hidden: int = 128
    latent: int = 64
    epochs: int = 1000
    lr: float = 1e-3
    kmeans_max_iters: int = 300


@dataclass
class GcnConfig:
    """Downstream two-layer GCN."""
    hidden: int = 128
    epochs: int = 1000
    lr: float = 1e-3
    weight_decay: float = 0.0


@dataclass
class EvaluationConfig:
    """Evaluation protocol."""
    seeds: List[int] = field(default_factory=lambda: [10, 20, 30, 40, 50])
    split_seed: int = 10
    val_fraction: float = 0.25
    test_fraction: float = 0.25
    jobs: int = 1


@dataclass
class Config:
    """Main configuration class."""
    guide: GuideConfig = field(default_factory=GuideConfig)
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    gcn: GcnConfig = field(default_factory=GcnConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)


SECTIONS: Dict[str, type] = {
    "guide": GuideConfig,
    "autoencoder": AutoencoderConfig,
    "gcn": GcnConfig,
    "evaluation": EvaluationConfig,
}


def apply_overrides(section: Any, overrides: Dict[str, Any]) -> Any:
    """Return a copy of ``section`` with every non-None override applied."""
    known = {f.name for f in fields(section)}
    updates = {k: v for k, v in overrides.items() if v is not None and k in known}
    return replace(section, **updates)


class ConfigManager:
    """Manages configuration loading and validation."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or self._find_config_file()
        self._config: Optional[Config] = None

    def _find_config_file(self) -> Optional[str]:
        """Find configuration file in standard locations."""
        possible_paths = [
            os.getenv("FAIRGUIDE_CONFIG"),
            "fairguide.yaml",
            "fairguide.yml",
            os.path.expanduser("~/.config/fairguide/config.yaml"),
        ]

        for path in possible_paths:
            if path and os.path.exists(path):
                return path

        # No file: every value comes from flags or defaults
        return None

    def load_config(self) -> Config:
        """Load configuration from file, falling back to defaults."""
        if self._config:
            return self._config

        if self.config_path is None:
            self._config = Config()
            return self._config

        if not os.path.exists(self.config_path):
            raise ConfigError(f"Configuration file not found: {self.config_path}")

        try:
            with open(self.config_path, 'r') as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {self.config_path}: {e}")

        if not isinstance(data, dict):
            raise ConfigError(f"Configuration root must be a mapping: {self.config_path}")

        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown configuration sections: {', '.join(unknown)}")

        parsed = {}
        for name, cls in SECTIONS.items():
            parsed[name] = self._parse_section(name, cls, data.get(name) or {})

        self._config = Config(**parsed)
        return self._config

    def _parse_section(self, name: str, cls: type, values: Dict[str, Any]) -> Any:
        """Build one dataclass section, rejecting unknown keys."""
        if not isinstance(values, dict):
            raise ConfigError(f"Section '{name}' must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown keys in section '{name}': {', '.join(unknown)}")
        return cls(**values)

    def validate_config(self) -> List[str]:
        """Validate configuration and return list of issues."""
        try:
            config = self.load_config()
        except Exception as e:
            return [f"Failed to load config: {str(e)}"]

        issues = []
        issues.extend(validate_guide_config(config.guide))
        issues.extend(self._validate_autoencoder_config(config.autoencoder))
        issues.extend(self._validate_gcn_config(config.gcn))
        issues.extend(self._validate_evaluation_config(config.evaluation))
        return issues

    def _validate_autoencoder_config(self, ae: AutoencoderConfig) -> List[str]:
        """Validate autoencoder settings."""
        issues = []
        for name in ("hidden", "latent", "epochs", "kmeans_max_iters"):
            if getattr(ae, name) <= 0:
                issues.append(f"autoencoder.{name} must be positive")
        if ae.lr <= 0:
            issues.append("autoencoder.lr must be positive")
        return issues

    def _validate_gcn_config(self, gcn: GcnConfig) -> List[str]:
        """Validate GCN settings."""
        issues = []
        if gcn.hidden <= 0:
            issues.append("gcn.hidden must be positive")
        if gcn.epochs <= 0:
            issues.append("gcn.epochs must be positive")
        if gcn.lr <= 0:
            issues.append("gcn.lr must be positive")
        if gcn.weight_decay < 0:
            issues.append("gcn.weight_decay must be non-negative")
        return issues

    def _validate_evaluation_config(self, ev: EvaluationConfig) -> List[str]:
        """Validate evaluation protocol settings."""
        issues = []
        if not ev.seeds:
            issues.append("evaluation.seeds must not be empty")
        if len(set(ev.seeds)) != len(ev.seeds):
            issues.append("evaluation.seeds contains duplicates")
        if not 0 < ev.val_fraction < 1 or not 0 < ev.test_fraction < 1:
            issues.append("evaluation fractions must lie in (0, 1)")
        elif ev.val_fraction + ev.test_fraction >= 1:
            issues.append("evaluation.val_fraction + test_fraction must leave training nodes")
        if ev.jobs < 1:
            issues.append("evaluation.jobs must be at least 1")
        return issues


def validate_guide_config(cfg: GuideConfig) -> List[str]:
    """Validate the link-addition hyperparameters."""
    issues = []
    if cfg.budget < 0:
        issues.append("guide.budget must be non-negative")
    if cfg.batch_k < 1:
        issues.append("guide.batch_k must be at least 1")
    if not 0.0 <= cfg.alpha <= 1.0:
        issues.append("guide.alpha must lie in [0, 1]")
    if cfg.k_steps < 1:
        issues.append("guide.k_steps must be at least 1")
    if cfg.communities < 1:
        issues.append("guide.communities must be at least 1")
    if cfg.beta < 0:
        issues.append("guide.beta must be non-negative")
    if cfg.tau <= 0:
        issues.append("guide.tau must be positive")
    if cfg.epsilon <= 0:
        issues.append("guide.epsilon must be positive")
    if cfg.block_rows < 1:
        issues.append("guide.block_rows must be at least 1")
    if cfg.init_mode not in INIT_MODES:
        issues.append(f"guide.init_mode must be one of {', '.join(INIT_MODES)}, got {cfg.init_mode}")
    return issues


def parse_int_list(text: str) -> List[int]:
    """Parse a comma separated list such as ``10,20,30``."""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"Expected comma separated integers, got: {text}")


def parse_float_list(text: str) -> List[float]:
    """Parse a comma separated list of floats."""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"Expected comma separated numbers, got: {text}")


def split_assignment(text: str) -> Tuple[str, str]:
    """Split ``label=path`` into its two halves."""
    if "=" not in text:
        raise ConfigError(f"Expected LABEL=PATH, got: {text}")
    label, path = text.split("=", 1)
    if not label or not path:
        raise ConfigError(f"Expected LABEL=PATH, got: {text}")
    return label, path


SAMPLE_CONFIG = """# FairGuide configuration
# Command-line flags override every value set here.

guide:
  batch_k: 100        # links added per iteration
  alpha: 0.1          # restart probability of the propagation
  k_steps: 10         # propagation depth
  communities: 10     # pseudo communities from K-means
  beta: 4.0           # cross-group boost
  tau: 1.0            # Gumbel temperature (does not change top-k order)
  epsilon: 1.0e-12
  seed: 10
  exact_degree: true  # false = frozen-degree fast mode
  init_mode: kmeans   # random = uniform pseudo labels, no autoencoder
  single_shot: false  # true = one gradient for the whole budget

autoencoder:
  hidden: 128
  latent: 64
  epochs: 1000
  lr: 1.0e-3

gcn:
  hidden: 128
  epochs: 1000
  lr: 1.0e-3

evaluation:
  seeds: [10, 20, 30, 40, 50]
  split_seed: 10
  val_fraction: 0.25
  test_fraction: 0.25
  jobs: 1
"""
