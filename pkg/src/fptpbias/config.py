"""Run configuration: nested dataclasses loaded from YAML, unknown keys rejected."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass

import yaml

from .plans.experiment import ExperimentConfig
from .plans.mcmc import ChainParams
from .scoring import BandwidthConfig


class ConfigError(ValueError):
    pass


@dataclass
class ThresholdConfig:
    c_grid: tuple = (0.1, 1.0, 10.0)  # SVM regularization candidates
    spline_folds: int = 5
    min_group: int = 200  # smaller candidate-count groups merge upward
    grid_size: int = 200  # phi grid for boundary tracing
    max_interior: int = 20  # spline interior knots searched 0..max_interior
    holdout: float = 0.2


@dataclass
class ScoringConfig:
    k0: int | None = None  # None: data-driven pooling cutoff
    tail: str = "plain"
    alpha: float = 0.05
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig)


@dataclass
class StudyConfig:
    n_min: int = 3
    n_max: int = 12
    samples: int = 2 ** 16
    alpha_shape: float = 2.0
    alpha_scale: float = 1.0


@dataclass
class PlanConfig:
    nodes: str | None = None  # precinct CSV; None builds the synthetic grid
    edges: str | None = None
    rows: int = 8
    cols: int = 8
    districts: int = 16
    delta: float = 0.25
    chain: ChainParams = field(default_factory=ChainParams)
    party: str = "p"
    margin: float = 0.0
    optimizer: str = "coarsen+exact"
    coarse_target: int = 40


@dataclass
class ReportConfig:
    v_points: int = 101
    t_quantiles: tuple = (0.1, 0.5, 0.9)
    bins: int = 10
    figures: bool = True


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    tie_policy: str = "flag"
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    plans: PlanConfig = field(default_factory=PlanConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    default = cls()
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    kw = {}
    for name, value in data.items():
        cur = getattr(default, name)
        key = f"{where}.{name}" if where else name
        if is_dataclass(cur):
            kw[name] = _build(type(cur), value or {}, key)
        elif isinstance(cur, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{key}: expected a list")
            kw[name] = tuple(value)
        elif isinstance(cur, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{key}: expected true or false")
            kw[name] = value
        elif isinstance(cur, (int, float)) and not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        elif isinstance(cur, int) and isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer")
        else:
            kw[name] = int(value) if isinstance(cur, int) and isinstance(value, float) else value
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def load_config(path=None, text: str | None = None) -> RunConfig:
    """RunConfig from a YAML file (or string); missing keys keep their defaults."""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    if not text or not text.strip():
        return RunConfig()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return _build(RunConfig, data or {}, "")


def default_config_yaml() -> str:
    return yaml.safe_dump(RunConfig().to_dict(), sort_keys=True)
