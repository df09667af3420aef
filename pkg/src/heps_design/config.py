"""
Run configuration: YAML sections on top of the design-case defaults.

Every section maps onto one dataclass. Keys left out of the file keep the
defaults below; unknown keys and invalid values raise ConfigError naming the
dotted field, e.g. ``converter.fs``.
"""
import copy
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import yaml

from heps_design.domain import ZVS_MODES, ConverterSpec, LossModelParams
from heps_design.errors import ConfigError, DomainError
from heps_design.gbdt import TrainConfig
from heps_design.io import read_text, write_text_atomic
from heps_design.pso import SwarmConfig
from heps_design.utils import uniform_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepPlan:
    """Uniform (P, V2, Din) grid of the training sweep; both strategies are swept."""

    P_min: float = 100.0
    P_max: float = 1000.0
    n_P: int = 20
    V2_min: float = 160.0
    V2_max: float = 240.0
    n_V2: int = 20
    n_Din: int = 80

    def __post_init__(self):
        _check_range(self, "P", positive=False)
        _check_range(self, "V2", positive=True)
        if self.n_Din < 1:
            raise DomainError(f"n_Din must be >= 1, got {self.n_Din}", field="n_Din")

    def P_grid(self) -> np.ndarray:
        return uniform_grid(self.P_min, self.P_max, self.n_P)

    def V2_grid(self) -> np.ndarray:
        return uniform_grid(self.V2_min, self.V2_max, self.n_V2)

    def Din_grid(self) -> np.ndarray:
        return uniform_grid(0.0, 1.0, self.n_Din) if self.n_Din > 1 else np.array([1.0])

    @property
    def n_rows(self) -> int:
        return 2 * self.n_P * self.n_V2 * self.n_Din


@dataclass(frozen=True)
class MapGrid:
    """(P, V2) cells of the strategy map."""

    P_min: float = 100.0
    P_max: float = 1000.0
    n_P: int = 37
    V2_min: float = 160.0
    V2_max: float = 240.0
    n_V2: int = 41

    def __post_init__(self):
        _check_range(self, "P", positive=False)
        _check_range(self, "V2", positive=True)

    def P_grid(self) -> np.ndarray:
        return uniform_grid(self.P_min, self.P_max, self.n_P)

    def V2_grid(self) -> np.ndarray:
        return uniform_grid(self.V2_min, self.V2_max, self.n_V2)


def _check_range(obj, name: str, positive: bool) -> None:
    lo, hi, count = getattr(obj, f"{name}_min"), getattr(obj, f"{name}_max"), getattr(obj, f"n_{name}")
    if count < 1:
        raise DomainError(f"n_{name} must be >= 1, got {count}", field=f"n_{name}")
    if lo < 0 or (positive and lo <= 0):
        raise DomainError(f"{name}_min must be {'> 0' if positive else '>= 0'}, got {lo}", field=f"{name}_min")
    if hi < lo:
        raise DomainError(f"{name}_max must be >= {name}_min, got {hi} < {lo}", field=f"{name}_max")


@dataclass(frozen=True)
class RunConfig:
    converter: ConverterSpec = field(default_factory=ConverterSpec)
    sweep: SweepPlan = field(default_factory=SweepPlan)
    train_loss: TrainConfig = field(default_factory=lambda: TrainConfig(max_depth=9, reg_lambda=0.1))
    train_zvs: TrainConfig = field(default_factory=lambda: TrainConfig(max_depth=6, reg_lambda=1.0))
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    grid: MapGrid = field(default_factory=MapGrid)
    seed: int = 0
    n_jobs: int = 1
    out_dir: str = "out"
    s3_bucket: Optional[str] = None

    @property
    def loss(self) -> LossModelParams:
        return self.converter.loss_params


# section -> key -> default; subsystem seeds are derived from run.seed
DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    "converter": {"V1": 200.0, "n": 1.0, "Lr": 167e-6, "fs": 20e3, "t_dead": 400e-9},
    "loss": {k: v for k, v in asdict(LossModelParams()).items() if k != "zvs_mode"},
    "sweep": asdict(SweepPlan()),
    "train_loss": {k: v for k, v in asdict(TrainConfig(max_depth=9, reg_lambda=0.1)).items() if k != "seed"},
    "train_zvs": {k: v for k, v in asdict(TrainConfig(max_depth=6, reg_lambda=1.0)).items() if k != "seed"},
    "swarm": {k: v for k, v in asdict(SwarmConfig()).items() if k != "seed"},
    "grid": asdict(MapGrid()),
    "run": {"seed": 0, "n_jobs": 1, "out_dir": "out", "zvs_mode": "charge", "s3_bucket": None},
}


def _coerce(value: Any, default: Any, dotted: str) -> Any:
    if default is None:
        return None if value is None else str(value)
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{dotted} must be true or false, got {value!r}", field=dotted)
    if isinstance(default, int):
        if isinstance(value, bool):
            raise ConfigError(f"{dotted} must be an integer, got {value!r}", field=dotted)
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{dotted} must be an integer, got {value!r}", field=dotted) from None
        if not number.is_integer():
            raise ConfigError(f"{dotted} must be an integer, got {value!r}", field=dotted)
        return int(number)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ConfigError(f"{dotted} must be a number, got {value!r}", field=dotted)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{dotted} must be a number, got {value!r}", field=dotted) from None
    return str(value)


def _merge(raw: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for section, values in raw.items():
        if section not in merged:
            raise ConfigError(f"unknown section {section!r}", field=str(section))
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be a mapping", field=section)
        for key, value in values.items():
            dotted = f"{section}.{key}"
            if key not in merged[section]:
                raise ConfigError(f"unknown key {dotted}", field=dotted)
            merged[section][key] = _coerce(value, DEFAULT_CONFIG[section][key], dotted)
    return merged


def _build(section: str, factory, **values):
    try:
        return factory(**values)
    except DomainError as e:
        dotted = f"{section}.{e.field}" if e.field else section
        raise ConfigError(f"{dotted}: {e}", field=dotted) from e


def config_from_dict(raw: Dict[str, Any]) -> RunConfig:
    """
    Build and validate a RunConfig from parsed YAML.

    Args:
        raw (Dict[str, Any]): Section mappings; missing sections and keys take defaults.

    Returns:
        RunConfig: Validated configuration.

    Raises:
        ConfigError: On unknown keys, wrong types or violated constraints.
    """
    merged = _merge(raw or {})
    run = merged["run"]
    if run["zvs_mode"] not in ZVS_MODES:
        raise ConfigError(f"run.zvs_mode must be one of {ZVS_MODES}, got {run['zvs_mode']!r}", field="run.zvs_mode")
    if run["n_jobs"] < 1:
        raise ConfigError(f"run.n_jobs must be >= 1, got {run['n_jobs']}", field="run.n_jobs")
    if run["seed"] < 0:
        raise ConfigError(f"run.seed must be >= 0, got {run['seed']}", field="run.seed")

    loss = _build("loss", LossModelParams, zvs_mode=run["zvs_mode"], **merged["loss"])
    converter = _build("converter", ConverterSpec, loss_params=loss, **merged["converter"])
    sweep = _build("sweep", SweepPlan, **merged["sweep"])
    grid = _build("grid", MapGrid, **merged["grid"])
    for name in ("P", "V2"):
        if getattr(grid, f"{name}_min") < getattr(sweep, f"{name}_min"):
            raise ConfigError(f"grid.{name}_min lies below the sweep range", field=f"grid.{name}_min")
        if getattr(grid, f"{name}_max") > getattr(sweep, f"{name}_max"):
            raise ConfigError(f"grid.{name}_max lies above the sweep range", field=f"grid.{name}_max")

    return RunConfig(
        converter=converter,
        sweep=sweep,
        train_loss=_build("train_loss", TrainConfig, **merged["train_loss"]),
        train_zvs=_build("train_zvs", TrainConfig, **merged["train_zvs"]),
        swarm=_build("swarm", SwarmConfig, **merged["swarm"]),
        grid=grid,
        seed=run["seed"],
        n_jobs=run["n_jobs"],
        out_dir=run["out_dir"],
        s3_bucket=run["s3_bucket"],
    )


def config_to_dict(cfg: RunConfig) -> Dict[str, Dict[str, Any]]:
    """Fully resolved section mapping of a RunConfig."""
    converter = asdict(cfg.converter)
    loss = converter.pop("loss_params")
    zvs_mode = loss.pop("zvs_mode")
    strip_seed = lambda d: {k: v for k, v in d.items() if k != "seed"}  # noqa: E731
    return {
        "converter": converter,
        "loss": loss,
        "sweep": asdict(cfg.sweep),
        "train_loss": strip_seed(asdict(cfg.train_loss)),
        "train_zvs": strip_seed(asdict(cfg.train_zvs)),
        "swarm": strip_seed(asdict(cfg.swarm)),
        "grid": asdict(cfg.grid),
        "run": {
            "seed": cfg.seed,
            "n_jobs": cfg.n_jobs,
            "out_dir": cfg.out_dir,
            "zvs_mode": zvs_mode,
            "s3_bucket": cfg.s3_bucket,
        },
    }


def load_config(path: Optional[str]) -> RunConfig:
    """
    Read a YAML configuration file.

    Args:
        path (Optional[str]): File to read; None gives the defaults.

    Returns:
        RunConfig: Validated configuration.

    Raises:
        ConfigError: If the file is missing, unparsable or invalid.
    """
    if path is None:
        return config_from_dict({})
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path} not found", field="path")
    try:
        raw = yaml.safe_load(read_text(path))
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}", field="path") from e
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a mapping of sections", field="path")
    cfg = config_from_dict(raw or {})
    logger.debug("loaded configuration from %s", path)
    return cfg


def save_config(cfg: RunConfig, path: str) -> None:
    write_text_atomic(path, yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
