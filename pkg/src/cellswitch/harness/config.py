"""Experiment configuration: JSON schema, validation, CLI overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from ..adp import (
    ControllerConfig,
    OFFLINE_QOS_FLOOR,
    QOS_TARGET,
    REG_GAMMA,
    THETA0_BOUNDS,
    THETA1_BOUNDS,
)
from ..errors import ConfigError
from ..estimators.data import DEFAULT_HOLDOUT, DEFAULT_WINDOW
from ..estimators.training import DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_PATIENCE
from ..netmodel import CarrierProfile, DEFAULT_CARRIERS, Mode, SystemParams

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a pipeline run needs, with defaults for the full protocol."""

    schema_version: int = CONFIG_SCHEMA_VERSION
    out_dir: str = "out"
    scenario_file: Optional[str] = None     # default: <out_dir>/scenarios.json
    master_seed: int = 20111
    scenario_count: int = 8
    runs: int = 64                          # training episodes per scenario
    eval_runs: int = 1                      # evaluation episodes per scenario
    stations: int = 1
    mode: str = "4cell"

    # radio + power model
    carriers: Optional[tuple] = None        # rows mirroring CarrierProfile
    beta: float = 0.3
    p_gamma: float = 162.0
    tau: float = 1.0

    # controller
    q_tau_offline: float = OFFLINE_QOS_FLOOR
    q_phi_target: float = QOS_TARGET
    reg_gamma: float = REG_GAMMA
    theta0_bounds: tuple[float, float] = THETA0_BOUNDS
    theta1_bounds: tuple[float, float] = THETA1_BOUNDS
    fixed_q_tau: float = 92.0

    # baselines
    th_deac: float = 0.2
    th_ac: float = 0.8
    rule_window: int = 1

    # training
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH
    patience: int = DEFAULT_PATIENCE
    window: int = DEFAULT_WINDOW
    holdout_fraction: float = DEFAULT_HOLDOUT
    dump_datasets: bool = False

    def __post_init__(self) -> None:
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {self.schema_version}")
        if self.scenario_count < 1 or self.runs < 1 or self.eval_runs < 1:
            raise ConfigError("counts must be >= 1")
        if self.stations < 1:
            raise ConfigError("stations must be >= 1")
        try:
            Mode.from_label(self.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 < self.tau:
            raise ConfigError("tau must be positive")
        if self.beta < 0 or self.p_gamma < 0:
            raise ConfigError("power constants must be >= 0")
        if not (0 <= self.q_tau_offline <= 100 and 0 <= self.q_phi_target <= 100):
            raise ConfigError("QoS thresholds must be in [0, 100]")
        if not (0 <= self.th_deac < self.th_ac <= 1):
            raise ConfigError("need 0 <= th_deac < th_ac <= 1")
        if self.rule_window < 1:
            raise ConfigError("rule_window must be >= 1")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ConfigError("training sizes must be >= 1")
        if self.window < 2:
            raise ConfigError("recurrent window must be >= 2")
        if not 0 < self.holdout_fraction < 1:
            raise ConfigError("holdout_fraction must be in (0, 1)")
        if self.carriers is not None:
            try:
                self.carrier_profiles()
            except (TypeError, KeyError, ValueError) as exc:
                raise ConfigError(f"bad carrier table: {exc}") from exc

    # -- derived objects ----------------------------------------------------

    def carrier_profiles(self) -> tuple[CarrierProfile, ...]:
        if self.carriers is None:
            return DEFAULT_CARRIERS
        return tuple(
            CarrierProfile(
                carrier=int(row["carrier"]),
                max_prbs=int(row["max_prbs"]),
                prb_rate=float(row["prb_rate"]),
                p_sleep=float(row["p_sleep"]),
                p_standby=float(row["p_standby"]),
                p_load=float(row["p_load"]),
                coverage_rank=int(row["coverage_rank"]),
            )
            for row in self.carriers
        )

    def system_params(self) -> SystemParams:
        return SystemParams(beta=self.beta, p_gamma=self.p_gamma, tau=self.tau)

    def controller_config(self, mode: Optional[str] = None) -> ControllerConfig:
        return ControllerConfig(
            mode=Mode.from_label(mode or self.mode),
            q_tau_offline=self.q_tau_offline,
            beta=self.beta,
            p_gamma=self.p_gamma,
            q_phi_target=self.q_phi_target,
            reg_gamma=self.reg_gamma,
            theta0_bounds=self.theta0_bounds,
            theta1_bounds=self.theta1_bounds,
        )

    # -- paths ---------------------------------------------------------------

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    @property
    def scenario_path(self) -> Path:
        if self.scenario_file is not None:
            return Path(self.scenario_file)
        return self.out / "scenarios.json"

    @property
    def traces_dir(self) -> Path:
        return self.out / "traces"

    @property
    def models_dir(self) -> Path:
        return self.out / "models"

    @property
    def tables_dir(self) -> Path:
        return self.out / "tables"

    @property
    def results_dir(self) -> Path:
        return self.out / "results"

    @property
    def reports_dir(self) -> Path:
        return self.out / "reports"


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
_TUPLE_FIELDS = {"theta0_bounds", "theta1_bounds", "carriers"}


def _coerce(name: str, value):
    if name in _TUPLE_FIELDS and isinstance(value, list):
        return tuple(tuple(v) if isinstance(v, list) else v for v in value) \
            if name == "carriers" else tuple(value)
    return value


def config_from_dict(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(obj) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in obj.items():
        if name == "carriers" and value is not None:
            value = tuple(dict(v) for v in value)
        else:
            value = _coerce(name, value)
        kwargs[name] = value
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(obj)


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """CLI flags beat config-file values; None means not provided."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return cfg
    try:
        return replace(cfg, **updates)
    except TypeError as exc:
        raise ConfigError(f"bad override: {exc}") from exc
