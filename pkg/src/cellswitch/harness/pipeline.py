"""The six pipeline stages behind the CLI verbs.

Seed discipline: every random stream is derived from the master seed with a
purpose tag, so training data (tag 0), evaluation episodes (tag 1), and
policy randomness (tag 2) never share a stream.  Rerunning any stage with
the same config reproduces its artifacts byte for byte.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..adp import AdpController, CostToGoTable, build_ctg_table
from ..baselines import RandomPolicy, RuleBasedController, RuleParams, adp_fixed, no_es_policy
from ..errors import ConfigError, MissingArtifact
from ..estimators.data import build_dataset
from ..estimators.models import (
    HandoverEstimator,
    MlpEstimator,
    lstm_to_dict,
    mlp_to_dict,
    model_from_dict,
)
from ..estimators.nn import (
    AdagradState,
    LSTM_HIDDEN,
    LSTM_LR,
    MLP_DIMS,
    MLP_LR,
    init_lstm,
    init_mlp,
)
from ..estimators.training import LstmNet, MlpNet, train
from ..netmodel import Mode
from ..simkernel import (
    ScenarioSpec,
    TraceRecord,
    default_scenarios,
    derive_seed,
    mean_traffic,
    run_episode,
)
from .config import ExperimentConfig
from .storage import (
    atomic_write_text,
    read_json,
    read_trace,
    scenarios_from_dict,
    scenarios_to_dict,
    table_from_dict,
    table_to_dict,
    write_decisions,
    write_json,
    write_jsonl,
    write_trace,
)

log = logging.getLogger(__name__)

POLICIES = ("noes", "rule", "random", "adp", "adp-fixed")

# purpose tags for derive_seed
_TAG_COLLECT = 0
_TAG_EVAL = 1
_TAG_POLICY = 2
_TAG_SPLIT = 3
_TAG_INIT = 4
_TAG_SHUFFLE = 5
_TAG_EVAL_POLICY = 6


# ---------------------------------------------------------------------------
# Stage 1: scenarios

def generate_scenarios(cfg: ExperimentConfig) -> Path:
    specs = default_scenarios(cfg.master_seed, cfg.scenario_count)
    write_json(cfg.scenario_path, scenarios_to_dict(specs))
    log.info("wrote %d scenarios to %s", len(specs), cfg.scenario_path)
    return cfg.scenario_path


def load_scenarios(cfg: ExperimentConfig) -> List[ScenarioSpec]:
    return scenarios_from_dict(read_json(cfg.scenario_path))


# ---------------------------------------------------------------------------
# Stage 2: training traces

def _trace_path(cfg: ExperimentConfig, sid: int, run: int) -> Path:
    return cfg.traces_dir / f"scenario{sid}_run{run:03d}.jsonl"


def collect_data(cfg: ExperimentConfig) -> int:
    """Random-action episodes: cfg.runs per scenario, wide action space."""
    specs = load_scenarios(cfg)
    profiles = cfg.carrier_profiles()
    params = cfg.system_params()
    written = 0
    for spec in specs:
        for run in range(cfg.runs):
            policy = RandomPolicy(Mode.FOUR_CELL,
                                  derive_seed(cfg.master_seed, spec.id, run, _TAG_POLICY))
            trace = run_episode(spec, policy,
                                derive_seed(cfg.master_seed, spec.id, run, _TAG_COLLECT),
                                profiles, params)
            write_trace(_trace_path(cfg, spec.id, run), trace)
            written += 1
    log.info("collected %d traces into %s", written, cfg.traces_dir)
    return written


def load_corpus(cfg: ExperimentConfig) -> List[List[TraceRecord]]:
    if not cfg.traces_dir.is_dir():
        raise MissingArtifact(f"no trace directory: {cfg.traces_dir}")
    paths = sorted(cfg.traces_dir.glob("scenario*_run*.jsonl"))
    if not paths:
        raise MissingArtifact(f"empty trace corpus: {cfg.traces_dir}")
    return [read_trace(p) for p in paths]


# ---------------------------------------------------------------------------
# Stage 3: estimator training

_MODEL_FILES = {"power": "power.json", "qos": "qos.json", "handover": "handover.json"}


def _heldout_metrics(net, dataset, tstats, clamp) -> Tuple[float, float]:
    """(plain MAE, MAE relative to the mean true value), denormalized."""
    x, y = dataset.heldout_arrays()
    pred = tstats.denormalize(np.asarray(net.predict_batch(x), dtype=float))
    pred = clamp(pred)
    truth = tstats.denormalize(y)
    mae = float(np.mean(np.abs(pred - truth)))
    mean_truth = float(np.mean(truth))
    rel = mae / mean_truth if mean_truth != 0 else float("inf")
    return mae, rel


def _dump_dataset(path: Path, dataset, sequential: bool) -> None:
    rows = []
    for i in range(dataset.x.shape[0]):
        key = "sequence" if sequential else "features"
        rows.append({
            "split": "heldout" if bool(dataset.heldout[i]) else "train",
            key: dataset.x[i].tolist(),
            "target": float(dataset.y[i]),
        })
    write_jsonl(path, rows)


def train_models(cfg: ExperimentConfig) -> dict:
    corpus = load_corpus(cfg)
    profiles = cfg.carrier_profiles()
    bundle = build_dataset(corpus, profiles, window=cfg.window,
                           holdout_fraction=cfg.holdout_fraction,
                           seed=derive_seed(cfg.master_seed, _TAG_SPLIT))

    estimators: Dict[str, object] = {}
    reports = {}
    for k, name in enumerate(("power", "qos")):
        params = init_mlp(MLP_DIMS, derive_seed(cfg.master_seed, _TAG_INIT, k))
        net = MlpNet(params)
        opt = AdagradState.for_params(net.params_list(), MLP_LR)
        ds = getattr(bundle, name)
        reports[name] = train(net, ds, opt, epochs=cfg.epochs,
                              batch_size=cfg.batch_size,
                              seed=derive_seed(cfg.master_seed, _TAG_SHUFFLE, k),
                              patience=cfg.patience)
        estimators[name] = MlpEstimator(params, bundle.feature_stats,
                                        bundle.target_stats[name], name)

    lstm_params = init_lstm(bundle.handover.x.shape[2], LSTM_HIDDEN,
                            derive_seed(cfg.master_seed, _TAG_INIT, 2))
    lstm_net = LstmNet(lstm_params)
    lstm_opt = AdagradState.for_params(lstm_net.params_list(), LSTM_LR)
    reports["handover"] = train(lstm_net, bundle.handover, lstm_opt,
                                epochs=cfg.epochs, batch_size=cfg.batch_size,
                                seed=derive_seed(cfg.master_seed, _TAG_SHUFFLE, 2),
                                patience=cfg.patience)
    estimators["handover"] = HandoverEstimator(lstm_params, bundle.feature_stats,
                                               bundle.target_stats["handover"],
                                               bundle.window)

    write_json(cfg.models_dir / _MODEL_FILES["power"], mlp_to_dict(estimators["power"]))
    write_json(cfg.models_dir / _MODEL_FILES["qos"], mlp_to_dict(estimators["qos"]))
    write_json(cfg.models_dir / _MODEL_FILES["handover"], lstm_to_dict(estimators["handover"]))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "epoch", "train_loss", "heldout_loss"])
    for name in ("power", "qos", "handover"):
        for row in reports[name].history:
            writer.writerow([name, row.epoch,
                             format(row.train_loss, ".17g"),
                             format(row.heldout_loss, ".17g")])
    atomic_write_text(cfg.models_dir / "training_report.csv", buf.getvalue())

    power_mae, power_rel = _heldout_metrics(
        MlpNet(estimators["power"].params), bundle.power,
        bundle.target_stats["power"], lambda p: p)
    qos_mae, _ = _heldout_metrics(
        MlpNet(estimators["qos"].params), bundle.qos,
        bundle.target_stats["qos"], lambda p: np.clip(p, 0.0, 100.0))
    handover_mae, _ = _heldout_metrics(
        LstmNet(estimators["handover"].params), bundle.handover,
        bundle.target_stats["handover"], lambda p: np.maximum(p, 0.0))
    metrics = {
        "power_mae_watts": power_mae,
        "power_rel_mae": power_rel,
        "qos_mae_points": qos_mae,
        "handover_mae_count": handover_mae,
        "n_train_mlp": bundle.power.n_train,
        "n_heldout_mlp": bundle.power.n_heldout,
        "n_train_lstm": bundle.handover.n_train,
        "n_heldout_lstm": bundle.handover.n_heldout,
        "skipped_traces": bundle.skipped_traces,
        "stopped_early": {n: reports[n].stopped_early for n in reports},
        "best_epoch": {n: reports[n].best_epoch for n in reports},
    }
    write_json(cfg.models_dir / "metrics.json", metrics)

    if cfg.dump_datasets:
        _dump_dataset(cfg.out / "datasets" / "power.jsonl", bundle.power, False)
        _dump_dataset(cfg.out / "datasets" / "qos.jsonl", bundle.qos, False)
        _dump_dataset(cfg.out / "datasets" / "handover.jsonl", bundle.handover, True)
    log.info("trained estimators; heldout power rel MAE %.4f, qos MAE %.2f",
             power_rel, qos_mae)
    return metrics


def load_models(cfg: ExperimentConfig) -> tuple[MlpEstimator, MlpEstimator, HandoverEstimator]:
    power = model_from_dict(read_json(cfg.models_dir / _MODEL_FILES["power"]))
    qos = model_from_dict(read_json(cfg.models_dir / _MODEL_FILES["qos"]))
    handover = model_from_dict(read_json(cfg.models_dir / _MODEL_FILES["handover"]))
    if not isinstance(power, MlpEstimator) or power.target != "power":
        raise MissingArtifact("power model file holds the wrong estimator")
    if not isinstance(qos, MlpEstimator) or qos.target != "qos":
        raise MissingArtifact("qos model file holds the wrong estimator")
    if not isinstance(handover, HandoverEstimator):
        raise MissingArtifact("handover model file holds the wrong estimator")
    return power, qos, handover


# ---------------------------------------------------------------------------
# Stage 4: cost-to-go tables

def _table_path(cfg: ExperimentConfig, mode: Mode) -> Path:
    return cfg.tables_dir / f"ctg_{mode.value}.json"


def build_tables(cfg: ExperimentConfig) -> List[Path]:
    corpus = load_corpus(cfg)
    power_est, qos_est, _ = load_models(cfg)
    mean_states = mean_traffic(corpus)
    out = []
    for mode in (Mode.TWO_CELL, Mode.FOUR_CELL):
        table = build_ctg_table(mean_states, power_est, qos_est,
                                cfg.controller_config(mode.value))
        path = _table_path(cfg, mode)
        write_json(path, table_to_dict(table))
        out.append(path)
    log.info("wrote cost-to-go tables: %s", ", ".join(str(p) for p in out))
    return out


def load_table(cfg: ExperimentConfig, mode: Mode) -> CostToGoTable:
    table = table_from_dict(read_json(_table_path(cfg, mode)))
    if table.mode is not mode:
        raise MissingArtifact(f"table at {_table_path(cfg, mode)} is for mode {table.mode.value}")
    return table


# ---------------------------------------------------------------------------
# Stage 5: evaluation runs

def _result_dir(cfg: ExperimentConfig, policy: str, mode: Mode) -> Path:
    return cfg.results_dir / f"{policy}_{mode.value}"


def _make_policy(cfg: ExperimentConfig, policy: str, mode: Mode,
                 spec_id: int, run: int, station: int, adp_artifacts):
    """Fresh policy object per episode; ADP controllers carry episode state."""
    if policy == "noes":
        return no_es_policy
    if policy == "rule":
        return RuleBasedController(
            RuleParams(cfg.th_deac, cfg.th_ac, cfg.rule_window), mode,
            cfg.carrier_profiles())
    if policy == "random":
        parts = [cfg.master_seed, spec_id, run, _TAG_EVAL_POLICY]
        if station:
            parts.append(station)
        return RandomPolicy(mode, derive_seed(*parts))
    (power_est, qos_est, handover_est), table = adp_artifacts
    ccfg = cfg.controller_config(mode.value)
    params = cfg.system_params()
    if policy == "adp":
        return AdpController(table, power_est, qos_est, handover_est, ccfg, params)
    return adp_fixed(table, power_est, qos_est, handover_est, ccfg, params,
                     q_tau=cfg.fixed_q_tau)


def run_policy(cfg: ExperimentConfig, policy: str, mode_label: Optional[str] = None) -> Path:
    """One evaluation episode per (scenario, eval run, station).

    Evaluation seeds carry a different purpose tag than training seeds, so
    the two corpora never share an episode.
    """
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r} (choose from {', '.join(POLICIES)})")
    mode = Mode.from_label(mode_label or cfg.mode)
    specs = load_scenarios(cfg)
    profiles = cfg.carrier_profiles()
    params = cfg.system_params()
    adp_artifacts = None
    if policy in ("adp", "adp-fixed"):
        adp_artifacts = (load_models(cfg), load_table(cfg, mode))
    out_dir = _result_dir(cfg, policy, mode)
    for spec in specs:
        for run in range(cfg.eval_runs):
            for station in range(cfg.stations):
                parts = [cfg.master_seed, spec.id, run, _TAG_EVAL]
                if station:
                    parts.append(station)
                stepper = _make_policy(cfg, policy, mode, spec.id, run,
                                       station, adp_artifacts)
                trace = run_episode(spec, stepper, derive_seed(*parts), profiles, params)
                suffix = f"_st{station}" if cfg.stations > 1 else ""
                name = f"scenario{spec.id}_run{run:03d}{suffix}"
                write_trace(out_dir / f"{name}.jsonl", trace)
                if isinstance(stepper, AdpController):
                    write_decisions(out_dir / f"{name}_decisions.jsonl", stepper.decisions)
    log.info("evaluated %s in %s mode over %d scenarios", policy, mode.value, len(specs))
    return out_dir
