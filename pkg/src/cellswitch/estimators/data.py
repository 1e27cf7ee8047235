"""Turn episode traces into training datasets for the three estimators.

Each trace record pairs the state the policy saw with the action taken and
the metrics realized during the governed step.  The feedforward estimators
(power, QoS) train on single featurized (state, action) rows; the handover
estimator trains on windows of the last W featurized steps, each row
extended with the config bits of the step before the window's last element.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from ..netmodel import CarrierProfile
from ..simkernel import TraceRecord
from .features import FeatureStats, TargetStats, fit_feature_stats, max_prbs_vector, \
    raw_features
from .training import Dataset

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 4
DEFAULT_HOLDOUT = 0.1


@dataclass
class DatasetBundle:
    power: Dataset
    qos: Dataset
    handover: Dataset
    feature_stats: FeatureStats
    target_stats: Dict[str, TargetStats]
    window: int
    skipped_traces: int


def config_bits_row(config) -> np.ndarray:
    return np.array([1.0 if b else 0.0 for b in config.bits])


def window_rows(scaled_steps: np.ndarray, prev_config_bits: np.ndarray) -> np.ndarray:
    """One recurrent input window: scaled step features with the previous
    config bits broadcast onto every row."""
    w = scaled_steps.shape[0]
    return np.hstack([scaled_steps, np.tile(prev_config_bits, (w, 1))])


def build_dataset(traces: Sequence[Sequence[TraceRecord]],
                  profiles: Sequence[CarrierProfile],
                  window: int = DEFAULT_WINDOW,
                  holdout_fraction: float = DEFAULT_HOLDOUT,
                  seed: int = 0) -> DatasetBundle:
    """Assemble the three datasets plus shared normalization statistics.

    The split is drawn per sample; feature and target min/max are fitted on
    the training portion only.  Traces shorter than the window are skipped
    for the recurrent dataset (with a warning) but still feed the
    feedforward ones.
    """
    if not traces:
        raise ValueError("no traces given")
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout fraction must be in (0, 1)")
    max_prbs = max_prbs_vector(profiles)
    rng = np.random.default_rng(seed)

    per_trace_raw = []
    power_y, qos_y = [], []
    for trace in traces:
        raws = np.stack([raw_features(r.state, r.action, max_prbs) for r in trace])
        per_trace_raw.append(raws)
        power_y.extend(r.power for r in trace)
        qos_y.extend(r.qos for r in trace)
    all_raw = np.vstack(per_trace_raw)
    power_y = np.array(power_y)
    qos_y = np.array(qos_y)

    n = all_raw.shape[0]
    mlp_heldout = rng.random(n) < holdout_fraction
    train_rows = all_raw[~mlp_heldout]
    if train_rows.shape[0] == 0:
        raise ValueError("holdout split left no training samples")
    stats = fit_feature_stats(train_rows, max_prbs)
    scaled = stats.scale(all_raw)

    t_power = TargetStats(float(power_y[~mlp_heldout].min()),
                          float(power_y[~mlp_heldout].max()))
    t_qos = TargetStats(float(qos_y[~mlp_heldout].min()),
                        float(qos_y[~mlp_heldout].max()))
    power_ds = Dataset(scaled, t_power.normalize(power_y), mlp_heldout)
    qos_ds = Dataset(scaled, t_qos.normalize(qos_y), mlp_heldout)

    sequences = []
    handover_y = []
    skipped = 0
    offset = 0
    for trace, raws in zip(traces, per_trace_raw):
        if len(trace) < window:
            skipped += 1
            offset += raws.shape[0]
            continue
        scaled_steps = scaled[offset:offset + raws.shape[0]]
        start = max(window - 1, 1)
        for t in range(start, len(trace)):
            # The decision state at t carries the config in effect during
            # step t-1, which is the window's conditioning config.
            prev_bits = config_bits_row(trace[t].state.config)
            win = scaled_steps[t - window + 1:t + 1]
            sequences.append(window_rows(win, prev_bits))
            handover_y.append(float(trace[t].handovers))
        offset += raws.shape[0]
    if skipped:
        log.warning("skipped %d traces shorter than window %d", skipped, window)
    if not sequences:
        raise ValueError("no recurrent windows could be built")
    seq_x = np.stack(sequences)
    handover_y = np.array(handover_y)
    seq_heldout = rng.random(seq_x.shape[0]) < holdout_fraction
    ho_train = handover_y[~seq_heldout]
    if ho_train.shape[0] == 0:
        raise ValueError("holdout split left no recurrent training samples")
    t_handover = TargetStats(float(ho_train.min()), float(ho_train.max()))
    handover_ds = Dataset(seq_x, t_handover.normalize(handover_y), seq_heldout)

    return DatasetBundle(
        power=power_ds,
        qos=qos_ds,
        handover=handover_ds,
        feature_stats=stats,
        target_stats={"power": t_power, "qos": t_qos, "handover": t_handover},
        window=window,
        skipped_traces=skipped,
    )
