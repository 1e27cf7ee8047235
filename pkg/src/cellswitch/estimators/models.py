"""Prediction-time wrappers around the trained networks.

Each estimator bundles network parameters with the feature/target
normalization fitted at training time, so a loaded model file is
self-contained: featurize, forward, de-normalize, clamp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..errors import NotFittedError
from ..netmodel import Action, StationState
from .data import DEFAULT_WINDOW, config_bits_row, window_rows
from .features import FeatureStats, TargetStats, featurize, featurize_many
from .nn import LstmCell, LstmParams, MlpParams, lstm_forward, mlp_forward

MODEL_SCHEMA_VERSION = 1


def _require(condition: bool, what: str) -> None:
    if not condition:
        raise NotFittedError(what)


@dataclass
class MlpEstimator:
    """Feedforward estimator of a scalar step cost from (state, action)."""

    params: MlpParams
    feature_stats: FeatureStats
    target_stats: TargetStats
    target: str

    def _postprocess(self, y: np.ndarray) -> np.ndarray:
        if self.target == "qos":
            return np.clip(y, 0.0, 100.0)
        return y

    def predict(self, state: StationState, action: Action) -> float:
        _require(self.feature_stats is not None and self.params is not None,
                 "estimator has no fitted parameters")
        x = featurize(state, action, self.feature_stats)
        z = mlp_forward(self.params, x)
        return float(self._postprocess(self.target_stats.denormalize(np.atleast_1d(z)))[0])

    def predict_many(self, state: StationState, actions: Sequence[Action]) -> np.ndarray:
        _require(self.feature_stats is not None and self.params is not None,
                 "estimator has no fitted parameters")
        x = featurize_many(state, actions, self.feature_stats)
        z = np.atleast_1d(mlp_forward(self.params, x))
        return self._postprocess(self.target_stats.denormalize(z))


@dataclass
class HandoverEstimator:
    """Recurrent estimator of per-step handovers.

    Prediction consumes the most recent featurized (state, action) steps —
    fewer than the window early in an episode — with the final element built
    from the candidate action, plus the previous step's config bits.
    """

    params: LstmParams
    feature_stats: FeatureStats
    target_stats: TargetStats
    window: int = DEFAULT_WINDOW

    def _window(self, past_features: Sequence[np.ndarray],
                final_row: np.ndarray, prev_config_bits: np.ndarray) -> np.ndarray:
        rows = list(past_features[-(self.window - 1):]) if self.window > 1 else []
        rows.append(final_row)
        return window_rows(np.stack(rows), prev_config_bits)

    def predict(self, past_features: Sequence[np.ndarray], state: StationState,
                action: Action, prev_config) -> float:
        _require(self.feature_stats is not None and self.params is not None,
                 "estimator has no fitted parameters")
        final = featurize(state, action, self.feature_stats)
        seq = self._window(past_features, final, config_bits_row(prev_config))
        z = lstm_forward(self.params, seq)
        return float(max(0.0, self.target_stats.denormalize(np.atleast_1d(z))[0]))

    def predict_many(self, past_features: Sequence[np.ndarray], state: StationState,
                     actions: Sequence[Action], prev_config) -> np.ndarray:
        _require(self.feature_stats is not None and self.params is not None,
                 "estimator has no fitted parameters")
        finals = featurize_many(state, actions, self.feature_stats)
        bits = config_bits_row(prev_config)
        batch = np.stack([self._window(past_features, finals[i], bits)
                          for i in range(len(actions))])
        z = np.atleast_1d(lstm_forward(self.params, batch))
        return np.maximum(0.0, self.target_stats.denormalize(z))


def _stats_to_dict(feat: FeatureStats, target: TargetStats) -> dict:
    return {
        "feature_min": feat.lo.tolist(),
        "feature_max": feat.hi.tolist(),
        "max_prbs": feat.max_prbs.tolist(),
        "target_min": target.lo,
        "target_max": target.hi,
    }


def _stats_from_dict(obj: dict) -> tuple[FeatureStats, TargetStats]:
    feat = FeatureStats(np.array(obj["feature_min"], dtype=float),
                        np.array(obj["feature_max"], dtype=float),
                        np.array(obj["max_prbs"], dtype=float))
    return feat, TargetStats(float(obj["target_min"]), float(obj["target_max"]))


def mlp_to_dict(est: MlpEstimator) -> dict:
    weights: List[list] = []
    for w, b in zip(est.params.weights, est.params.biases):
        weights.append(w.ravel(order="C").tolist())
        weights.append(b.tolist())
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "mlp",
        "target": est.target,
        "dims": list(est.params.dims),
        "weights": weights,
        "norm_stats": _stats_to_dict(est.feature_stats, est.target_stats),
    }


def mlp_from_dict(obj: dict) -> MlpEstimator:
    if obj.get("kind") != "mlp":
        raise ValueError("not a feedforward model file")
    dims = [int(d) for d in obj["dims"]]
    flat = obj["weights"]
    weights, biases = [], []
    for l, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        weights.append(np.array(flat[2 * l], dtype=float).reshape(d_in, d_out))
        biases.append(np.array(flat[2 * l + 1], dtype=float))
    feat, target = _stats_from_dict(obj["norm_stats"])
    return MlpEstimator(MlpParams(weights, biases), feat, target, obj["target"])


def lstm_to_dict(est: HandoverEstimator) -> dict:
    weights: List[list] = []
    for cell in est.params.cells:
        weights.append(cell.wx.ravel(order="C").tolist())
        weights.append(cell.wh.ravel(order="C").tolist())
        weights.append(cell.b.tolist())
    weights.append(est.params.head_w.tolist())
    weights.append(est.params.head_b.tolist())
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "lstm",
        "target": "handover",
        "dims": {
            "input": est.params.input_dim,
            "hidden": list(est.params.hidden_sizes),
        },
        "window": est.window,
        "weights": weights,
        "norm_stats": _stats_to_dict(est.feature_stats, est.target_stats),
    }


def lstm_from_dict(obj: dict) -> HandoverEstimator:
    if obj.get("kind") != "lstm":
        raise ValueError("not a recurrent model file")
    d = int(obj["dims"]["input"])
    hidden = [int(h) for h in obj["dims"]["hidden"]]
    flat = obj["weights"]
    cells = []
    k = 0
    d_in = d
    for h in hidden:
        wx = np.array(flat[k], dtype=float).reshape(d_in, 4 * h)
        wh = np.array(flat[k + 1], dtype=float).reshape(h, 4 * h)
        b = np.array(flat[k + 2], dtype=float)
        cells.append(LstmCell(wx, wh, b))
        d_in = h
        k += 3
    head_w = np.array(flat[k], dtype=float)
    head_b = np.array(flat[k + 1], dtype=float)
    feat, target = _stats_from_dict(obj["norm_stats"])
    return HandoverEstimator(LstmParams(cells, head_w, head_b), feat, target,
                             int(obj.get("window", DEFAULT_WINDOW)))


def model_from_dict(obj: dict) -> MlpEstimator | HandoverEstimator:
    kind = obj.get("kind")
    if kind == "mlp":
        return mlp_from_dict(obj)
    if kind == "lstm":
        return lstm_from_dict(obj)
    raise ValueError(f"unknown model kind {kind!r}")
