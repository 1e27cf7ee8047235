"""Feature construction and min-max normalization for the cost estimators.

The input vector has 64 entries: for each of the 15 cells, in (sector,
carrier) order, the tuple [ue_count, throughput, load_ratio, on_bit], then
the 4 candidate-action mask bits.  The 60 state entries are min-max scaled
with statistics fitted on training data and clamped to [0, 1]; the action
bits pass through raw.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import NotFittedError
from ..netmodel import (
    Action,
    CarrierProfile,
    N_CARRIERS,
    N_CELLS,
    StationState,
    cell_index,
)

FEATURES_PER_CELL = 4
N_STATE_FEATURES = FEATURES_PER_CELL * N_CELLS
N_FEATURES = N_STATE_FEATURES + 4


def max_prbs_vector(profiles: Sequence[CarrierProfile]) -> np.ndarray:
    return np.array([float(profiles[j].max_prbs) for j in range(N_CARRIERS)])


def raw_features(state: StationState, action: Action,
                 max_prbs: np.ndarray) -> np.ndarray:
    """Unscaled 64-entry feature vector.

    The on bit comes from the state's config so that counterfactual states
    (averaged traffic with a substituted config) featurize consistently.
    """
    x = np.empty(N_FEATURES)
    for s in range(3):
        for j in range(N_CARRIERS):
            idx = cell_index(s, j)
            obs = state.cells[idx]
            base = idx * FEATURES_PER_CELL
            x[base] = obs.ue_count
            x[base + 1] = obs.throughput
            x[base + 2] = obs.allocated_prbs / max_prbs[j]
            x[base + 3] = 1.0 if state.config.bits[idx] else 0.0
    x[N_STATE_FEATURES:] = [1.0 if b else 0.0 for b in action.mask]
    return x


@dataclass
class FeatureStats:
    """Per-feature min/max over the training rows, plus the PRB capacities
    the load features were computed with."""

    lo: np.ndarray
    hi: np.ndarray
    max_prbs: np.ndarray

    def __post_init__(self) -> None:
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.max_prbs = np.asarray(self.max_prbs, dtype=float)
        if self.lo.shape != (N_STATE_FEATURES,) or self.hi.shape != (N_STATE_FEATURES,):
            raise ValueError(f"stats need {N_STATE_FEATURES} entries")
        if np.any(self.hi < self.lo):
            raise ValueError("feature max below min")

    def scale(self, raw: np.ndarray) -> np.ndarray:
        """Scale the 60 state entries to [0, 1]; constant features map to 0."""
        raw = np.asarray(raw, dtype=float)
        out = np.array(raw, copy=True)
        span = self.hi - self.lo
        state = raw[..., :N_STATE_FEATURES]
        scaled = np.zeros_like(state)
        nz = span > 0
        scaled[..., nz] = (state[..., nz] - self.lo[nz]) / span[nz]
        out[..., :N_STATE_FEATURES] = np.clip(scaled, 0.0, 1.0)
        return out


@dataclass
class TargetStats:
    """Min/max of a training target; predictions train in normalized space."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.hi < self.lo:
            raise ValueError("target max below min")

    def normalize(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.hi == self.lo:
            return np.zeros_like(y)
        return (y - self.lo) / (self.hi - self.lo)

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.lo + z * (self.hi - self.lo)


def fit_feature_stats(raw_rows: np.ndarray, max_prbs: np.ndarray) -> FeatureStats:
    """Fit per-feature min/max on training rows (state entries only)."""
    raw_rows = np.asarray(raw_rows, dtype=float)
    if raw_rows.ndim != 2 or raw_rows.shape[1] != N_FEATURES:
        raise ValueError(f"expected rows of {N_FEATURES} features")
    if raw_rows.shape[0] == 0:
        raise ValueError("cannot fit stats on zero rows")
    state = raw_rows[:, :N_STATE_FEATURES]
    return FeatureStats(state.min(axis=0), state.max(axis=0), max_prbs)


def featurize(state: StationState, action: Action,
              stats: FeatureStats | None) -> np.ndarray:
    """Scaled feature vector for one (state, action) pair."""
    if stats is None:
        raise NotFittedError("feature stats not fitted")
    return stats.scale(raw_features(state, action, stats.max_prbs))


def featurize_many(state: StationState, actions: Sequence[Action],
                   stats: FeatureStats | None) -> np.ndarray:
    """Scaled feature matrix sharing one state across candidate actions."""
    if stats is None:
        raise NotFittedError("feature stats not fitted")
    if not actions:
        raise ValueError("need at least one action")
    base = raw_features(state, actions[0], stats.max_prbs)
    rows = np.tile(base, (len(actions), 1))
    for i, action in enumerate(actions):
        rows[i, N_STATE_FEATURES:] = [1.0 if b else 0.0 for b in action.mask]
    return stats.scale(rows)
