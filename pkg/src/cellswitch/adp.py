"""Switching controller: offline cost-to-go table plus online action choice.

Offline, a backward induction over the daily horizon prices every
(step, entering-config) pair using the learned power/QoS estimators applied
to averaged historical traffic, under a fixed QoS floor.  Online, the
controller scores each candidate action as predicted power plus the wake-up
transient plus the tabled cost-to-go, keeps the candidates whose predicted
QoS clears an adaptive threshold, and takes the cheapest.  The threshold is
a linear function of the mean predicted handovers whose two coefficients
track a drifting QoS target inside a fixed box.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import EpisodeFinished
from .estimators.features import featurize
from .netmodel import (
    Action,
    Mode,
    OnOffConfig,
    StationState,
    SystemParams,
    action_space,
    apply_action,
    qos_uncongested_pct,
    switching_cost,
)
from .simkernel import STEPS_PER_DAY, TraceRecord

OFFLINE_QOS_FLOOR = 80.0
QOS_TARGET = 92.0
REG_GAMMA = 1e-3
THETA0_BOUNDS = (80.0, 90.0)
THETA1_BOUNDS = (0.0, 3.0)
THETA0_INIT = 85.0
THETA1_INIT = 1.0
TABLE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ControllerConfig:
    """Constants for both the offline table build and the online policy."""

    mode: Mode = Mode.FOUR_CELL
    q_tau_offline: float = OFFLINE_QOS_FLOOR
    beta: float = 0.3
    p_gamma: float = 162.0
    q_phi_target: float = QOS_TARGET
    reg_gamma: float = REG_GAMMA
    theta0_bounds: tuple[float, float] = THETA0_BOUNDS
    theta1_bounds: tuple[float, float] = THETA1_BOUNDS
    fallback: str = "max-qos"

    def __post_init__(self) -> None:
        if self.fallback != "max-qos":
            raise ValueError(f"unknown fallback policy {self.fallback!r}")
        if not 0.0 <= self.q_tau_offline <= 100.0:
            raise ValueError("offline QoS floor must be in [0, 100]")
        if self.reg_gamma < 0:
            raise ValueError("regularizer weight must be >= 0")
        for lo, hi in (self.theta0_bounds, self.theta1_bounds):
            if hi < lo:
                raise ValueError("bad coefficient bounds")


def with_config(state: StationState, config: OnOffConfig) -> StationState:
    """Counterfactual state: same traffic numbers, substituted config.

    Cell on flags inside the observations are left as-is; featurization
    reads the config, so this is exactly what the estimators consume.
    """
    return replace(state, config=config)


# ---------------------------------------------------------------------------
# Offline table

@dataclass
class CostToGoTable:
    """values[t][a]: cheapest remaining cost from step t entering with the
    config of action a.  Row T (one past the horizon) is all zeros."""

    mode: Mode
    actions: tuple[int, ...]          # canonical mask values
    values: np.ndarray                # (T+1, |U|)
    argmin: np.ndarray                # (T, |U|) index into actions
    infeasible: np.ndarray            # (T, |U|) no candidate met the floor

    def __post_init__(self) -> None:
        t1, u = self.values.shape
        if self.argmin.shape != (t1 - 1, u) or self.infeasible.shape != (t1 - 1, u):
            raise ValueError("table arrays disagree on shape")
        if len(self.actions) != u:
            raise ValueError("action list does not match table width")
        if np.any(self.values[-1] != 0.0):
            raise ValueError("terminal row must be zero")

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


def _selection_keys(actions: Sequence[Action]) -> list[tuple[int, int]]:
    return [(a.cells_off, a.mask_value) for a in actions]


def _pick(total: np.ndarray, allowed: np.ndarray,
          keys: Sequence[tuple[int, int]]) -> int:
    """Smallest total among allowed; ties prefer fewer cells off, then the
    lower mask value."""
    best = -1
    for i in range(len(total)):
        if not allowed[i]:
            continue
        if best < 0 or (total[i], keys[i][0], keys[i][1]) < (total[best], keys[best][0], keys[best][1]):
            best = i
    return best


def build_ctg_table(mean_states: Sequence[StationState], power_est, qos_est,
                    cfg: ControllerConfig) -> CostToGoTable:
    """Backward induction over the averaged traffic profile.

    At (t, a) the candidates u are scored with the estimators on the mean
    state carrying config(a); candidates whose predicted QoS misses the
    offline floor are excluded unless none clears it, in which case the
    minimum runs over all candidates and the entry is flagged.
    """
    if not mean_states:
        raise ValueError("need at least one averaged state")
    actions = action_space(cfg.mode)
    configs = [apply_action(u) for u in actions]
    keys = _selection_keys(actions)
    horizon = len(mean_states)
    n = len(actions)
    values = np.zeros((horizon + 1, n))
    argmin = np.zeros((horizon, n), dtype=int)
    infeasible = np.zeros((horizon, n), dtype=bool)
    delta = np.array([[switching_cost(ca, cu, cfg.beta, cfg.p_gamma) for cu in configs]
                      for ca in configs])
    for t in range(horizon - 1, -1, -1):
        base = mean_states[t]
        for ai in range(n):
            st = with_config(base, configs[ai])
            power = np.asarray(power_est.predict_many(st, actions), dtype=float)
            qos = np.asarray(qos_est.predict_many(st, actions), dtype=float)
            total = power + delta[ai] + values[t + 1]
            feasible = qos >= cfg.q_tau_offline
            if feasible.any():
                pick = _pick(total, feasible, keys)
            else:
                pick = _pick(total, np.ones(n, dtype=bool), keys)
                infeasible[t, ai] = True
            values[t, ai] = total[pick]
            argmin[t, ai] = pick
    return CostToGoTable(
        mode=cfg.mode,
        actions=tuple(a.mask_value for a in actions),
        values=values,
        argmin=argmin,
        infeasible=infeasible,
    )


# ---------------------------------------------------------------------------
# Adaptive threshold

@dataclass(frozen=True)
class ThresholdModel:
    """Linear threshold on mean predicted handovers, with running QoS stats."""

    theta0: float = THETA0_INIT
    theta1: float = THETA1_INIT
    theta0_bounds: tuple[float, float] = THETA0_BOUNDS
    theta1_bounds: tuple[float, float] = THETA1_BOUNDS
    reg_gamma: float = REG_GAMMA
    q_phi_target: float = QOS_TARGET
    qos_sum: float = 0.0
    qos_count: int = 0

    def observe(self, qos: float) -> "ThresholdModel":
        return replace(self, qos_sum=self.qos_sum + qos, qos_count=self.qos_count + 1)


def adaptive_target(model: ThresholdModel) -> float:
    """Drifting tracking target: strict when observed QoS lags the goal,
    relaxed when it exceeds it.  Without observations it is the goal."""
    if model.qos_count == 0:
        return model.q_phi_target
    return 2.0 * model.q_phi_target - model.qos_sum / model.qos_count


def threshold_value(model: ThresholdModel, h_bar: float) -> float:
    return model.theta0 + model.theta1 * h_bar


def _clip(v: float, bounds: tuple[float, float]) -> float:
    return min(max(v, bounds[0]), bounds[1])


def _box_ls_minimizer(q_phi: float, h_bar: float, gamma: float,
                      b0: tuple[float, float], b1: tuple[float, float],
                      current: tuple[float, float]) -> tuple[float, float]:
    """Minimize (q - t0 - t1*h)^2 + gamma*(t0^2 + t1^2) over the box.

    With gamma > 0 the objective is strictly convex, so the minimizer is the
    best of: the unconstrained stationary point, the four edge-restricted
    minimizers, and the four corners (classic KKT case split).  With
    gamma = 0 the valley is flat; we follow the gradient-flow limit from the
    current point (its projection onto the zero-residual line), then clip.
    """
    if gamma <= 0.0:
        t0, t1 = current
        if h_bar == 0.0:
            return _clip(q_phi, b0), t1
        r = q_phi - t0 - t1 * h_bar
        scale = r / (1.0 + h_bar * h_bar)
        t0 = _clip(t0 + scale, b0)
        t1 = _clip(t1 + scale * h_bar, b1)
        # One exchange pass: with one coordinate pinned, re-solve the other.
        t1 = _clip((q_phi - t0) / h_bar, b1)
        t0 = _clip(q_phi - t1 * h_bar, b0)
        return t0, t1

    h2 = h_bar * h_bar
    denom = 1.0 + h2 + gamma
    candidates = [(q_phi / denom, q_phi * h_bar / denom)]
    for t0 in b0:  # theta0 pinned, theta1 free
        candidates.append((t0, (q_phi - t0) * h_bar / (h2 + gamma)))
    for t1 in b1:  # theta1 pinned, theta0 free
        candidates.append(((q_phi - t1 * h_bar) / (1.0 + gamma), t1))
    for t0 in b0:
        for t1 in b1:
            candidates.append((t0, t1))

    def objective(t0: float, t1: float) -> float:
        r = q_phi - t0 - t1 * h_bar
        return r * r + gamma * (t0 * t0 + t1 * t1)

    best = None
    best_val = np.inf
    for t0, t1 in candidates:
        t0c, t1c = _clip(t0, b0), _clip(t1, b1)
        val = objective(t0c, t1c)
        if val < best_val - 1e-15:
            best_val = val
            best = (t0c, t1c)
    assert best is not None
    return best


def update_threshold(model: ThresholdModel, q_phi: float,
                     h_bar: float) -> tuple[ThresholdModel, float]:
    """Refit the threshold coefficients toward q_phi at the current h_bar
    and return the updated model with the step's QoS threshold.

    The refit solves the box-constrained regularized least-squares problem
    exactly; the returned threshold is the refit line evaluated at h_bar,
    clamped to the valid QoS range.
    """
    if h_bar < 0:
        raise ValueError("mean predicted handovers must be >= 0")
    t0, t1 = _box_ls_minimizer(q_phi, h_bar, model.reg_gamma,
                               model.theta0_bounds, model.theta1_bounds,
                               (model.theta0, model.theta1))
    new_model = replace(model, theta0=t0, theta1=t1)
    q_tau = min(max(threshold_value(new_model, h_bar), 0.0), 100.0)
    return new_model, q_tau


def mean_predicted_handover(past_features: Sequence[np.ndarray],
                            state: StationState, prev_config: OnOffConfig,
                            actions: Sequence[Action], handover_est) -> float:
    """Mean predicted handovers over the whole candidate action set."""
    if not actions:
        raise ValueError("need at least one action")
    preds = handover_est.predict_many(past_features, state, actions, prev_config)
    return float(np.mean(preds))


# ---------------------------------------------------------------------------
# Online selection

@dataclass(frozen=True)
class ActionScore:
    mask: int
    power: float
    qos: float
    delta: float
    ctg: float
    score: float
    feasible: bool


@dataclass(frozen=True)
class Decision:
    """Everything the controller knew when it chose an action."""

    t: int
    q_tau: float
    chosen_mask: int
    fallback: bool
    scores: tuple[ActionScore, ...]
    h_bar: float = 0.0
    q_phi: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0


def select_action(state: StationState, config: OnOffConfig,
                  table: CostToGoTable, power_est, qos_est,
                  q_tau: float, cfg: ControllerConfig) -> tuple[Action, Decision]:
    """Cheapest feasible action at the current step.

    Score: predicted power + wake-up transient against the current config +
    tabled cost-to-go of the successor step.  Feasible means predicted QoS
    at or above q_tau.  With nothing feasible, fall back to the highest
    predicted QoS and flag the step.  Ties prefer fewer cells off, then the
    lower mask value.
    """
    t = state.step
    if t >= table.horizon:
        raise EpisodeFinished(f"step {t} is past the table horizon {table.horizon}")
    actions = action_space(cfg.mode)
    if tuple(a.mask_value for a in actions) != table.actions:
        raise ValueError("table was built for a different action space")
    keys = _selection_keys(actions)
    power = np.asarray(power_est.predict_many(state, actions), dtype=float)
    qos = np.asarray(qos_est.predict_many(state, actions), dtype=float)
    delta = np.array([switching_cost(config, apply_action(u), cfg.beta, cfg.p_gamma)
                      for u in actions])
    ctg = table.values[t + 1]
    total = power + delta + ctg
    feasible = qos >= q_tau
    fallback = not bool(feasible.any())
    if fallback:
        best = -1
        for i in range(len(actions)):
            if best < 0 or (-qos[i], keys[i][0], keys[i][1]) < (-qos[best], keys[best][0], keys[best][1]):
                best = i
    else:
        best = _pick(total, feasible, keys)
    scores = tuple(
        ActionScore(actions[i].mask_value, float(power[i]), float(qos[i]),
                    float(delta[i]), float(ctg[i]), float(total[i]), bool(feasible[i]))
        for i in range(len(actions))
    )
    decision = Decision(t=t, q_tau=float(q_tau), chosen_mask=actions[best].mask_value,
                        fallback=fallback, scores=scores)
    return actions[best], decision


class AdpController:
    """Stateful per-episode policy wrapping the table and the estimators.

    Call it with (decision state, current config) each step.  It maintains
    the featurized action history for the recurrent estimator, the running
    observed-QoS mean, and the threshold coefficients.  With fixed_q_tau set
    it skips all threshold adaptation and uses the constant instead.
    """

    def __init__(self, table: CostToGoTable, power_est, qos_est, handover_est,
                 cfg: ControllerConfig, params: SystemParams,
                 fixed_q_tau: Optional[float] = None) -> None:
        self.table = table
        self.power_est = power_est
        self.qos_est = qos_est
        self.handover_est = handover_est
        self.cfg = cfg
        self.params = params
        self.fixed_q_tau = fixed_q_tau
        self.decisions: List[Decision] = []
        self.reset()

    def reset(self) -> None:
        self.model = ThresholdModel(
            theta0_bounds=self.cfg.theta0_bounds,
            theta1_bounds=self.cfg.theta1_bounds,
            reg_gamma=self.cfg.reg_gamma,
            q_phi_target=self.cfg.q_phi_target,
        )
        self.past_features: List[np.ndarray] = []
        self.decisions = []

    def __call__(self, state: StationState, config: OnOffConfig) -> Action:
        if state.step >= STEPS_PER_DAY:
            raise EpisodeFinished("episode is over")
        actions = action_space(self.cfg.mode)
        # Observations in the decision state realized under the previous
        # action; fold their QoS into the running mean.
        if state.step > 0 and self.fixed_q_tau is None:
            observed = qos_uncongested_pct(state.cells, self.params.tau)
            self.model = self.model.observe(observed)
        # At decision time the in-effect config is the one applied during
        # the previous step, which is what the recurrent estimator expects.
        h_bar = mean_predicted_handover(self.past_features, state, config,
                                        actions, self.handover_est)
        if self.fixed_q_tau is not None:
            q_phi = self.model.q_phi_target
            q_tau = self.fixed_q_tau
        else:
            q_phi = adaptive_target(self.model)
            self.model, q_tau = update_threshold(self.model, q_phi, h_bar)
        action, decision = select_action(state, config, self.table,
                                         self.power_est, self.qos_est,
                                         q_tau, self.cfg)
        decision = replace(decision, h_bar=h_bar, q_phi=q_phi,
                           theta0=self.model.theta0, theta1=self.model.theta1)
        self.decisions.append(decision)
        self.past_features.append(
            featurize(state, action, self.handover_est.feature_stats))
        if len(self.past_features) > max(self.handover_est.window, 1):
            self.past_features.pop(0)
        return action


def policy_objective_estimate(trace: Sequence[TraceRecord],
                              q_phi_target: float = QOS_TARGET) -> tuple[float, int]:
    """Total power over the trace and the count of QoS-violating steps."""
    total = float(sum(r.power for r in trace))
    violations = sum(1 for r in trace if r.qos < q_phi_target)
    return total, violations
