"""Comparison policies: always-on, threshold rules, and random actions.

The random policy doubles as the exploration policy for generating training
traces.  The fixed-threshold controller variant lives in the controller
module itself (``fixed_q_tau``); :func:`adp_fixed` is a thin constructor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence

import numpy as np

from .adp import AdpController, ControllerConfig, CostToGoTable
from .netmodel import (
    Action,
    CarrierProfile,
    DEFAULT_CARRIERS,
    Mode,
    N_CARRIERS,
    N_SECTORS,
    OnOffConfig,
    StationState,
    SystemParams,
    action_space,
    cell_index,
    load_ratio,
)

FIXED_Q_TAU = 92.0


def no_es_policy(state: StationState, config: OnOffConfig) -> Action:
    """Keep every carrier on; the reference point for power and QoS."""
    return Action(mask=(True,) * 4, mode=Mode.FOUR_CELL)


@dataclass(frozen=True)
class RuleParams:
    """Thresholds on PRB load ratios driving the rule-based switcher."""

    th_deac: float = 0.2
    th_ac: float = 0.8
    window: int = 1

    def __post_init__(self) -> None:
        if not (0.0 <= self.th_deac < self.th_ac <= 1.0):
            raise ValueError("need 0 <= th_deac < th_ac <= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")


class RuleBasedController:
    """Two-threshold carrier switching on observed PRB load.

    When the mean load over the currently active cells climbs past ``th_ac``
    every carrier is restored (congestion relief takes priority).  Otherwise
    each switchable carrier, widest coverage last (descending carrier
    number), is shut down when its cells' load averaged over the window sits
    below ``th_deac``.  The only state kept is the load history window.
    """

    def __init__(self, params: RuleParams, mode: Mode,
                 profiles: Optional[Sequence[CarrierProfile]] = None) -> None:
        self.params = params
        self.mode = mode
        self.profiles = tuple(profiles) if profiles is not None else DEFAULT_CARRIERS
        if len(self.profiles) != N_CARRIERS:
            raise ValueError("need one profile per carrier")
        self.history: Deque[np.ndarray] = deque(maxlen=params.window)

    def reset(self) -> None:
        self.history.clear()

    def _loads(self, state: StationState) -> np.ndarray:
        return np.array([
            load_ratio(state.cells[cell_index(s, j)].allocated_prbs,
                       self.profiles[j].max_prbs)
            for s in range(N_SECTORS) for j in range(N_CARRIERS)
        ])

    def __call__(self, state: StationState, config: OnOffConfig) -> Action:
        loads = self._loads(state)
        self.history.append(loads)
        active = [i for i in range(len(config.bits)) if config.bits[i]]
        if float(np.mean(loads[active])) > self.params.th_ac:
            return Action(mask=(True,) * 4, mode=self.mode)
        windowed = np.mean(np.stack(self.history), axis=0)
        mask = list(config.bits[1:N_CARRIERS])  # carriers 1..4 of sector 0
        for j in sorted(self.mode.switchable, reverse=True):
            cells = [cell_index(s, j) for s in range(N_SECTORS)]
            if mask[j - 1] and float(np.mean(windowed[cells])) < self.params.th_deac:
                mask[j - 1] = False
        for j in self.mode.forced_on:
            mask[j - 1] = True
        return Action(mask=tuple(mask), mode=self.mode)


class RandomPolicy:
    """Uniform draw over the mode's action space, independent of the state."""

    def __init__(self, mode: Mode, seed: int) -> None:
        self.actions: List[Action] = list(action_space(mode))
        self.rng = np.random.default_rng(seed)

    def __call__(self, state: StationState, config: OnOffConfig) -> Action:
        return self.actions[int(self.rng.integers(len(self.actions)))]


def adp_fixed(table: CostToGoTable, power_est, qos_est, handover_est,
              cfg: ControllerConfig, params: SystemParams,
              q_tau: float = FIXED_Q_TAU) -> AdpController:
    """Controller ablation: constant QoS threshold, no adaptation."""
    return AdpController(table, power_est, qos_est, handover_est, cfg, params,
                         fixed_q_tau=q_tau)
