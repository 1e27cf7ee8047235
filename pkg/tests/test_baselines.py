"""Comparison policies: the always-on reference, the two-threshold load
rule, the uniform random policy, and the fixed-threshold controller."""

from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from cellswitch.adp import ControllerConfig, CostToGoTable
from cellswitch.baselines import (
    FIXED_Q_TAU,
    RandomPolicy,
    RuleBasedController,
    RuleParams,
    adp_fixed,
    no_es_policy,
)
from cellswitch.estimators.features import (
    N_STATE_FEATURES,
    FeatureStats,
    max_prbs_vector,
)
from cellswitch.netmodel import (
    Action,
    Mode,
    OnOffConfig,
    SystemParams,
    action_space,
    apply_action,
    cell_index,
)

from conftest import make_profiles, obs, state_with


def uniform_loads(level, config=None, step=0):
    """State whose on cells all sit at the given PRB load ratio (of 100)."""
    config = config or OnOffConfig.all_on()
    cells = {}
    for s in range(3):
        for j in range(5):
            if config.bits[cell_index(s, j)]:
                cells[(s, j)] = obs(ue=4, tp=8.0, prb=level * 100)
    return state_with(cells, config=config, step=step)


class TestNoEs:
    def test_always_everything_on(self):
        state = state_with({(0, 1): obs(ue=40, tp=10.0, prb=90)})
        for config in (OnOffConfig.all_on(),
                       apply_action(Action.from_mask_value(0))):
            action = no_es_policy(state, config)
            assert action.mask == (True, True, True, True)
            assert action.mode is Mode.FOUR_CELL
            assert action.mask_value == 15


class TestRuleParams:
    def test_defaults(self):
        p = RuleParams()
        assert (p.th_deac, p.th_ac, p.window) == (0.2, 0.8, 1)

    @pytest.mark.parametrize("kw", [
        dict(th_deac=-0.1),
        dict(th_ac=1.2),
        dict(th_deac=0.8, th_ac=0.8),
        dict(th_deac=0.9, th_ac=0.5),
        dict(window=0),
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            RuleParams(**kw)


class TestRuleBasedController:
    def make(self, mode=Mode.FOUR_CELL, **kw):
        return RuleBasedController(RuleParams(**kw), mode,
                                   profiles=make_profiles())

    def test_zero_load_switches_everything_off(self):
        rule = self.make()
        action = rule(uniform_loads(0.0), OnOffConfig.all_on())
        assert action.mask_value == 0

    def test_high_load_restores_all_carriers(self):
        config = apply_action(Action.from_mask_value(1))  # only carrier 4 kept
        rule = self.make()
        action = rule(uniform_loads(0.9, config=config), config)
        assert action.mask_value == 15

    def test_mid_load_holds_current_config(self):
        config = apply_action(Action.from_mask_value(9))  # carriers 1 and 4 on
        rule = self.make()
        action = rule(uniform_loads(0.5, config=config), config)
        assert action.mask_value == 9

    def test_windowed_deactivation_needs_sustained_low_load(self):
        rule = self.make(window=2)
        config = OnOffConfig.all_on()
        assert rule(uniform_loads(0.4, step=0), config).mask_value == 15
        # mean(0.4, 0.0) = 0.2 is not strictly below the threshold yet
        assert rule(uniform_loads(0.0, step=1), config).mask_value == 15
        assert rule(uniform_loads(0.0, step=2), config).mask_value == 0

    def test_two_cell_never_drops_forced_carriers(self):
        rule = self.make(mode=Mode.TWO_CELL)
        action = rule(uniform_loads(0.0), OnOffConfig.all_on())
        assert action.mask == (True, True, False, False)
        assert action.mask_value == 12

    def test_reset_clears_window(self):
        rule = self.make(window=2)
        config = OnOffConfig.all_on()
        rule(uniform_loads(0.9), config)
        rule.reset()
        assert len(rule.history) == 0
        # The high-load sample is gone, so one zero-load step suffices.
        assert rule(uniform_loads(0.0), config).mask_value == 0

    def test_profile_count_validated(self):
        with pytest.raises(ValueError):
            RuleBasedController(RuleParams(), Mode.FOUR_CELL,
                                profiles=make_profiles()[:3])


class TestRandomPolicy:
    def draws(self, seed, n=50, mode=Mode.FOUR_CELL):
        policy = RandomPolicy(mode, seed)
        state = state_with({})
        config = OnOffConfig.all_on()
        return [policy(state, config).mask_value for _ in range(n)]

    def test_uniform_over_four_cell_actions(self):
        n = 4800
        counts = Counter(self.draws(901, n=n))
        assert set(counts) == set(range(16))
        sigma = (n * (1 / 16) * (15 / 16)) ** 0.5
        for c in counts.values():
            assert abs(c - n / 16) <= 3 * sigma

    def test_two_cell_draws_only_valid_masks(self):
        seen = set(self.draws(3, n=200, mode=Mode.TWO_CELL))
        assert seen == {12, 13, 14, 15}

    def test_same_seed_same_sequence(self):
        assert self.draws(7) == self.draws(7)
        assert self.draws(7) != self.draws(8)


def zero_table(mode, T=96):
    actions = action_space(mode)
    n = len(actions)
    return CostToGoTable(mode, tuple(a.mask_value for a in actions),
                         np.zeros((T + 1, n)), np.zeros((T, n), dtype=int),
                         np.zeros((T, n), dtype=bool))


class ConstStub:
    def __init__(self, value):
        self.value = value

    def predict_many(self, state, actions):
        return np.full(len(actions), float(self.value))

    def predict(self, state, action):
        return float(self.value)


class StubLstm:
    def __init__(self, value=1.0, window=4):
        self.value = value
        self.window = window
        self.feature_stats = FeatureStats(
            np.zeros(N_STATE_FEATURES), np.ones(N_STATE_FEATURES),
            max_prbs_vector(make_profiles()))

    def predict_many(self, past_features, state, actions, prev_config):
        return np.full(len(actions), float(self.value))


class TestAdpFixed:
    def test_constructs_constant_threshold_controller(self):
        cfg = ControllerConfig(mode=Mode.FOUR_CELL)
        ctl = adp_fixed(zero_table(Mode.FOUR_CELL), ConstStub(100.0),
                        ConstStub(99.0), StubLstm(), cfg, SystemParams())
        assert ctl.fixed_q_tau == FIXED_Q_TAU == 92.0
        ctl(state_with({}), OnOffConfig.all_on())
        ctl(state_with({}, step=1), OnOffConfig.all_on())
        assert [d.q_tau for d in ctl.decisions] == [92.0, 92.0]
        assert ctl.model.qos_count == 0  # adaptation disabled

    def test_custom_threshold_passes_through(self):
        cfg = ControllerConfig(mode=Mode.TWO_CELL)
        ctl = adp_fixed(zero_table(Mode.TWO_CELL), ConstStub(1.0),
                        ConstStub(99.0), StubLstm(), cfg, SystemParams(),
                        q_tau=88.0)
        ctl(state_with({}), OnOffConfig.all_on())
        assert ctl.decisions[0].q_tau == 88.0
