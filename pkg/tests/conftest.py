"""Shared builders for tests: small profiles, observations, states."""

from __future__ import annotations

import numpy as np
import pytest

from cellswitch.netmodel import (
    CarrierProfile,
    CellObservation,
    N_CARRIERS,
    N_CELLS,
    N_SECTORS,
    OnOffConfig,
    StationState,
    cell_index,
)


def make_profiles(p_standby=100.0, p_load=200.0, p_sleep=5.0, max_prbs=100,
                  prb_rate=1.0) -> tuple[CarrierProfile, ...]:
    """Uniform carrier table so hand arithmetic stays simple."""
    return tuple(
        CarrierProfile(j, max_prbs, prb_rate, p_sleep, p_standby, p_load, j)
        for j in range(N_CARRIERS)
    )


def obs(ue=0.0, tp=0.0, prb=0.0, on=True, tt=None) -> CellObservation:
    if tt is None:
        tt = 900.0 if ue > 0 else 0.0
    return CellObservation(ue_count=ue, throughput=tp, allocated_prbs=prb,
                           on=on, delivered=tp * 112.5, tx_time=tt)


def idle_state(config: OnOffConfig | None = None, step: int = 0) -> StationState:
    config = config or OnOffConfig.all_on()
    cells = tuple(
        obs(on=config.bits[i]) for i in range(N_CELLS)
    )
    return StationState(step=step, cells=cells, config=config)


def state_with(cell_map: dict[tuple[int, int], CellObservation],
               config: OnOffConfig | None = None, step: int = 0) -> StationState:
    """State from a sparse {(sector, carrier): observation} map."""
    config = config or OnOffConfig.all_on()
    cells = list(idle_state(config, step).cells)
    for (s, j), o in cell_map.items():
        cells[cell_index(s, j)] = o
    return StationState(step=step, cells=tuple(cells), config=config)


@pytest.fixture
def profiles():
    return make_profiles()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
