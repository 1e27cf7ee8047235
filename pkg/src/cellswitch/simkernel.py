"""Synthetic daily-traffic simulator for one station.

A day is 96 steps of 15 minutes.  Each scenario defines a deterministic
expected UE-count curve (base level plus two Gaussian peaks); sessions spawn
as a Poisson stream that tracks the curve, live for a geometric number of
steps, and demand a clamped-normal rate.  Association and PRB allocation are
deterministic greedy procedures so that a (scenario seed, run seed) pair
fully determines an episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Sequence

import numpy as np

from .errors import EpisodeFinished
from .netmodel import (
    Action,
    CarrierProfile,
    CellObservation,
    N_CARRIERS,
    N_CELLS,
    N_SECTORS,
    OnOffConfig,
    StationState,
    StepMetrics,
    SystemParams,
    apply_action,
    cell_index,
    handover_count,
    qos_uncongested_pct,
    station_power,
)

STEPS_PER_DAY = 96
STEP_SECONDS = 900.0
STEPS_PER_HOUR = 4
MEAN_LIFETIME_STEPS = 8.0
MIN_DEMAND_MBPS = 0.1

#: Scenario volume endpoints: (base, amplitude) runs linearly from the first
#: to the last scenario.
_BASE_RANGE = (10.0, 45.0)
_AMP_RANGE = (20.0, 90.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """Daily traffic profile parameters for one site."""

    id: int
    base_ue: float
    peak_amp: float
    peak_hours: tuple[float, float]
    peak_width: float
    noise_sd: float
    demand_mean: float
    demand_sd: float
    seed: int

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ValueError("scenario id starts at 1")
        if self.base_ue < 0 or self.peak_amp < 0:
            raise ValueError("traffic levels must be >= 0")
        if self.peak_width <= 0:
            raise ValueError("peak width must be positive")
        if self.noise_sd < 0 or self.demand_sd < 0:
            raise ValueError("spreads must be >= 0")
        if self.demand_mean <= 0:
            raise ValueError("demand mean must be positive")


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (platform independent)."""
    words = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def default_scenarios(master_seed: int, count: int = 8) -> list[ScenarioSpec]:
    """Scenario set ordered by daily volume, light to heavy."""
    if count < 1:
        raise ValueError("count must be >= 1")
    specs = []
    for i in range(count):
        frac = i / (count - 1) if count > 1 else 0.0
        base = _BASE_RANGE[0] + frac * (_BASE_RANGE[1] - _BASE_RANGE[0])
        amp = _AMP_RANGE[0] + frac * (_AMP_RANGE[1] - _AMP_RANGE[0])
        specs.append(ScenarioSpec(
            id=i + 1,
            base_ue=base,
            peak_amp=amp,
            peak_hours=(12.0, 20.0),
            peak_width=2.5,
            noise_sd=2.0,
            demand_mean=2.0,
            demand_sd=0.5,
            seed=derive_seed(master_seed, 101, i + 1),
        ))
    return specs


def expected_ue_count(spec: ScenarioSpec, t: int) -> float:
    """Deterministic expected station-wide UE count at step t."""
    if not 0 <= t < STEPS_PER_DAY:
        raise ValueError(f"step must be in 0..{STEPS_PER_DAY - 1}")
    hour = t / STEPS_PER_HOUR
    peaks = sum(
        math.exp(-((hour - p) ** 2) / (2.0 * spec.peak_width ** 2))
        for p in spec.peak_hours
    )
    return spec.base_ue + spec.peak_amp * peaks


@dataclass(frozen=True)
class UESession:
    """One active user session.  Alive for steps arrival..departure-1."""

    id: int
    sector: int
    demand: float
    arrival_step: int
    departure_step: int

    def __post_init__(self) -> None:
        if self.demand <= 0:
            raise ValueError("demand must be positive")
        if self.departure_step <= self.arrival_step:
            raise ValueError("lifetime must be at least one step")
        if not 0 <= self.sector < N_SECTORS:
            raise ValueError("sector out of range")


@dataclass
class SimState:
    """Mutable episode state.  The generator advances in place, so a SimState
    belongs to exactly one episode and cannot be branched."""

    t: int
    sessions: List[UESession]
    assignment: Dict[int, int]
    config: OnOffConfig
    prev_counts: tuple[int, ...]
    next_session_id: int
    rng: np.random.Generator


def initial_sim_state(spec: ScenarioSpec, run_seed: int) -> SimState:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & 0xFFFFFFFF,
                                                        int(run_seed) & 0xFFFFFFFF]))
    return SimState(
        t=0,
        sessions=[],
        assignment={},
        config=OnOffConfig.all_on(),
        prev_counts=tuple(0 for _ in range(N_CELLS)),
        next_session_id=0,
        rng=rng,
    )


def initial_station_state() -> StationState:
    """Decision state before anything has happened: all on, zero traffic."""
    cells = tuple(CellObservation(0, 0.0, 0, True, 0.0, 0.0) for _ in range(N_CELLS))
    return StationState(step=0, cells=cells, config=OnOffConfig.all_on())


def evolve_sessions(sim: SimState, spec: ScenarioSpec,
                    rng: np.random.Generator) -> List[UESession]:
    """Advance the session population by one step.

    Departed sessions are dropped, then a Poisson number of new sessions is
    spawned to close the (noisy) gap to the expected count.  Draw order is
    fixed: noise, spawn count, then per-session sector / demand / lifetime.
    """
    t = sim.t
    survivors = [s for s in sim.sessions if s.departure_step > t]
    noise = float(rng.normal(0.0, spec.noise_sd))
    rate = max(0.0, expected_ue_count(spec, t) - len(survivors) + noise)
    n_new = int(rng.poisson(rate))
    out = list(survivors)
    next_id = sim.next_session_id
    for k in range(n_new):
        sector = int(rng.integers(0, N_SECTORS))
        demand = max(MIN_DEMAND_MBPS, float(rng.normal(spec.demand_mean, spec.demand_sd)))
        lifetime = int(rng.geometric(1.0 / MEAN_LIFETIME_STEPS))
        out.append(UESession(
            id=next_id + k,
            sector=sector,
            demand=demand,
            arrival_step=t,
            departure_step=t + lifetime,
        ))
    return out


def _prb_request(demand: float, profile: CarrierProfile) -> int:
    return int(math.ceil(demand / profile.prb_rate))


def associate(sessions: Sequence[UESession], config: OnOffConfig,
              profiles: Sequence[CarrierProfile],
              previous: Dict[int, int] | None = None) -> Dict[int, int]:
    """Deterministic sticky-greedy association of sessions to cells.

    Sessions are visited in id order.  A session keeps its previous cell while
    that cell is still on and has room for its request; handovers should come
    from switching decisions and congestion, not from re-packing around every
    arrival and departure.  New or displaced sessions go to the on cell of
    their sector with the most remaining free PRBs among those that can fit
    the request (ties: lowest carrier).  If no cell fits, the session falls
    back to carrier 0, which may oversubscribe; the allocator scales grants
    down later.
    """
    remaining = [float(profiles[j].max_prbs) for j in range(N_CARRIERS)]
    remaining = [list(remaining) for _ in range(N_SECTORS)]
    previous = previous or {}
    assignment: Dict[int, int] = {}
    for sess in sorted(sessions, key=lambda s: s.id):
        free = remaining[sess.sector]
        best_j = -1
        prev_cell = previous.get(sess.id)
        if prev_cell is not None and prev_cell // N_CARRIERS == sess.sector:
            j = prev_cell % N_CARRIERS
            if config.on(sess.sector, j) and free[j] >= _prb_request(sess.demand, profiles[j]):
                best_j = j
        if best_j < 0:
            best_free = -math.inf
            for j in range(N_CARRIERS):
                if not config.on(sess.sector, j):
                    continue
                request = _prb_request(sess.demand, profiles[j])
                if free[j] >= request and free[j] > best_free:
                    best_free = free[j]
                    best_j = j
        if best_j < 0:
            best_j = 0  # coverage fallback
        free[best_j] -= _prb_request(sess.demand, profiles[best_j])
        assignment[sess.id] = cell_index(sess.sector, best_j)
    return assignment


def allocate_prbs(cell_sessions: Sequence[UESession],
                  profile: CarrierProfile) -> Dict[int, int]:
    """Grant PRBs within one cell.

    Full requests fit within capacity are granted outright; otherwise grants
    follow the largest-remainder apportionment of capacity by request size
    (remainder ties favour the lower session id).
    """
    requests = {s.id: _prb_request(s.demand, profile) for s in cell_sessions}
    total = sum(requests.values())
    if total <= profile.max_prbs:
        return requests
    quotas = {sid: r * profile.max_prbs / total for sid, r in requests.items()}
    grants = {sid: int(math.floor(q)) for sid, q in quotas.items()}
    leftover = profile.max_prbs - sum(grants.values())
    order = sorted(quotas, key=lambda sid: (-(quotas[sid] - math.floor(quotas[sid])), sid))
    for sid in order[:leftover]:
        grants[sid] += 1
    return grants


def step(sim: SimState, action: Action, spec: ScenarioSpec,
         profiles: Sequence[CarrierProfile],
         params: SystemParams) -> tuple[SimState, StationState, StepMetrics]:
    """Advance one step under the given action.

    Order of effects: apply the action, evolve sessions, associate, allocate,
    observe per-cell traffic, then compute realized power / QoS / handovers
    against the pre-step config and counts.
    """
    if sim.t >= STEPS_PER_DAY:
        raise EpisodeFinished(f"episode already ran its {STEPS_PER_DAY} steps")
    if not isinstance(action, Action):
        raise ValueError("action must be an Action")

    new_config = apply_action(action)
    sessions = evolve_sessions(sim, spec, sim.rng)
    next_id = max((s.id + 1 for s in sessions), default=sim.next_session_id)
    next_id = max(next_id, sim.next_session_id)

    assignment = associate(sessions, new_config, profiles, sim.assignment)
    by_cell: Dict[int, List[UESession]] = {}
    for sess in sessions:
        by_cell.setdefault(assignment[sess.id], []).append(sess)

    cells = []
    for s in range(N_SECTORS):
        for j in range(N_CARRIERS):
            idx = cell_index(s, j)
            members = by_cell.get(idx, [])
            on = new_config.bits[idx]
            if members:
                grants = allocate_prbs(members, profiles[j])
                n_prbs = sum(grants.values())
                tp = n_prbs * profiles[j].prb_rate
            else:
                n_prbs = 0
                tp = 0.0
            cells.append(CellObservation(
                ue_count=len(members),
                throughput=tp,
                allocated_prbs=n_prbs,
                on=on,
                delivered=tp * STEP_SECONDS / 8.0,
                tx_time=STEP_SECONDS if members else 0.0,
            ))
    cells = tuple(cells)
    counts = tuple(int(c.ue_count) for c in cells)
    obs_state = StationState(step=sim.t, cells=cells, config=new_config)

    metrics = StepMetrics(
        power=station_power(obs_state, sim.config, profiles, params.beta, params.p_gamma),
        qos=qos_uncongested_pct(cells, params.tau),
        handovers=handover_count(sim.prev_counts, counts),
    )
    next_sim = SimState(
        t=sim.t + 1,
        sessions=sessions,
        assignment=assignment,
        config=new_config,
        prev_counts=counts,
        next_session_id=next_id,
        rng=sim.rng,
    )
    return next_sim, obs_state, metrics


@dataclass(frozen=True)
class TraceRecord:
    """One step of an episode: the state the policy saw, the action it chose,
    and the metrics realized during the step the action governed."""

    t: int
    state: StationState
    action: Action
    power: float
    qos: float
    handovers: int


Policy = Callable[[StationState, OnOffConfig], Action]


def run_episode(spec: ScenarioSpec, policy: Policy, run_seed: int,
                profiles: Sequence[CarrierProfile],
                params: SystemParams) -> List[TraceRecord]:
    """Run one 96-step day under a policy and return its trace.

    The policy is consulted before each transition with the current decision
    state (observations of the previous step, config included).
    """
    sim = initial_sim_state(spec, run_seed)
    decision = initial_station_state()
    records: List[TraceRecord] = []
    for t in range(STEPS_PER_DAY):
        action = policy(decision, decision.config)
        if not isinstance(action, Action):
            raise ValueError(f"policy returned {type(action).__name__}, not an Action")
        sim, obs, metrics = step(sim, action, spec, profiles, params)
        records.append(TraceRecord(t, decision, action,
                                   metrics.power, metrics.qos, metrics.handovers))
        if t + 1 < STEPS_PER_DAY:
            decision = replace(obs, step=t + 1)
    return records


def mean_traffic(traces: Sequence[Sequence[TraceRecord]]) -> List[StationState]:
    """Per-step arithmetic mean of the numeric state fields across traces.

    Configs are decision variables, not traffic, so the averaged states carry
    an all-on placeholder config; consumers substitute the config they are
    evaluating.
    """
    if not traces:
        raise ValueError("mean_traffic needs at least one trace")
    length = len(traces[0])
    if any(len(tr) != length for tr in traces):
        raise ValueError("all traces must have equal length")
    n = float(len(traces))
    out: List[StationState] = []
    for t in range(length):
        cells = []
        for idx in range(N_CELLS):
            ue = sum(tr[t].state.cells[idx].ue_count for tr in traces) / n
            tp = sum(tr[t].state.cells[idx].throughput for tr in traces) / n
            prb = sum(tr[t].state.cells[idx].allocated_prbs for tr in traces) / n
            dl = sum(tr[t].state.cells[idx].delivered for tr in traces) / n
            tx = sum(tr[t].state.cells[idx].tx_time for tr in traces) / n
            cells.append(CellObservation(ue, tp, prb, True, dl, tx))
        out.append(StationState(step=t, cells=tuple(cells), config=OnOffConfig.all_on()))
    return out
