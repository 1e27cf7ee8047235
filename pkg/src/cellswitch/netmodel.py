"""Station topology, on/off configurations, and closed-form step metrics.

One base station carries three sectors, each with five frequency carriers;
a (sector, carrier) pair is a cell, so a station has fifteen cells.  Carrier 0
is the coverage layer and is never switched off.  Control actions pick one
on/off mask over the switchable carriers and apply it to all three sectors.

Everything in this module is a pure function of its arguments: per-cell power
draw, the one-off cost of waking cells, the share of busy cells that are
uncongested, and handover counts inferred from per-cell UE count deltas.
No I/O and no hidden state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

N_SECTORS = 3
N_CARRIERS = 5
N_CELLS = N_SECTORS * N_CARRIERS
N_MASK_BITS = N_CARRIERS - 1  # carriers 1..4 are switchable at most


def cell_index(sector: int, carrier: int) -> int:
    """Flat cell index; cells are ordered (sector, carrier)."""
    if not (0 <= sector < N_SECTORS and 0 <= carrier < N_CARRIERS):
        raise ValueError(f"bad cell coordinates sector={sector} carrier={carrier}")
    return sector * N_CARRIERS + carrier


@dataclass(frozen=True)
class CellId:
    """Coordinates of one cell within a station."""

    station: int
    sector: int
    carrier: int

    def __post_init__(self) -> None:
        if self.station < 0:
            raise ValueError("station must be >= 0")
        if not 0 <= self.sector < N_SECTORS:
            raise ValueError(f"sector must be in 0..{N_SECTORS - 1}")
        if not 0 <= self.carrier < N_CARRIERS:
            raise ValueError(f"carrier must be in 0..{N_CARRIERS - 1}")

    @property
    def index(self) -> int:
        return cell_index(self.sector, self.carrier)


@dataclass(frozen=True)
class CarrierProfile:
    """Static per-carrier constants shared by the carrier's three cells.

    max_prbs    capacity in physical resource blocks
    prb_rate    deliverable rate per allocated PRB, Mbps
    p_sleep     draw when switched off, W
    p_standby   zero-load draw when on, W
    p_load      load-proportional draw when on, W (scaled by PRB utilization)
    """

    carrier: int
    max_prbs: int
    prb_rate: float
    p_sleep: float
    p_standby: float
    p_load: float
    coverage_rank: int

    def __post_init__(self) -> None:
        if not 0 <= self.carrier < N_CARRIERS:
            raise ValueError("carrier out of range")
        if self.max_prbs <= 0:
            raise ValueError("max_prbs must be positive")
        if self.prb_rate <= 0:
            raise ValueError("prb_rate must be positive")
        if self.p_sleep < 0 or self.p_load < 0:
            raise ValueError("power constants must be >= 0")
        if self.p_standby < self.p_sleep:
            raise ValueError("standby draw below sleep draw")


#: Default carrier constants.  Carrier 0 is the wide-coverage layer: smallest
#: bandwidth, highest standby draw.  Higher carriers add capacity at a lower
#: standby cost but a steeper load slope.
DEFAULT_CARRIERS: tuple[CarrierProfile, ...] = (
    CarrierProfile(0, 20, 0.4, 5.0, 130.0, 120.0, 0),
    CarrierProfile(1, 40, 0.8, 5.0, 100.0, 140.0, 1),
    CarrierProfile(2, 40, 0.8, 5.0, 90.0, 150.0, 2),
    CarrierProfile(3, 80, 1.0, 5.0, 85.0, 160.0, 3),
    CarrierProfile(4, 80, 1.0, 5.0, 80.0, 170.0, 4),
)


def default_carriers() -> tuple[CarrierProfile, ...]:
    return DEFAULT_CARRIERS


@dataclass(frozen=True)
class SystemParams:
    """Station-wide scalar constants.

    beta     fraction of p_gamma charged when a cell wakes up
    p_gamma  reference transient power, W
    tau      per-UE throughput threshold defining an uncongested cell, Mbps
    """

    beta: float = 0.3
    p_gamma: float = 162.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.beta < 0 or self.p_gamma < 0:
            raise ValueError("switching constants must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


class Mode(Enum):
    """Action-space flavour: how many carriers the controller may switch."""

    TWO_CELL = "2cell"
    FOUR_CELL = "4cell"

    @property
    def forced_on(self) -> tuple[int, ...]:
        """Switchable-range carriers that this mode keeps on anyway."""
        return (1, 2) if self is Mode.TWO_CELL else ()

    @property
    def switchable(self) -> tuple[int, ...]:
        return (3, 4) if self is Mode.TWO_CELL else (1, 2, 3, 4)

    @classmethod
    def from_label(cls, label: str) -> "Mode":
        for m in cls:
            if m.value == label:
                return m
        raise ValueError(f"unknown mode label {label!r}")


@dataclass(frozen=True)
class OnOffConfig:
    """On/off flag per cell, ordered (sector, carrier).

    Coverage invariant: carrier 0 of every sector is on.
    """

    bits: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != N_CELLS:
            raise ValueError(f"config needs {N_CELLS} bits, got {len(self.bits)}")
        for s in range(N_SECTORS):
            if not self.bits[cell_index(s, 0)]:
                raise ValueError("carrier 0 must stay on in every sector")

    @classmethod
    def all_on(cls) -> "OnOffConfig":
        return cls(tuple(True for _ in range(N_CELLS)))

    def on(self, sector: int, carrier: int) -> bool:
        return self.bits[cell_index(sector, carrier)]

    @property
    def count_on(self) -> int:
        return sum(self.bits)


@dataclass(frozen=True)
class Action:
    """On/off mask over carriers 1..4, applied identically to all sectors."""

    mask: tuple[bool, bool, bool, bool]
    mode: Mode = Mode.FOUR_CELL

    def __post_init__(self) -> None:
        if len(self.mask) != N_MASK_BITS:
            raise ValueError(f"mask needs {N_MASK_BITS} bits")
        for carrier in self.mode.forced_on:
            if not self.mask[carrier - 1]:
                raise ValueError(f"mode {self.mode.value} keeps carrier {carrier} on")

    @property
    def mask_value(self) -> int:
        """Mask read as a binary number, carrier 1 the most significant bit."""
        v = 0
        for bit in self.mask:
            v = (v << 1) | int(bit)
        return v

    @classmethod
    def from_mask_value(cls, value: int, mode: Mode = Mode.FOUR_CELL) -> "Action":
        if not 0 <= value < 2 ** N_MASK_BITS:
            raise ValueError("mask value out of range")
        bits = tuple(bool((value >> (N_MASK_BITS - 1 - i)) & 1) for i in range(N_MASK_BITS))
        return cls(bits, mode)  # type: ignore[arg-type]

    @property
    def cells_off(self) -> int:
        """Station-wide count of cells this action leaves off."""
        return N_SECTORS * sum(1 for b in self.mask if not b)


def action_space(mode: Mode) -> list[Action]:
    """Canonical action ordering: mask value ascending.

    FOUR_CELL enumerates all 16 masks; TWO_CELL the 4 masks with carriers
    1 and 2 held on.
    """
    actions = []
    for value in range(2 ** N_MASK_BITS):
        try:
            actions.append(Action.from_mask_value(value, mode))
        except ValueError:
            continue
    return actions


def apply_action(action: Action) -> OnOffConfig:
    """Configuration produced by replicating the mask over all sectors."""
    per_sector = (True,) + action.mask
    return OnOffConfig(per_sector * N_SECTORS)


@dataclass(frozen=True)
class CellObservation:
    """What one cell reported for one step.

    ue_count        UEs associated to the cell (integer in simulator output;
                    fractional in averaged traffic profiles)
    throughput      delivered rate, Mbps
    allocated_prbs  PRBs granted to the cell's UEs
    on              cell switched on during the step
    delivered       traffic volume over the step, megabytes (throughput * 900 / 8)
    tx_time         transmission time over the step, s (900 when busy, else 0)
    """

    ue_count: float
    throughput: float
    allocated_prbs: float
    on: bool
    delivered: float
    tx_time: float

    def __post_init__(self) -> None:
        if self.ue_count < 0 or self.throughput < 0 or self.allocated_prbs < 0:
            raise ValueError("cell observation fields must be >= 0")
        if self.delivered < 0 or self.tx_time < 0:
            raise ValueError("cell observation fields must be >= 0")


ZERO_CELL = CellObservation(0, 0.0, 0, True, 0.0, 0.0)


@dataclass(frozen=True)
class StationState:
    """Per-step station snapshot: 15 cell observations plus the config."""

    step: int
    cells: tuple[CellObservation, ...]
    config: OnOffConfig

    def __post_init__(self) -> None:
        if len(self.cells) != N_CELLS:
            raise ValueError(f"state needs {N_CELLS} cells")
        if self.step < 0:
            raise ValueError("step must be >= 0")

    def ue_counts(self) -> tuple[float, ...]:
        return tuple(c.ue_count for c in self.cells)


@dataclass(frozen=True)
class StepMetrics:
    """Realized cost components of one step."""

    power: float
    qos: float
    handovers: int


def load_ratio(allocated_prbs: float, max_prbs: int) -> float:
    """PRB utilization in [0, 1]."""
    if max_prbs <= 0:
        raise ValueError("max_prbs must be positive")
    if allocated_prbs < 0 or allocated_prbs > max_prbs:
        raise ValueError("allocated PRBs outside [0, max_prbs]")
    return allocated_prbs / max_prbs


def cell_power(on: bool, load: float, profile: CarrierProfile,
               just_switched_on: bool = False,
               beta: float = 0.0, p_gamma: float = 0.0) -> float:
    """Power draw of one cell for one step, W.

    On:  p_standby + load * p_load, plus beta * p_gamma once when the cell
    has just woken up.  Off: p_sleep.  Going to sleep costs nothing extra.
    """
    if not 0.0 <= load <= 1.0:
        raise ValueError("load must be in [0, 1]")
    if not on:
        return profile.p_sleep
    power = profile.p_standby + load * profile.p_load
    if just_switched_on:
        power += beta * p_gamma
    return power


def switching_cost(prev: OnOffConfig, nxt: OnOffConfig,
                   beta: float, p_gamma: float) -> float:
    """One-off wake-up cost between configs: beta * p_gamma per off->on cell.

    Asymmetric by construction; on->off transitions are free.
    """
    n_wake = sum(1 for p, n in zip(prev.bits, nxt.bits) if n and not p)
    return beta * p_gamma * n_wake


def station_power(state: StationState, prev: OnOffConfig,
                  profiles: Sequence[CarrierProfile],
                  beta: float, p_gamma: float) -> float:
    """Station draw for a step: sum of per-cell draw plus the wake-up cost
    against the previous config.  state.config must reflect the per-cell on
    flags of the observations."""
    total = 0.0
    for s in range(N_SECTORS):
        for j in range(N_CARRIERS):
            obs = state.cells[cell_index(s, j)]
            profile = profiles[j]
            lam = load_ratio(obs.allocated_prbs, profile.max_prbs)
            total += cell_power(obs.on, lam, profile)
    return total + switching_cost(prev, state.config, beta, p_gamma)


def qos_uncongested_pct(cells: Iterable[CellObservation], tau: float) -> float:
    """Share (percent) of busy, on cells whose per-UE throughput clears tau.

    Busy means tx_time > 0.  With no busy cell the step is vacuously fine
    and the share is 100.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    busy = 0
    clear = 0
    for obs in cells:
        if not obs.on or obs.tx_time <= 0 or obs.ue_count <= 0:
            continue
        busy += 1
        if obs.throughput / obs.ue_count >= tau:
            clear += 1
    if busy == 0:
        return 100.0
    return 100.0 * clear / busy


def handover_count(prev_counts: Sequence[float], counts: Sequence[float]) -> int:
    """Handovers inferred from per-cell UE count deltas.

    Half the total absolute delta (each move touches two cells), rounded
    half-up to an integer.
    """
    if len(prev_counts) != len(counts):
        raise ValueError("count vectors must have equal length")
    total = sum(abs(a - b) for a, b in zip(prev_counts, counts))
    return int(math.floor(total / 2.0 + 0.5))
