"""File formats and atomic persistence for every pipeline artifact.

All floats are serialized with 17 significant digits so a parse round-trips
to the exact same double.  Writers stage to a ``.partial`` path and rename
into place, so a crash never leaves a truncated artifact under the real
name.  Readers raise :class:`MissingArtifact` for absent or unparseable
inputs, which the CLI maps to its own exit code.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from ..adp import CostToGoTable, Decision, TABLE_SCHEMA_VERSION
from ..errors import MissingArtifact
from ..netmodel import (
    Action,
    CellObservation,
    Mode,
    N_CELLS,
    OnOffConfig,
    StationState,
)
from ..simkernel import STEP_SECONDS, ScenarioSpec, TraceRecord

SCENARIO_SCHEMA_VERSION = 1


class PrecisionEncoder(json.JSONEncoder):
    """JSON encoder printing floats with 17 significant digits."""

    def iterencode(self, o, _one_shot=False):
        def floatstr(f, _inf=float("inf")):
            if f != f or f == _inf or f == -_inf:
                raise ValueError("non-finite float in artifact")
            return format(f, ".17g")

        markers = {} if self.check_circular else None
        return json.encoder._make_iterencode(
            markers, self.default, json.encoder.encode_basestring_ascii,
            self.indent, floatstr, self.key_separator, self.item_separator,
            self.sort_keys, self.skipkeys, _one_shot)(o, 0)


def dumps(obj) -> str:
    return json.dumps(obj, cls=PrecisionEncoder)


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    staged = path.with_name(path.name + ".partial")
    staged.write_text(text)
    os.replace(staged, path)


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, dumps(obj) + "\n")


def write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    atomic_write_text(path, "".join(dumps(r) + "\n" for r in rows))


def read_json(path: Path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise MissingArtifact(f"missing artifact: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MissingArtifact(f"unreadable artifact: {path}: {exc}") from exc


def read_jsonl(path: Path) -> List[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise MissingArtifact(f"missing artifact: {path}") from exc
    rows = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise MissingArtifact(f"unreadable artifact: {path} line {i + 1}: {exc}") from exc
    return rows


# ---------------------------------------------------------------------------
# Scenarios

def scenarios_to_dict(specs: Sequence[ScenarioSpec]) -> dict:
    return {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "scenarios": [
            {
                "id": s.id,
                "base_ue": s.base_ue,
                "peak_amp": s.peak_amp,
                "peak_hours": list(s.peak_hours),
                "peak_width": s.peak_width,
                "noise_sd": s.noise_sd,
                "demand_mean": s.demand_mean,
                "demand_sd": s.demand_sd,
                "seed": s.seed,
            }
            for s in specs
        ],
    }


def scenarios_from_dict(obj: dict) -> List[ScenarioSpec]:
    try:
        rows = obj["scenarios"]
        return [
            ScenarioSpec(
                id=int(r["id"]),
                base_ue=float(r["base_ue"]),
                peak_amp=float(r["peak_amp"]),
                peak_hours=tuple(float(h) for h in r["peak_hours"]),
                peak_width=float(r["peak_width"]),
                noise_sd=float(r["noise_sd"]),
                demand_mean=float(r["demand_mean"]),
                demand_sd=float(r["demand_sd"]),
                seed=int(r["seed"]),
            )
            for r in rows
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise MissingArtifact(f"bad scenario file: {exc}") from exc


# ---------------------------------------------------------------------------
# Traces

def trace_to_rows(trace: Sequence[TraceRecord]) -> List[dict]:
    rows = []
    for rec in trace:
        cells = rec.state.cells
        rows.append({
            "t": rec.t,
            "ue": [c.ue_count for c in cells],
            "tp": [c.throughput for c in cells],
            "prb": [c.allocated_prbs for c in cells],
            "e": [1 if b else 0 for b in rec.state.config.bits],
            "action": rec.action.mask_value,
            "power": rec.power,
            "qos": rec.qos,
            "handover": rec.handovers,
        })
    return rows


def rows_to_trace(rows: Sequence[dict]) -> List[TraceRecord]:
    """Rebuild a trace.  Delivered volume and busy time are recomputed from
    throughput and UE counts (they are exact functions of them); actions are
    rebuilt in the wide mode, which admits every legal mask."""
    out = []
    try:
        for r in rows:
            ue, tp, prb = r["ue"], r["tp"], r["prb"]
            bits = tuple(bool(b) for b in r["e"])
            if not (len(ue) == len(tp) == len(prb) == len(bits) == N_CELLS):
                raise ValueError("bad per-cell array length")
            cells = tuple(
                CellObservation(
                    ue_count=float(ue[i]),
                    throughput=float(tp[i]),
                    allocated_prbs=float(prb[i]),
                    on=bits[i],
                    delivered=float(tp[i]) * STEP_SECONDS / 8.0,
                    tx_time=STEP_SECONDS if float(ue[i]) > 0 else 0.0,
                )
                for i in range(N_CELLS)
            )
            state = StationState(step=int(r["t"]), cells=cells,
                                 config=OnOffConfig(bits=bits))
            action = Action.from_mask_value(int(r["action"]), Mode.FOUR_CELL)
            out.append(TraceRecord(int(r["t"]), state, action,
                                   float(r["power"]), float(r["qos"]),
                                   int(r["handover"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise MissingArtifact(f"bad trace row: {exc}") from exc
    return out


def write_trace(path: Path, trace: Sequence[TraceRecord]) -> None:
    write_jsonl(path, trace_to_rows(trace))


def read_trace(path: Path) -> List[TraceRecord]:
    return rows_to_trace(read_jsonl(path))


# ---------------------------------------------------------------------------
# Cost-to-go tables

def table_to_dict(table: CostToGoTable) -> dict:
    return {
        "schema_version": TABLE_SCHEMA_VERSION,
        "mode": table.mode.value,
        "T": table.horizon,
        "actions": list(table.actions),
        "J": [[float(v) for v in row] for row in table.values],
        "argmin": [[int(v) for v in row] for row in table.argmin],
        "infeasible_flags": [[bool(v) for v in row] for row in table.infeasible],
    }


def table_from_dict(obj: dict) -> CostToGoTable:
    try:
        return CostToGoTable(
            mode=Mode.from_label(obj["mode"]),
            actions=tuple(int(a) for a in obj["actions"]),
            values=np.array(obj["J"], dtype=float),
            argmin=np.array(obj["argmin"], dtype=int),
            infeasible=np.array(obj["infeasible_flags"], dtype=bool),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MissingArtifact(f"bad cost-to-go table: {exc}") from exc


# ---------------------------------------------------------------------------
# Decision logs

def decision_to_row(d: Decision) -> dict:
    return {
        "t": d.t,
        "q_tau": d.q_tau,
        "action": d.chosen_mask,
        "fallback": d.fallback,
        "h_bar": d.h_bar,
        "q_phi": d.q_phi,
        "theta0": d.theta0,
        "theta1": d.theta1,
        "scores": [
            {
                "action": s.mask,
                "power": s.power,
                "qos": s.qos,
                "delta": s.delta,
                "ctg": s.ctg,
                "score": s.score,
                "feasible": s.feasible,
            }
            for s in d.scores
        ],
    }


def write_decisions(path: Path, decisions: Sequence[Decision]) -> None:
    write_jsonl(path, [decision_to_row(d) for d in decisions])
