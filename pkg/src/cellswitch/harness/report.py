"""Result aggregation: the summary table and hourly plot-data series.

Reported power is the episode mean station draw in watts (summed across
stations in multi-station runs), QoS the episode mean percentage, and
handover the episode total count; per scenario these are averaged over
evaluation runs.  Power saving compares each algorithm to the always-on
reference of the same mode.
"""

from __future__ import annotations

import csv
import io
import re
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import MissingArtifact
from ..netmodel import N_SECTORS
from ..simkernel import STEPS_PER_HOUR
from .config import ExperimentConfig
from .storage import atomic_write_text, read_jsonl

_TRACE_NAME = re.compile(r"scenario(\d+)_run(\d+)(?:_st(\d+))?\.jsonl$")

HOURLY_METRICS = ("power", "active_cells", "qos")


def _active_cells(mask: int) -> int:
    return N_SECTORS * (1 + bin(mask).count("1"))


def _episode_arrays(rows: Sequence[dict]) -> Dict[str, np.ndarray]:
    return {
        "power": np.array([float(r["power"]) for r in rows]),
        "qos": np.array([float(r["qos"]) for r in rows]),
        "handover": np.array([float(r["handover"]) for r in rows]),
        "active_cells": np.array([float(_active_cells(int(r["action"]))) for r in rows]),
    }


def _merge_stations(parts: Sequence[Dict[str, np.ndarray]]) -> Dict[str, np.ndarray]:
    """Across stations: powers, handovers, and cell counts add; QoS averages."""
    merged = {}
    for key in ("power", "handover", "active_cells"):
        merged[key] = np.sum([p[key] for p in parts], axis=0)
    merged["qos"] = np.mean([p["qos"] for p in parts], axis=0)
    return merged


def _load_result_set(path: Path) -> Dict[int, List[Dict[str, np.ndarray]]]:
    """scenario id -> one merged per-step array bundle per evaluation run."""
    groups: Dict[Tuple[int, int], dict] = defaultdict(dict)
    for f in sorted(path.iterdir()):
        m = _TRACE_NAME.search(f.name)
        if m is None:
            continue
        sid, run = int(m.group(1)), int(m.group(2))
        station = int(m.group(3)) if m.group(3) is not None else 0
        groups[(sid, run)][station] = _episode_arrays(read_jsonl(f))
    if not groups:
        raise MissingArtifact(f"result set {path} holds no traces")
    by_scenario: Dict[int, List[Dict[str, np.ndarray]]] = defaultdict(list)
    for (sid, run) in sorted(groups):
        stations = groups[(sid, run)]
        parts = [stations[k] for k in sorted(stations)]
        by_scenario[sid].append(_merge_stations(parts))
    return dict(by_scenario)


def _scenario_summary(episodes: List[Dict[str, np.ndarray]]) -> Dict[str, float]:
    """Run-averaged episode metrics for one scenario."""
    power = float(np.mean([ep["power"].mean() for ep in episodes]))
    qos = float(np.mean([ep["qos"].mean() for ep in episodes]))
    handover = float(np.mean([ep["handover"].sum() for ep in episodes]))
    return {"power": power, "qos": qos, "handover": handover}


def _hourly_profile(episodes: List[Dict[str, np.ndarray]], key: str) -> np.ndarray:
    """Run-averaged per-hour means for one scenario (24 values)."""
    per_run = []
    for ep in episodes:
        series = ep[key]
        hours = series.reshape(-1, STEPS_PER_HOUR).mean(axis=1)
        per_run.append(hours)
    return np.mean(per_run, axis=0)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _noes_reference(names: Sequence[str], name: str) -> str | None:
    mode = name.rsplit("_", 1)[-1]
    if f"noes_{mode}" in names:
        return f"noes_{mode}"
    for cand in sorted(names):
        if cand.startswith("noes_"):
            return cand
    return None


def write_report(cfg: ExperimentConfig) -> List[Path]:
    """Emit summary.csv and hourly.csv from every result set on disk."""
    if not cfg.results_dir.is_dir():
        raise MissingArtifact(f"no results directory: {cfg.results_dir}")
    sets = sorted(p.name for p in cfg.results_dir.iterdir() if p.is_dir())
    if not sets:
        raise MissingArtifact(f"no result sets under {cfg.results_dir}")
    data = {name: _load_result_set(cfg.results_dir / name) for name in sets}

    scenario_ids = sorted({sid for d in data.values() for sid in d})
    summaries = {
        name: {sid: _scenario_summary(eps) for sid, eps in d.items()}
        for name, d in data.items()
    }

    buf = io.StringIO()
    buf.write("# power: episode-mean station watts (stations summed); "
              "qos: episode-mean percent; handover: episode-total count; "
              "power_saving_pct: 100*(1 - power/power[noes]); "
              "avg: arithmetic mean over scenario columns\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algorithm", "metric"] + [f"s{sid}" for sid in scenario_ids] + ["avg"])
    for name in sets:
        for metric in ("power", "qos", "handover"):
            cells = [summaries[name][sid][metric] for sid in scenario_ids
                     if sid in summaries[name]]
            row = [_fmt(summaries[name][sid][metric]) if sid in summaries[name] else ""
                   for sid in scenario_ids]
            writer.writerow([name, metric] + row + [_fmt(np.mean(cells))])
        ref = _noes_reference(sets, name)
        if ref is None or ref == name:
            continue
        savings = []
        row = []
        for sid in scenario_ids:
            if sid in summaries[name] and sid in summaries[ref]:
                s = 100.0 * (1.0 - summaries[name][sid]["power"] / summaries[ref][sid]["power"])
                savings.append(s)
                row.append(_fmt(s))
            else:
                row.append("")
        writer.writerow([name, "power_saving_pct"] + row + [_fmt(np.mean(savings))])
    summary_path = cfg.reports_dir / "summary.csv"
    atomic_write_text(summary_path, buf.getvalue())

    buf = io.StringIO()
    buf.write("# hourly means with standard errors across scenarios; "
              "power: station watts (stations summed); active_cells: cells on; "
              "qos: percent\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algorithm", "metric", "hour", "mean", "stderr"])
    for name in sets:
        for metric in HOURLY_METRICS:
            profiles = np.stack([
                _hourly_profile(data[name][sid], metric)
                for sid in scenario_ids if sid in data[name]
            ])
            mean = profiles.mean(axis=0)
            n = profiles.shape[0]
            stderr = (profiles.std(axis=0, ddof=1) / np.sqrt(n)) if n > 1 \
                else np.zeros(mean.shape)
            for hour in range(mean.shape[0]):
                writer.writerow([name, metric, hour,
                                 _fmt(mean[hour]), _fmt(stderr[hour])])
    hourly_path = cfg.reports_dir / "hourly.csv"
    atomic_write_text(hourly_path, buf.getvalue())
    return [summary_path, hourly_path]
