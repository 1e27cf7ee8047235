"""Experiment harness: config parsing, artifact formats, seed discipline,
the CLI verbs end to end on a miniature experiment, and report layout."""

from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from cellswitch.adp import CostToGoTable, Decision, ActionScore
from cellswitch.errors import ConfigError, MissingArtifact
from cellswitch.harness import cli, pipeline, report
from cellswitch.harness.config import (
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    load_config,
)
from cellswitch.harness.storage import (
    atomic_write_text,
    decision_to_row,
    dumps,
    read_json,
    read_jsonl,
    rows_to_trace,
    scenarios_from_dict,
    scenarios_to_dict,
    table_from_dict,
    table_to_dict,
    trace_to_rows,
    write_json,
    write_jsonl,
)
from cellswitch.netmodel import (
    Action,
    CellObservation,
    DEFAULT_CARRIERS,
    Mode,
    N_CELLS,
    StationState,
    apply_action,
)
from cellswitch.simkernel import (
    STEPS_PER_DAY,
    TraceRecord,
    default_scenarios,
    derive_seed,
)


class TestExperimentConfig:
    def test_defaults_are_valid(self):
        cfg = ExperimentConfig()
        assert cfg.mode == "4cell"
        assert cfg.carrier_profiles() == DEFAULT_CARRIERS
        assert cfg.scenario_path.name == "scenarios.json"

    @pytest.mark.parametrize("kw", [
        dict(schema_version=2),
        dict(scenario_count=0),
        dict(runs=0),
        dict(eval_runs=0),
        dict(stations=0),
        dict(mode="8cell"),
        dict(tau=0.0),
        dict(beta=-0.1),
        dict(q_phi_target=150.0),
        dict(th_deac=0.9, th_ac=0.5),
        dict(rule_window=0),
        dict(epochs=0),
        dict(window=1),
        dict(holdout_fraction=0.0),
        dict(holdout_fraction=1.0),
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_custom_carrier_rows(self):
        rows = tuple(
            {"carrier": j, "max_prbs": 10 * (j + 1), "prb_rate": 1.0,
             "p_sleep": 1.0, "p_standby": 50.0, "p_load": 20.0,
             "coverage_rank": j}
            for j in range(5)
        )
        cfg = ExperimentConfig(carriers=rows)
        profiles = cfg.carrier_profiles()
        assert [p.max_prbs for p in profiles] == [10, 20, 30, 40, 50]

    def test_bad_carrier_rows_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(carriers=({"carrier": 0},))

    def test_derived_objects_carry_config_values(self):
        cfg = ExperimentConfig(beta=0.5, p_gamma=100.0, tau=2.0,
                               q_tau_offline=70.0, mode="2cell")
        params = cfg.system_params()
        assert (params.beta, params.p_gamma, params.tau) == (0.5, 100.0, 2.0)
        ccfg = cfg.controller_config()
        assert ccfg.mode is Mode.TWO_CELL
        assert ccfg.q_tau_offline == 70.0
        assert cfg.controller_config("4cell").mode is Mode.FOUR_CELL

    def test_output_paths_hang_off_out_dir(self):
        cfg = ExperimentConfig(out_dir="/tmp/x")
        assert str(cfg.traces_dir) == "/tmp/x/traces"
        assert str(cfg.models_dir) == "/tmp/x/models"
        assert str(cfg.tables_dir) == "/tmp/x/tables"
        assert str(cfg.results_dir) == "/tmp/x/results"
        assert str(cfg.reports_dir) == "/tmp/x/reports"
        assert str(ExperimentConfig(scenario_file="/s.json").scenario_path) == "/s.json"


class TestConfigIO:
    def test_from_dict_coerces_lists(self):
        cfg = config_from_dict({"theta0_bounds": [81.0, 89.0],
                                "master_seed": 5})
        assert cfg.theta0_bounds == (81.0, 89.0)
        assert cfg.master_seed == 5

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"master_sead": 5})

    def test_from_dict_rejects_non_object(self):
        with pytest.raises(ConfigError):
            config_from_dict(["not", "a", "dict"])

    def test_load_config_none_gives_defaults(self):
        assert load_config(None) == ExperimentConfig()

    def test_load_config_file(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"master_seed": 99, "runs": 2}))
        cfg = load_config(str(p))
        assert cfg.master_seed == 99 and cfg.runs == 2

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(str(tmp_path / "nope.json"))

    def test_load_config_bad_json(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(str(p))

    def test_overrides_skip_none(self):
        cfg = ExperimentConfig()
        assert apply_overrides(cfg, master_seed=None, out_dir=None) is cfg
        out = apply_overrides(cfg, master_seed=7, out_dir="x")
        assert (out.master_seed, out.out_dir) == (7, "x")

    def test_overrides_bad_key(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), nonsense=1)


class TestPrecisionSerialization:
    def test_floats_round_trip_exactly(self):
        values = [1 / 3, math.pi, 1e-300, 6.02214076e23, -0.1,
                  np.nextafter(1.0, 2.0), 2.0]
        for v in values:
            assert json.loads(dumps(v)) == v

    def test_seventeen_significant_digits(self):
        assert dumps(1 / 3) == "0.33333333333333331"
        assert dumps(2.0) == "2"

    def test_non_finite_rejected(self):
        for bad in (float("nan"), float("inf"), float("-inf")):
            with pytest.raises(ValueError, match="non-finite"):
                dumps({"v": bad})

    def test_nested_structures(self):
        obj = {"a": [0.1, {"b": (1 / 7)}], "c": "text", "d": None, "e": True}
        assert json.loads(dumps(obj)) == {"a": [0.1, {"b": 1 / 7}], "c": "text",
                                          "d": None, "e": True}


class TestAtomicArtifacts:
    def test_write_creates_parents_and_cleans_partial(self, tmp_path):
        target = tmp_path / "deep" / "nested" / "file.json"
        atomic_write_text(target, "payload")
        assert target.read_text() == "payload"
        assert list(target.parent.glob("*.partial")) == []

    def test_write_json_read_json(self, tmp_path):
        p = tmp_path / "x.json"
        write_json(p, {"k": 0.25})
        assert read_json(p) == {"k": 0.25}
        assert p.read_text().endswith("\n")

    def test_read_json_missing(self, tmp_path):
        with pytest.raises(MissingArtifact, match="missing artifact"):
            read_json(tmp_path / "absent.json")

    def test_read_json_corrupt(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("{broken")
        with pytest.raises(MissingArtifact, match="unreadable"):
            read_json(p)

    def test_jsonl_round_trip_skips_blank_lines(self, tmp_path):
        p = tmp_path / "rows.jsonl"
        write_jsonl(p, [{"a": 1}, {"b": 2.5}])
        p.write_text(p.read_text() + "\n\n")
        assert read_jsonl(p) == [{"a": 1}, {"b": 2.5}]

    def test_jsonl_bad_line_reports_position(self, tmp_path):
        p = tmp_path / "rows.jsonl"
        p.write_text('{"a": 1}\n{bad\n')
        with pytest.raises(MissingArtifact, match="line 2"):
            read_jsonl(p)


class TestScenarioRoundTrip:
    def test_preserves_every_field(self):
        specs = default_scenarios(20111, 8)
        back = scenarios_from_dict(scenarios_to_dict(specs))
        assert back == list(specs)

    def test_bad_payload(self):
        with pytest.raises(MissingArtifact, match="bad scenario file"):
            scenarios_from_dict({"scenarios": [{"id": 1}]})
        with pytest.raises(MissingArtifact):
            scenarios_from_dict({})


def synthetic_trace():
    """Two records with awkward floats; derived fields obey their relations
    (delivered = tp * 112.5, busy time 900 iff the cell has users)."""
    config = apply_action(Action.from_mask_value(9))
    bits = config.bits
    cells = tuple(
        CellObservation(
            ue_count=float(i % 4),
            throughput=math.pi * i if i % 4 else 0.0,
            allocated_prbs=float(3 * i % 7),
            on=bits[i],
            delivered=(math.pi * i if i % 4 else 0.0) * 112.5,
            tx_time=900.0 if i % 4 else 0.0,
        )
        for i in range(N_CELLS)
    )
    records = []
    for t in (0, 1):
        state = StationState(step=t, cells=cells, config=config)
        records.append(TraceRecord(t, state, Action.from_mask_value(9),
                                   1234.5678901234567 + t, 97.0 + t / 3, 2 + t))
    return records


class TestTraceRoundTrip:
    def test_rows_rebuild_identical_records(self):
        trace = synthetic_trace()
        assert rows_to_trace(trace_to_rows(trace)) == trace

    def test_serialized_rows_after_json_round_trip(self):
        trace = synthetic_trace()
        rows = [json.loads(dumps(r)) for r in trace_to_rows(trace)]
        assert rows_to_trace(rows) == trace

    def test_bad_rows_rejected(self):
        rows = trace_to_rows(synthetic_trace())
        short = dict(rows[0])
        short["ue"] = short["ue"][:-1]
        with pytest.raises(MissingArtifact, match="bad trace row"):
            rows_to_trace([short])
        missing = dict(rows[0])
        del missing["power"]
        with pytest.raises(MissingArtifact):
            rows_to_trace([missing])


class TestTableRoundTrip:
    def make_table(self):
        rng = np.random.default_rng(11)
        n = 4
        values = np.vstack([rng.uniform(0, 500, size=(3, n)), np.zeros((1, n))])
        return CostToGoTable(Mode.TWO_CELL, (12, 13, 14, 15), values,
                             rng.integers(0, n, size=(3, n)),
                             rng.integers(0, 2, size=(3, n)).astype(bool))

    def test_preserves_arrays_exactly(self):
        table = self.make_table()
        obj = json.loads(dumps(table_to_dict(table)))
        back = table_from_dict(obj)
        assert back.mode is table.mode
        assert back.actions == table.actions
        assert np.array_equal(back.values, table.values)
        assert np.array_equal(back.argmin, table.argmin)
        assert np.array_equal(back.infeasible, table.infeasible)

    def test_schema_version_written(self):
        assert table_to_dict(self.make_table())["schema_version"] == 1

    def test_bad_payload(self):
        obj = table_to_dict(self.make_table())
        del obj["J"]
        with pytest.raises(MissingArtifact, match="bad cost-to-go table"):
            table_from_dict(obj)


class TestDecisionRows:
    def test_row_carries_all_score_fields(self):
        score = ActionScore(mask=13, power=100.0, qos=95.5, delta=145.8,
                            ctg=50.0, score=295.8, feasible=True)
        d = Decision(t=3, q_tau=91.0, chosen_mask=13, fallback=False,
                     scores=(score,), h_bar=2.5, q_phi=92.0,
                     theta0=85.0, theta1=1.5)
        row = decision_to_row(d)
        assert row["t"] == 3 and row["action"] == 13 and not row["fallback"]
        assert row["scores"] == [{"action": 13, "power": 100.0, "qos": 95.5,
                                  "delta": 145.8, "ctg": 50.0, "score": 295.8,
                                  "feasible": True}]
        json.loads(dumps(row))  # serializable with finite floats


class TestSeedDiscipline:
    def test_purpose_tags_never_collide(self):
        seen = {}
        for sid in (1, 2, 3):
            for run in (0, 1, 2):
                for tag in range(7):
                    key = derive_seed(20111, sid, run, tag)
                    assert key not in seen, f"collision {seen.get(key)}"
                    seen[key] = (sid, run, tag)

    def test_eval_and_training_streams_differ(self):
        train = {derive_seed(7, sid, run, 0) for sid in range(1, 9) for run in range(64)}
        evals = {derive_seed(7, sid, run, 1) for sid in range(1, 9) for run in range(8)}
        assert not train & evals


@pytest.fixture(scope="module")
def mini(tmp_path_factory):
    """A miniature experiment driven entirely through the CLI."""
    out = tmp_path_factory.mktemp("mini")
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps({
        "out_dir": str(out),
        "master_seed": 424242,
        "scenario_count": 2,
        "runs": 3,
        "eval_runs": 1,
        "epochs": 3,
        "patience": 2,
        "batch_size": 32,
    }))
    args = ["--config", str(cfg_path)]
    assert cli.main(["generate-scenarios"] + args) == 0
    assert cli.main(["collect-data"] + args) == 0
    assert cli.main(["train"] + args) == 0
    assert cli.main(["build-table"] + args) == 0
    for policy in ("noes", "random", "adp"):
        assert cli.main(["run", "--policy", policy] + args) == 0
    assert cli.main(["run", "--policy", "adp", "--mode", "2cell"] + args) == 0
    assert cli.main(["report"] + args) == 0
    return out, cfg_path


def read_summary(path):
    with open(path) as f:
        rows = [r for r in csv.reader(line for line in f if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    return header, body


class TestCliPipeline:
    def test_artifact_layout(self, mini):
        out, _ = mini
        assert (out / "scenarios.json").is_file()
        assert len(list((out / "traces").glob("scenario*_run*.jsonl"))) == 6
        for f in ("power.json", "qos.json", "handover.json", "metrics.json",
                  "training_report.csv"):
            assert (out / "models" / f).is_file()
        assert (out / "tables" / "ctg_2cell.json").is_file()
        assert (out / "tables" / "ctg_4cell.json").is_file()
        for rs in ("noes_4cell", "random_4cell", "adp_4cell", "adp_2cell"):
            traces = [p for p in (out / "results" / rs).glob("scenario*_run*.jsonl")
                      if not p.name.endswith("_decisions.jsonl")]
            assert len(traces) == 2, rs
        assert len(list((out / "results" / "adp_4cell").glob("*_decisions.jsonl"))) == 2

    def test_traces_cover_the_whole_day(self, mini):
        out, _ = mini
        rows = read_jsonl(next(iter((out / "traces").glob("*.jsonl"))))
        assert len(rows) == STEPS_PER_DAY
        assert [r["t"] for r in rows] == list(range(STEPS_PER_DAY))

    def test_collect_is_deterministic_byte_for_byte(self, mini):
        out, cfg_path = mini
        target = out / "traces" / "scenario1_run000.jsonl"
        before = target.read_bytes()
        assert cli.main(["collect-data", "--config", str(cfg_path)]) == 0
        assert target.read_bytes() == before

    def test_report_rerun_is_byte_identical(self, mini):
        out, cfg_path = mini
        summary = out / "reports" / "summary.csv"
        hourly = out / "reports" / "hourly.csv"
        before = (summary.read_bytes(), hourly.read_bytes())
        assert cli.main(["report", "--config", str(cfg_path)]) == 0
        assert (summary.read_bytes(), hourly.read_bytes()) == before

    def test_summary_layout_and_averages(self, mini):
        out, _ = mini
        header, body = read_summary(out / "reports" / "summary.csv")
        assert header == ["algorithm", "metric", "s1", "s2", "avg"]
        by_algo = {}
        for row in body:
            by_algo.setdefault(row[0], []).append(row[1])
        assert set(by_algo) == {"noes_4cell", "random_4cell", "adp_4cell",
                                "adp_2cell"}
        for name, metrics in by_algo.items():
            want = ["power", "qos", "handover"]
            if name != "noes_4cell":
                want.append("power_saving_pct")
            assert metrics == want
        for row in body:
            cells = [float(v) for v in row[2:]]
            assert cells[-1] == pytest.approx(np.mean(cells[:-1]), abs=1e-9)
            if row[1] == "qos":
                assert all(0.0 <= v <= 100.0 for v in cells)

    def test_hourly_layout(self, mini):
        out, _ = mini
        with open(out / "reports" / "hourly.csv") as f:
            rows = [r for r in csv.reader(line for line in f
                                          if not line.startswith("#"))][1:]
        seen = {}
        for name, metric, hour, mean, stderr in rows:
            seen.setdefault((name, metric), []).append(int(hour))
            assert float(stderr) >= 0.0
            if metric == "active_cells":
                assert 3.0 <= float(mean) <= 15.0
        for hours in seen.values():
            assert hours == list(range(24))
        assert {m for _, m in seen} == {"power", "active_cells", "qos"}

    def test_power_saving_relative_to_noes(self, mini):
        out, _ = mini
        _, body = read_summary(out / "reports" / "summary.csv")
        power = {r[0]: [float(v) for v in r[2:-1]] for r in body if r[1] == "power"}
        saving = {r[0]: [float(v) for v in r[2:-1]] for r in body
                  if r[1] == "power_saving_pct"}
        assert "noes_4cell" not in saving
        for name, vals in saving.items():
            for v, p, ref in zip(vals, power[name], power["noes_4cell"]):
                assert v == pytest.approx(100.0 * (1.0 - p / ref), abs=1e-9)


class TestCliErrors:
    def test_missing_config_file(self, tmp_path):
        assert cli.main(["generate-scenarios", "--config",
                         str(tmp_path / "nope.json")]) == cli.EXIT_INVALID

    def test_invalid_config_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{oops")
        assert cli.main(["generate-scenarios", "--config", str(p)]) == cli.EXIT_INVALID

    def test_unknown_config_key(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"master_sead": 1}))
        assert cli.main(["generate-scenarios", "--config", str(p)]) == cli.EXIT_INVALID

    def test_missing_artifacts(self, tmp_path):
        assert cli.main(["train", "--out", str(tmp_path / "empty")]) == cli.EXIT_MISSING
        assert cli.main(["report", "--out", str(tmp_path / "empty")]) == cli.EXIT_MISSING

    def test_run_without_models(self, tmp_path):
        out = tmp_path / "fresh"
        assert cli.main(["generate-scenarios", "--out", str(out)]) == 0
        assert cli.main(["run", "--policy", "adp", "--out", str(out)]) == cli.EXIT_MISSING

    def test_out_dir_blocked_by_file(self, tmp_path):
        block = tmp_path / "blocked"
        block.write_text("in the way")
        assert cli.main(["generate-scenarios", "--out", str(block)]) == cli.EXIT_IO

    def test_unknown_policy_rejected_in_pipeline(self, tmp_path):
        cfg = ExperimentConfig(out_dir=str(tmp_path))
        with pytest.raises(ConfigError, match="unknown policy"):
            pipeline.run_policy(cfg, "genie")


class TestMultiStation:
    def test_station_traces_merge_by_summing(self, tmp_path):
        out = tmp_path / "multi"
        assert cli.main(["generate-scenarios", "--out", str(out),
                         "--count", "1", "--seed", "515"]) == 0
        assert cli.main(["run", "--policy", "noes", "--out", str(out),
                         "--seed", "515", "--stations", "2"]) == 0
        rs = out / "results" / "noes_4cell"
        st0 = read_jsonl(rs / "scenario1_run000_st0.jsonl")
        st1 = read_jsonl(rs / "scenario1_run000_st1.jsonl")
        assert st0 != st1  # stations get distinct seeds
        merged = report._load_result_set(rs)
        episode = merged[1][0]
        assert episode["power"][0] == pytest.approx(
            st0[0]["power"] + st1[0]["power"])
        assert episode["qos"][5] == pytest.approx(
            (st0[5]["qos"] + st1[5]["qos"]) / 2)
        assert episode["handover"].sum() == pytest.approx(
            sum(r["handover"] for r in st0) + sum(r["handover"] for r in st1))
