import json
import os

import pytest
from click.testing import CliRunner

from valuevac.gateway.cli import main as cli_main
from valuevac.gateway.config import ConfigError, load_config
from valuevac.gateway.logstore import JsonlLogStore, LogRecord, LogWriteError, RecordLog, read_log
from valuevac.harness.scenario import data_path


def write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return str(path)


PLAN = data_path("living_room.json")


class TestLoadConfig:
    def test_minimal_mock_config_gets_cadence_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, f"backend:\n  kind: mock\nfloorplan: {PLAN}\n"))
        assert cfg.backend.kind == "mock"
        assert cfg.cadence.sweep_frames == 10
        assert cfg.cadence.sweep_interval == 1.0
        assert cfg.cadence.sweep_span == 180.0
        assert cfg.cadence.burst_frames == 3
        assert cfg.cadence.burst_interval == 0.5
        assert cfg.speeds.cruise == 0.3
        assert cfg.listen_port == 8750

    def test_cruise_below_slow_rejected(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(
                write_config(
                    tmp_path,
                    f"floorplan: {PLAN}\nspeeds:\n  cruise: 0.05\n  slow: 0.1\n",
                )
            )
        assert any("speeds" in v for v in err.value.violations)

    def test_remote_requires_credential_env(self, tmp_path, monkeypatch):
        monkeypatch.delenv("MY_KEY", raising=False)
        with pytest.raises(ConfigError) as err:
            load_config(
                write_config(
                    tmp_path,
                    "backend:\n  kind: remote\n  endpoint: https://x/v1/chat/completions\n"
                    f"  credential_env: MY_KEY\nfloorplan: {PLAN}\n",
                )
            )
        assert any("MY_KEY" in v for v in err.value.violations)
        monkeypatch.setenv("MY_KEY", "token")
        cfg = load_config(
            write_config(
                tmp_path,
                "backend:\n  kind: remote\n  endpoint: https://x/v1/chat/completions\n"
                f"  credential_env: MY_KEY\nfloorplan: {PLAN}\n",
            )
        )
        assert cfg.backend.credential() == "token"

    def test_all_violations_reported_at_once(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(
                write_config(
                    tmp_path,
                    "floorplan: /missing/plan.json\n"
                    "listen: not-an-address\n"
                    "clock_acceleration: -3\n"
                    "speeds:\n  cruise: 0.01\n  slow: 0.2\n",
                )
            )
        text = str(err.value)
        assert "floorplan" in text
        assert "listen" in text
        assert "clock_acceleration" in text
        assert "speeds" in text

    def test_unknown_keys_warn(self, tmp_path):
        with pytest.warns(UserWarning, match="unknown key"):
            load_config(
                write_config(tmp_path, f"floorplan: {PLAN}\nshiny_new_toggle: true\n")
            )

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/no/such/config.yaml")


class TestLogStore:
    def test_append_assigns_sequential_ids(self, tmp_path):
        store = JsonlLogStore(str(tmp_path / "log.jsonl"))
        a = store.append("event", {"event": "x"}, 0.0, "09:00")
        b = store.append("event", {"event": "y"}, 0.1, "09:00")
        assert (a.id, b.id) == (1, 2)

    def test_restart_continues_ids(self, tmp_path):
        path = str(tmp_path / "log.jsonl")
        store = JsonlLogStore(path)
        store.append("event", {"event": "x"}, 0.0, "09:00")
        store.append("event", {"event": "y"}, 0.1, "09:00")
        store.close()
        revived = JsonlLogStore(path)
        c = revived.append("event", {"event": "z"}, 0.2, "09:00")
        assert c.id == 3
        assert [r.id for r in read_log(path)] == [1, 2, 3]

    def test_ten_thousand_appends_line_count_equals_max_id(self, tmp_path):
        path = str(tmp_path / "log.jsonl")
        store = JsonlLogStore(path)
        for i in range(10_000):
            store.append("event", {"event": "tick", "i": i}, i * 0.05, "09:00")
        store.close()
        # DERIVED oracle: line count equals the final id, ids have no gaps
        with open(path) as fh:
            lines = [line for line in fh if line.strip()]
        assert len(lines) == 10_000
        records = [LogRecord.from_json(line) for line in lines]
        assert records[-1].id == 10_000
        assert [r.id for r in records] == list(range(1, 10_001))

    def test_write_failure_raises_logwriteerror(self, tmp_path):
        store = JsonlLogStore(str(tmp_path / "log.jsonl"))
        store._fh.close()  # simulate disk loss
        with pytest.raises(LogWriteError):
            store.append("event", {"event": "x"}, 0.0, "09:00")

    def test_record_json_roundtrip(self):
        rec = LogRecord(id=5, sim_time=1.25, wall_clock="10:00", kind="event",
                        payload={"event": "x", "n": 2})
        assert LogRecord.from_json(rec.to_json()) == rec

    def test_memory_log_kinds_validated(self):
        log = RecordLog()
        with pytest.raises(ValueError):
            log.append("bogus", {}, 0.0, "09:00")


class TestCli:
    def test_run_phone_user_prints_clean(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["run", "--scenario", "phone_user"])
        assert result.exit_code == 0, result.output
        assert "CLEAN" in result.output

    def test_run_writes_log(self, tmp_path):
        out = tmp_path / "run.jsonl"
        result = CliRunner().invoke(
            cli_main, ["run", "--scenario", "empty_room", "--log", str(out)]
        )
        assert result.exit_code == 0
        assert out.exists() and out.read_text().strip()

    def test_run_expectation_failure_exits_one(self, tmp_path):
        scenario = tmp_path / "s.yaml"
        scenario.write_text(
            f"name: s\nfloorplan: {PLAN}\nuntil: 12.0\n"
            "robot:\n  at: [3.0, 1.2, 300.0]\nexpected: DOCK\n"
        )
        result = CliRunner().invoke(cli_main, ["run", "--scenario", str(scenario)])
        assert result.exit_code == 1
        assert "EXPECTATION FAILED" in result.output

    def test_run_without_scenario_is_usage_error(self):
        result = CliRunner().invoke(cli_main, ["run"])
        assert result.exit_code == 2

    def test_unknown_flag_is_usage_error(self):
        result = CliRunner().invoke(cli_main, ["run", "--scenario", "empty_room", "--bogus"])
        assert result.exit_code == 2

    def test_unknown_scenario_is_usage_error(self):
        result = CliRunner().invoke(cli_main, ["run", "--scenario", "no_such_scenario"])
        assert result.exit_code == 2

    def test_eval_movie_night_agreement_one(self):
        result = CliRunner().invoke(
            cli_main,
            ["eval", "--scenario", "movie_night", "--trials", "5", "--parallel", "4", "--json"],
        )
        assert result.exit_code == 0, result.output
        assert "agreement_rate  1.000" in result.output
        payload = json.loads(result.output[result.output.index("{"):])
        assert payload["histogram"] == {"WAIT": 5}

    def test_replay_accepts_generated_log(self, tmp_path):
        out = tmp_path / "run.jsonl"
        CliRunner().invoke(cli_main, ["run", "--scenario", "pet_dog", "--log", str(out)])
        result = CliRunner().invoke(cli_main, ["replay", "--log", str(out)])
        assert result.exit_code == 0, result.output
        assert "self-consistent" in result.output

    def test_replay_rejects_tampered_log(self, tmp_path):
        out = tmp_path / "run.jsonl"
        CliRunner().invoke(cli_main, ["run", "--scenario", "pet_dog", "--log", str(out)])
        lines = out.read_text().splitlines()
        for i, line in enumerate(lines):
            rec = json.loads(line)
            if rec["kind"] == "decision" and rec["payload"]["decision"]["token"] == "CLEAN":
                rec["payload"]["decision"]["token"] = "WAIT"
                lines[i] = json.dumps(rec)
                break
        out.write_text("\n".join(lines) + "\n")
        result = CliRunner().invoke(cli_main, ["replay", "--log", str(out)])
        assert result.exit_code == 1
        assert "integrity" in result.output.lower()

    def test_serve_rejects_bad_config(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("floorplan: /missing.json\n")
        result = CliRunner().invoke(cli_main, ["serve", "--config", str(cfg)])
        assert result.exit_code == 1
        assert "floorplan" in result.output
