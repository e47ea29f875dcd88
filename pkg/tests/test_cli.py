"""Command-line interface: subcommands, env fallbacks, exit codes."""

import json

import pytest

from conftest import FIXTURES

from handover_sim.cli import build_parser, main
from handover_sim.runlog import read_run_log, read_trajectory_export

STATIONARY = str(FIXTURES / "stationary_hand.yaml")
UNREACHABLE = str(FIXTURES / "unreachable_hand.yaml")


class TestRun:
    def test_happy_path(self, capsys):
        code = main(["run", "--scenario", STATIONARY, "--mode", "adaptive"])
        assert code == 0
        out = capsys.readouterr().out
        assert "scenario=stationary_hand" in out
        assert "state=done" in out
        assert "exit=0" in out

    def test_fault_exit_code(self, capsys):
        code = main(["run", "--scenario", UNREACHABLE, "--mode", "adaptive"])
        assert code == 1
        assert "state=fault" in capsys.readouterr().out

    def test_writes_log(self, tmp_path, capsys):
        out = tmp_path / "log.json"
        code = main(["run", "--scenario", STATIONARY, "--out", str(out)])
        assert code == 0
        log = read_run_log(out)
        assert log.header["scenario_id"] == "stationary_hand"

    def test_seed_flag(self, tmp_path, capsys):
        out = tmp_path / "log.json"
        main(["run", "--scenario", STATIONARY, "--seed", "777", "--out", str(out)])
        assert read_run_log(out).header["seed"] == 777

    def test_override_flag(self, tmp_path, capsys):
        out = tmp_path / "log.json"
        main(
            [
                "run",
                "--scenario",
                STATIONARY,
                "--override",
                "planner.min_duration=3.0",
                "--out",
                str(out),
            ]
        )
        assert read_run_log(out).metrics.duration_T == 3.0

    def test_missing_scenario_is_usage_error(self, capsys, monkeypatch):
        monkeypatch.delenv("HANDOVER_SIM_SCENARIO", raising=False)
        code = main(["run"])
        assert code == 2
        assert "scenario is required" in capsys.readouterr().err

    def test_bad_seed_is_usage_error(self, capsys):
        code = main(["run", "--scenario", STATIONARY, "--seed", "lots"])
        assert code == 2
        assert "seed" in capsys.readouterr().err

    def test_env_fallbacks(self, tmp_path, capsys, monkeypatch):
        out = tmp_path / "log.json"
        monkeypatch.setenv("HANDOVER_SIM_SCENARIO", STATIONARY)
        monkeypatch.setenv("HANDOVER_SIM_SEED", "31")
        monkeypatch.setenv("HANDOVER_SIM_OUT", str(out))
        code = main(["run"])
        assert code == 0
        assert read_run_log(out).header["seed"] == 31


class TestCompare:
    def test_prints_both_modes(self, capsys):
        code = main(["compare", "--scenario", STATIONARY])
        assert code == 0
        out = capsys.readouterr().out
        assert "static:" in out and "adaptive:" in out
        assert "deltas" in out

    def test_mixed_exit_code(self, capsys):
        assert main(["compare", "--scenario", UNREACHABLE]) == 1

    def test_writes_report(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        main(["compare", "--scenario", STATIONARY, "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["scenario_id"] == "stationary_hand"
        assert doc["summary"]["exit_codes"] == {"static": 0, "adaptive": 0}


class TestExport:
    def test_from_scenario(self, tmp_path, capsys):
        out = tmp_path / "traj.csv"
        code = main(["export", "--scenario", STATIONARY, "--out", str(out)])
        assert code == 0
        rows = read_trajectory_export(out)
        assert rows and rows[-1].s == 1.0
        assert "wrote" in capsys.readouterr().out

    def test_from_saved_log(self, tmp_path, capsys):
        log_path = tmp_path / "log.json"
        main(["run", "--scenario", STATIONARY, "--out", str(log_path)])
        out = tmp_path / "traj.json"
        code = main(["export", "--log", str(log_path), "--format", "json", "--out", str(out)])
        assert code == 0
        assert read_trajectory_export(out)

    def test_fault_run_exports_header_only(self, tmp_path, capsys):
        out = tmp_path / "traj.csv"
        code = main(["export", "--scenario", UNREACHABLE, "--mode", "adaptive", "--out", str(out)])
        assert code == 1
        assert read_trajectory_export(out) == []

    def test_out_required(self, capsys, monkeypatch):
        monkeypatch.delenv("HANDOVER_SIM_OUT", raising=False)
        with pytest.raises(SystemExit):
            main(["export", "--scenario", STATIONARY])


class TestValidate:
    def test_valid_file(self, capsys):
        code = main(["validate-config", "--scenario", STATIONARY])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("ok: stationary_hand digest=")
        digest = out.strip().rsplit("=", 1)[1]
        assert len(digest) == 64

    def test_broken_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("id: broken\ntask: mug_juggle\n", encoding="utf-8")
        code = main(["validate-config", "--scenario", str(bad)])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        code = main(["validate-config", "--scenario", "/no/such/file.yaml"])
        assert code == 2


class TestRemote:
    """--url drives the same commands through the HTTP API."""

    @pytest.fixture(autouse=True)
    def fake_service(self, monkeypatch):
        from fastapi.testclient import TestClient

        from handover_sim.service.app import create_app

        test_client = TestClient(create_app())

        def fake_post(url, json=None, timeout=None):
            route = url.replace("http://svc", "", 1)
            return test_client.post(route, json=json)

        import httpx

        monkeypatch.setattr(httpx, "post", fake_post)

    def test_remote_run(self, tmp_path, capsys):
        out = tmp_path / "log.json"
        code = main(
            ["run", "--scenario", STATIONARY, "--url", "http://svc", "--out", str(out)]
        )
        assert code == 0
        assert read_run_log(out).header["scenario_id"] == "stationary_hand"
        assert "state=done" in capsys.readouterr().out

    def test_remote_compare(self, capsys):
        assert main(["compare", "--scenario", STATIONARY, "--url", "http://svc"]) == 0

    def test_remote_validate(self, capsys):
        code = main(["validate-config", "--scenario", STATIONARY, "--url", "http://svc"])
        assert code == 0
        assert "digest=" in capsys.readouterr().out


class TestParser:
    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["explode"])
