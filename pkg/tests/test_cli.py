import json
import math
import subprocess
import sys

import pytest

from formsim.cli import main

SQUARE = {
    "edges": [[0, 1], [1, 2], [1, 3], [0, 3], [2, 3]],
    "distances": [1.0, 1.0, math.sqrt(2.0), 1.0, 1.0],
    "reference_positions": [[0, 0], [1, 0], [1, 1], [0, 1]],
}


@pytest.fixture
def quick_scenario(tmp_path):
    doc = {
        "name": "quick",
        "seed": 4,
        "shape": SQUARE,
        "lidar": {"accuracy_fraction": 0.0, "angular_resolution": 0.0,
                  "spike_probability": 0.0},
        "actuator": {"deadband_speed": 0.0},
        "sim": {"dt": 0.2, "duration": 4.0},
    }
    path = tmp_path / "quick.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def flexible_scenario(tmp_path):
    doc = {
        "name": "flex",
        "shape": {
            "edges": [[0, 1], [1, 2], [2, 3], [0, 3]],
            "distances": [1.0, 1.0, 1.0, 1.0],
            "reference_positions": [[0, 0], [1, 0], [1, 1], [0, 1]],
        },
    }
    path = tmp_path / "flex.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestRun:
    def test_run_writes_log_and_metrics(self, quick_scenario, tmp_path, capsys):
        log = tmp_path / "out.csv"
        code = main(["run", "--scenario", quick_scenario, "--log", str(log)])
        assert code == 0
        out = capsys.readouterr().out
        assert "settling" in out
        assert log.exists()

    def test_duration_zero_writes_header_only(self, quick_scenario, tmp_path, capsys):
        log = tmp_path / "zero.csv"
        code = main(["run", "--scenario", quick_scenario, "--log", str(log),
                     "--duration", "0"])
        assert code == 0
        assert len(log.read_text().splitlines()) == 2
        assert "no ticks" in capsys.readouterr().out

    def test_same_seed_gives_byte_identical_logs(self, tmp_path, capsys):
        log_a = tmp_path / "a.csv"
        log_b = tmp_path / "b.csv"
        for log in (log_a, log_b):
            code = main(["run", "--scenario", "square-1m-biased", "--log", str(log),
                         "--duration", "20"])
            assert code == 0
        assert log_a.read_bytes() == log_b.read_bytes()

    def test_seed_override_changes_noisy_log(self, tmp_path, capsys):
        log_a = tmp_path / "a.csv"
        log_b = tmp_path / "b.csv"
        main(["run", "--scenario", "square-1m-biased", "--log", str(log_a),
              "--duration", "10"])
        main(["run", "--scenario", "square-1m-biased", "--log", str(log_b),
              "--duration", "10", "--seed", "1234"])
        assert log_a.read_bytes() != log_b.read_bytes()

    def test_invalid_scenario_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert main(["run", "--scenario", str(bad)]) == 2

    def test_broken_formation_exits_3(self, tmp_path, capsys):
        doc = {
            "name": "broken",
            "shape": SQUARE,
            "lidar": {"max_range": 1.2},
            "sim": {"duration": 2.0},
        }
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(doc))
        assert main(["run", "--scenario", str(path)]) == 3

    def test_json_metrics(self, quick_scenario, capsys):
        code = main(["run", "--scenario", quick_scenario, "--json"])
        assert code == 0
        data = json.loads(capsys.readouterr().out)
        assert "centroid_displacement_m" in data


class TestCheckRigidity:
    def test_square_is_rigid_exit_0(self, capsys):
        code = main(["check-rigidity", "--scenario", "square-1m"])
        assert code == 0
        out = capsys.readouterr().out
        assert "infinitesimally-rigid" in out
        assert "rank:  5" in out

    def test_flexible_exits_1(self, flexible_scenario, capsys):
        code = main(["check-rigidity", "--scenario", flexible_scenario])
        assert code == 1
        assert "flexible" in capsys.readouterr().out

    def test_collinear_exits_1(self, tmp_path, capsys):
        doc = {
            "name": "line",
            "shape": {
                "edges": [[0, 1], [1, 2]],
                "distances": [1.0, 1.0],
                "reference_positions": [[0, 0], [1, 0], [2, 0]],
            },
        }
        path = tmp_path / "line.json"
        path.write_text(json.dumps(doc))
        code = main(["check-rigidity", "--scenario", str(path)])
        assert code == 1
        assert "degenerate-collinear" in capsys.readouterr().out

    def test_missing_scenario_exits_2(self, capsys):
        assert main(["check-rigidity", "--scenario", "/nonexistent.json"]) == 2


class TestSolveMotion:
    @staticmethod
    def parse_table(out):
        sigmas, residuals = [], []
        for line in out.splitlines():
            tokens = line.split()
            if len(tokens) == 3 and tokens[0].isdigit() and tokens[1].isdigit():
                sigmas.append(float(tokens[2]))
            elif len(tokens) == 2 and tokens[0].isdigit():
                residuals.append(float(tokens[1]))
        return sigmas, residuals

    def test_zero_command_zero_table(self, quick_scenario, capsys):
        code = main(["solve-motion", "--scenario", quick_scenario])
        assert code == 0
        sigmas, residuals = self.parse_table(capsys.readouterr().out)
        assert len(sigmas) == 10  # one row per (robot, incident edge)
        assert all(s == 0.0 for s in sigmas)
        assert len(residuals) == 4

    def test_translation_residuals_small(self, quick_scenario, capsys):
        code = main(["solve-motion", "--scenario", quick_scenario, "--vx", "0.1"])
        assert code == 0
        sigmas, residuals = self.parse_table(capsys.readouterr().out)
        assert any(s != 0.0 for s in sigmas)
        assert len(residuals) == 4 and all(r < 1e-9 for r in residuals)

    def test_flexible_shape_exits_4(self, flexible_scenario, capsys):
        code = main(["solve-motion", "--scenario", flexible_scenario, "--vx", "0.1"])
        assert code == 4

    def test_unrealizable_command_exits_4(self, tmp_path, capsys):
        doc = {
            "name": "pair",
            "shape": {
                "edges": [[0, 1]],
                "distances": [1.0],
                "reference_positions": [[0, 0], [1, 0]],
            },
        }
        path = tmp_path / "pair.json"
        path.write_text(json.dumps(doc))
        assert main(["solve-motion", "--scenario", str(path), "--vy", "0.1"]) == 4


class TestMetricsCommand:
    def test_metrics_from_log(self, quick_scenario, tmp_path, capsys):
        log = tmp_path / "m.csv"
        main(["run", "--scenario", quick_scenario, "--log", str(log)])
        capsys.readouterr()
        code = main(["metrics", "--log", str(log)])
        assert code == 0
        assert "settling" in capsys.readouterr().out

    def test_bad_log_exits_2(self, tmp_path, capsys):
        path = tmp_path / "junk.csv"
        path.write_text("nope\n")
        assert main(["metrics", "--log", str(path)]) == 2


class TestParser:
    def test_unknown_flag_rejected_with_usage(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["run", "--scenario", "x", "--bogus"])
        assert excinfo.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_subcommand_required(self, capsys):
        with pytest.raises(SystemExit):
            main([])

    def test_console_script_smoke(self):
        proc = subprocess.run(
            [sys.executable, "-m", "formsim.cli", "check-rigidity",
             "--scenario", "square-1m"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "infinitesimally-rigid" in proc.stdout


class TestReplay:
    def test_replay_streams_stored_log(self, quick_scenario, tmp_path):
        import socket
        import time

        from websockets.sync.client import connect as ws_connect

        log = tmp_path / "replay.csv"
        assert main(["run", "--scenario", quick_scenario, "--log", str(log)]) == 0

        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        proc = subprocess.Popen(
            [sys.executable, "-m", "formsim.cli", "replay", "--log", str(log),
             "--port", str(port), "--speed", "2"],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        try:
            deadline = time.monotonic() + 10.0
            ws = None
            while ws is None:
                try:
                    ws = ws_connect(f"ws://127.0.0.1:{port}")
                except OSError:
                    if time.monotonic() > deadline:
                        raise
                    time.sleep(0.1)
            with ws:
                hello = json.loads(ws.recv(timeout=5))
                assert hello["type"] == "hello"
                snap = json.loads(ws.recv(timeout=5))
                assert snap["type"] == "snapshot"
                assert len(snap["robots"]) == 4
        finally:
            proc.terminate()
            proc.wait(timeout=10)
