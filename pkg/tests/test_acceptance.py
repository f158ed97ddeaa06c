"""Acceptance suite: one test per primary criterion, with its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS line per
criterion with the measured values.
"""

import math
import time

import numpy as np
import pytest

from formsim.control import (
    EstimatorAssignment,
    biased_pair_dynamics,
    gradient_control,
)
from formsim.core import (
    DEGENERATE_COLLINEAR,
    FLEXIBLE,
    INFINITESIMALLY_RIGID,
    FormationGraph,
    MotionCommand,
    ShapeSpec,
    check_infinitesimal_rigidity,
    potential,
    relative_positions,
)
from formsim.engine import SimConfig, drift_speed, metrics, run
from formsim.scenario import load_bundled_scenario
from formsim.sensors import ActuatorSpec, BiasTable, LidarSpec

from conftest import SQUARE_POSITIONS, exact_measurements


def report(name, detail):
    print(f"\n[PASS] {name}: {detail}")


def clean_motion_config(shape, dt=0.02, duration=30.0):
    return SimConfig(
        shape=shape,
        initial_positions=shape.reference_positions,
        seed=1,
        dt=dt,
        duration=duration,
        lidar=LidarSpec.noiseless(),
        actuator=ActuatorSpec(deadband_speed=0.0),
    )


class TestAcceptance:
    def test_gradient_correctness(self, square_shape):
        """Stacked control equals the negated potential gradient at 100 configs."""
        start = time.monotonic()
        rng = np.random.default_rng(2024)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            p = SQUARE_POSITIONS + rng.uniform(-0.2, 0.2, (4, 2))
            stacked = np.concatenate([
                gradient_control(exact_measurements(square_shape, p, r), square_shape, r)
                for r in range(4)
            ])
            grad = np.zeros(8)
            for idx in range(8):
                plus = p.copy().reshape(-1)
                minus = p.copy().reshape(-1)
                plus[idx] += h
                minus[idx] -= h
                grad[idx] = (
                    potential(relative_positions(plus.reshape(4, 2), square_shape.graph),
                              square_shape.desired_distances)
                    - potential(relative_positions(minus.reshape(4, 2), square_shape.graph),
                                square_shape.desired_distances)
                ) / (2 * h)
            rel = np.linalg.norm(stacked + grad) / np.linalg.norm(grad)
            worst = max(worst, rel)
        elapsed = time.monotonic() - start
        assert worst < 1e-5
        assert elapsed < 1.0
        report("gradient-correctness",
               f"max relative error {worst:.2e} over 100 configs in {elapsed:.2f}s")

    def test_rigidity_classification(self, square_graph):
        """Square w/o diagonal flexible; with diagonal rigid (rank 5); triangle rigid; collinear degenerate."""
        no_diag = FormationGraph(n=4, edges=((0, 1), (1, 2), (2, 3), (0, 3)))
        r1 = check_infinitesimal_rigidity(SQUARE_POSITIONS, no_diag)
        assert r1.classification == FLEXIBLE

        r2 = check_infinitesimal_rigidity(SQUARE_POSITIONS, square_graph)
        assert r2.classification == INFINITESIMALLY_RIGID
        assert r2.rank == 5 == 2 * 4 - 3

        triangle = FormationGraph(n=3, edges=((0, 1), (1, 2), (0, 2)))
        tri_p = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
        r3 = check_infinitesimal_rigidity(tri_p, triangle)
        assert r3.classification == INFINITESIMALLY_RIGID

        line = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        r4 = check_infinitesimal_rigidity(line, square_graph)
        assert r4.classification == DEGENERATE_COLLINEAR
        report("rigidity-classification",
               f"flexible / rigid(rank {r2.rank}) / rigid / degenerate-collinear")

    def test_static_convergence(self):
        """Perturbed unit square, 5 Hz, gain 1, no noise: max|e| < 1 mm within 5 s."""
        start = time.monotonic()
        scn = load_bundled_scenario("square-1m")
        assert scn.config.dt == 0.2 and scn.config.gradient_gain == 1.0
        perturbation = np.linalg.norm(
            scn.config.initial_positions - scn.config.shape.reference_positions, axis=1
        )
        assert perturbation.max() <= 0.2
        records = run(scn.config, scn.schedule)
        after_5s = [
            max(np.abs(r.e_tail).max(), np.abs(r.e_head).max())
            for r in records
            if r.t >= 5.0
        ]
        elapsed = time.monotonic() - start
        assert max(after_5s) < 1e-3
        assert elapsed < 1.0
        report("static-convergence",
               f"perturbation <= {perturbation.max():.3f} m, "
               f"max|e| after 5 s = {max(after_5s) * 1e3:.3f} mm in {elapsed:.2f}s")

    def test_two_robot_bias_oracle(self, pair_shape):
        """Simulated steady drift equals the closed-form mu/2 within 2%."""
        start = time.monotonic()
        mu = 0.006
        config = SimConfig(
            shape=pair_shape,
            initial_positions=pair_shape.reference_positions,
            seed=1,
            duration=60.0,
            bias=BiasTable(mu={(0, 0): mu}),
            lidar=LidarSpec.noiseless(),
            actuator=ActuatorSpec(deadband_speed=0.0),
        )
        records = run(config)
        oracle = biased_pair_dynamics(mu, 1.0, np.array([-1.0, 0.0]))
        assert oracle.drift_speed == pytest.approx(0.003)

        tail = [r for r in records if r.t >= 48.0]
        disp = tail[-1].centroid - tail[0].centroid
        speed = np.linalg.norm(disp) / (tail[-1].t - tail[0].t)
        # drift along the edge: no component across it
        assert abs(disp[1]) < 1e-12
        assert speed == pytest.approx(oracle.drift_speed, rel=0.02)
        direction = disp / np.linalg.norm(disp)
        assert np.allclose(
            direction, oracle.drift_velocity / oracle.drift_speed, atol=1e-9
        )
        elapsed = time.monotonic() - start
        assert elapsed < 1.0
        report("two-robot-bias-oracle",
               f"steady drift {speed * 1e3:.4f} mm/s vs mu/2 = 3.0 mm/s in {elapsed:.2f}s")

    def test_drift_reproduction(self):
        """Biased square with deadband and noise drifts 0.3-3 m in 300 s."""
        start = time.monotonic()
        scn = load_bundled_scenario("square-1m-biased")
        assert scn.config.bias.get(0, 0) == 0.006
        assert scn.config.actuator.deadband_speed == 0.015
        assert not scn.config.estimator_enabled
        records = run(scn.config, scn.schedule)
        summary = metrics(records)
        displacement = summary.centroid_displacement
        split = summary.steady_error_mean[0][0] - summary.steady_error_mean[1][0]
        elapsed = time.monotonic() - start
        assert 0.3 <= displacement <= 3.0
        assert 0.002 <= split <= 0.010
        assert elapsed < 10.0
        report("drift-reproduction",
               f"centroid displacement {displacement:.3f} m, "
               f"biased-edge split {split * 1e3:.2f} mm in {elapsed:.2f}s")

    def test_calibration(self):
        """Estimator with c=1 pins mu_hat to 6 mm and stops the drift."""
        start = time.monotonic()
        scn = load_bundled_scenario("square-1m-estimator")
        assert scn.config.estimator_enabled and scn.config.estimator_gain == 1.0
        records = run(scn.config, scn.schedule)
        summary = metrics(records)
        mu_err = abs(summary.mu_hat_terminal[0] - 0.006)
        worst_mean_e = np.abs(summary.steady_error_mean).max()
        tail_drift = drift_speed(records, 60.0)
        elapsed = time.monotonic() - start
        assert mu_err < 0.6e-3
        assert worst_mean_e < 2e-3
        assert tail_drift < 1e-3
        assert elapsed < 10.0
        report("calibration",
               f"|mu_hat - mu| = {mu_err * 1e3:.3f} mm, "
               f"max|mean e| = {worst_mean_e * 1e3:.3f} mm, "
               f"drift over last 60 s = {tail_drift * 1e3:.3f} mm/s in {elapsed:.2f}s")

    def test_motion_fidelity(self, square_shape):
        """Commanded translation/rotation/scaling tracked at their stated tolerances."""
        # translation: centroid velocity within 1%, max|e| < 1e-4
        records = run(clean_motion_config(square_shape),
                      [(0.0, MotionCommand(vx=0.1))])
        v = (records[-1].centroid - records[0].centroid) / (records[-1].t - records[0].t)
        max_e = max(
            max(np.abs(r.e_tail).max(), np.abs(r.e_head).max()) for r in records
        )
        assert np.linalg.norm(v - [0.1, 0.0]) < 0.001
        assert max_e < 1e-4
        trans_detail = f"v = ({v[0]:.5f}, {v[1]:.5f}) m/s, max|e| = {max_e:.2e} m"

        # rotation: orientation advances 3 rad +- 1%, max|e| < 1e-4
        records = run(clean_motion_config(square_shape),
                      [(0.0, MotionCommand(omega=0.1))])
        advance = records[-1].orient - records[0].orient
        max_e = max(
            max(np.abs(r.e_tail).max(), np.abs(r.e_head).max()) for r in records
        )
        expected = 0.1 * records[-1].t
        assert abs(advance - expected) / 3.0 < 0.01
        assert max_e < 1e-4
        rot_detail = f"orientation advance {advance:.4f} rad, max|e| = {max_e:.2e} m"

        # scaling: every edge grows by e^{0.3} +- 1%
        records = run(clean_motion_config(square_shape),
                      [(0.0, MotionCommand(scale=0.01))])
        first = np.linalg.norm(
            relative_positions(records[0].positions, square_shape.graph), axis=1
        )
        final_positions = records[-1].positions
        last = np.linalg.norm(
            relative_positions(final_positions, square_shape.graph), axis=1
        )
        growth = last / first
        expected_growth = math.exp(0.01 * (records[-1].t - records[0].t))
        assert np.all(np.abs(growth - expected_growth) / expected_growth < 0.01)
        report("motion-fidelity",
               f"{trans_detail}; {rot_detail}; "
               f"growth {growth.mean():.5f} vs {expected_growth:.5f}")

    def test_frame_invariance(self, square_shape):
        """Re-randomized mount headings leave the world trajectory unchanged."""
        runs = []
        for seed in (1, 2024):
            config = clean_motion_config(square_shape, dt=0.2, duration=20.0)
            config.seed = seed
            runs.append(run(config, [(0.0, MotionCommand(vx=0.1, omega=0.05))]))
        worst = max(
            np.abs(a.positions - b.positions).max() for a, b in zip(*runs)
        )
        assert worst < 1e-9
        report("frame-invariance", f"max world-frame deviation {worst:.2e} m")

    def test_determinism_byte_identical_logs(self, tmp_path):
        """The same scenario and seed produce byte-identical CSV logs."""
        from formsim.cli import main

        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            code = main(["run", "--scenario", "square-1m-estimator",
                         "--log", str(path), "--duration", "60"])
            assert code == 0
        a, b = (p.read_bytes() for p in paths)
        assert a == b
        report("determinism", f"two runs, {len(a)} bytes, identical")
