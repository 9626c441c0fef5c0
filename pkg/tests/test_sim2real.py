import math

import numpy as np
import pytest

from marsim import sim2real as s2r
from marsim.dynamics import RigidBodyState, step_dynamic
from marsim.errors import DtMismatch, FeatureMismatch, TooFewSamples
from marsim.vehicles import VehicleSpec, load_vehicle_spec
from marsim.vehicles import Domain
from marsim.dynamics import FidelityLevel

from conftest import make_model, still_water


def spec_with(model) -> VehicleSpec:
    return VehicleSpec(
        id="auv", domain=Domain.UNDERWATER, fidelity=FidelityLevel.DYNAMIC,
        model=model,
    )


def scripted_commands(t: float) -> np.ndarray:
    return np.array(
        [
            20.0 + 12.0 * math.sin(0.5 * t) + 6.0 * math.sin(1.7 * t + 0.3),
            0.25 * math.sin(0.8 * t),
            0.2 * math.sin(0.3 * t + 1.0),
        ]
    )


def generate_log(model, residual=None, n=1500, dt=0.01) -> s2r.TrajectoryLog:
    env = still_water()
    # warm-started actuators: thrust steps between samples stay small, so
    # the central-difference targets are clean from the first sample
    state = RigidBodyState(actuator_states=scripted_commands(0.0))
    t = np.arange(n) * dt
    pos = np.zeros((n, 3))
    quat = np.zeros((n, 4))
    nu = np.zeros((n, 6))
    cmds = np.zeros((n, 3))
    ach = np.zeros((n, 3))
    quat[0] = state.pose.orientation
    ach[0] = state.actuator_states
    for k in range(1, n):
        c = scripted_commands(t[k - 1])
        state = step_dynamic(state, model, env, c, residual, dt)
        pos[k] = state.pose.position
        quat[k] = state.pose.orientation
        nu[k] = state.nu.to_array()
        cmds[k] = c
        ach[k] = state.actuator_states
    cmds[0] = cmds[1]
    return s2r.TrajectoryLog(t, pos, quat, nu, cmds, achieved=ach, vehicle="auv")


def surge_bias_residual(force: float, n_act: int = 3) -> np.ndarray:
    coeffs = np.zeros((6, 13 + n_act))
    coeffs[0, -1] = force
    return coeffs


class TestReplay:
    def test_self_consistency_bit_level(self):
        model = make_model()
        log = generate_log(model, n=400)
        report = s2r.replay(log, spec_with(model))
        assert report.max_position_error < 1e-9
        assert report.max_velocity_error < 1e-9

    def test_unmodeled_force_diverges_monotonically(self):
        model = make_model()
        truth = generate_log(model, residual=surge_bias_residual(5.0), n=600)
        report = s2r.replay(truth, spec_with(model))
        assert report.max_position_error > 0.5
        # shorter prefixes accumulate strictly less error
        prefix_err = []
        for n in (150, 300, 450, 600):
            sub = s2r.TrajectoryLog(
                truth.t[:n], truth.position[:n], truth.orientation[:n],
                truth.nu[:n], truth.commands[:n], achieved=truth.achieved[:n],
            )
            prefix_err.append(s2r.replay(sub, spec_with(model)).max_position_error)
        assert prefix_err == sorted(prefix_err)
        assert prefix_err[0] > 0

    def test_dt_mismatch(self):
        model = make_model()
        log = generate_log(model, n=100)
        with pytest.raises(DtMismatch):
            s2r.replay(log, spec_with(model), sim_dt=0.003)

    def test_integer_substepping_allowed(self):
        model = make_model()
        log = generate_log(model, n=100)
        report = s2r.replay(log, spec_with(model), sim_dt=0.005)
        # finer substeps resolve the actuator lag mid-interval, so the
        # trajectories agree only to the hold-discretization scale
        assert report.max_position_error < 1e-3


class TestResidualTargets:
    def test_nominal_log_targets_near_zero(self):
        model = make_model()
        log = generate_log(model, n=800)
        targets = s2r.residual_targets(log, spec_with(model))
        # finite-difference floor: O(dt^2), tiny against the ~40 N force scale
        assert np.max(np.abs(targets[2:-2])) < 1e-2

    def test_constant_command_targets_at_fd_floor(self):
        model = make_model()
        env = still_water()
        state = RigidBodyState(actuator_states=np.array([20.0, 0.1, -0.05]))
        n, dt = 600, 0.01
        cmds = np.tile([20.0, 0.1, -0.05], (n, 1))
        pos, quat, nu = np.zeros((n, 3)), np.zeros((n, 4)), np.zeros((n, 6))
        quat[0] = state.pose.orientation
        for k in range(1, n):
            state = step_dynamic(state, model, env, cmds[k], None, dt)
            pos[k], quat[k], nu[k] = (
                state.pose.position, state.pose.orientation, state.nu.to_array()
            )
        log = s2r.TrajectoryLog(np.arange(n) * dt, pos, quat, nu, cmds, achieved=cmds)
        targets = s2r.residual_targets(log, spec_with(model))
        # smooth inputs: pure O(dt^2) differencing error
        assert np.max(np.abs(targets[2:-2])) < 2e-3

    def test_injected_surge_force_recovered_in_targets(self):
        model = make_model()
        log = generate_log(model, residual=surge_bias_residual(5.0), n=800)
        targets = s2r.residual_targets(log, spec_with(model))
        surge = targets[5:-5, 0]
        assert np.median(surge) == pytest.approx(5.0, abs=0.1)

    def test_too_few_samples(self):
        model = make_model()
        log = generate_log(model, n=400)
        short = s2r.TrajectoryLog(
            log.t[:2], log.position[:2], log.orientation[:2], log.nu[:2],
            log.commands[:2], achieved=log.achieved[:2],
        )
        with pytest.raises(TooFewSamples):
            s2r.residual_targets(short, spec_with(model))


class TestFit:
    def test_zero_targets_zero_coefficients(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(200, 16))
        report, model = s2r.fit_residual(np.zeros((200, 6)), x, ridge=0.0)
        np.testing.assert_allclose(model.coefficients, 0.0, atol=1e-12)

    def test_known_coefficients_noiseless(self):
        # independent oracle: explicit normal equations with matrix inverse
        rng = np.random.default_rng(1)
        n, f = 400, 16
        x = rng.normal(size=(n, f))
        true = rng.normal(size=(6, f))
        y = x @ true.T
        report, model = s2r.fit_residual(y, x, ridge=0.0)
        oracle = (np.linalg.inv(x.T @ x) @ x.T @ y).T
        np.testing.assert_allclose(model.coefficients, oracle, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(model.coefficients, true, rtol=1e-8, atol=1e-8)

    def test_noisy_recovery_within_3_sigma(self):
        rng = np.random.default_rng(2)
        n, f = 3000, 10
        sigma = 0.5
        x = rng.normal(size=(n, f))
        true = rng.normal(size=(6, f))
        y = x @ true.T + sigma * rng.normal(size=(n, 6))
        report, model = s2r.fit_residual(y, x, ridge=0.0)
        # standard error per coefficient from the gram inverse
        g_inv = np.linalg.inv(x.T @ x)
        se = sigma * np.sqrt(np.diag(g_inv))
        err = np.abs(model.coefficients - true)
        assert np.all(err <= 4.5 * se[None, :])  # comfortably within noise bounds
        assert np.all(report.rms_after <= report.rms_before + 1e-12)

    def test_rank_deficient_reported_and_usable(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(100, 6))
        x = np.hstack([x, x[:, :2]])  # duplicate columns
        y = rng.normal(size=(100, 6))
        report, model = s2r.fit_residual(y, x, ridge=0.0)
        assert report.rank_deficient
        assert report.ridge >= s2r.RIDGE_FLOOR
        assert np.all(np.isfinite(model.coefficients))

    def test_sample_count_guard(self):
        with pytest.raises(TooFewSamples):
            s2r.fit_residual(np.zeros((5, 6)), np.zeros((5, 10)))


class TestAttachAndClosure:
    def test_zero_model_changes_nothing_bitwise(self):
        model = make_model()
        spec = spec_with(model)
        zero = s2r.ResidualModel(np.zeros((6, 16)), 3)
        attached = s2r.attach(spec, zero)
        env = still_water()
        s0 = RigidBodyState(actuator_states=np.zeros(3))
        cmds = np.array([15.0, 0.1, -0.1])
        a = step_dynamic(s0, spec.model, env, cmds, None, 0.01)
        b = step_dynamic(s0, attached.model, env, cmds, attached.residual, 0.01)
        np.testing.assert_array_equal(a.to_x13(), b.to_x13())

    def test_feature_mismatch(self):
        spec = spec_with(make_model())
        with pytest.raises(FeatureMismatch):
            s2r.attach(spec, s2r.ResidualModel(np.zeros((6, 18)), 5))

    def test_end_to_end_closure(self):
        # the pipeline's defining test: inject a 5 N surge bias, log, fit,
        # attach; replay divergence must shrink by >= 10x
        model = make_model()
        spec = spec_with(model)
        truth = generate_log(model, residual=surge_bias_residual(5.0), n=1200)
        report, fitted = s2r.fit_from_log(truth, spec, ridge=0.0)
        bias = fitted.coefficients[0, -1]
        assert bias == pytest.approx(5.0, rel=0.01)
        before = s2r.replay(truth, spec)
        after = s2r.replay(truth, spec, residual=fitted)
        assert after.max_position_error <= before.max_position_error / 10
        assert np.all(report.rms_after <= report.rms_before)


class TestSerialization:
    def test_trajectory_round_trip(self, tmp_path):
        model = make_model()
        log = generate_log(model, n=50)
        p = tmp_path / "traj.jsonl"
        s2r.save_trajectory(log, p)
        back = s2r.load_trajectory(p)
        np.testing.assert_array_equal(back.t, log.t)
        np.testing.assert_array_equal(back.nu, log.nu)
        np.testing.assert_array_equal(back.achieved, log.achieved)

    def test_residual_model_round_trip(self):
        rng = np.random.default_rng(4)
        m = s2r.ResidualModel(rng.normal(size=(6, 16)), 3, meta={"samples": 10})
        back = s2r.ResidualModel.from_json(m.to_json())
        np.testing.assert_array_equal(back.coefficients, m.coefficients)

    def test_kernel_log_extraction(self, assets_dir, tmp_path):
        from test_kernel import two_vehicle_config
        from marsim import kernel

        cfg = two_vehicle_config(assets_dir, duration=2.0, log_decimation=1)
        kernel.run(cfg, log_path=tmp_path / "log.jsonl")
        traj = s2r.trajectory_from_world_log(tmp_path / "log.jsonl", "auv_torpedo")
        assert len(traj) == 201
        assert traj.dt == pytest.approx(0.01)
        # a decimation-1 kernel log replays bit-exactly on the same spec
        spec = load_vehicle_spec(assets_dir / "auv_torpedo.json")
        report = s2r.replay(traj, spec)
        assert report.max_position_error < 1e-9
