import numpy as np
import pytest

from marsim import kernel
from marsim.errors import EpisodeFinished
from marsim.geomath import GeoPoint, quat_from_euler
from marsim.rl.client import ProtocolError, TrainerClient
from marsim.rl.env import Episode, EpisodeConfig, VecEnv
from marsim.rl.protocol import TrainerServer, recv_frame, send_frame
from marsim.vehicles import load_vehicle_spec

ORIGIN = GeoPoint(58.25, 11.45)


def episode_config(assets_dir, **kw) -> EpisodeConfig:
    spec = load_vehicle_spec(assets_dir / "auv_torpedo.json")
    scenario = kernel.ScenarioConfig(
        origin=ORIGIN,
        vehicles=[
            kernel.VehicleSetup(
                spec=spec,
                position=np.array([0.0, 0.0, 5.0]),
                orientation=quat_from_euler(0, 0, 0),
                nu=np.zeros(6),
            )
        ],
        duration=1e9,
        seed=0,
    )
    base = dict(
        scenario=scenario,
        vehicle_id="auv_torpedo",
        goal=np.array([60.0, 0.0, 5.0]),
        goal_radius=5.0,
        decision_interval=10,
        max_steps=100,
        jitter_xy=5.0,
        jitter_yaw=0.5,
    )
    base.update(kw)
    return EpisodeConfig(**base)


def scripted_action(env, k):
    # full thrust, small rudder wiggle
    a = np.zeros(env.n_actions)
    a[0] = 40.0
    a[1] = 0.1 * np.sin(0.3 * k)
    return a


class TestEpisode:
    def test_reset_deterministic(self, assets_dir):
        env = Episode(episode_config(assets_dir))
        a = env.reset(seed=5)
        b = env.reset(seed=5)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_different_poses(self, assets_dir):
        env = Episode(episode_config(assets_dir))
        a = env.reset(seed=5)
        b = env.reset(seed=6)
        assert not np.array_equal(a, b)

    def test_obs_length_matches_spec(self, assets_dir):
        env = Episode(episode_config(assets_dir))
        obs = env.reset(seed=1)
        assert len(obs) == env.n_obs == len(env.obs_names)

    def test_transition_determinism_bitwise(self, assets_dir):
        def rollout():
            env = Episode(episode_config(assets_dir))
            obs = [env.reset(seed=3)]
            rewards = []
            for k in range(20):
                tr = env.step(scripted_action(env, k))
                obs.append(tr.obs)
                rewards.append(tr.reward)
                if tr.done:
                    break
            return np.concatenate(obs), np.array(rewards)

        o1, r1 = rollout()
        o2, r2 = rollout()
        np.testing.assert_array_equal(o1, o2)
        np.testing.assert_array_equal(r1, r2)

    def test_progress_reward_signs(self, assets_dir):
        env = Episode(episode_config(assets_dir, jitter_xy=0.0, jitter_yaw=0.0))
        env.reset(seed=1)
        tr = env.step(np.array([40.0, 0.0, 0.0]))  # drive toward the goal
        assert tr.reward > 0

    def test_motionless_zero_reward(self, assets_dir):
        env = Episode(episode_config(assets_dir, jitter_xy=0.0, jitter_yaw=0.0))
        env.reset(seed=1)
        tr = env.step(np.zeros(3))
        assert tr.reward == pytest.approx(0.0, abs=1e-6)

    def test_reaches_goal_with_success_info(self, assets_dir):
        env = Episode(episode_config(assets_dir, jitter_xy=0.0, jitter_yaw=0.0,
                                     max_steps=800))
        obs = env.reset(seed=1)
        done = False
        for k in range(800):
            # obs: [u v w p q r depth heading_err dist last...]
            depth, heading_err = obs[6], obs[7]
            q_pitch, heave = obs[4], obs[2]
            action = np.array(
                [
                    30.0,
                    np.clip(0.8 * heading_err, -0.4, 0.4),
                    np.clip(0.12 * (depth - 5.0) - 3.0 * q_pitch - 0.5 * heave,
                            -0.25, 0.25),
                ]
            )
            tr = env.step(action)
            obs = tr.obs
            if tr.done:
                done = True
                break
        assert done and tr.info.get("success")

    def test_step_after_done_raises(self, assets_dir):
        env = Episode(episode_config(assets_dir, max_steps=2))
        env.reset(seed=1)
        env.step(np.zeros(3))
        tr = env.step(np.zeros(3))
        assert tr.done
        with pytest.raises(EpisodeFinished):
            env.step(np.zeros(3))

    def test_action_clamped_with_info_flag(self, assets_dir):
        env = Episode(episode_config(assets_dir))
        env.reset(seed=1)
        tr = env.step(np.array([500.0, 0.0, 0.0]))
        assert tr.info["clamped"]


class TestVecEnv:
    def test_n1_equals_scalar(self, assets_dir):
        cfg = episode_config(assets_dir)
        vec = VecEnv(cfg, 1)
        solo = Episode(cfg)
        vo = vec.reset([9])
        so = solo.reset(9)
        np.testing.assert_array_equal(vo[0], so)
        a = scripted_action(solo, 0)
        obs, rewards, dones, infos = vec.step(a[None, :])
        tr = solo.step(a)
        np.testing.assert_array_equal(obs[0], tr.obs)
        assert rewards[0] == tr.reward

    def test_batched_independence(self, assets_dir):
        cfg = episode_config(assets_dir)
        n = 16
        vec = VecEnv(cfg, n)
        seeds = list(range(100, 100 + n))
        vec_obs = vec.reset(seeds)
        solo = Episode(cfg)
        solo_obs = solo.reset(seeds[0])
        np.testing.assert_array_equal(vec_obs[0], solo_obs)
        for k in range(10):
            actions = np.stack([scripted_action(solo, k + i) for i in range(n)])
            obs, rewards, dones, _ = vec.step(actions)
            tr = solo.step(actions[0])
            np.testing.assert_array_equal(obs[0], tr.obs)
            assert rewards[0] == tr.reward
            assert dones[0] == tr.done

    def test_partial_reset(self, assets_dir):
        cfg = episode_config(assets_dir, max_steps=1)
        vec = VecEnv(cfg, 3)
        vec.reset([1, 2, 3])
        _, _, dones, _ = vec.step(np.zeros((3, 3)))
        assert all(dones)
        vec.reset([7, 8], indices=[0, 2])
        obs_new = vec.reset([7], indices=[0])
        solo = Episode(cfg)
        np.testing.assert_array_equal(obs_new[0], solo.reset(7))


class TestProtocol:
    @pytest.fixture
    def server(self, assets_dir):
        vec = VecEnv(episode_config(assets_dir, max_steps=4, decision_interval=5), 2)
        srv = TrainerServer(vec, port=0)
        srv.serve_background()
        yield srv
        srv.close()

    def test_spec_reset_step_loop(self, server, assets_dir):
        host, port = server.address
        client = TrainerClient(host, port)
        spec = client.spec()
        assert spec["n_envs"] == 2
        assert len(spec["actions"]) == 3
        obs = client.reset([1, 2])
        assert obs.shape == (2, len(spec["obs"]))
        episodes = 0
        while episodes < 6:
            actions = np.tile([40.0, 0.0, 0.0], (2, 1))
            obs, rewards, dones, infos = client.step(actions)
            for i, d in enumerate(dones):
                if d:
                    episodes += 1
                    client.reset([episodes * 10 + i], indices=[i])
        client.close()

    def test_wrong_action_length_in_band_error(self, server):
        host, port = server.address
        client = TrainerClient(host, port)
        client.reset([1, 2])
        with pytest.raises(ProtocolError) as err:
            client._call({"op": "step", "actions": [[1.0], [1.0]]})
        assert err.value.code == "bad_action_length"
        # connection still usable afterwards
        obs = client.reset([3, 4])
        assert obs.shape[0] == 2
        client.close()

    def test_malformed_frame_keeps_connection(self, server):
        import socket

        host, port = server.address
        sock = socket.create_connection((host, port), timeout=10)
        payload = b"not json"
        sock.sendall(len(payload).to_bytes(4, "big") + payload)
        import json

        reply = json.loads(recv_frame(sock))
        assert reply["op"] == "error" and reply["code"] == "parse"
        send_frame(sock, {"op": "spec"})
        reply = json.loads(recv_frame(sock))
        assert reply["op"] == "spec"
        sock.close()


class TestVecThroughput:
    def test_batched_not_slower_than_half_of_solos(self, assets_dir):
        import time

        cfg = episode_config(assets_dir, max_steps=10, decision_interval=5)
        n = 16
        steps = 6
        actions = np.tile([30.0, 0.0, 0.0], (n, 1))

        vec = VecEnv(cfg, n)
        vec.reset(list(range(n)))
        vec.step(actions)  # absorb any remaining jit warmup
        t0 = time.perf_counter()
        for _ in range(steps):
            vec.step(actions)
        vec_time = time.perf_counter() - t0

        solo_total = 0.0
        for i in range(n):
            env = Episode(cfg)
            env.reset(i)
            env.step(actions[0])
            t0 = time.perf_counter()
            for _ in range(steps):
                env.step(actions[0])
            solo_total += time.perf_counter() - t0

        # lockstep batching must retain at least half the aggregate rate
        assert vec_time <= 2.0 * solo_total, (vec_time, solo_total)
