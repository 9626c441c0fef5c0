"""Episode-oriented control interface over the kernel.

An Episode owns an isolated world built from a scenario template; reset
rebuilds it from a seed (with optional initial-pose randomization) and
step applies an action as raw actuator setpoints for decision_interval
ticks.  (seed, action sequence) fully determines the transition stream.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .. import rng
from ..errors import EpisodeFinished, SchemaError
from ..geomath import quat_from_euler, wrap_angle
from ..kernel import OverrideCommand, ScenarioConfig, World
from ..vehicles import VehicleSpec

REWARDS = ("waypoint_progress", "depth_keeping")


@dataclass
class EpisodeConfig:
    scenario: ScenarioConfig
    vehicle_id: str
    goal: np.ndarray = field(default_factory=lambda: np.array([100.0, 0.0, 5.0]))
    goal_radius: float = 5.0
    decision_interval: int = 10  # ticks per action
    max_steps: int = 200
    reward: str = "waypoint_progress"
    target_depth: float = 5.0  # depth_keeping reward reference
    jitter_xy: float = 0.0  # m, uniform initial-position randomization
    jitter_yaw: float = 0.0  # rad

    def __post_init__(self):
        if self.decision_interval < 1:
            raise SchemaError("decision_interval", "must be >= 1")
        if self.reward not in REWARDS:
            raise SchemaError("reward", f"must be one of {REWARDS}")
        self.goal = np.asarray(self.goal, dtype=np.float64).reshape(3)


@dataclass
class Transition:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


def observation_names(spec: VehicleSpec) -> list[str]:
    names = ["u", "v", "w", "p", "q", "r", "depth", "heading_error", "goal_distance"]
    names += [f"last_{n}" for n in (spec.model.actuator_names if spec.model else [])]
    return names


def action_space(spec: VehicleSpec) -> list[dict]:
    """Bounded scalar actions, one per actuator."""
    if spec.model is None:
        return []
    out = []
    lims = spec.model.actuator_limits()
    for name, lim in zip(spec.model.actuator_names, lims):
        out.append({"name": name, "low": -float(lim), "high": float(lim)})
    return out


class Episode:
    """One controllable vehicle in one isolated world."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        self.world: World | None = None
        self.index = 0
        self.done = True
        self.steps = 0
        self._last_action: np.ndarray | None = None
        self._prev_goal_dist = 0.0
        spec = None
        for setup in config.scenario.vehicles:
            if setup.spec.id == config.vehicle_id:
                spec = setup.spec
        if spec is None:
            raise SchemaError("vehicle_id", f"'{config.vehicle_id}' not in scenario")
        self.spec = spec
        self._limits = spec.model.actuator_limits() if spec.model else np.zeros(0)
        self.obs_names = observation_names(spec)
        self.actions = action_space(spec)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_obs(self) -> int:
        return len(self.obs_names)

    def reset(self, seed: int) -> np.ndarray:
        cfg = self.config
        scenario = copy.deepcopy(cfg.scenario)
        scenario.seed = int(seed)
        for setup in scenario.vehicles:
            if setup.spec.id == cfg.vehicle_id and (
                cfg.jitter_xy > 0 or cfg.jitter_yaw > 0
            ):
                key = rng.key_of(int(seed), "episode_init", cfg.vehicle_id)
                setup.position = setup.position + np.array(
                    [
                        (2 * rng.uniform(key, 0) - 1) * cfg.jitter_xy,
                        (2 * rng.uniform(key, 1) - 1) * cfg.jitter_xy,
                        0.0,
                    ]
                )
                yaw = (2 * rng.uniform(key, 2) - 1) * cfg.jitter_yaw
                setup.orientation = quat_from_euler(0, 0, yaw)
        self.world = World(scenario)
        self.index = self.world.vehicle_index(cfg.vehicle_id)
        self.world.fleet.override[self.index] = 1  # actions own the actuators
        self.done = False
        self.steps = 0
        self._last_action = np.zeros(self.n_actions)
        self._prev_goal_dist = self._goal_distance()
        return self._observe()

    def step(self, action: np.ndarray) -> Transition:
        if self.done or self.world is None:
            raise EpisodeFinished("reset() the episode before stepping")
        action = np.asarray(action, dtype=np.float64).reshape(self.n_actions)
        clamped = np.clip(action, -self._limits, self._limits)
        was_clamped = bool(np.any(clamped != action))
        self.world.queue_command(
            OverrideCommand(self.config.vehicle_id, clamped.copy())
        )
        for _ in range(self.config.decision_interval):
            self.world.tick()
        self._last_action = clamped
        self.steps += 1
        obs = self._observe()
        dist = self._goal_distance()
        if self.config.reward == "waypoint_progress":
            reward = self._prev_goal_dist - dist
        else:  # depth_keeping
            depth = float(self.world.fleet.x[self.index, 2])
            reward = -abs(depth - self.config.target_depth)
        self._prev_goal_dist = dist
        info: dict = {"goal_distance": dist, "clamped": was_clamped}
        grounded = bool(self.world.fleet.grounded[self.index])
        success = dist <= self.config.goal_radius
        if success:
            info["success"] = True
        if grounded:
            info["grounded"] = True
        self.done = success or grounded or self.steps >= self.config.max_steps
        return Transition(obs, float(reward), self.done, info)

    def _goal_distance(self) -> float:
        pos = self.world.fleet.x[self.index, 0:3]
        return float(np.linalg.norm(pos - self.config.goal))

    def _observe(self) -> np.ndarray:
        x = self.world.fleet.x[self.index]
        yaw = math.atan2(
            2.0 * (x[3] * x[6] + x[4] * x[5]),
            1.0 - 2.0 * (x[5] * x[5] + x[6] * x[6]),
        )
        to_goal = self.config.goal - x[0:3]
        bearing = math.atan2(to_goal[1], to_goal[0])
        last = (
            self._last_action / np.where(self._limits > 0, self._limits, 1.0)
            if self.n_actions
            else np.zeros(0)
        )
        return np.concatenate(
            [
                x[7:13],
                [x[2], wrap_angle(bearing - yaw), self._goal_distance()],
                last,
            ]
        )


class VecEnv:
    """Lockstep batch of identical, independent episodes."""

    def __init__(self, config: EpisodeConfig, n_envs: int):
        if n_envs < 1:
            raise SchemaError("n_envs", "must be >= 1")
        self.envs = [Episode(config) for _ in range(n_envs)]

    @property
    def n_envs(self) -> int:
        return len(self.envs)

    def reset(self, seeds: list[int], indices: list[int] | None = None) -> np.ndarray:
        """Reset all envs (or the given subset) and return their obs."""
        idx = list(range(self.n_envs)) if indices is None else list(indices)
        if len(seeds) != len(idx):
            raise SchemaError("seeds", f"expected {len(idx)} seeds, got {len(seeds)}")
        return np.stack([self.envs[i].reset(s) for i, s in zip(idx, seeds)])

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[dict]]:
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape[0] != self.n_envs:
            raise SchemaError(
                "actions", f"expected {self.n_envs} rows, got {actions.shape[0]}"
            )
        results = [env.step(a) for env, a in zip(self.envs, actions)]
        obs = np.stack([r.obs for r in results])
        rewards = np.array([r.reward for r in results])
        dones = np.array([r.done for r in results])
        infos = [r.info for r in results]
        return obs, rewards, dones, infos
