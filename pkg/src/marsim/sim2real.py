"""Residual-dynamics pipeline: replay logs, fit corrections, attach them.

Given a trajectory log (from the field or from another simulator run),
the pipeline measures what force the nominal model fails to explain and
fits a linear additive correction:

    tau_residual = C @ phi(nu, commands),
    phi = [nu (6), nu*|nu| (6), commands (per actuator), 1]

Targets come from M * nu_dot_data - tau_model with nu_dot estimated by
central finite differences of the logged velocities.  The fit is per-axis
ridge least squares; attach() produces a vehicle spec whose dynamics add
the correction on every step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import RigidBodyState, step_dynamic, total_wrench
from .environment import EnvironmentSample, RHO_SEAWATER
from .errors import DtMismatch, FeatureMismatch, SchemaError, TooFewSamples
from .geomath import BodyVelocity, Pose
from .vehicles import VehicleSpec

RIDGE_FLOOR = 1e-8
_COND_LIMIT = 1e12


@dataclass
class TrajectoryLog:
    """Uniformly sampled {t, pose, nu, commands} sequence."""

    t: np.ndarray  # (N,)
    position: np.ndarray  # (N,3)
    orientation: np.ndarray  # (N,4)
    nu: np.ndarray  # (N,6)
    commands: np.ndarray  # (N,A) clamped setpoints active over the step into k
    achieved: np.ndarray | None = None  # (N,A); defaults to commands
    source: str = "sim"  # "sim" | "real"
    vehicle: str = ""

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.achieved is None:
            self.achieved = np.array(self.commands, dtype=np.float64)
        if len(self.t) >= 2:
            steps = np.diff(self.t)
            if np.any(steps <= 0):
                raise SchemaError("t", "timestamps must be strictly increasing")
            if np.any(np.abs(steps - steps[0]) > 0.01 * steps[0]):
                raise SchemaError("t", "sample period not uniform within 1%")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self) -> int:
        return len(self.t)

    def state_at(self, k: int) -> RigidBodyState:
        return RigidBodyState(
            Pose(self.position[k].copy(), self.orientation[k].copy()),
            BodyVelocity.from_array(self.nu[k]),
            self.achieved[k].copy(),
        )


def save_trajectory(log: TrajectoryLog, path: str | Path) -> None:
    with open(path, "w") as f:
        f.write(
            json.dumps(
                {
                    "record": "header",
                    "schema": 1,
                    "kind": "trajectory",
                    "source": log.source,
                    "vehicle": log.vehicle,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
            + "\n"
        )
        for k in range(len(log)):
            f.write(
                json.dumps(
                    {
                        "t": float(log.t[k]),
                        "p": [float(v) for v in log.position[k]],
                        "q": [float(v) for v in log.orientation[k]],
                        "nu": [float(v) for v in log.nu[k]],
                        "cmd": [float(v) for v in log.commands[k]],
                        "act": [float(v) for v in log.achieved[k]],
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )


def load_trajectory(path: str | Path) -> TrajectoryLog:
    source, vehicle = "sim", ""
    t, p, q, nu, cmd, act = [], [], [], [], [], []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            doc = json.loads(line)
            if doc.get("record") == "header":
                source = doc.get("source", "sim")
                vehicle = doc.get("vehicle", "")
                continue
            t.append(doc["t"])
            p.append(doc["p"])
            q.append(doc["q"])
            nu.append(doc["nu"])
            cmd.append(doc["cmd"])
            act.append(doc.get("act", doc["cmd"]))
    if not t:
        raise SchemaError(str(path), "empty trajectory log")
    return TrajectoryLog(
        np.array(t), np.array(p), np.array(q), np.array(nu), np.array(cmd),
        achieved=np.array(act), source=source, vehicle=vehicle,
    )


def trajectory_from_world_log(
    path: str | Path, vehicle_id: str, source: str = "sim"
) -> TrajectoryLog:
    """Extract one vehicle's trajectory from a kernel event log."""
    t, p, q, nu, cmd, act = [], [], [], [], [], []
    with open(path) as f:
        for line in f:
            doc = json.loads(line)
            if doc.get("record") != "tick":
                continue
            v = doc["vehicles"].get(vehicle_id)
            if v is None:
                continue
            t.append(doc["t"])
            p.append(v["p"])
            q.append(v["q"])
            nu.append(v["nu"])
            cmd.append(v["cmd"])
            act.append(v["act"])
    if not t:
        raise SchemaError(str(path), f"no records for vehicle '{vehicle_id}'")
    return TrajectoryLog(
        np.array(t), np.array(p), np.array(q), np.array(nu), np.array(cmd),
        achieved=np.array(act), source=source, vehicle=vehicle_id,
    )


# ---------------------------------------------------------------------------
# residual model

@dataclass
class ResidualModel:
    """Linear map from [nu, nu|nu|, commands, 1] to a body wrench."""

    coefficients: np.ndarray  # (6, 13 + n_commands)
    n_commands: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        expect = (6, 13 + self.n_commands)
        if self.coefficients.shape != expect:
            raise FeatureMismatch(
                f"coefficients shape {self.coefficients.shape} != {expect}"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise FeatureMismatch("coefficients must be finite")

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[1]

    def to_json(self) -> dict:
        return {
            "kind": "residual_model",
            "schema": 1,
            "features": ["nu[0:6]", "nu*|nu|[0:6]", f"commands[0:{self.n_commands}]", "bias"],
            "n_commands": self.n_commands,
            "coefficients": [[float(v) for v in row] for row in self.coefficients],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ResidualModel":
        return cls(
            np.array(doc["coefficients"], dtype=np.float64),
            int(doc["n_commands"]),
            doc.get("meta", {}),
        )


def features(nu: np.ndarray, commands: np.ndarray) -> np.ndarray:
    """phi(nu, commands): the residual regressor vector."""
    nu = np.asarray(nu, dtype=np.float64).reshape(6)
    commands = np.asarray(commands, dtype=np.float64).ravel()
    return np.concatenate([nu, nu * np.abs(nu), commands, [1.0]])


@dataclass
class FitReport:
    coefficients: np.ndarray
    rms_before: np.ndarray  # (6,) per axis
    rms_after: np.ndarray
    sample_count: int
    condition_number: float
    ridge: float
    rank_deficient: bool = False


@dataclass
class DivergenceReport:
    max_position_error: float
    mean_position_error: float
    max_velocity_error: float
    mean_velocity_error: float
    samples: int

    def summary(self) -> str:
        return (
            f"pos_max={self.max_position_error:.6g} pos_mean={self.mean_position_error:.6g} "
            f"vel_max={self.max_velocity_error:.6g} vel_mean={self.mean_velocity_error:.6g} "
            f"samples={self.samples}"
        )


# ---------------------------------------------------------------------------
# operations

def _still_water(rho: float = RHO_SEAWATER) -> EnvironmentSample:
    return EnvironmentSample(np.zeros(3), np.zeros(3), rho, np.inf)


def replay(
    log: TrajectoryLog,
    spec: VehicleSpec,
    residual: ResidualModel | None = None,
    sim_dt: float | None = None,
    env: EnvironmentSample | None = None,
) -> DivergenceReport:
    """Re-simulate the log's commands from its initial state and compare.

    The log dt must be an integer multiple of the sim dt (substeps hold
    commands constant).
    """
    if spec.model is None:
        raise SchemaError("spec", "replay requires a dynamic model")
    if len(log) < 2:
        raise TooFewSamples("need at least 2 samples")
    sim_dt = log.dt if sim_dt is None else sim_dt
    ratio = log.dt / sim_dt
    if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
        raise DtMismatch(f"log dt {log.dt} not an integer multiple of sim dt {sim_dt}")
    n_sub = round(ratio)
    env = env or _still_water()
    resid = residual.coefficients if residual is not None else None
    state = log.state_at(0)
    pos_err = np.zeros(len(log))
    vel_err = np.zeros(len(log))
    for k in range(1, len(log)):
        cmds = log.commands[k]  # commands active over the step into sample k
        for _ in range(n_sub):
            state = step_dynamic(state, spec.model, env, cmds, resid, sim_dt)
        pos_err[k] = np.linalg.norm(state.pose.position - log.position[k])
        vel_err[k] = np.linalg.norm(state.nu.to_array() - log.nu[k])
    return DivergenceReport(
        max_position_error=float(np.max(pos_err)),
        mean_position_error=float(np.mean(pos_err)),
        max_velocity_error=float(np.max(vel_err)),
        mean_velocity_error=float(np.mean(vel_err)),
        samples=len(log),
    )


def residual_targets(
    log: TrajectoryLog, spec: VehicleSpec, env: EnvironmentSample | None = None
) -> np.ndarray:
    """Per-sample body wrench the nominal model fails to explain.

    nu_dot comes from central differences (one-sided at the ends).  The
    logged actuator values are zero-order holds, so the model force at an
    interior sample is the average over the two adjacent hold intervals,
    both evaluated at that sample's state; this keeps the targets at the
    finite-difference noise floor instead of half the per-step input jump.
    """
    if spec.model is None:
        raise SchemaError("spec", "residual targets require a dynamic model")
    n = len(log)
    if n < 3:
        raise TooFewSamples(f"need >= 3 samples, got {n}")
    env = env or _still_water()
    dt = log.dt
    nu_dot = np.empty_like(log.nu)
    nu_dot[1:-1] = (log.nu[2:] - log.nu[:-2]) / (2 * dt)
    nu_dot[0] = (log.nu[1] - log.nu[0]) / dt
    nu_dot[-1] = (log.nu[-1] - log.nu[-2]) / dt
    m = spec.model.mass_matrix()

    def tau_at(k: int, hold: int) -> np.ndarray:
        state = log.state_at(k)
        state.actuator_states = log.achieved[hold].copy()
        return total_wrench(state, spec.model, env, log.commands[hold]).to_array()

    targets = np.empty((n, 6))
    targets[0] = m @ nu_dot[0] - tau_at(0, 1)
    targets[-1] = m @ nu_dot[-1] - tau_at(n - 1, n - 1)
    for k in range(1, n - 1):
        tau_model = 0.5 * (tau_at(k, k) + tau_at(k, k + 1))
        targets[k] = m @ nu_dot[k] - tau_model
    return targets


def fit_residual(
    targets: np.ndarray,
    feature_matrix: np.ndarray,
    ridge: float = 0.0,
) -> tuple[FitReport, ResidualModel]:
    """Per-axis ridge least squares of targets on features.

    Rank-deficient regressors are reported and refit with a ridge floor
    so the returned model is always usable.
    """
    targets = np.asarray(targets, dtype=np.float64)
    x = np.asarray(feature_matrix, dtype=np.float64)
    n, n_feat = x.shape
    if targets.shape != (n, 6):
        raise SchemaError("targets", f"expected shape ({n}, 6), got {targets.shape}")
    if n < n_feat:
        raise TooFewSamples(f"{n} samples for {n_feat} features")
    cond = float(np.linalg.cond(x))
    rank = int(np.linalg.matrix_rank(x))
    rank_deficient = rank < n_feat or cond > _COND_LIMIT
    eff_ridge = max(ridge, RIDGE_FLOOR) if rank_deficient else ridge
    gram = x.T @ x + eff_ridge * np.eye(n_feat)
    coeffs = np.linalg.solve(gram, x.T @ targets).T  # (6, n_feat)
    resid = targets - x @ coeffs.T
    report = FitReport(
        coefficients=coeffs,
        rms_before=np.sqrt(np.mean(targets**2, axis=0)),
        rms_after=np.sqrt(np.mean(resid**2, axis=0)),
        sample_count=n,
        condition_number=cond,
        ridge=eff_ridge,
        rank_deficient=rank_deficient,
    )
    model = ResidualModel(
        coeffs,
        n_feat - 13,
        meta={
            "samples": n,
            "ridge": eff_ridge,
            "condition_number": cond,
            "rank_deficient": rank_deficient,
        },
    )
    return report, model


def fit_from_log(
    log: TrajectoryLog,
    spec: VehicleSpec,
    ridge: float = 0.0,
    env: EnvironmentSample | None = None,
) -> tuple[FitReport, ResidualModel]:
    """residual_targets + feature assembly + fit, in one call.

    Command features use the same hold-interval averaging as the targets.
    """
    targets = residual_targets(log, spec, env)
    n = len(log)
    rows = []
    for k in range(n):
        if 0 < k < n - 1:
            cmd = 0.5 * (log.commands[k] + log.commands[k + 1])
        elif k == 0:
            cmd = log.commands[1]
        else:
            cmd = log.commands[k]
        rows.append(features(log.nu[k], cmd))
    return fit_residual(targets, np.stack(rows), ridge)


def attach(spec: VehicleSpec, model: ResidualModel) -> VehicleSpec:
    """Vehicle spec whose dynamics add the fitted correction force."""
    if spec.model is None:
        raise SchemaError("spec", "attach requires a dynamic model")
    if model.n_commands != spec.model.n_actuators:
        raise FeatureMismatch(
            f"model fitted for {model.n_commands} actuators, "
            f"vehicle has {spec.model.n_actuators}"
        )
    return spec.with_residual(model.coefficients)
