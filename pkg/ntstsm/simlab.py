"""
Closed-loop experiment harness.

Each tick does the following in order:

- The plant pose is measured through the loop middlewares.
- The observer is fed the previous tick's wrench.
- The controller computes a new wrench from the selected estimates.
- The resulting joint torque is applied from the next tick on.
"""
import glob
import logging
import math
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .conf import get_project_settings
from .control import AdaptiveParams, SlidingParams, joint_torque
from .exceptions import (
    ConfigError,
    EmptyLog,
    NtstsmError,
    SimulationDiverged,
)
from .loader import ControllerLoader
from .metrics import (
    DISTURBANCE_COLUMNS,
    TRACKING_COLUMNS,
    RunLogRecorder,
    compute_metrics,
    format_table,
)
from .middleware import DisturbanceEvent, LoopMiddlewareManager, NoiseModel
from .observer import ObserverParams, TosmObserver
from .rigidbody import (
    DampingRamp,
    FrictionModel,
    JointState,
    clip_torque,
    evaluate,
    joint_space_dynamics,
    load_chain,
    project_task_space,
    step_forward_dynamics,
)
from .rotation import Pose, UnitQuaternion, pose_difference
from .trajgen import ProximityGuard, Trajectory, relative_waypoint

logger = logging.getLogger(__name__)

EXPERIMENTS_DIR = os.path.join(os.path.dirname(__file__), "data", "experiments")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    controller: str
    chain: str = "franka_like"
    friction: dict = field(default_factory=dict)
    sliding: SlidingParams = field(default_factory=SlidingParams)
    adaptive: AdaptiveParams = field(default_factory=AdaptiveParams)
    observer: ObserverParams = field(default_factory=ObserverParams)
    waypoints: list = field(default_factory=list)
    t_start: float = 1.0
    disturbances: list = field(default_factory=list)
    noise: NoiseModel = field(default_factory=NoiseModel)
    dt: float = 1e-3
    duration: float = 10.0
    seed: int = 0
    initial_q: list = None
    integrator: str = "semi_implicit"
    mass_scale: float = 1.0
    saturation: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.duration >= 0:
            raise ConfigError(f"duration must be non-negative, got {self.duration}")
        if not self.mass_scale > 0:
            raise ConfigError("mass_scale must be positive")
        if self.integrator not in ("semi_implicit", "rk4"):
            raise ConfigError(f"Unknown integrator {self.integrator!r}")
        for i, waypoint in enumerate(self.waypoints):
            if not float(waypoint.get("duration", 0.0)) > 0:
                raise ConfigError(f"waypoints[{i}].duration must be positive")
        if not self.adaptive.mu_a > self.noise.eps_c:
            raise ConfigError(
                f"adaptive.mu_a={self.adaptive.mu_a} must exceed the noise bound "
                f"noise.eps_c={self.noise.eps_c}"
            )

    @property
    def ticks(self):
        return int(round(self.duration / self.dt))

    @classmethod
    def from_dict(cls, data, settings=None):
        """Build a config from a parsed TOML table; missing keys use settings"""
        settings = settings or get_project_settings()
        data = dict(data)
        known = {f.name for f in fields(cls)} | {"trajectory"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown experiment keys: {', '.join(unknown)}")
        if "controller" not in data:
            raise ConfigError("Missing 'controller'")
        try:
            kwargs = {
                "name": data.get("name", data["controller"]),
                "controller": data["controller"],
                "chain": data.get("chain", settings.get("CHAIN")),
                "friction": _friction(data.get("friction"), settings),
                "sliding": SlidingParams.from_settings(settings, data.get("sliding")),
                "adaptive": AdaptiveParams.from_settings(
                    settings, data.get("adaptive")
                ),
                "observer": ObserverParams.from_settings(
                    settings, data.get("observer")
                ),
                "noise": NoiseModel.from_dict(data.get("noise", settings["NOISE"])),
                "disturbances": _disturbances(data.get("disturbances"), settings),
                "dt": float(data.get("dt", settings.getfloat("DT"))),
                "integrator": data.get("integrator", settings.get("INTEGRATOR")),
                "initial_q": list(data.get("initial_q", settings["INITIAL_Q"])),
                "saturation": bool(
                    data.get("saturation", settings.getbool("TORQUE_SATURATION"))
                ),
            }
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
        trajectory = data.get("trajectory", {})
        kwargs["t_start"] = float(
            trajectory.get("t_start", settings.getfloat("TRAJECTORY_START"))
        )
        kwargs["waypoints"] = [
            dict(w) for w in trajectory.get("waypoints", [settings["DESK_MOTION"]])
        ]
        for key in ("duration", "seed", "mass_scale"):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)

    @classmethod
    def load(cls, source, settings=None):
        """Load from a TOML path or the name of a packaged experiment"""
        path = source
        if not os.path.exists(path):
            path = os.path.join(EXPERIMENTS_DIR, f"{source}.toml")
        if not os.path.exists(path):
            raise ConfigError(f"Experiment {source!r} not found")
        with open(path, "rb") as f:
            data = tomllib.load(f)
        return cls.from_dict(data, settings)

    def with_controller(self, controller, name=None):
        return replace(self, controller=controller, name=name or controller)

    def build_trajectory(self, start):
        waypoints = []
        for entry in self.waypoints:
            if "p" in entry:
                pose = Pose(
                    np.asarray(entry["p"], dtype=float),
                    UnitQuaternion.from_array(entry["xi"]),
                )
            else:
                pose = relative_waypoint(
                    start,
                    entry.get("translation", [0.0, 0.0, 0.0]),
                    entry.get("rotation_deg", [0.0, 0.0, 0.0]),
                )
            waypoints.append((pose, float(entry["duration"])))
        if not waypoints:
            return Trajectory.hold(start)
        return Trajectory(start, waypoints, self.t_start)


def _friction(value, settings):
    profiles = settings.getdict("FRICTION_PROFILES")
    value = settings.get("FRICTION") if value is None else value
    if isinstance(value, str):
        if value not in profiles:
            raise ConfigError(f"Unknown friction profile {value!r}")
        return dict(profiles[value])
    return dict(value)


def _disturbances(value, settings):
    schedules = settings.getdict("DISTURBANCE_SCHEDULES")
    value = "none" if value is None else value
    if isinstance(value, str):
        if value not in schedules:
            raise ConfigError(f"Unknown disturbance schedule {value!r}")
        value = schedules[value]
    return [DisturbanceEvent(**event) for event in value]


def _run_seed(cfg, master_seed):
    return np.random.SeedSequence([int(master_seed), int(cfg.seed)])


def _diverged(recorder, tick, t, error, tail):
    log = recorder.to_runlog()
    logger.error(
        "Run diverged at tick %d (t=%.3f s): %s\nLast %d ticks:\n%s",
        tick,
        t,
        error,
        tail,
        log.tail(tail).frame.to_string(),
    )
    return SimulationDiverged(f"Diverged at t={t:.3f} s: {error}", log=log, tick=tick)


def run_experiment(cfg, settings=None, master_seed=0):
    """Run one closed-loop experiment and return its RunLog"""
    settings = settings or get_project_settings()
    if cfg.ticks == 0:
        raise EmptyLog(f"Experiment {cfg.name!r} has zero duration")
    rng = np.random.default_rng(_run_seed(cfg, master_seed))
    plant = load_chain(cfg.chain)
    plant.check_task_space()
    model = plant if cfg.mass_scale == 1.0 else plant.scaled(cfg.mass_scale)
    friction = FrictionModel.from_profile(cfg.friction, plant.n)
    try:
        controller = ControllerLoader(settings).create(
            cfg.controller, sliding=cfg.sliding, adaptive=cfg.adaptive
        )
    except KeyError as e:
        raise ConfigError(e.args[0]) from e
    observer = TosmObserver(cfg.observer)
    middlewares = LoopMiddlewareManager.from_settings(settings, cfg, rng)
    ramp = DampingRamp.from_settings(settings)
    guard = ProximityGuard(settings.getfloat("EPS_BAR", 0.1))
    k_null = settings.getfloat("NULLSPACE_DAMPING", 0.0)
    band = settings.getfloat("STICTION_BAND", 1e-3)
    v_c = settings.getfloat("FRICTION_COULOMB_VELOCITY", 1.0)
    tail = settings.getint("DIVERGENCE_TAIL", 100)

    initial_q = settings["INITIAL_Q"] if cfg.initial_q is None else cfg.initial_q
    q0 = np.asarray(initial_q, dtype=float)
    if q0.shape != (plant.n,):
        raise ConfigError(f"initial_q must have {plant.n} entries")
    state = JointState(q0, np.zeros(plant.n))
    trajectory = cfg.build_trajectory(evaluate(plant, q0, state.dq).pose)
    recorder = RunLogRecorder(plant.n)
    dt = cfg.dt

    logger.info(
        "Running %s with %s for %.3f s (%d ticks)",
        cfg.name,
        controller.name,
        cfg.duration,
        cfg.ticks,
    )
    started = time.perf_counter()
    tau_applied = None
    u_prev = None
    x_prev = None
    saturated = damped = False
    t = 0.0
    for k in range(cfg.ticks):
        t = k * dt
        try:
            jd = evaluate(model, state.q, state.dq)
            if model is plant:
                plant_dynamics = (jd.M, jd.cqd, jd.G)
            else:
                plant_dynamics = joint_space_dynamics(plant, state.q, state.dq)
            dyn = project_task_space(jd, state.dq, ramp=ramp)
            if tau_applied is None:
                tau_applied = plant_dynamics[2].copy()
                u_prev = dyn.Cbar + dyn.Gbar

            x_meas = middlewares.measure(jd.pose, t)
            if k == 0:
                observer.reset(x_meas)
            observer.update(x_meas, u_prev, dyn, dt)
            selection = observer.select(x_meas)
            sample = trajectory.sample(t, dt)
            guard.check(sample.xi_d, x_meas.xi, t)
            u, _ = controller.step(selection.pose, selection.twist, sample, dyn, dt)

            tau_cmd = joint_torque(u, dyn, jd.G, state.dq, k_null)
            clipped = False
            if cfg.saturation:
                tau_cmd, clipped = clip_torque(plant, tau_cmd)
            if clipped != saturated:
                if clipped:
                    logger.warning("Torque saturated at t=%.3f s", t)
                else:
                    logger.info("Torque back within limits at t=%.3f s", t)
                saturated = clipped
            if (dyn.damping > 0) != damped:
                damped = dyn.damping > 0
                if damped:
                    logger.warning(
                        "Jacobian damping %.4f active at t=%.3f s (sigma_min %.4f)",
                        dyn.damping,
                        t,
                        dyn.sigma_min,
                    )
                else:
                    logger.info("Jacobian damping released at t=%.3f s", t)

            f_ext, disturbed = middlewares.external_wrench(t)
            v_raw = None if x_prev is None else pose_difference(x_meas, x_prev) / dt
            telemetry = controller.telemetry()
            obs = observer.state
            recorder.append(
                t,
                q=state.q,
                dq=state.dq,
                p=jd.pose.p,
                xi=jd.pose.xi.as_array(),
                p_d=sample.p_d,
                xi_d=sample.xi_d.as_array(),
                u=u,
                tau=tau_applied,
                tau_g=plant_dynamics[2],
                g1_hat=obs.g1_hat,
                g2_hat=obs.g2_hat,
                z_hat=obs.z_hat,
                v_hat=selection.twist,
                v_raw=v_raw,
                pose_branch=selection.pose_branch,
                twist_branch=selection.twist_branch,
                f_ext=f_ext,
                disturbance_active=disturbed,
                damping=dyn.damping,
                saturated=clipped,
                **telemetry,
            )

            state = step_forward_dynamics(
                plant,
                friction,
                state,
                tau_applied,
                jd.J.T @ f_ext,
                dt,
                method=cfg.integrator,
                band=band,
                coulomb_velocity=v_c,
                dynamics=plant_dynamics,
            )
            tau_applied = tau_cmd
            u_prev = u
            x_prev = x_meas
        except (NtstsmError, FloatingPointError, np.linalg.LinAlgError) as e:
            raise _diverged(recorder, k, t, e, tail) from e

    log = recorder.to_runlog()
    logger.info(
        "Finished %s: %d ticks in %.2f s wall time",
        cfg.name,
        len(log),
        time.perf_counter() - started,
    )
    return log


def _run_row(cfg, settings, master_seed):
    try:
        return cfg.name, compute_metrics(run_experiment(cfg, settings, master_seed))
    except NtstsmError as e:
        logging.getLogger(__name__).error("Run %s failed: %s", cfg.name, e)
        return cfg.name, f"{type(e).__name__}: {e}"


def _unique_names(cfgs):
    seen = {}
    named = []
    for cfg in cfgs:
        count = seen.get(cfg.name, 0)
        seen[cfg.name] = count + 1
        named.append(cfg if count == 0 else replace(cfg, name=f"{cfg.name}_{count}"))
    return named


def compare(cfgs, settings=None, master_seed=0, workers=None, reference=None):
    """Run every config and tabulate its metrics, one row per config name.

    A failing run leaves its metric cells empty and its message in the
    ``error`` column. Returns the table and the reports by name.
    """
    settings = settings or get_project_settings()
    cfgs = _unique_names(cfgs)
    workers = workers or settings.getint("COMPARE_WORKERS", 1)
    workers = max(1, min(workers, len(cfgs)))
    if reference is None:
        reference = settings.get("COMPARE_REFERENCE")
    logger.info("Comparing %d runs on %d workers", len(cfgs), workers)
    if workers == 1:
        results = [_run_row(cfg, settings, master_seed) for cfg in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_row, cfg, settings, master_seed) for cfg in cfgs
            ]
            results = [future.result() for future in futures]
    rows = dict(results)
    columns = settings.get("COMPARE_COLUMNS")
    if columns is None:
        disturbed = any(cfg.disturbances for cfg in cfgs)
        columns = DISTURBANCE_COLUMNS if disturbed else TRACKING_COLUMNS
    return format_table(rows, reference=reference, columns=columns), rows


def load_configs(source, settings=None):
    """Configs from a directory of TOML files, a single file or a preset name"""
    if os.path.isdir(source):
        paths = sorted(glob.glob(os.path.join(source, "*.toml")))
        if not paths:
            raise ConfigError(f"No experiment files in {source}")
        return [ExperimentConfig.load(path, settings) for path in paths]
    return [ExperimentConfig.load(source, settings)]


def reaching_time(log, mu_a, axis=None):
    """First time after which every |s_i| stays within ``mu_a``"""
    s = np.abs(log.group("s"))
    if axis is not None:
        s = s[:, [axis]]
    outside = np.flatnonzero(np.any(s > mu_a, axis=1))
    if len(outside) == 0:
        return float(log.t[0])
    if outside[-1] == len(log) - 1:
        return math.inf
    return float(log.t[outside[-1] + 1])
