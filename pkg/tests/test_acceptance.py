"""
Long-running checks on the full desk task and on large random samples.
Deselected by default; run with ``pytest -m slow``.
"""
from dataclasses import replace

import numpy as np
import pytest

from ntstsm.conf import get_project_settings
from ntstsm.control import (
    AdaptiveParams,
    SlidingParams,
    kappa2_ratio,
    tracking_error,
)
from ntstsm.gainlab import (
    StabilityQuery,
    build_Qr,
    convergence_rates,
    ellipse_center,
    ellipse_condition,
    ellipse_margin,
    lyapunov_v1,
    sweep_region,
    tracking_regions,
)
from ntstsm.metrics import compute_metrics
from ntstsm.observer import TosmObserver
from ntstsm.rigidbody import (
    TaskDynamics,
    coriolis_matrix,
    forward_kinematics,
    jacobian,
    load_chain,
    mass_matrix,
)
from ntstsm.rotation import Pose, UnitQuaternion, quat_conj, quat_mul, quat_to_axis
from ntstsm.simlab import ExperimentConfig, reaching_time, run_experiment

pytestmark = pytest.mark.slow

settings = get_project_settings("ntstsm.settings.base")
p = SlidingParams()
a = AdaptiveParams()
arm = load_chain("franka_like")
rng = np.random.default_rng(2024)


@pytest.fixture(scope="module")
def desk_runs():
    cfg = ExperimentConfig.load("desk_task", settings)
    names = ["nt_stsm", "nt_stsm_constrained", "ntsm", "stsm", "pd_med"]
    return {name: run_experiment(cfg.with_controller(name), settings) for name in names}


@pytest.fixture(scope="module")
def desk_metrics(desk_runs):
    return {name: compute_metrics(log) for name, log in desk_runs.items()}


@pytest.fixture(scope="module")
def disturbed_metrics():
    cfg = ExperimentConfig.load("desk_task_disturbed", settings)
    quiet = replace(cfg, disturbances=[])
    metrics = {}
    for name in ("nt_stsm", "pd_med"):
        metrics[name] = (
            compute_metrics(run_experiment(cfg.with_controller(name), settings)),
            compute_metrics(run_experiment(quiet.with_controller(name), settings)),
        )
    return metrics


def test_dynamics_identities_on_random_states():
    for _ in range(200):
        q = rng.uniform(0.8 * arm.lower, 0.8 * arm.upper)
        dq = rng.normal(scale=0.5, size=7)
        M = mass_matrix(arm, q)
        assert np.max(np.abs(M - M.T)) < 1e-12

        h = 1e-6
        dM = np.zeros((7, 7))
        J = jacobian(arm, q)
        for i in range(7):
            step = h * np.eye(7)[i]
            dM += dq[i] * (mass_matrix(arm, q + step) - mass_matrix(arm, q - step))
            ahead = forward_kinematics(arm, q + step)
            behind = forward_kinematics(arm, q - step)
            column = np.concatenate(
                (
                    ahead.p - behind.p,
                    quat_to_axis(quat_mul(ahead.xi, quat_conj(behind.xi))),
                )
            ) / (2 * h)
            scale = max(1.0, np.linalg.norm(column))
            assert np.linalg.norm(column - J[:, i]) <= 1e-6 * scale
        x = rng.normal(size=7)
        N = dM / (2 * h) - 2.0 * coriolis_matrix(arm, q, dq)
        assert abs(x @ N @ x) < 1e-6


def test_ellipse_equivalence_on_random_queries():
    for _ in range(10 ** 4):
        gamma = rng.uniform(1.2, 20.0)
        theta = rng.uniform(max(0.05, 1.0 / gamma + 1e-3), 0.99)
        q = StabilityQuery(
            rng.uniform(0.01, 30.0),
            rng.uniform(0.01, 10.0),
            gamma,
            theta,
            rng.uniform(0.01, 5.0),
            rng.uniform(1e-3, 10.0),
        )
        lam_min = np.min(np.linalg.eigvalsh(build_Qr(q)))
        if abs(lam_min) < 1e-12 or abs(ellipse_margin(q)) < 1e-12:
            continue
        assert ellipse_condition(q) == (lam_min > 0)


def test_points_inside_only_the_larger_region_exist():
    omega1_c, omega2_c = ellipse_center(p.gamma, p.theta, 0.5)
    grid = {
        "Omega1_min": 0.0,
        "Omega1_max": 2.0 * omega1_c,
        "Omega2_min": 0.0,
        "Omega2_max": 2.0 * omega2_c,
        "n": 201,
    }
    region = sweep_region(p.gamma, p.theta, [0.5, 0.25], grid)
    wide = region[region["Gamma"] == 0.5]["inside"].to_numpy()
    narrow = region[region["Gamma"] == 0.25]["inside"].to_numpy()
    assert np.any(wide & ~narrow)
    assert np.any(wide & narrow)


def test_gain_identity_at_every_tick(desk_runs):
    log = desk_runs["nt_stsm"]
    kappa1 = log.group("kappa1")
    kappa2 = log.group("kappa2")
    assert np.allclose(kappa2, kappa2_ratio(p) * kappa1 ** 2, rtol=1e-9, atol=0)


def test_steady_state_within_bounds(desk_runs):
    cfg = ExperimentConfig.load("desk_task", settings)
    log = desk_runs["nt_stsm"]
    steady = np.flatnonzero(log.t >= 9.5)
    assert np.all(np.abs(log.group("s")[steady]) <= 1.1 * a.mu_a)

    e_bound, de_bound = tracking_regions(p, a)
    q0 = np.asarray(cfg.initial_q or settings["INITIAL_Q"], dtype=float)
    trajectory = cfg.build_trajectory(forward_kinematics(arm, q0))
    q, dq = log.group("q"), log.group("dq")
    for k in steady:
        sample = trajectory.sample(log.t[k], cfg.dt)
        err, _ = tracking_error(
            forward_kinematics(arm, q[k]), jacobian(arm, q[k]) @ dq[k], sample
        )
        assert np.all(np.abs(err.e) <= e_bound)
        assert np.all(np.abs(err.de) <= de_bound)


def test_reaching_time_below_bound(desk_runs):
    log = desk_runs["nt_stsm"]
    query = StabilityQuery.from_params(p, 1.0)
    s, nu, L = log.group("s"), log.group("nu"), log.group("L")
    V1_0 = np.max(lyapunov_v1(s[0], nu[0], L[0], L[-1], query))
    _, _, t_reach = convergence_rates(query, a, V1_0)
    assert reaching_time(log, 1.1 * a.mu_a) <= t_reach


def test_effort_ordering(desk_metrics):
    tv = {name: m.tv_tau for name, m in desk_metrics.items()}
    assert tv["nt_stsm"] < tv["pd_med"] < tv["stsm"]
    assert tv["ntsm"] >= 5.0 * tv["nt_stsm"]


def test_tracking_ordering(desk_metrics):
    rmse = {name: m.rmse_p for name, m in desk_metrics.items()}
    assert rmse["nt_stsm"] < rmse["pd_med"]
    assert rmse["nt_stsm_constrained"] >= 1.25 * rmse["nt_stsm"]


def test_disturbance_rejection(disturbed_metrics):
    nt, nt_quiet = disturbed_metrics["nt_stsm"]
    pd, pd_quiet = disturbed_metrics["pd_med"]
    assert nt.tau_avg == pytest.approx(pd.tau_avg, rel=0.1)
    assert nt.rmse_p - nt_quiet.rmse_p < pd.rmse_p - pd_quiet.rmse_p


def test_observer_tracks_sinusoid():
    dt = 1e-3
    free = TaskDynamics(
        Mbar=np.eye(6),
        Cbar=np.zeros(6),
        Gbar=np.zeros(6),
        J=np.eye(6),
        Jdot=np.zeros((6, 6)),
        Mbar_inv=np.eye(6),
        Jbar=np.eye(6),
    )
    amplitude, omega = 0.05, 2.0 * np.pi * 0.5
    observer = TosmObserver()
    estimates = []
    for k in range(3000):
        t = k * dt
        x = Pose(
            [0.4 + amplitude * np.sin(omega * t), 0.0, 0.4],
            UnitQuaternion.identity(),
        )
        accel = np.zeros(6)
        accel[0] = -amplitude * omega ** 2 * np.sin(omega * t)
        observer.update(x, accel, free, dt)
        selection = observer.select(x)
        velocity = amplitude * omega * np.cos(omega * (t + dt))
        estimates.append(
            (t, abs(observer.state.g2_hat[0] - velocity), selection.twist_branch[0])
        )
    t, err, branch = (np.array(column) for column in zip(*estimates))
    assert np.max(err[t >= 1.0]) < 1e-2
    assert np.mean(branch[t >= 1.0]) >= 0.95
