"""
Task-space sliding-mode control laws, the adaptive gain law and the PD
baseline. The functions here are stateless; controllers under
``ntstsm.controllers`` own the state and call them once per tick.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from .rigidbody import nullspace_projector
from .rotation import ETA_FLOOR, error_angular_velocity, h_matrix, quat_error

logger = logging.getLogger(__name__)


def signed_power(v, p):
    """Odd extension |v|^p sign(v), element-wise"""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** p


def smooth_sign(s, k_s):
    return np.tanh(k_s * np.asarray(s, dtype=float))


def _is_odd(n):
    return isinstance(n, int) and n > 0 and n % 2 == 1


@dataclass(frozen=True)
class SlidingParams:
    beta: float = 1.0
    alpha_num: int = 9
    alpha_den: int = 7
    k_s: float = 30.0
    theta: float = 0.9
    gamma: float = 6.0
    Omega1: float = 1.5
    Omega2: float = 0.14

    def __post_init__(self):
        if not (_is_odd(self.alpha_num) and _is_odd(self.alpha_den)):
            raise ValueError("alpha must be a ratio of odd positive integers")
        if not 1 < self.alpha < 2:
            raise ValueError(f"alpha={self.alpha:.4f} must lie in (1, 2)")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        for name in ("beta", "k_s", "gamma", "Omega1", "Omega2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def alpha(self):
        return self.alpha_num / self.alpha_den

    @classmethod
    def from_settings(cls, settings, overrides=None):
        values = settings.getdict("SLIDING_PARAMS")
        values.update(overrides or {})
        return cls(**values)


@dataclass(frozen=True)
class AdaptiveParams:
    omega_a: float = 1000.0
    mu_a: float = 0.001
    eta_a: float = 0.1
    kappa1_min: float = 5.0
    kappa1_max: float = 200.0
    L_init: float = 1.0
    L_min: float = 1e-3

    def __post_init__(self):
        for name in ("omega_a", "mu_a", "eta_a", "kappa1_min", "L_init", "L_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.kappa1_min < self.kappa1_max:
            raise ValueError("kappa1_min must be below kappa1_max")

    @classmethod
    def from_settings(cls, settings, overrides=None):
        values = settings.getdict("ADAPTIVE_PARAMS")
        values.update(overrides or {})
        values.setdefault("L_min", settings.getfloat("L_MIN", 1e-3))
        return cls(**values)


@dataclass(frozen=True)
class SlidingControllerState:
    L: np.ndarray
    nu: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    s: np.ndarray

    @classmethod
    def initial(cls, p, a):
        L = np.full(6, a.L_init)
        kappa1, kappa2 = kappa_from_L(L, p)
        return cls(L=L, nu=np.zeros(6), kappa1=kappa1, kappa2=kappa2, s=np.zeros(6))


@dataclass(frozen=True)
class TrackingError:
    e: np.ndarray
    de: np.ndarray
    w_err: np.ndarray


def kappa_from_L(L, p):
    L = np.asarray(L, dtype=float)
    kappa1 = p.Omega1 * np.sqrt(2.0 * p.gamma * L / ((1.0 - p.theta) * p.Omega2))
    kappa2 = (p.theta + 1.0) / (1.0 - p.theta) * L
    return kappa1, kappa2


def L_from_kappa1(kappa1, p):
    kappa1 = np.asarray(kappa1, dtype=float)
    return (kappa1 / p.Omega1) ** 2 * (1.0 - p.theta) * p.Omega2 / (2.0 * p.gamma)


def kappa2_ratio(p):
    """c such that kappa2 = c * kappa1**2 for every L"""
    return p.Omega2 * (p.theta + 1.0) / (2.0 * p.gamma * p.Omega1 ** 2)


def gamma_factor(de, p):
    """Gamma = alpha beta |de|^(alpha - 1), element-wise"""
    return p.alpha * p.beta * np.abs(np.asarray(de, dtype=float)) ** (p.alpha - 1.0)


def tracking_error(x_hat, v_hat, traj, eta_floor=ETA_FLOOR):
    """Pose error e = (p~, eps~) and its rate de = H (p~_dot, w~)"""
    err = quat_error(x_hat.xi, traj.xi_d)
    H = h_matrix(err, eta_floor)
    v_hat = np.asarray(v_hat, dtype=float)
    dp = v_hat[:3] - traj.v_d
    w_err = error_angular_velocity(err, v_hat[3:], traj.w_d)
    e = np.concatenate((x_hat.p - traj.p_d, err.eps_t))
    de = H.apply(np.concatenate((dp, w_err)))
    return TrackingError(e, de, w_err), H


def sliding_surface(err, p):
    return err.e + p.beta * signed_power(err.de, p.alpha)


def adapt_gains(st, s, p, a, dt):
    abs_s = np.abs(s)
    dL = np.where(
        st.kappa1 >= a.kappa1_max,
        -a.eta_a,
        np.where(
            st.kappa1 <= a.kappa1_min,
            a.eta_a,
            a.omega_a * abs_s * np.sign(abs_s - a.mu_a),
        ),
    )
    L = np.maximum(st.L + dt * dL, a.L_min)
    kappa1, kappa2 = kappa_from_L(L, p)
    return replace(st, L=L, kappa1=kappa1, kappa2=kappa2, s=np.asarray(s))


def _task_command(dyn, traj, H, ddx_ref):
    return dyn.Mbar @ (traj.accel + H.solve(ddx_ref)) + dyn.Cbar + dyn.Gbar


def ntstsm_control(err, H, s, st, dyn, traj, p, dt, nu_max=100.0):
    """Terminal super-twisting wrench and the integrated state"""
    sm = smooth_sign(s, p.k_s)
    ddx_ref = (
        -signed_power(err.de, 2.0 - p.alpha) / (p.alpha * p.beta)
        - st.kappa1 * np.sqrt(np.abs(s)) * sm
        + st.nu
    )
    u = _task_command(dyn, traj, H, ddx_ref)
    nu = np.clip(st.nu - dt * st.kappa2 * sm, -nu_max, nu_max)
    return u, replace(st, nu=nu, s=np.asarray(s))


def pd_control(err, dyn, p_gains):
    kp_trans, kp_rot = p_gains
    kp = np.array([kp_trans] * 3 + [kp_rot] * 3, dtype=float)
    return -kp * err.e - 2.0 * np.sqrt(kp) * err.de + dyn.Cbar + dyn.Gbar


def ntsm_control(err, H, dyn, traj, p, kappa1):
    s1 = sliding_surface(err, p)
    ddx_ref = -signed_power(err.de, 2.0 - p.alpha) / (
        p.alpha * p.beta
    ) - kappa1 * smooth_sign(s1, p.k_s)
    return _task_command(dyn, traj, H, ddx_ref)


def linear_surface(err, p):
    return err.e + p.beta * err.de


def stsm_control(err, H, dyn, traj, p, st, dt, nu_max=100.0):
    """Super-twisting on the linear surface e + beta de.

    The integral term enters with the sign that makes it act against the
    surface, so nu converges to the lumped disturbance.
    """
    s2 = linear_surface(err, p)
    sm = smooth_sign(s2, p.k_s)
    ddx_ref = -st.kappa1 * np.sqrt(np.abs(s2)) * sm + st.nu
    u = _task_command(dyn, traj, H, ddx_ref)
    nu = np.clip(st.nu - dt * st.kappa2 * sm, -nu_max, nu_max)
    return u, replace(st, nu=nu, s=s2)


def joint_torque(u, dyn, G, dq, k_null=0.0):
    """tau = J^T u plus gravity and damping confined to the null space"""
    posture = np.asarray(G, dtype=float) - k_null * np.asarray(dq, dtype=float)
    return dyn.J.T @ u + nullspace_projector(dyn) @ posture


class TaskSpaceController:
    """Base class of the controllers discovered by ControllerLoader.

    Subclasses set ``name`` and implement ``compute``, returning the task-space
    wrench for one tick.
    """

    name = None

    def __init__(self, settings=None, sliding=None, adaptive=None, **kwargs):
        self.settings = settings
        self.sliding = sliding or SlidingParams()
        self.adaptive = adaptive or AdaptiveParams()
        self.eta_floor = ETA_FLOOR
        self.nu_max = 100.0
        if settings is not None:
            self.eta_floor = settings.getfloat("ETA_FLOOR", ETA_FLOOR)
            self.nu_max = settings.getfloat("NU_MAX", 100.0)
        for key, value in kwargs.items():
            setattr(self, key, value)
        self.reset()

    @classmethod
    def from_settings(cls, settings, sliding=None, adaptive=None, **kwargs):
        return cls(
            settings,
            sliding or SlidingParams.from_settings(settings),
            adaptive or AdaptiveParams.from_settings(settings),
            **kwargs,
        )

    @property
    def logger(self):
        return logging.getLogger(self.name)

    def reset(self):
        pass

    def step(self, x_hat, v_hat, traj, dyn, dt):
        err, H = tracking_error(x_hat, v_hat, traj, self.eta_floor)
        return self.compute(err, H, dyn, traj, dt), err

    def compute(self, err, H, dyn, traj, dt):
        raise NotImplementedError

    def telemetry(self):
        return {}

    def __repr__(self):
        return f"<{type(self).__name__} {self.name!r}>"
