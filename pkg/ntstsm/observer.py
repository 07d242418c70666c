"""
Third-order sliding-mode observer of the end-effector pose and twist.

The observer works in six coordinates: the translation and the world-frame
rotation vector of a propagated orientation estimate. Until its estimates
agree with the measurements the controller is fed the raw pose and an
exponentially averaged finite-difference velocity instead.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .control import signed_power
from .exceptions import ObserverDiverged
from .rotation import (
    Pose,
    UnitQuaternion,
    axis_to_quat,
    pose_difference,
    quat_conj,
    quat_mul,
    quat_to_axis,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObserverParams:
    Fbar: np.ndarray = field(default_factory=lambda: np.full(6, 20.0))
    k_o1: float = 200.0
    k_o2: float = 400.0
    alpha_e: float = 0.02
    eta_q: float = 0.5
    z_max: float = 50.0

    def __post_init__(self):
        Fbar = np.broadcast_to(np.asarray(self.Fbar, dtype=float), (6,)).copy()
        object.__setattr__(self, "Fbar", Fbar)
        if np.any(Fbar <= 0):
            raise ValueError("Fbar must be positive")
        for name in ("k_o1", "k_o2", "eta_q", "z_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.alpha_e <= 1:
            raise ValueError("alpha_e must lie in (0, 1]")

    @classmethod
    def from_settings(cls, settings, overrides=None):
        values = settings.getdict("OBSERVER_PARAMS")
        values.update(overrides or {})
        values.setdefault("z_max", settings.getfloat("Z_HAT_MAX", 50.0))
        return cls(**values)

    @property
    def alpha_o0(self):
        return 1.1 * self.Fbar

    @property
    def alpha_o1(self):
        return 1.5 * np.sqrt(self.Fbar)

    @property
    def alpha_o2(self):
        return 1.9 * np.cbrt(self.Fbar)


@dataclass(frozen=True)
class ObserverState:
    g1_hat: np.ndarray
    g2_hat: np.ndarray
    z_hat: np.ndarray
    xi_hat: UnitQuaternion
    ema_vel: np.ndarray
    last_x: Pose
    converged: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=bool))

    @classmethod
    def initial(cls, x0):
        """Warm start on the first measurement with zero velocity"""
        return cls(
            g1_hat=np.concatenate((x0.p, quat_to_axis(x0.xi))),
            g2_hat=np.zeros(6),
            z_hat=np.zeros(6),
            xi_hat=x0.xi,
            ema_vel=np.zeros(6),
            last_x=x0,
        )

    @property
    def pose(self):
        return Pose(self.g1_hat[:3], self.xi_hat)


class Selection(NamedTuple):
    pose: Pose
    twist: np.ndarray
    pose_branch: np.ndarray
    twist_branch: np.ndarray


def innovation(st, x_meas):
    """Measurement minus estimate, rotation as a world-frame rotation vector"""
    return np.concatenate(
        (
            x_meas.p - st.g1_hat[:3],
            quat_to_axis(quat_mul(x_meas.xi, quat_conj(st.xi_hat))),
        )
    )


def observer_step(st, params, x_meas, u, dyn, dt):
    """One explicit Euler step of the observer.

    On the orientation channels the innovation is the world-frame rotation
    vector of ξ_meas ⊗ ξ̂*, not the vector part ε̃ of the quaternion error
    (ε̃ is half of it for small errors). g2_hat's rotational part is thus an
    angular velocity, and ξ̂ is propagated by it on the unit sphere.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    e1 = innovation(st, x_meas)
    dg1 = st.g2_hat + params.alpha_o2 * signed_power(e1, 2.0 / 3.0)
    dg1 += params.k_o2 * e1
    w = dg1 - st.g2_hat
    model = dyn.Mbar_inv @ (np.asarray(u, dtype=float) - dyn.Cbar - dyn.Gbar)
    dg2 = model + params.alpha_o1 * signed_power(w, 0.5) + params.k_o1 * e1
    dg2 += st.z_hat
    dz = params.alpha_o0 * np.sign(w)

    xi_hat = quat_mul(axis_to_quat(dt * dg1[3:]), st.xi_hat)
    p_hat = st.g1_hat[:3] + dt * dg1[:3]
    g2_hat = st.g2_hat + dt * dg2
    z_hat = np.clip(st.z_hat + dt * dz, -params.z_max, params.z_max)
    if not (np.all(np.isfinite(p_hat)) and np.all(np.isfinite(g2_hat))):
        raise ObserverDiverged("Observer state became non-finite")
    return replace(
        st,
        g1_hat=np.concatenate((p_hat, quat_to_axis(xi_hat))),
        g2_hat=g2_hat,
        z_hat=z_hat,
        xi_hat=xi_hat,
    )


def ema_velocity(st, x_meas, dt, alpha_e=0.02):
    """Exponentially averaged finite-difference twist since ``st.last_x``"""
    if not dt > 0:
        raise ValueError("dt must be positive")
    raw = pose_difference(x_meas, st.last_x) / dt
    return alpha_e * raw + (1.0 - alpha_e) * st.ema_vel


def select_outputs(st, x_meas, params):
    """Per-channel choice between observer estimates and raw signals.

    Orientation channels switch together so the controller never mixes an
    estimated and a measured quaternion.
    """
    gap = np.abs(innovation(st, x_meas))
    pose_branch = gap <= params.eta_q
    pose_branch[3:] = np.all(pose_branch[3:])
    twist_branch = np.abs(st.g2_hat - st.ema_vel) <= params.eta_q
    twist_branch[3:] = np.all(twist_branch[3:])

    p = np.where(pose_branch[:3], st.g1_hat[:3], x_meas.p)
    xi = st.xi_hat if pose_branch[3] else x_meas.xi
    twist = np.where(twist_branch, st.g2_hat, st.ema_vel)
    return Selection(Pose(p, xi), twist, pose_branch, twist_branch)


class TosmObserver:
    """Owns the observer state of one run."""

    def __init__(self, params=None):
        self.params = params or ObserverParams()
        self.state = None

    def reset(self, x0):
        self.state = ObserverState.initial(x0)

    def update(self, x_meas, u, dyn, dt):
        if self.state is None:
            self.reset(x_meas)
        st = self.state
        ema = ema_velocity(st, x_meas, dt, self.params.alpha_e)
        st = replace(st, ema_vel=ema, last_x=x_meas)
        self.state = observer_step(st, self.params, x_meas, u, dyn, dt)
        return self.state

    def select(self, x_meas):
        selection = select_outputs(self.state, x_meas, self.params)
        converged = selection.pose_branch & selection.twist_branch
        if np.all(converged) and not np.all(self.state.converged):
            logger.debug("Observer estimates selected on all channels")
        self.state = replace(self.state, converged=converged)
        return selection
