"""
Desired task-space trajectories.

Translation follows a clamped cubic spline through the waypoints. Orientation
is blended per segment with the cubic Hermite weight applied to the scaled
angle-axis of the relative rotation. Desired angular velocity and acceleration
are recovered from backward differences of the sampled quaternions, which is
what the controller sees on the real interface.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

from .rotation import (
    Pose,
    UnitQuaternion,
    axis_to_quat,
    quat_conj,
    quat_error,
    quat_mul,
    quat_to_axis,
)

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = (
    ["t"]
    + [f"p_d_{a}" for a in "xyz"]
    + ["xi_d_eta"] + [f"xi_d_{a}" for a in "xyz"]
    + [f"v_d_{a}" for a in "xyz"]
    + [f"w_d_{a}" for a in "xyz"]
    + [f"a_d_{a}" for a in "xyz"]
    + [f"dw_d_{a}" for a in "xyz"]
)  # fmt: skip


def blend_weight(t, T):
    tau = min(max(t / T, 0.0), 1.0)
    return 3.0 * tau ** 2 - 2.0 * tau ** 3


def blend_weight_rate(t, T):
    tau = min(max(t / T, 0.0), 1.0)
    return 6.0 * (tau - tau ** 2) / T


@dataclass(frozen=True)
class SegmentSpec:
    x_d0: Pose
    x_dg: Pose
    T: float
    rotation: np.ndarray = field(init=False, repr=False, compare=False)
    spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("Segment duration must be positive")
        rotation = quat_to_axis(quat_mul(self.x_dg.xi, quat_conj(self.x_d0.xi)))
        if np.linalg.norm(rotation) >= math.pi - 1e-9:
            raise ValueError("Relative segment rotation must be below pi")
        spline = CubicSpline(
            [0.0, self.T], np.vstack((self.x_d0.p, self.x_dg.p)), bc_type="clamped"
        )
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "spline", spline)


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    p_d: np.ndarray
    xi_d: UnitQuaternion
    v_d: np.ndarray
    w_d: np.ndarray
    a_d: np.ndarray
    dw_d: np.ndarray

    @property
    def pose(self):
        return Pose(self.p_d, self.xi_d)

    @property
    def twist(self):
        return np.concatenate((self.v_d, self.w_d))

    @property
    def accel(self):
        return np.concatenate((self.a_d, self.dw_d))

    def as_row(self):
        return np.concatenate(
            (
                [self.t],
                self.p_d,
                self.xi_d.as_array(),
                self.v_d,
                self.w_d,
                self.a_d,
                self.dw_d,
            )
        )


def interp_translation(seg, t):
    t = min(max(t, 0.0), seg.T)
    return seg.spline(t), seg.spline(t, 1), seg.spline(t, 2)


def interp_quaternion(seg, t):
    W = blend_weight(t, seg.T)
    return quat_mul(axis_to_quat(W * seg.rotation), seg.x_d0.xi)


def hermite_angular_velocity(seg, t):
    """Analytic world-frame angular velocity of interp_quaternion"""
    return blend_weight_rate(t, seg.T) * seg.rotation


def desired_angular_velocity(xi_now, xi_prev, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    delta = quat_mul(xi_now, quat_conj(xi_prev))
    return (2.0 / dt) * delta.eps


def desired_angular_acceleration(w_now, w_prev, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    return (np.asarray(w_now, dtype=float) - np.asarray(w_prev, dtype=float)) / dt


def relative_waypoint(start, translation, rotation_deg):
    """Pose offset from ``start`` by a world translation and xyz Euler rotation"""
    x, y, z, w = Rotation.from_euler("xyz", rotation_deg, degrees=True).as_quat()
    xi = quat_mul(UnitQuaternion(w, (x, y, z)), start.xi)
    return Pose(start.p + np.asarray(translation, dtype=float), xi)


class Trajectory:
    """Piecewise trajectory holding the first pose before ``t_start`` and the
    last pose after the final waypoint."""

    def __init__(self, start_pose, waypoints, t_start=0.0):
        if not waypoints:
            raise ValueError("A trajectory needs at least one waypoint")
        self.t_start = float(t_start)
        poses = [start_pose] + [pose for pose, _ in waypoints]
        durations = [float(duration) for _, duration in waypoints]
        self.knots = self.t_start + np.concatenate(([0.0], np.cumsum(durations)))
        self.segments = [
            SegmentSpec(poses[k], poses[k + 1], durations[k])
            for k in range(len(durations))
        ]
        self.poses = poses
        self.spline = CubicSpline(
            self.knots, np.vstack([pose.p for pose in poses]), bc_type="clamped"
        )

    @classmethod
    def hold(cls, pose):
        return cls(pose, [(pose, 1.0)])

    @property
    def t_end(self):
        return float(self.knots[-1])

    def _segment(self, t):
        k = int(np.searchsorted(self.knots, t, side="right")) - 1
        return min(max(k, 0), len(self.segments) - 1)

    def translation(self, t):
        if t <= self.knots[0]:
            return self.poses[0].p.copy(), np.zeros(3), np.zeros(3)
        if t >= self.knots[-1]:
            return self.poses[-1].p.copy(), np.zeros(3), np.zeros(3)
        return self.spline(t), self.spline(t, 1), self.spline(t, 2)

    def orientation(self, t):
        if t <= self.knots[0]:
            return self.poses[0].xi
        if t >= self.knots[-1]:
            return self.poses[-1].xi
        k = self._segment(t)
        return interp_quaternion(self.segments[k], t - self.knots[k])

    def sample(self, t, dt):
        p_d, v_d, a_d = self.translation(t)
        xi_now = self.orientation(t)
        xi_prev = self.orientation(t - dt)
        xi_prev2 = self.orientation(t - 2.0 * dt)
        w_d = desired_angular_velocity(xi_now, xi_prev, dt)
        w_prev = desired_angular_velocity(xi_prev, xi_prev2, dt)
        dw_d = desired_angular_acceleration(w_d, w_prev, dt)
        return TrajectorySample(t, p_d, xi_now, v_d, w_d, a_d, dw_d)

    def to_frame(self, dt, t_end=None):
        t_end = self.t_end if t_end is None else t_end
        n = int(round(t_end / dt)) + 1
        rows = [self.sample(k * dt, dt).as_row() for k in range(n)]
        return pd.DataFrame(np.array(rows), columns=SAMPLE_COLUMNS)

    def export_csv(self, path, dt, t_end=None):
        self.to_frame(dt, t_end).to_csv(path, index=False, float_format="%.17g")


class ProximityGuard:
    """Warns when the measured orientation drifts beyond ``eps_bar`` of the
    desired one, once per excursion."""

    def __init__(self, eps_bar):
        self.eps_bar = eps_bar
        self.violating = False
        self.violations = 0

    def check(self, xi_d, xi_meas, t):
        magnitude = float(np.linalg.norm(quat_error(xi_meas, xi_d).eps_t))
        within = magnitude <= self.eps_bar
        if not within and not self.violating:
            self.violations += 1
            logger.warning(
                "Orientation error %.4f exceeds %.4f at t=%.3f s",
                magnitude,
                self.eps_bar,
                t,
            )
        elif within and self.violating:
            logger.info(
                "Orientation error back within %.4f at t=%.3f s", self.eps_bar, t
            )
        self.violating = not within
        return within
