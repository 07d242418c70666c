"""
Unit-quaternion algebra for task-space orientation control.

Quaternions are stored as a scalar part ``eta`` and vector part ``eps`` and are
always serialized in the order (eta, eps_x, eps_y, eps_z).
"""
import math
from dataclasses import InitVar, dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import OrientationErrorTooLarge

ETA_FLOOR = 0.1
SMALL_ANGLE = 1e-8


def skew(v):
    """Matrix [v] such that [v] @ w == cross(v, w)"""
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]], dtype=float
    )


@dataclass(frozen=True)
class UnitQuaternion:
    eta: float
    eps: np.ndarray
    canonical: InitVar[bool] = True

    def __post_init__(self, canonical):
        eps = np.asarray(self.eps, dtype=float).reshape(3)
        eta = float(self.eta)
        norm = math.sqrt(eta * eta + float(eps @ eps))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("Quaternion must have a finite, non-zero norm")
        eta, eps = eta / norm, eps / norm
        if canonical and eta < 0.0:
            eta, eps = -eta, -eps
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def identity(cls):
        return cls(1.0, np.zeros(3))

    @classmethod
    def from_array(cls, values, canonical=True):
        values = np.asarray(values, dtype=float)
        return cls(values[0], values[1:4], canonical)

    @classmethod
    def from_matrix(cls, R):
        x, y, z, w = Rotation.from_matrix(R).as_quat()
        return cls(w, (x, y, z))

    def as_array(self):
        return np.concatenate(([self.eta], self.eps))

    def conj(self):
        return quat_conj(self)

    def matrix(self):
        return quat_to_matrix(self)

    def __neg__(self):
        return UnitQuaternion(-self.eta, -self.eps, canonical=False)


@dataclass(frozen=True)
class QuatError:
    eta_t: float
    eps_t: np.ndarray

    def as_array(self):
        return np.concatenate(([self.eta_t], self.eps_t))


@dataclass(frozen=True)
class HMatrix:
    """Block map (p_dot_err, w_err) -> (p_dot_err, eps_err_dot)."""

    eta_t: float
    eps_t: np.ndarray

    @property
    def rot(self):
        return 0.5 * (self.eta_t * np.eye(3) + skew(self.eps_t))

    @property
    def rot_inv(self):
        # closed-form inverse of (eta I + [eps]) for a unit quaternion
        eta, eps = self.eta_t, self.eps_t
        inner = eta * eta * np.eye(3) - eta * skew(eps) + np.outer(eps, eps)
        return 2.0 * inner / eta

    @property
    def det_rot(self):
        return float(np.linalg.det(self.rot))

    @property
    def matrix(self):
        H = np.eye(6)
        H[3:, 3:] = self.rot
        return H

    def inverse(self):
        H_inv = np.eye(6)
        H_inv[3:, 3:] = self.rot_inv
        return H_inv

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        return np.concatenate((v[:3], self.rot @ v[3:]))

    def solve(self, v):
        v = np.asarray(v, dtype=float)
        return np.concatenate((v[:3], self.rot_inv @ v[3:]))


@dataclass(frozen=True)
class Pose:
    p: np.ndarray
    xi: UnitQuaternion

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))

    def as_vector(self):
        return np.concatenate((self.p, self.xi.as_array()))

    @classmethod
    def from_vector(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values[:3], UnitQuaternion.from_array(values[3:7]))


def quat_mul(a, b, canonical=True):
    eta = a.eta * b.eta - float(a.eps @ b.eps)
    eps = a.eta * b.eps + b.eta * a.eps + np.cross(a.eps, b.eps)
    return UnitQuaternion(eta, eps, canonical)


def quat_conj(a):
    return UnitQuaternion(a.eta, -a.eps, canonical=False)


def quat_dot(a, b):
    return a.eta * b.eta + float(a.eps @ b.eps)


def quat_to_matrix(q):
    x, y, z = q.eps
    return Rotation.from_quat([x, y, z, q.eta]).as_matrix()


def rotate_vector(q, v):
    v = np.asarray(v, dtype=float)
    t = 2.0 * np.cross(q.eps, v)
    return v + q.eta * t + np.cross(q.eps, t)


def quat_to_axis(xi):
    """Scaled angle-axis vector of a unit quaternion, |result| <= pi"""
    eta, eps = xi.eta, xi.eps
    if eta < 0.0:
        eta, eps = -eta, -eps
    n = math.sqrt(float(eps @ eps))
    if n < 0.5 * SMALL_ANGLE:
        return 2.0 * eps / eta
    angle = 2.0 * math.atan2(n, eta)
    return angle * eps / n


def axis_to_quat(theta, canonical=True):
    theta = np.asarray(theta, dtype=float).reshape(3)
    angle = math.sqrt(float(theta @ theta))
    if angle < SMALL_ANGLE:
        return UnitQuaternion(
            1.0 - angle * angle / 8.0, 0.5 * theta * (1.0 - angle * angle / 24.0)
        )
    half = 0.5 * angle
    return UnitQuaternion(math.cos(half), math.sin(half) * theta / angle, canonical)


def quat_error(measured, desired):
    eta_m, eps_m = measured.eta, measured.eps
    eta_d, eps_d = desired.eta, desired.eps
    eta_t = eta_m * eta_d + float(eps_m @ eps_d)
    eps_t = -eta_m * eps_d + eta_d * eps_m - np.cross(eps_m, eps_d)
    norm = math.sqrt(eta_t * eta_t + float(eps_t @ eps_t))
    eta_t, eps_t = eta_t / norm, eps_t / norm
    if eta_t < 0.0:
        eta_t, eps_t = -eta_t, -eps_t
    return QuatError(eta_t, eps_t)


def h_matrix(err, eta_floor=ETA_FLOOR):
    if abs(err.eta_t) < eta_floor:
        raise OrientationErrorTooLarge(
            f"Orientation error scalar part {err.eta_t:.4f} is below {eta_floor}"
        )
    return HMatrix(err.eta_t, np.array(err.eps_t, dtype=float))


def error_angular_velocity(err, w_hat, w_d):
    """Angular velocity error w~ with eps~_dot = 1/2 (eta~ I + [eps~]) w~"""
    q_err = UnitQuaternion(err.eta_t, err.eps_t, canonical=False)
    return rotate_vector(quat_conj(q_err), w_hat) - np.asarray(w_d, dtype=float)


def pose_difference(x_now, x_prev):
    """Translation change and world-frame rotation vector from x_prev to x_now"""
    dp = x_now.p - x_prev.p
    return np.concatenate((dp, quat_to_axis(quat_mul(x_now.xi, quat_conj(x_prev.xi)))))
