"""
Kinematics and dynamics of an unbranched serial chain of revolute joints.

All vectors are expressed in the world frame. Frame ``i`` is the frame of
joint ``i`` after its rotation; link ``i`` is rigidly attached to it and its
center of mass and inertia are given in that frame.
"""
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.transform import Rotation

from .exceptions import ConfigError, IntegrationError, SingularityError
from .rotation import Pose, UnitQuaternion

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def _transform(rotation=None, translation=None):
    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if translation is not None:
        T[:3, 3] = translation
    return T


def mdh_transform(a, alpha, d):
    """Fixed part of a modified Denavit-Hartenberg link: Rx(alpha) Tx(a) Tz(d)"""
    c, s = np.cos(alpha), np.sin(alpha)
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return _transform(Rx, [a, -s * d, c * d])


def rpy_transform(xyz, rpy):
    return _transform(Rotation.from_euler("xyz", rpy).as_matrix(), xyz)


def axis_rotation(axis, angle):
    """Rodrigues rotation about a unit axis"""
    K = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True)
class Link:
    name: str
    origin: np.ndarray
    axis: np.ndarray
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    armature: float = 0.0
    lower: float = -np.inf
    upper: float = np.inf
    velocity: float = np.inf
    effort: float = np.inf
    parent: int = -1


@dataclass(frozen=True)
class ChainModel:
    name: str
    links: tuple
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    tool: np.ndarray = field(default_factory=lambda: np.eye(4))
    base: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        for i, link in enumerate(self.links):
            if link.parent != i - 1:
                raise ConfigError(f"Link {link.name!r} breaks the serial chain")
            if not link.mass > 0:
                raise ConfigError(f"Link {link.name!r} must have positive mass")
            if not np.allclose(link.inertia, link.inertia.T, atol=1e-12):
                raise ConfigError(f"Link {link.name!r} inertia is not symmetric")
            if np.min(np.linalg.eigvalsh(link.inertia)) <= 0:
                raise ConfigError(
                    f"Link {link.name!r} inertia is not positive definite"
                )
            if link.armature < 0:
                raise ConfigError(f"Link {link.name!r} armature must be >= 0")
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))
        object.__setattr__(self, "axes", np.array([link.axis for link in self.links]))
        object.__setattr__(
            self, "origins", np.array([link.origin for link in self.links])
        )
        object.__setattr__(self, "masses", np.array([link.mass for link in self.links]))
        object.__setattr__(self, "coms", np.array([link.com for link in self.links]))
        object.__setattr__(
            self, "inertias", np.array([link.inertia for link in self.links])
        )
        object.__setattr__(
            self, "armature", np.array([link.armature for link in self.links])
        )

    @property
    def n(self):
        return len(self.links)

    @property
    def lower(self):
        return np.array([link.lower for link in self.links])

    @property
    def upper(self):
        return np.array([link.upper for link in self.links])

    @property
    def effort(self):
        return np.array([link.effort for link in self.links])

    def scaled(self, mass_scale):
        """Copy with every link mass and inertia multiplied by ``mass_scale``"""
        links = tuple(
            replace(
                link, mass=link.mass * mass_scale, inertia=link.inertia * mass_scale
            )
            for link in self.links
        )
        return replace(self, links=links)

    def check_task_space(self):
        if self.n < 6:
            raise ConfigError(
                f"Chain {self.name!r} has {self.n} joints, task-space control needs 6"
            )


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "dq", np.asarray(self.dq, dtype=float))
        ddq = np.zeros_like(q) if self.ddq is None else self.ddq
        object.__setattr__(self, "ddq", np.asarray(ddq, dtype=float))


@dataclass(frozen=True)
class FrictionModel:
    c: np.ndarray
    mu_s: np.ndarray
    mu_k: np.ndarray
    mu_v: np.ndarray

    def __post_init__(self):
        for name in ("c", "mu_s", "mu_k", "mu_v"):
            values = np.asarray(getattr(self, name), dtype=float)
            if np.any(values < 0):
                raise ConfigError(f"Friction parameter {name} must be >= 0")
            object.__setattr__(self, name, values)

    @classmethod
    def from_profile(cls, profile, n):
        return cls(
            **{
                name: np.broadcast_to(
                    np.asarray(profile.get(name, 0.0), dtype=float), (n,)
                ).copy()
                for name in ("c", "mu_s", "mu_k", "mu_v")
            }
        )

    @classmethod
    def frictionless(cls, n):
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class Kinematics:
    frames: np.ndarray  # (n, 4, 4)
    ee: np.ndarray  # (4, 4)

    @property
    def origins(self):
        return self.frames[:, :3, 3]

    @property
    def rotations(self):
        return self.frames[:, :3, :3]


@dataclass(frozen=True)
class JointDynamics:
    """Everything the loop needs from one kinematics pass at (q, dq)."""

    pose: Pose
    twist: np.ndarray
    J: np.ndarray
    Jdot: np.ndarray
    M: np.ndarray
    cqd: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class TaskDynamics:
    Mbar: np.ndarray
    Cbar: np.ndarray
    Gbar: np.ndarray
    J: np.ndarray
    Jdot: np.ndarray
    Mbar_inv: np.ndarray
    Jbar: np.ndarray
    damping: float = 0.0
    sigma_min: float = np.inf


@dataclass(frozen=True)
class DampingRamp:
    """Damped pseudo-inverse factor as a function of the smallest singular value"""

    sigma_high: float = 0.05
    sigma_low: float = 0.005
    lam_max: float = 0.05
    floor: float = 1e-4

    @classmethod
    def from_settings(cls, settings):
        return cls(
            settings.getfloat("DAMPING_SIGMA_HIGH", 0.05),
            settings.getfloat("DAMPING_SIGMA_LOW", 0.005),
            settings.getfloat("DAMPING_MAX", 0.05),
            settings.getfloat("SINGULAR_FLOOR", 1e-4),
        )

    def damping(self, sigma_min):
        if sigma_min < self.floor:
            raise SingularityError(
                f"Jacobian smallest singular value {sigma_min:.2e} below {self.floor}"
            )
        if sigma_min >= self.sigma_high:
            return 0.0
        if sigma_min <= self.sigma_low:
            return self.lam_max
        ratio = (self.sigma_high - sigma_min) / (self.sigma_high - self.sigma_low)
        return ratio * self.lam_max


def kinematics(model, q):
    q = np.asarray(q, dtype=float)
    frames = np.empty((model.n, 4, 4))
    T = model.base
    for i in range(model.n):
        T = T @ model.origins[i]
        T = T.copy()
        T[:3, :3] = T[:3, :3] @ axis_rotation(model.axes[i], q[i])
        frames[i] = T
    return Kinematics(frames, frames[-1] @ model.tool)


def _world_axes(model, kin):
    return np.einsum("nij,nj->ni", kin.rotations, model.axes)


def _com_positions(model, kin):
    return np.einsum("nij,nj->ni", kin.rotations, model.coms) + kin.origins


def _lower(n, strict=False):
    return np.tril(np.ones((n, n), dtype=bool), -1 if strict else 0)


def forward_kinematics(model, q):
    ee = kinematics(model, q).ee
    return Pose(ee[:3, 3], UnitQuaternion.from_matrix(ee[:3, :3]))


def _jacobian(model, kin):
    axes = _world_axes(model, kin)
    lever = np.cross(axes, kin.ee[:3, 3] - kin.origins)
    return np.vstack((lever.T, axes.T))


def jacobian(model, q):
    """Geometric end-effector Jacobian, rows (p_dot, omega)"""
    return _jacobian(model, kinematics(model, q))


def _jacobian_dot(model, kin, dq):
    axes = _world_axes(model, kin)
    origins = kin.origins
    omega = np.cumsum(axes * dq[:, None], axis=0)
    axes_dot = np.cross(omega, axes)
    # velocity of each joint origin from the joints before it
    rel = origins[:, None, :] - origins[None, :, :]
    contrib = np.cross(axes[None, :, :], rel) * dq[None, :, None]
    contrib[~_lower(model.n, strict=True)] = 0.0
    origin_vel = contrib.sum(axis=1)
    ee_pos = kin.ee[:3, 3]
    ee_vel = np.cross(axes, ee_pos - origins).T @ dq
    lin = np.cross(axes_dot, ee_pos - origins) + np.cross(axes, ee_vel - origin_vel)
    return np.vstack((lin.T, axes_dot.T))


def jacobian_dot(model, q, dq):
    return _jacobian_dot(model, kinematics(model, q), np.asarray(dq, dtype=float))


def link_jacobians(model, q=None, kin=None):
    """Per-link COM Jacobians, each shaped (n_links, n_joints, 3)"""
    kin = kinematics(model, q) if kin is None else kin
    axes = _world_axes(model, kin)
    coms = _com_positions(model, kin)
    mask = _lower(model.n)[:, :, None]
    Jv = np.cross(axes[None, :, :], coms[:, None, :] - kin.origins[None, :, :]) * mask
    Jw = np.broadcast_to(axes[None, :, :], Jv.shape) * mask
    return Jv, Jw


def _mass_matrix(model, kin):
    Jv, Jw = link_jacobians(model, kin=kin)
    R = kin.rotations
    inertia_world = R @ model.inertias @ np.transpose(R, (0, 2, 1))
    M = np.einsum("i,ijk,ilk->jl", model.masses, Jv, Jv)
    M += np.einsum("ijk,ikm,ilm->jl", Jw, inertia_world, Jw)
    M += np.diag(model.armature)
    return 0.5 * (M + M.T)


def mass_matrix(model, q):
    return _mass_matrix(model, kinematics(model, q))


def _gravity(model, kin):
    Jv, _ = link_jacobians(model, kin=kin)
    return -np.einsum("i,ijk,k->j", model.masses, Jv, model.gravity)


def _rnea(model, kin, dq, ddq, gravity):
    n = model.n
    axes = _world_axes(model, kin)
    origins = kin.origins
    coms = _com_positions(model, kin)
    R = kin.rotations
    w = np.zeros(3)
    dw = np.zeros(3)
    dv = -model.gravity if gravity else np.zeros(3)
    prev = model.base[:3, 3]
    forces = np.empty((n, 3))
    moments = np.empty((n, 3))
    for i in range(n):
        r = origins[i] - prev
        dv = dv + np.cross(dw, r) + np.cross(w, np.cross(w, r))
        wz = axes[i] * dq[i]
        dw = dw + axes[i] * ddq[i] + np.cross(w, wz)
        w = w + wz
        rc = coms[i] - origins[i]
        acc = dv + np.cross(dw, rc) + np.cross(w, np.cross(w, rc))
        inertia = R[i] @ model.inertias[i] @ R[i].T
        forces[i] = model.masses[i] * acc
        moments[i] = inertia @ dw + np.cross(w, inertia @ w)
        prev = origins[i]
    tau = np.empty(n)
    F = np.zeros(3)
    N = np.zeros(3)
    for i in reversed(range(n)):
        N = moments[i] + np.cross(coms[i] - origins[i], forces[i]) + N
        if i + 1 < n:
            N += np.cross(origins[i + 1] - origins[i], F)
        F = forces[i] + F
        tau[i] = axes[i] @ N + model.armature[i] * ddq[i]
    return tau


def inverse_dynamics(model, q, dq, ddq, gravity=True):
    """Recursive Newton-Euler joint torques for (q, dq, ddq)"""
    kin = kinematics(model, q)
    return _rnea(
        model, kin, np.asarray(dq, dtype=float), np.asarray(ddq, dtype=float), gravity
    )


def joint_space_dynamics(model, q, dq):
    """(M, C(q, dq) dq, G) of the chain"""
    kin = kinematics(model, q)
    dq = np.asarray(dq, dtype=float)
    cqd = _rnea(model, kin, dq, np.zeros(model.n), gravity=False)
    return _mass_matrix(model, kin), cqd, _gravity(model, kin)


def evaluate(model, q, dq):
    kin = kinematics(model, q)
    dq = np.asarray(dq, dtype=float)
    J = _jacobian(model, kin)
    ee = kin.ee
    return JointDynamics(
        pose=Pose(ee[:3, 3], UnitQuaternion.from_matrix(ee[:3, :3])),
        twist=J @ dq,
        J=J,
        Jdot=_jacobian_dot(model, kin, dq),
        M=_mass_matrix(model, kin),
        cqd=_rnea(model, kin, dq, np.zeros(model.n), gravity=False),
        G=_gravity(model, kin),
    )


def coriolis_matrix(model, q, dq, h=1e-6):
    """Coriolis matrix from Christoffel symbols of finite-differenced M"""
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    dM = np.empty((model.n, model.n, model.n))
    for i in range(model.n):
        step = np.zeros(model.n)
        step[i] = h
        dM[i] = (mass_matrix(model, q + step) - mass_matrix(model, q - step)) / (2 * h)
    return 0.5 * (
        np.einsum("ikj,i->kj", dM, dq)
        + np.einsum("jki,i->kj", dM, dq)
        - np.einsum("kij,i->kj", dM, dq)
    )


def kinetic_energy(model, q, dq):
    dq = np.asarray(dq, dtype=float)
    return 0.5 * dq @ mass_matrix(model, q) @ dq


def potential_energy(model, q):
    coms = _com_positions(model, kinematics(model, q))
    return -float(model.masses @ (coms @ model.gravity))


def project_task_space(jd, dq, damping=None, ramp=None):
    """Task-space inertia, Coriolis and gravity terms from joint-space ones"""
    ramp = ramp or DampingRamp()
    J = jd.J
    sigma_min = float(np.linalg.svd(J, compute_uv=False)[-1])
    lam = ramp.damping(sigma_min) if damping is None else float(damping)
    if damping is None and lam > 0:
        logger.debug("Damping %.4f active at sigma_min %.4f", lam, sigma_min)
    factor = cho_factor(jd.M)
    solved = cho_solve(factor, np.column_stack((J.T, jd.cqd, jd.G)))
    Minv_JT = solved[:, :6]
    Mbar_inv = J @ Minv_JT + lam ** 2 * np.eye(6)
    Mbar_inv = 0.5 * (Mbar_inv + Mbar_inv.T)
    try:
        Mbar = np.linalg.inv(Mbar_inv)
    except np.linalg.LinAlgError:
        raise SingularityError("Task-space inertia is not invertible")
    Mbar = 0.5 * (Mbar + Mbar.T)
    Cbar = Mbar @ (J @ solved[:, 6] - jd.Jdot @ dq)
    Gbar = Mbar @ (J @ solved[:, 7])
    return TaskDynamics(
        Mbar=Mbar,
        Cbar=Cbar,
        Gbar=Gbar,
        J=J,
        Jdot=jd.Jdot,
        Mbar_inv=Mbar_inv,
        Jbar=Minv_JT @ Mbar,
        damping=lam,
        sigma_min=sigma_min,
    )


def task_space_dynamics(model, q, dq, damping=None, ramp=None):
    return project_task_space(evaluate(model, q, dq), np.asarray(dq), damping, ramp)


def nullspace_projector(dyn):
    """Transpose of the dynamically consistent null-space projector"""
    return np.eye(dyn.J.shape[1]) - dyn.J.T @ dyn.Jbar.T


def viscous_friction_torque(f, dq):
    return -(f.c + f.mu_v) * np.asarray(dq, dtype=float)


def coulomb_friction_torque(f, dq, coulomb_velocity=1.0):
    return -f.mu_k * np.tanh(np.asarray(dq, dtype=float) / coulomb_velocity)


def friction_torque(f, dq, applied=None, band=1e-3, coulomb_velocity=1.0):
    """Damping, viscous and Coulomb friction, plus stiction against ``applied``
    on joints slower than ``band``."""
    dq = np.asarray(dq, dtype=float)
    tau = viscous_friction_torque(f, dq) + coulomb_friction_torque(
        f, dq, coulomb_velocity
    )
    if applied is not None:
        stuck = np.abs(dq) < band
        tau = tau + np.where(stuck, -np.clip(applied, -f.mu_s, f.mu_s), 0.0)
    return tau


def friction_damping(f, dq, coulomb_velocity=1.0):
    """-d(friction)/d(dq), diagonal and non-negative"""
    x = np.asarray(dq, dtype=float) / coulomb_velocity
    return f.c + f.mu_v + f.mu_k * (1.0 - np.tanh(x) ** 2) / coulomb_velocity


def clip_torque(model, tau):
    limit = model.effort
    clipped = np.clip(tau, -limit, limit)
    return clipped, bool(np.any(clipped != tau))


def _clamp_limits(model, q, dq):
    lower, upper = model.lower, model.upper
    below, above = q < lower, q > upper
    if np.any(below) or np.any(above):
        q = np.clip(q, lower, upper)
        dq = np.where(below, np.maximum(dq, 0.0), dq)
        dq = np.where(above, np.minimum(dq, 0.0), dq)
    return q, dq


def _accel(model, f, q, dq, tau, tau_ext, band, coulomb_velocity, dynamics=None):
    M, cqd, G = dynamics or joint_space_dynamics(model, q, dq)
    applied = tau + tau_ext - cqd - G
    return M, applied + friction_torque(f, dq, applied, band, coulomb_velocity)


def step_forward_dynamics(
    model,
    f,
    state,
    tau,
    tau_ext,
    dt,
    method="semi_implicit",
    band=1e-3,
    coulomb_velocity=1.0,
    dynamics=None,
):
    """Advance the chain by one step of ``dt``.

    The semi-implicit scheme updates dq before q and treats the
    velocity-dependent friction implicitly through its linearization, so
    heavy joint damping stays stable at the 1 kHz loop rate. ``dynamics`` may
    carry a precomputed (M, C dq, G) at ``state``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    q, dq = state.q, state.dq
    tau = np.asarray(tau, dtype=float)
    tau_ext = np.asarray(tau_ext, dtype=float)
    args = (band, coulomb_velocity)
    if method == "semi_implicit":
        M, rhs = _accel(model, f, q, dq, tau, tau_ext, *args, dynamics=dynamics)
        D = friction_damping(f, dq, coulomb_velocity)
        ddq = np.linalg.solve(M + dt * np.diag(D), rhs)
        dq_next = dq + dt * ddq
        q_next = q + dt * dq_next
    elif method == "rk4":

        def deriv(q_, dq_, dynamics_=None):
            M, rhs = _accel(model, f, q_, dq_, tau, tau_ext, *args, dynamics=dynamics_)
            return dq_, np.linalg.solve(M, rhs)

        k1q, k1v = deriv(q, dq, dynamics)
        k2q, k2v = deriv(q + 0.5 * dt * k1q, dq + 0.5 * dt * k1v)
        k3q, k3v = deriv(q + 0.5 * dt * k2q, dq + 0.5 * dt * k2v)
        k4q, k4v = deriv(q + dt * k3q, dq + dt * k3v)
        ddq = k1v
        q_next = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        dq_next = dq + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    else:
        raise ValueError(f"Unknown integrator {method!r}")
    if not (np.all(np.isfinite(q_next)) and np.all(np.isfinite(dq_next))):
        raise IntegrationError("Forward dynamics produced a non-finite state")
    q_next, dq_next = _clamp_limits(model, q_next, dq_next)
    return JointState(q_next, dq_next, ddq)


def _vector(entry, key, size, default=None):
    value = entry.get(key, default)
    if value is None:
        raise ConfigError(f"Missing {key!r}")
    value = np.asarray(value, dtype=float)
    if value.shape != (size,):
        raise ConfigError(f"{key!r} must have {size} entries")
    return value


def _inertia(values):
    ixx, ixy, ixz, iyy, iyz, izz = np.asarray(values, dtype=float)
    return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])


def _origin(entry):
    if "mdh" in entry:
        mdh = entry["mdh"]
        return mdh_transform(
            mdh.get("a", 0.0), mdh.get("alpha", 0.0), mdh.get("d", 0.0)
        )
    return rpy_transform(
        _vector(entry, "xyz", 3, [0.0, 0.0, 0.0]),
        _vector(entry, "rpy", 3, [0.0, 0.0, 0.0]),
    )


def chain_from_dict(data):
    links = []
    for i, entry in enumerate(data.get("links", [])):
        axis = _vector(entry, "axis", 3, [0.0, 0.0, 1.0])
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ConfigError(f"Link {i} has a zero joint axis")
        limits = entry.get("limits", {})
        links.append(
            Link(
                name=entry.get("name", f"link{i + 1}"),
                origin=_origin(entry),
                axis=axis / norm,
                mass=float(entry["mass"]),
                com=_vector(entry, "com", 3, [0.0, 0.0, 0.0]),
                inertia=_inertia(entry["inertia"]),
                armature=float(entry.get("armature", 0.0)),
                lower=float(limits.get("lower", -np.inf)),
                upper=float(limits.get("upper", np.inf)),
                velocity=float(limits.get("velocity", np.inf)),
                effort=float(limits.get("effort", np.inf)),
                parent=int(entry.get("parent", i - 1)),
            )
        )
    if not links:
        raise ConfigError("Chain has no links")
    tool = data.get("tool", {})
    base = data.get("base", {})
    return ChainModel(
        name=data.get("name", "chain"),
        links=tuple(links),
        gravity=_vector(data, "gravity", 3, [0.0, 0.0, -9.81]),
        tool=_origin(tool),
        base=_origin(base),
    )


def load_chain(source):
    """Load a chain from a TOML path or the name of a packaged chain file"""
    path = source
    if not os.path.exists(path):
        path = os.path.join(DATA_DIR, f"{source}.toml")
    if not os.path.exists(path):
        raise ConfigError(f"Chain file {source!r} not found")
    with open(path, "rb") as f:
        data = tomllib.load(f)
    logger.debug("Loaded chain %s from %s", data.get("name"), path)
    return chain_from_dict(data)
