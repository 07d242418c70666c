"""
Gain-selection toolkit for the adaptive terminal super-twisting controller.

For a given Gamma the tuning pair (Omega1, Omega2) is admissible when it lies
inside an ellipse whose size scales with Gamma. Inside it the Lyapunov pair
(P, Q_R) built here is positive definite, which yields the finite reaching-time
bound of the sliding variable and the steady tracking regions.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .control import kappa2_ratio, kappa_from_L
from .exceptions import DegenerateEllipse, NotStable

logger = logging.getLogger(__name__)

REGION_COLUMNS = ["Omega1", "Omega2", "Gamma", "inside", "margin", "lambda_min_Qr"]


@dataclass(frozen=True)
class StabilityQuery:
    Omega1: float
    Omega2: float
    gamma: float
    theta: float
    Gamma: float
    L: float = 1.0

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        for name in ("Omega1", "Omega2", "gamma", "Gamma", "L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_params(cls, p, Gamma, L=1.0):
        return cls(p.Omega1, p.Omega2, p.gamma, p.theta, Gamma, L)

    @property
    def kappa1(self):
        return float(self._kappas()[0])

    @property
    def kappa2(self):
        return float(self._kappas()[1])

    def _kappas(self):
        return kappa_from_L(self.L, self)


@dataclass
class StabilityReport:
    inside_ellipse: bool
    margin: float
    P: np.ndarray
    Qr: np.ndarray
    lambda_min_P: float
    lambda_max_P: float
    lambda_min_Qr: float
    chi: float = None
    vartheta: float = None
    t_reach_bound: float = None
    e_bound: float = None
    de_bound: float = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        data = asdict(self)
        data["P"] = self.P.tolist()
        data["Qr"] = self.Qr.tolist()
        return data

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _margin(Omega1, Omega2, gamma, theta, Gamma):
    lhs = Omega1 * Gamma ** 2 - 2.0 * (Omega2 / gamma) * Gamma
    rhs = (
        0.25 * (Gamma + Omega1 * Gamma) ** 2
        - (1.0 + Omega1) * Omega2 * Gamma * theta
        + Omega2 ** 2
    )
    return lhs - rhs


def ellipse_margin(q):
    """Left minus right side of the ellipse inequality; positive inside"""
    return float(_margin(q.Omega1, q.Omega2, q.gamma, q.theta, q.Gamma))


def ellipse_condition(q):
    return ellipse_margin(q) > 0.0


def ellipse_center(gamma, theta, Gamma):
    if gamma * theta <= 1.0:
        raise DegenerateEllipse(f"gamma*theta = {gamma * theta:.4f} must exceed 1")
    denom = gamma * (1.0 - theta ** 2)
    return (gamma - 2.0 * theta + gamma * theta ** 2) / denom, (
        Gamma * (theta * gamma - 1.0) / denom
    )


def _p_entries(q):
    p12 = -math.sqrt((1.0 - q.theta) * q.Omega2 / (2.0 * q.gamma * q.L))
    p22 = (1.0 - q.theta) * q.Omega2 / (2.0 * q.L)
    return 1.0, p12, p22


def build_P(q):
    p11, p12, p22 = _p_entries(q)
    return np.array([[p11, p12], [p12, p22]])


def build_Q(q, pi):
    """Q~ of -Q~ = A^T P + P A for a perturbation value pi in [-L, L]"""
    p11, p12, p22 = _p_entries(q)
    kappa1, kappa2 = q._kappas()
    G = q.Gamma
    q11 = kappa1 * G * p11 + 2.0 * p12 * (kappa2 - pi)
    q12 = 0.5 * kappa1 * G * p12 + p22 * (kappa2 - pi) - 0.5 * G * p11
    q22 = -G * p12
    return np.array([[q11, q12], [q12, q22]])


def build_Qr(q):
    """Worst-case Q~ with the gains of the adaptive law substituted.

    Its determinant equals the ellipse margin for every L, so Q_R is
    positive definite exactly inside the ellipse.
    """
    _, p12, p22 = _p_entries(q)
    G = q.Gamma
    q11 = (
        q.kappa1 * G
        + 2.0 * q.Omega2 * p12 / p22
        + (1.0 + q.Omega1) * q.Omega2 * (1.0 - q.theta) / p12
    )
    q12 = q.Omega2 - 0.5 * (G + G * q.Omega1)
    q22 = -G * p12
    return np.array([[q11, q12], [q12, q22]])


def eig2(A):
    """(lambda_min, lambda_max) of a symmetric 2x2 matrix in closed form"""
    a, b, c = float(A[0, 0]), float(A[0, 1]), float(A[1, 1])
    half_trace = 0.5 * (a + c)
    radius = math.hypot(0.5 * (a - c), b)
    lam_max = half_trace + radius
    det = a * c - b * b
    if lam_max > 0:
        return det / lam_max, lam_max
    return half_trace - radius, lam_max


def convergence_rates(q, a, V1_0=1.0):
    """(chi, vartheta, reaching-time bound for V1(0) = V1_0)"""
    if not ellipse_condition(q):
        raise NotStable(
            f"(Omega1={q.Omega1}, Omega2={q.Omega2}) outside the ellipse "
            f"for Gamma={q.Gamma}"
        )
    lam_min_P, lam_max_P = eig2(build_P(q))
    lam_min_Qr, _ = eig2(build_Qr(q))
    chi = math.sqrt(lam_min_P) * lam_min_Qr / lam_max_P
    vartheta = min(chi, math.sqrt(2.0) * a.omega_a * a.mu_a)
    return chi, vartheta, 2.0 / vartheta * math.sqrt(V1_0)


def gamma_operating_range(p, a, v_max):
    """Range of Gamma = alpha beta |de|^(alpha-1) once |de| is inside its
    steady region and below ``v_max``"""
    de_min = (a.mu_a / p.beta) ** (1.0 / p.alpha)
    Gamma_min = p.alpha * p.beta * de_min ** (p.alpha - 1.0)
    Gamma_max = p.alpha * p.beta * v_max ** (p.alpha - 1.0)
    return Gamma_min, Gamma_max


def kappa2_for_kappa1(kappa1, p):
    return kappa2_ratio(p) * np.asarray(kappa1, dtype=float) ** 2


def _grid(grid):
    if isinstance(grid, dict):
        return (
            np.linspace(grid["Omega1_min"], grid["Omega1_max"], grid["n"]),
            np.linspace(grid["Omega2_min"], grid["Omega2_max"], grid["n"]),
        )
    omega1, omega2 = grid
    return np.asarray(omega1, dtype=float), np.asarray(omega2, dtype=float)


def sweep_region(gamma, theta, Gammas, grid, L=1.0):
    """Membership of a (Omega1, Omega2) grid in the ellipse for each Gamma.

    ``grid`` is either a pair of 1-D arrays or a dict with Omega1_min,
    Omega1_max, Omega2_min, Omega2_max and n. Points with a non-positive
    coordinate are dropped.
    """
    omega1, omega2 = _grid(grid)
    omega1 = omega1[omega1 > 0]
    omega2 = omega2[omega2 > 0]
    O1, O2 = np.meshgrid(omega1, omega2, indexing="ij")
    O1, O2 = O1.ravel(), O2.ravel()
    frames = []
    for Gamma in Gammas:
        margin = _margin(O1, O2, gamma, theta, Gamma)
        # closed-form lambda_min of Q_R, vectorized over the grid
        a = np.sqrt((1.0 - theta) * O2 / (2.0 * gamma * L))
        q22 = Gamma * a
        q11 = (Gamma * O1 - 2.0 * O2 / gamma - (1.0 + O1) * O2 * (1.0 - theta)) / a
        q12 = O2 - 0.5 * Gamma * (1.0 + O1)
        lam_max = 0.5 * (q11 + q22) + np.hypot(0.5 * (q11 - q22), q12)
        frames.append(
            pd.DataFrame(
                {
                    "Omega1": O1,
                    "Omega2": O2,
                    "Gamma": float(Gamma),
                    "inside": margin > 0,
                    "margin": margin,
                    "lambda_min_Qr": (q11 * q22 - q12 ** 2) / lam_max,
                }
            )
        )
    return pd.concat(frames, ignore_index=True)[REGION_COLUMNS]


def lyapunov_v1(s, nu_pi, L, L_star, q):
    """Lyapunov function of the sliding variable and the adaptation error"""
    s = np.asarray(s, dtype=float)
    nu_pi = np.asarray(nu_pi, dtype=float)
    c = (1.0 - q.theta) * q.Omega2
    zeta1 = np.sqrt(np.abs(s)) * np.sign(s)
    return (
        np.abs(s)
        - 2.0 * np.sqrt(c / (2.0 * q.gamma * L)) * zeta1 * nu_pi
        + c / (2.0 * L) * nu_pi ** 2
        + 0.5 * (L - L_star) ** 2
    )


def tracking_time_bound(e0, p):
    """Time bound to reach e = 0 on the sliding manifold from e(0) = e0"""
    V3 = 0.5 * np.asarray(e0, dtype=float) ** 2
    alpha, beta = p.alpha, p.beta
    scale = 2.0 * alpha / (beta ** (-1.0 / alpha) * (alpha - 1.0))
    return (
        scale
        * V3 ** ((alpha - 1.0) / (2.0 * alpha))
        / 2.0 ** ((1.0 + alpha) / (2.0 * alpha))
    )


def tracking_regions(p, a):
    """(|e| bound, |de| bound) once |s| stays within mu_a"""
    return 2.0 * a.mu_a, (a.mu_a / p.beta) ** (1.0 / p.alpha)


def stability_report(q, a, p=None, V1_0=1.0, eps_c=None):
    P = build_P(q)
    Qr = build_Qr(q)
    lam_min_P, lam_max_P = eig2(P)
    lam_min_Qr, _ = eig2(Qr)
    margin = ellipse_margin(q)
    report = StabilityReport(
        inside_ellipse=margin > 0,
        margin=margin,
        P=P,
        Qr=Qr,
        lambda_min_P=lam_min_P,
        lambda_max_P=lam_max_P,
        lambda_min_Qr=lam_min_Qr,
    )
    if report.inside_ellipse:
        report.chi, report.vartheta, report.t_reach_bound = convergence_rates(
            q, a, V1_0
        )
    else:
        report.notes.append("gains outside the stability ellipse")
    if p is not None:
        report.e_bound, report.de_bound = tracking_regions(p, a)
    if eps_c is not None and not a.mu_a > eps_c:
        report.notes.append(
            f"mu_a={a.mu_a} does not exceed the noise bound eps_c={eps_c}"
        )
    if not 0.001 <= a.mu_a <= 0.01:
        report.notes.append(f"mu_a={a.mu_a} outside the usual 0.001-0.01 range")
    if q.gamma * q.theta <= 1.0:
        report.notes.append("gamma*theta <= 1, the ellipse is degenerate")
    return report
