"""
Per-tick run records and the tracking and effort metrics computed from them.
"""
import json
import logging
import re
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from .exceptions import EmptyLog, GimbalProximityWarning

logger = logging.getLogger(__name__)

RUNLOG_HEADER = "# ntstsm-runlog v{version}"
FLOAT_FORMAT = "%.17g"

XYZ = ("x", "y", "z")
QUAT = ("eta", "x", "y", "z")

TASK_GROUPS = [
    ("p", XYZ),
    ("xi", QUAT),
    ("p_d", XYZ),
    ("xi_d", QUAT),
    ("u", 6),
    ("s", 6),
    ("L", 6),
    ("kappa1", 6),
    ("kappa2", 6),
    ("nu", 6),
    ("g1_hat", 6),
    ("g2_hat", 6),
    ("z_hat", 6),
    ("v_hat", 6),
    ("v_raw", 6),
    ("pose_branch", 6),
    ("twist_branch", 6),
    ("f_ext", 6),
]
SCALARS = ["disturbance_active", "damping", "saturated"]

# Table layouts: plain tracking task and the disturbance task
TRACKING_COLUMNS = ["rmse_p", "rmse_xi", "tau_avg", "tv_tau"]
DISTURBANCE_COLUMNS = ["rmse_p_y", "rmse_p_z", "rmse_phi_y", "tau_avg", "tv_tau"]


def _suffixes(layout):
    return layout if isinstance(layout, tuple) else tuple(str(i) for i in range(layout))


def group_columns(name, layout):
    return [f"{name}_{suffix}" for suffix in _suffixes(layout)]


def runlog_columns(n):
    """Column order of a RunLog for a chain with ``n`` joints"""
    joint = [("q", n), ("dq", n), ("tau", n), ("tau_g", n)]
    columns = ["t"]
    for name, layout in joint[:2] + TASK_GROUPS[:5] + joint[2:] + TASK_GROUPS[5:]:
        columns += group_columns(name, layout)
    return columns + SCALARS


class RunLogRecorder:
    """Collects one row per tick; missing groups are recorded as NaN."""

    def __init__(self, n):
        self.columns = runlog_columns(n)
        self._index = {name: i for i, name in enumerate(self.columns)}
        self._slices = {}
        joint = [("q", n), ("dq", n), ("tau", n), ("tau_g", n)]
        for name, layout in joint + TASK_GROUPS:
            first = self._index[group_columns(name, layout)[0]]
            self._slices[name] = slice(first, first + len(_suffixes(layout)))
        self.rows = []

    def append(self, t, **groups):
        row = np.full(len(self.columns), np.nan)
        row[0] = t
        for name, value in groups.items():
            if value is None:
                continue
            if name in self._slices:
                row[self._slices[name]] = value
            else:
                row[self._index[name]] = float(value)
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def to_runlog(self):
        rows = np.array(self.rows) if self.rows else np.empty((0, len(self.columns)))
        return RunLog(pd.DataFrame(rows, columns=self.columns))


class RunLog:
    def __init__(self, frame):
        self.frame = frame.reset_index(drop=True)

    @classmethod
    def from_arrays(cls, t, **groups):
        """Build a log from whole-run arrays, e.g. ``p=(N, 3)``, ``tau=(N, n)``"""
        data = {"t": np.asarray(t, dtype=float)}
        layouts = dict(TASK_GROUPS)
        for name, values in groups.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                data[name] = values
                continue
            layout = layouts.get(name, values.shape[1])
            for column, col in zip(group_columns(name, layout), values.T):
                data[column] = col
        return cls(pd.DataFrame(data))

    def __len__(self):
        return len(self.frame)

    @property
    def t(self):
        return self.frame["t"].to_numpy()

    @property
    def dt(self):
        t = self.t
        return float(t[1] - t[0]) if len(t) > 1 else None

    def group(self, name):
        layout = dict(TASK_GROUPS).get(name)
        if layout is not None:
            columns = group_columns(name, layout)
        else:
            pattern = re.compile(rf"^{re.escape(name)}_(\d+)$")
            indexed = [
                (int(m.group(1)), c)
                for c in self.frame.columns
                if (m := pattern.match(c))
            ]
            columns = [c for _, c in sorted(indexed)]
        missing = [c for c in columns if c not in self.frame.columns]
        if missing or not columns:
            raise KeyError(f"RunLog has no {name!r} columns")
        return self.frame[columns].to_numpy()

    def tail(self, n):
        return RunLog(self.frame.tail(n))

    def to_frame(self):
        return self.frame.copy()

    def write_csv(self, path, version=1):
        with open(path, "w", newline="") as f:
            f.write(RUNLOG_HEADER.format(version=version) + "\n")
            self.frame.to_csv(
                f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
            )

    @classmethod
    def read_csv(cls, path):
        with open(path) as f:
            header = f.readline().strip()
        if not header.startswith(RUNLOG_HEADER.format(version="")):
            raise ValueError(f"{path} is not a RunLog file (header {header!r})")
        return cls(
            pd.read_csv(path, skiprows=1, dtype=float, float_precision="round_trip")
        )


@dataclass
class MetricsReport:
    rmse_p: float
    rmse_xi: float
    rmse_phi: list
    tau_avg: float
    tv_tau: float
    rmse_p_axes: list = field(default_factory=list)

    def __post_init__(self):
        values = [self.rmse_p, self.rmse_xi, self.tau_avg, self.tv_tau]
        if any(v < 0 for v in values + list(self.rmse_phi)):
            raise ValueError("Metrics must be non-negative")

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def columns(self):
        """Flat name -> value mapping used by the comparison tables"""
        flat = {
            "rmse_p": self.rmse_p,
            "rmse_xi": self.rmse_xi,
            "tau_avg": self.tau_avg,
            "tv_tau": self.tv_tau,
        }
        for axis, value in zip(XYZ, self.rmse_p_axes):
            flat[f"rmse_p_{axis}"] = value
        for axis, value in zip(XYZ, self.rmse_phi):
            flat[f"rmse_phi_{axis}"] = value
        return flat


def _check(log):
    if len(log) == 0:
        raise EmptyLog("RunLog has no ticks")


def rmse_p_axes(log):
    _check(log)
    err = log.group("p") - log.group("p_d")
    return np.sqrt(np.mean(err ** 2, axis=0))


def rmse_p(log):
    """Position RMSE averaged over the three axes"""
    return float(np.mean(rmse_p_axes(log)))


def rmse_xi(log):
    """Geodesic RMSE between measured and desired quaternions"""
    _check(log)
    dot = np.abs(np.sum(log.group("xi") * log.group("xi_d"), axis=1))
    angle = np.arccos(np.clip(dot, 0.0, 1.0))
    return float(np.sqrt(4.0 * np.mean(angle ** 2)))


def euler_zyx(quats):
    """(roll, pitch, yaw) per row of (eta, x, y, z) quaternions, ZYX convention"""
    quats = np.atleast_2d(quats)
    scipy_order = np.column_stack((quats[:, 1:], quats[:, 0]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        zyx = Rotation.from_quat(scipy_order).as_euler("zyx")
    pitch = zyx[:, 1]
    if np.any(np.abs(np.abs(pitch) - np.pi / 2) < 1e-3):
        warnings.warn(
            "Pitch within 1e-3 rad of +-pi/2, Euler angles are ill-defined",
            GimbalProximityWarning,
            stacklevel=2,
        )
    return zyx[:, ::-1]


def rmse_phi(log, axis):
    """RMSE of the Euler angle about ``axis`` (0, 1, 2 or "x", "y", "z")"""
    _check(log)
    k = XYZ.index(axis) if isinstance(axis, str) else int(axis)
    actual = np.unwrap(euler_zyx(log.group("xi"))[:, k])
    desired = np.unwrap(euler_zyx(log.group("xi_d"))[:, k])
    diff = actual - desired
    # both series may unwrap onto different branches
    diff -= 2 * np.pi * np.round(np.mean(diff) / (2 * np.pi))
    return float(np.sqrt(np.mean(diff ** 2)))


def tau_avg(log):
    """Mean over ticks of the mean absolute applied joint torque"""
    _check(log)
    return float(np.mean(np.abs(log.group("tau"))))


def tv_tau(log):
    """Total variation of the applied joint torque summed over joints"""
    _check(log)
    return float(np.sum(np.abs(np.diff(log.group("tau"), axis=0))))


def compute_metrics(log):
    axes = rmse_p_axes(log)
    return MetricsReport(
        rmse_p=float(np.mean(axes)),
        rmse_xi=rmse_xi(log),
        rmse_phi=[rmse_phi(log, k) for k in range(3)],
        tau_avg=tau_avg(log),
        tv_tau=tv_tau(log),
        rmse_p_axes=axes.tolist(),
    )


def format_table(rows, reference=None, columns=TRACKING_COLUMNS):
    """Comparison table, one row per controller.

    ``rows`` maps a controller name to a MetricsReport or to an error message.
    With a ``reference`` row present, a ``<column>_margin`` column gives the
    relative difference of every row against it in percent.
    """
    records = {}
    errors = {}
    for name, report in rows.items():
        if isinstance(report, MetricsReport):
            flat = report.columns()
            records[name] = {column: flat.get(column, np.nan) for column in columns}
        else:
            records[name] = {column: np.nan for column in columns}
            errors[name] = str(report)
    table = pd.DataFrame.from_dict(records, orient="index", columns=columns)
    table.index.name = "controller"
    if reference is not None and reference in records and reference not in errors:
        ref = table.loc[reference]
        for column in columns:
            change = (table[column] - ref[column]) / ref[column]
            table[f"{column}_margin"] = 100.0 * change
    table["error"] = pd.Series(errors, dtype=object)
    return table
