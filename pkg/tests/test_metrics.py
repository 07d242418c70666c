import json

import numpy as np
import pytest

from ntstsm.exceptions import EmptyLog, GimbalProximityWarning
from ntstsm.metrics import (
    DISTURBANCE_COLUMNS,
    TRACKING_COLUMNS,
    MetricsReport,
    RunLog,
    RunLogRecorder,
    compute_metrics,
    euler_zyx,
    format_table,
    rmse_p,
    rmse_phi,
    rmse_xi,
    runlog_columns,
    tau_avg,
    tv_tau,
)
from ntstsm.rotation import axis_to_quat

N = 200
TURN = 0.02

t = np.arange(N) * 1e-3
p_d = np.column_stack((np.linspace(0.3, 0.35, N), np.zeros(N), np.full(N, 0.5)))
xi_d = np.array([axis_to_quat([0.0, 0.0, 0.3 * k / N]).as_array() for k in range(N)])
xi = np.array(
    [axis_to_quat([0.0, 0.0, 0.3 * k / N + TURN]).as_array() for k in range(N)]
)
tau_g = np.full((N, 7), 1.0)
tau = tau_g + np.where(np.arange(N) % 2 == 0, 0.5, -0.5)[:, None]

log = RunLog.from_arrays(
    t, p=p_d + [0.01, 0.02, 0.03], p_d=p_d, xi=xi, xi_d=xi_d, tau=tau, tau_g=tau_g
)


def _report(scale):
    return MetricsReport(
        rmse_p=0.01 * scale,
        rmse_xi=0.02 * scale,
        rmse_phi=[0.0, 0.0, 0.02 * scale],
        tau_avg=1.0 * scale,
        tv_tau=10.0 * scale,
        rmse_p_axes=[0.01 * scale] * 3,
    )


def test_rmse_p():
    assert rmse_p(log) == pytest.approx(0.02)


def test_rmse_xi_is_rotation_angle():
    assert rmse_xi(log) == pytest.approx(TURN, rel=1e-6)


def test_rmse_phi_per_axis():
    assert rmse_phi(log, "z") == pytest.approx(TURN, rel=1e-6)
    assert rmse_phi(log, 0) == pytest.approx(0.0, abs=1e-9)


def test_effort_metrics_on_applied_torque():
    assert tau_avg(log) == pytest.approx(1.0)
    assert tv_tau(log) == pytest.approx(7 * (N - 1) * 1.0)


def test_gravity_ramp_does_not_count_as_variation():
    ramp = np.linspace(0.0, 1.0, N)[:, None] * np.ones(7)
    steady = RunLog.from_arrays(t, tau=np.full((N, 7), 3.0), tau_g=ramp)
    assert tv_tau(steady) == 0.0
    assert tau_avg(steady) == pytest.approx(3.0)


def test_total_variation_of_sine():
    amplitude, periods, per_period = 2.0, 3, 100
    phase = 2 * np.pi * np.arange(periods * per_period + 1) / per_period
    wave = RunLog.from_arrays(
        phase, tau=amplitude * np.sin(phase)[:, None] * np.ones(7)
    )
    assert tv_tau(wave) == pytest.approx(7 * 4 * amplitude * periods)


def test_total_variation_splits_at_the_junction():
    rng = np.random.default_rng(0)
    first, second = rng.normal(size=(50, 7)), rng.normal(size=(30, 7))
    whole = RunLog.from_arrays(np.arange(80), tau=np.vstack((first, second)))
    head = RunLog.from_arrays(np.arange(50), tau=first)
    rest = RunLog.from_arrays(np.arange(30), tau=second)
    junction = np.sum(np.abs(second[0] - first[-1]))
    assert tv_tau(whole) == pytest.approx(tv_tau(head) + tv_tau(rest) + junction)
    assert tv_tau(whole) >= tv_tau(head) + tv_tau(rest)


def test_rmse_xi_ignores_quaternion_sign():
    flipped = RunLog.from_arrays(t, p=p_d, p_d=p_d, xi=-xi, xi_d=xi_d, tau=tau)
    assert rmse_xi(flipped) == pytest.approx(rmse_xi(log), rel=1e-12)


def test_metrics_match_plain_loops():
    rng = np.random.default_rng(1)
    p = p_d + rng.normal(scale=1e-3, size=p_d.shape)
    noisy_tau = tau + rng.normal(scale=0.1, size=tau.shape)
    run = RunLog.from_arrays(t, p=p, p_d=p_d, xi=xi, xi_d=xi_d, tau=noisy_tau)

    axes = []
    for k in range(3):
        total = 0.0
        for i in range(N):
            total += (p[i, k] - p_d[i, k]) ** 2
        axes.append((total / N) ** 0.5)
    total_abs = variation = 0.0
    for i in range(N):
        for j in range(7):
            total_abs += abs(noisy_tau[i, j])
            if i > 0:
                variation += abs(noisy_tau[i, j] - noisy_tau[i - 1, j])

    report = compute_metrics(run)
    assert report.rmse_p_axes == pytest.approx(axes, rel=1e-12)
    assert report.rmse_p == pytest.approx(sum(axes) / 3, rel=1e-12)
    assert report.tau_avg == pytest.approx(total_abs / (7 * N), rel=1e-12)
    assert report.tv_tau == pytest.approx(variation, rel=1e-12)


def test_compute_metrics():
    report = compute_metrics(log)
    assert report.rmse_p_axes == pytest.approx([0.01, 0.02, 0.03])
    flat = report.columns()
    assert flat["rmse_p_y"] == pytest.approx(0.02)
    assert flat["rmse_phi_z"] == pytest.approx(TURN, rel=1e-6)
    assert json.loads(report.to_json())["tau_avg"] == pytest.approx(1.0)


def test_report_rejects_negative_values():
    with pytest.raises(ValueError):
        MetricsReport(-1.0, 0.0, [0.0, 0.0, 0.0], 0.0, 0.0)


def test_report_from_dict():
    report = _report(1.0)
    assert MetricsReport.from_dict(report.to_dict()) == report


def test_empty_log():
    empty = RunLogRecorder(7).to_runlog()
    assert len(empty) == 0
    with pytest.raises(EmptyLog):
        compute_metrics(empty)


def test_recorder_fills_missing_groups_with_nan():
    recorder = RunLogRecorder(7)
    recorder.append(0.0, q=np.zeros(7), dq=np.zeros(7), saturated=True)
    frame = recorder.to_runlog().frame
    assert list(frame.columns) == runlog_columns(7)
    assert frame.loc[0, "saturated"] == 1.0
    assert frame.loc[0, "q_6"] == 0.0
    assert np.isnan(frame.loc[0, "u_0"])


def test_runlog_columns():
    columns = runlog_columns(7)
    assert columns[0] == "t"
    assert columns[-3:] == ["disturbance_active", "damping", "saturated"]
    assert "tau_g_6" in columns
    assert "xi_eta" in columns
    assert len(columns) == len(set(columns))


def test_group_of_joint_columns():
    assert log.group("tau").shape == (N, 7)
    with pytest.raises(KeyError):
        log.group("dq")


def test_tail():
    tail = log.tail(10)
    assert len(tail) == 10
    assert tail.t[0] == t[-10]


def test_csv_round_trip(tmp_path):
    path = tmp_path / "run.csv"
    log.write_csv(path)
    assert path.read_text().splitlines()[0] == "# ntstsm-runlog v1"
    back = RunLog.read_csv(path)
    assert list(back.frame.columns) == list(log.frame.columns)
    assert np.array_equal(back.frame.to_numpy(), log.frame.to_numpy())


def test_csv_bytes_are_deterministic(tmp_path):
    log.write_csv(tmp_path / "a.csv")
    log.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_read_rejects_other_csv(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("t,p_x\n0,1\n")
    with pytest.raises(ValueError):
        RunLog.read_csv(path)


def test_gimbal_proximity_warning():
    pitched = axis_to_quat([0.0, np.pi / 2, 0.0]).as_array()
    with pytest.warns(GimbalProximityWarning):
        euler_zyx(pitched)


def test_format_table_margins():
    rows = {"nt_stsm": _report(1.0), "pd_low": _report(1.5)}
    table = format_table(rows, reference="nt_stsm")
    assert list(table.index) == ["nt_stsm", "pd_low"]
    assert table.loc["pd_low", "rmse_p_margin"] == pytest.approx(50.0)
    assert table.loc["nt_stsm", "tv_tau_margin"] == 0.0
    assert table["error"].isna().all()


def test_format_table_keeps_failed_rows():
    rows = {"nt_stsm": _report(1.0), "stsm": "SimulationDiverged: tick 12"}
    table = format_table(rows, reference="nt_stsm", columns=DISTURBANCE_COLUMNS)
    assert np.isnan(table.loc["stsm", "rmse_p_y"])
    assert table.loc["stsm", "error"] == "SimulationDiverged: tick 12"
    assert table.loc["nt_stsm", "rmse_phi_y"] == 0.0


def test_format_table_without_reference():
    table = format_table({"pd_med": _report(1.0)})
    assert list(table.columns) == TRACKING_COLUMNS + ["error"]
