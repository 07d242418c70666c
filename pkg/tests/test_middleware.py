import logging
from types import SimpleNamespace

import numpy as np
import pytest
from scrapy.exceptions import NotConfigured

from ntstsm.conf import get_project_settings
from ntstsm.middleware import (
    DisturbanceEvent,
    DisturbanceMiddleware,
    LoopMiddlewareManager,
    MeasurementNoiseMiddleware,
    NoiseModel,
    inject_noise,
)
from ntstsm.rotation import Pose, axis_to_quat, pose_difference

EPS_C = 5e-4

settings = get_project_settings("ntstsm.settings.base")
x_true = Pose([0.4, 0.1, 0.5], axis_to_quat([0.1, -0.2, 0.3]))
push = DisturbanceEvent(1.0, 0.5, [0.0, 5.0, 0.0, 0.0, 0.0, 0.0])
twist = DisturbanceEvent(1.25, 1.0, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0])


def test_silent_model_passes_pose_through():
    model = NoiseModel(sigma=0.0)
    assert model.silent
    assert inject_noise(x_true, model, np.random.default_rng(0)) is x_true


def test_uniform_draws_stay_in_bound():
    draws = NoiseModel().sample(np.random.default_rng(1), size=10 ** 6)
    assert np.max(np.abs(draws)) <= EPS_C
    assert abs(np.mean(draws)) < 1e-5
    assert np.std(draws) == pytest.approx(EPS_C / np.sqrt(3.0), rel=0.01)


def test_gaussian_draws_are_clipped():
    model = NoiseModel(kind="gaussian", sigma=EPS_C, eps_c=EPS_C)
    draws = model.sample(np.random.default_rng(2), size=10 ** 5)
    assert np.max(np.abs(draws)) == EPS_C
    assert np.std(draws) < EPS_C


def test_sigma_defaults_from_bound():
    model = NoiseModel.from_dict({"eps_c": 1e-3})
    assert model.sigma == pytest.approx(1e-3 / np.sqrt(3.0))


@pytest.mark.parametrize(
    "data", [{"kind": "laplace"}, {"eps_c": -1.0}, {"eps_c": np.inf}, {"sigma": -1.0}]
)
def test_invalid_noise(data):
    with pytest.raises(ValueError):
        NoiseModel.from_dict(data)


def test_measured_pose_within_bound():
    rng = np.random.default_rng(3)
    for _ in range(100):
        measured = inject_noise(x_true, NoiseModel(), rng)
        offset = pose_difference(measured, x_true)
        assert np.all(np.abs(offset) <= EPS_C + 1e-12)


def test_event_window_is_half_open():
    assert not push.active(0.999)
    assert push.active(1.0)
    assert push.active(1.499)
    assert not push.active(1.5)


def test_event_needs_duration():
    with pytest.raises(ValueError):
        DisturbanceEvent(1.0, 0.0, np.zeros(6))


def test_overlapping_events_add_up(caplog):
    mw = DisturbanceMiddleware([push, twist])
    with caplog.at_level(logging.INFO, logger="ntstsm.middleware"):
        wrench, active = mw.process_wrench(1.3)
        mw.process_wrench(1.301)
    assert active
    assert np.array_equal(wrench, [0.0, 5.0, 0.0, 1.0, 0.0, 0.0])
    assert len(caplog.records) == 2


def test_no_wrench_outside_events():
    wrench, active = DisturbanceMiddleware([push]).process_wrench(3.0)
    assert not active
    assert np.all(wrench == 0.0)


def test_noise_middleware():
    mw = MeasurementNoiseMiddleware(NoiseModel(), np.random.default_rng(4))
    measured = mw.process_measurement(x_true, 0.0)
    assert not np.array_equal(measured.p, x_true.p)


def test_manager_from_settings():
    cfg = SimpleNamespace(name="test", noise=NoiseModel(), disturbances=[push])
    manager = LoopMiddlewareManager.from_settings(
        settings, cfg, np.random.default_rng(5)
    )
    assert [type(mw) for mw in manager.middlewares] == [
        MeasurementNoiseMiddleware,
        DisturbanceMiddleware,
    ]
    assert manager.external_wrench(1.2)[1]
    assert manager.measure(x_true, 0.0) is not x_true


def test_manager_skips_disabled_middlewares():
    cfg = SimpleNamespace(name="quiet", noise=NoiseModel(sigma=0.0), disturbances=[])
    manager = LoopMiddlewareManager.from_settings(
        settings, cfg, np.random.default_rng(6)
    )
    assert manager.middlewares == ()
    assert not manager.methods["process_measurement"]
    assert manager.measure(x_true, 0.0) is x_true
    wrench, active = manager.external_wrench(1.2)
    assert not active
    assert np.all(wrench == 0.0)


def test_middleware_order_follows_priority():
    custom = settings.copy()
    custom.set(
        "LOOP_MIDDLEWARES",
        {
            "ntstsm.middleware.MeasurementNoiseMiddleware": 300,
            "ntstsm.middleware.DisturbanceMiddleware": 100,
        },
    )
    cfg = SimpleNamespace(name="test", noise=NoiseModel(), disturbances=[push])
    manager = LoopMiddlewareManager.from_settings(
        custom, cfg, np.random.default_rng(7)
    )
    assert isinstance(manager.middlewares[0], DisturbanceMiddleware)


def test_silent_noise_is_not_configured():
    cfg = SimpleNamespace(name="quiet", noise=NoiseModel(sigma=0.0), disturbances=[])
    with pytest.raises(NotConfigured):
        MeasurementNoiseMiddleware.from_experiment(cfg, np.random.default_rng(8))
    with pytest.raises(NotConfigured):
        DisturbanceMiddleware.from_experiment(cfg, np.random.default_rng(8))


def test_middleware_disabled_by_none():
    custom = settings.copy()
    custom.set(
        "LOOP_MIDDLEWARES", {"ntstsm.middleware.MeasurementNoiseMiddleware": None}
    )
    cfg = SimpleNamespace(name="test", noise=NoiseModel(), disturbances=[push])
    manager = LoopMiddlewareManager.from_settings(
        custom, cfg, np.random.default_rng(9)
    )
    assert [type(mw) for mw in manager.middlewares] == [DisturbanceMiddleware]
    assert manager.measure(x_true, 0.0) is x_true
