"""
Loop middlewares sit between the simulated arm and the controller: they
corrupt the measured pose and inject external end-effector wrenches. They are
enabled and ordered through the LOOP_MIDDLEWARES and LOOP_MIDDLEWARES_BASE
settings.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scrapy.exceptions import NotConfigured
from scrapy.middleware import MiddlewareManager
from scrapy.utils.conf import build_component_list
from scrapy.utils.misc import load_object

from .rotation import Pose, axis_to_quat, quat_mul

logger = logging.getLogger(__name__)

NOISE_KINDS = ("uniform", "gaussian")


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean measurement noise truncated to +-eps_c on every channel.

    ``sigma`` is the standard deviation before truncation; uniform noise is
    drawn on +-sigma*sqrt(3).
    """

    kind: str = "uniform"
    sigma: float = 5e-4 / math.sqrt(3.0)
    eps_c: float = 5e-4

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"Unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.eps_c) and self.eps_c >= 0):
            raise ValueError("eps_c must be finite and non-negative")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "sigma" not in data and "eps_c" in data:
            data["sigma"] = data["eps_c"] / math.sqrt(3.0)
        return cls(**data)

    @property
    def silent(self):
        return self.sigma == 0 or self.eps_c == 0

    def sample(self, rng, size=6):
        if self.silent:
            return np.zeros(size)
        if self.kind == "uniform":
            half = self.sigma * math.sqrt(3.0)
            draws = rng.uniform(-half, half, size)
        else:
            draws = rng.normal(0.0, self.sigma, size)
        return np.clip(draws, -self.eps_c, self.eps_c)


def inject_noise(x_true, model, rng):
    """Measured pose: translation offset and a small world-frame rotation"""
    if model.silent:
        return x_true
    n = model.sample(rng, 6)
    return Pose(x_true.p + n[:3], quat_mul(axis_to_quat(n[3:]), x_true.xi))


@dataclass(frozen=True)
class DisturbanceEvent:
    t_start: float
    duration: float
    wrench: np.ndarray

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("Disturbance duration must be positive")
        wrench = np.asarray(self.wrench, dtype=float).reshape(6)
        object.__setattr__(self, "wrench", wrench)

    def active(self, t):
        return self.t_start <= t < self.t_start + self.duration


class MeasurementNoiseMiddleware:
    def __init__(self, model, rng):
        self.model = model
        self.rng = rng

    @classmethod
    def from_experiment(cls, cfg, rng):
        if cfg.noise.silent:
            raise NotConfigured
        return cls(cfg.noise, rng)

    def process_measurement(self, x, t):
        return inject_noise(x, self.model, self.rng)


class DisturbanceMiddleware:
    def __init__(self, events):
        self.events = list(events)
        self._active = set()

    @classmethod
    def from_experiment(cls, cfg, rng):
        if not cfg.disturbances:
            raise NotConfigured
        return cls(cfg.disturbances)

    def process_wrench(self, t):
        wrench = np.zeros(6)
        active = set()
        for i, event in enumerate(self.events):
            if event.active(t):
                wrench += event.wrench
                active.add(i)
        for i in active - self._active:
            logger.info(
                "Disturbance %s on at t=%.3f s", self.events[i].wrench.tolist(), t
            )
        self._active = active
        return wrench, bool(active)


class LoopMiddlewareManager(MiddlewareManager):
    component_name = "loop middleware"

    @classmethod
    def _get_mwlist_from_settings(cls, settings):
        return build_component_list(settings.getwithbase("LOOP_MIDDLEWARES"))

    @classmethod
    def from_settings(cls, settings, cfg, rng):
        """Middlewares built for one experiment; those raising NotConfigured
        are left out."""
        middlewares = []
        for path in cls._get_mwlist_from_settings(settings):
            try:
                middlewares.append(load_object(path).from_experiment(cfg, rng))
            except NotConfigured as e:
                log = logger.warning if e.args else logger.debug
                log("Disabled %s for %s: %s", path, cfg.name, e)
        return cls(*middlewares)

    def _add_middleware(self, mw):
        super()._add_middleware(mw)
        if hasattr(mw, "process_measurement"):
            self.methods["process_measurement"].append(mw.process_measurement)
        if hasattr(mw, "process_wrench"):
            self.methods["process_wrench"].append(mw.process_wrench)

    def measure(self, x, t):
        for method in self.methods["process_measurement"]:
            x = method(x, t)
        return x

    def external_wrench(self, t):
        total = np.zeros(6)
        active = False
        for method in self.methods["process_wrench"]:
            wrench, on = method(t)
            total += wrench
            active = active or on
        return total, active
