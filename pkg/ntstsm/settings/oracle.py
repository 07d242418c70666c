from .base import *  # noqa

# Reference runs used to cross-check the 1 kHz loop
INTEGRATOR = "rk4"

DT = 1e-4

TORQUE_SATURATION = False

COMPARE_WORKERS = 1
