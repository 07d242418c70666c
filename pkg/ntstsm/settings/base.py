import os

# Simulation settings for the ntstsm project
#
# Every value here can be overridden per run through Settings.set() or, for the
# scalar knobs, through the matching NTSTSM_* environment variable. Experiment
# TOML files only need to name what differs from these presets.

CONTROLLER_MODULES = ["ntstsm.controllers"]

COMMANDS_MODULE = "ntstsm.commands"

LOG_LEVEL = os.getenv("NTSTSM_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"

# Real-time control interface rate of the arm (1 kHz)
DT = float(os.getenv("NTSTSM_DT", 1e-3))
INTEGRATOR = os.getenv("NTSTSM_INTEGRATOR", "semi_implicit")

CHAIN = "franka_like"
FRICTION = "simulated"

# Ready pose of the default chain
INITIAL_Q = [
    0.0,
    -0.785398163397,
    0.0,
    -2.35619449019,
    0.0,
    1.57079632679,
    0.785398163397,
]

# Loop middlewares, lower numbers run first. Disable one by mapping its path to
# None in LOOP_MIDDLEWARES.
LOOP_MIDDLEWARES = {}
LOOP_MIDDLEWARES_BASE = {
    "ntstsm.middleware.MeasurementNoiseMiddleware": 100,
    "ntstsm.middleware.DisturbanceMiddleware": 200,
}

SLIDING_PARAMS = {
    "beta": 1.0,
    "alpha_num": 9,
    "alpha_den": 7,
    "k_s": 30.0,
    "theta": 0.9,
    "gamma": 6.0,
    "Omega1": 1.5,
    "Omega2": 0.14,
}

ADAPTIVE_PARAMS = {
    "omega_a": 1000.0,
    "mu_a": 0.001,
    "eta_a": 0.1,
    "kappa1_min": 5.0,
    "kappa1_max": 200.0,
    "L_init": 1.0,
}

OBSERVER_PARAMS = {
    "Fbar": 20.0,
    "k_o1": 200.0,
    "k_o2": 400.0,
    "alpha_e": 0.02,
    "eta_q": 0.5,
}

# (translation N/m, rotation N·m/rad)
PD_GAINS = {
    "pd_low": (200.0, 50.0),
    "pd_med": (800.0, 200.0),
    "pd_high": (2000.0, 500.0),
}

# Per-joint values are broadcast when a scalar is given
FRICTION_PROFILES = {
    "none": {"c": 0.0, "mu_s": 0.0, "mu_k": 0.0, "mu_v": 0.0},
    "default": {"c": 0.003, "mu_s": 0.0, "mu_k": 0.0, "mu_v": 16.0},
    "simulated": {"c": 0.003, "mu_s": 0.5, "mu_k": 25.0, "mu_v": 25.0},
}

FRICTION_COULOMB_VELOCITY = float(os.getenv("NTSTSM_FRICTION_COULOMB_VELOCITY", 1.0))
STICTION_BAND = 1e-3

NOISE = {"kind": "uniform", "eps_c": 5e-4, "sigma": 5e-4 / 3 ** 0.5}

# Wrench (fx, fy, fz, mx, my, mz) applied at the end effector
DISTURBANCE_SCHEDULES = {
    "none": [],
    "desk_disturbances": [
        {"t_start": 5.0, "duration": 1.0, "wrench": [0.0, 5.0, 0.0, 0.0, 0.0, 0.0]},
        {"t_start": 10.0, "duration": 1.0, "wrench": [5.0, 0.0, -5.0, 0.0, 0.0, 0.0]},
        {"t_start": 14.0, "duration": 1.0, "wrench": [0.0, 0.0, 0.0, 1.0, 0.0, 0.0]},
        {"t_start": 17.0, "duration": 1.0, "wrench": [0.0, -5.0, 5.0, 0.0, -1.0, 1.0]},
    ],
}

# Simultaneous 0.05 m on x, y, z and 25 deg about x, y, z
DESK_MOTION = {
    "translation": [0.05, 0.05, 0.05],
    "rotation_deg": [25.0, 25.0, 25.0],
    "duration": 8.0,
}
TRAJECTORY_START = 1.0

# Numerical guards
ETA_FLOOR = 0.1
EPS_BAR = 0.1
NU_MAX = 100.0
L_MIN = 1e-3
Z_HAT_MAX = 50.0
DAMPING_SIGMA_HIGH = 0.05
DAMPING_SIGMA_LOW = 0.005
DAMPING_MAX = 0.05
SINGULAR_FLOOR = 1e-4
NULLSPACE_DAMPING = 1.0
TORQUE_SATURATION = True

RUNLOG_SCHEMA_VERSION = 1
DIVERGENCE_TAIL = 100

COMPARE_WORKERS = int(os.getenv("NTSTSM_COMPARE_WORKERS", os.cpu_count() or 1))
COMPARE_REFERENCE = "nt_stsm"
