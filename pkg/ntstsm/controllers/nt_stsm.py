from dataclasses import replace

from ntstsm.control import (
    TaskSpaceController,
    gamma_factor,
    ntstsm_control,
    sliding_surface,
)
from ntstsm.mixins import SlidingModeMixin


class NtStsmController(SlidingModeMixin, TaskSpaceController):
    """Adaptive terminal super-twisting controller"""

    name = "nt_stsm"

    def compute(self, err, H, dyn, traj, dt):
        s = sliding_surface(err, self.sliding)
        self.adapt(s, dt)
        u, self.state = ntstsm_control(
            err, H, s, self.state, dyn, traj, self.sliding, dt, self.nu_max
        )
        return u


class NtStsmConstrainedController(NtStsmController):
    """Same law with the integral gain tied to kappa1 through
    kappa2 = Gamma kappa1 / 4, Gamma = alpha beta |de|^(alpha - 1)."""

    name = "nt_stsm_constrained"

    def compute(self, err, H, dyn, traj, dt):
        s = sliding_surface(err, self.sliding)
        self.adapt(s, dt)
        kappa2 = 0.25 * gamma_factor(err.de, self.sliding) * self.state.kappa1
        self.state = replace(self.state, kappa2=kappa2)
        u, self.state = ntstsm_control(
            err, H, s, self.state, dyn, traj, self.sliding, dt, self.nu_max
        )
        return u
