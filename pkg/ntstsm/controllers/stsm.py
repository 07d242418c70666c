from ntstsm.control import TaskSpaceController, linear_surface, stsm_control
from ntstsm.mixins import SlidingModeMixin


class StsmController(SlidingModeMixin, TaskSpaceController):
    name = "stsm"

    def compute(self, err, H, dyn, traj, dt):
        self.adapt(linear_surface(err, self.sliding), dt)
        u, self.state = stsm_control(
            err, H, dyn, traj, self.sliding, self.state, dt, self.nu_max
        )
        return u
