from ntstsm.control import TaskSpaceController, ntsm_control, sliding_surface
from ntstsm.mixins import SlidingModeMixin


class NtsmController(SlidingModeMixin, TaskSpaceController):
    """Non-singular terminal sliding mode without the super-twisting integral"""

    name = "ntsm"

    def compute(self, err, H, dyn, traj, dt):
        s1 = sliding_surface(err, self.sliding)
        self.adapt(s1, dt)
        return ntsm_control(err, H, dyn, traj, self.sliding, self.state.kappa1)
