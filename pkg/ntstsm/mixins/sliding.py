import numpy as np

from ntstsm.control import SlidingControllerState, adapt_gains


class SlidingModeMixin:
    """Adaptive gain state shared by all sliding-mode controllers."""

    def reset(self):
        self.state = SlidingControllerState.initial(self.sliding, self.adaptive)
        self._at_max = np.zeros(6, dtype=bool)

    def adapt(self, s, dt):
        self.state = adapt_gains(self.state, s, self.sliding, self.adaptive, dt)
        at_max = self.state.kappa1 >= self.adaptive.kappa1_max
        if np.any(at_max & ~self._at_max):
            self.logger.debug(
                "kappa1 reached %.1f on channels %s",
                self.adaptive.kappa1_max,
                np.flatnonzero(at_max).tolist(),
            )
        self._at_max = at_max

    def telemetry(self):
        return {
            "s": self.state.s,
            "L": self.state.L,
            "kappa1": self.state.kappa1,
            "kappa2": self.state.kappa2,
            "nu": self.state.nu,
        }
