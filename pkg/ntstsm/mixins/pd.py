from ntstsm.control import pd_control


class PdMixin:
    gains = None  # (translation N/m, rotation N·m/rad)

    @property
    def p_gains(self):
        """Gains of the PD_GAINS preset named like the controller, if any"""
        if self.settings is not None:
            preset = self.settings.getdict("PD_GAINS").get(self.name)
            if preset is not None:
                return tuple(preset)
        return self.gains

    def compute(self, err, H, dyn, traj, dt):
        return pd_control(err, dyn, self.p_gains)
