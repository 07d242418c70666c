from ntstsm.control import TaskSpaceController
from ntstsm.mixins import PdMixin


class PdLowController(PdMixin, TaskSpaceController):
    name = "pd_low"
    gains = (200.0, 50.0)


class PdMedController(PdMixin, TaskSpaceController):
    name = "pd_med"
    gains = (800.0, 200.0)


class PdHighController(PdMixin, TaskSpaceController):
    name = "pd_high"
    gains = (2000.0, 500.0)
