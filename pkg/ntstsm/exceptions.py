"""
Exceptions raised by the simulation, control and analysis code.
"""


class NtstsmError(Exception):
    pass


class ConfigError(NtstsmError, ValueError):
    """An experiment or chain file is invalid"""


class SingularityError(NtstsmError):
    """Jacobian rank loss beyond what damping can absorb"""


class IntegrationError(NtstsmError):
    """Forward dynamics produced a non-finite state"""


class OrientationErrorTooLarge(NtstsmError):
    """Quaternion error scalar part fell below the invertibility floor"""


class ObserverDiverged(NtstsmError):
    pass


class DegenerateEllipse(NtstsmError):
    """gamma * theta <= 1 leaves no stable (Omega1, Omega2) region"""


class NotStable(NtstsmError):
    """Gains lie outside the stability ellipse"""


class EmptyLog(NtstsmError):
    pass


class SimulationDiverged(NtstsmError):
    def __init__(self, message, log=None, tick=None):
        super().__init__(message)
        self.log = log
        self.tick = tick


class GimbalProximityWarning(UserWarning):
    pass
