from .pd import PdMixin  # noqa
from .sliding import SlidingModeMixin  # noqa
