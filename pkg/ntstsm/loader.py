import inspect
import logging

from scrapy.utils.misc import walk_modules

from .control import TaskSpaceController

logger = logging.getLogger(__name__)


def iter_controller_classes(module):
    for obj in vars(module).values():
        if (
            inspect.isclass(obj)
            and issubclass(obj, TaskSpaceController)
            and obj.__module__ == module.__name__
            and getattr(obj, "name", None)
        ):
            yield obj


class ControllerLoader:
    """Index of controller classes by their ``name`` attribute, built from the
    CONTROLLER_MODULES setting."""

    def __init__(self, settings):
        self.settings = settings
        self._controllers = {}
        for path in settings.getlist("CONTROLLER_MODULES"):
            for module in walk_modules(path):
                for cls in iter_controller_classes(module):
                    if cls.name in self._controllers:
                        logger.warning(
                            "Controller name %r defined by both %s and %s",
                            cls.name,
                            self._controllers[cls.name].__module__,
                            cls.__module__,
                        )
                    self._controllers[cls.name] = cls

    @classmethod
    def from_settings(cls, settings):
        return cls(settings)

    def load(self, name):
        try:
            return self._controllers[name]
        except KeyError:
            raise KeyError(f"Controller not found: {name}")

    def create(self, name, **kwargs):
        return self.load(name).from_settings(self.settings, **kwargs)

    def list(self):
        return sorted(self._controllers)
