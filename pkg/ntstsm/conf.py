import os

from scrapy.settings import Settings

SETTINGS_ENVVAR = "NTSTSM_SETTINGS_MODULE"
DEFAULT_SETTINGS_MODULE = "ntstsm.settings.base"


def get_project_settings(module=None):
    """Scrapy settings with an ntstsm settings module on top.

    ``module`` falls back to $NTSTSM_SETTINGS_MODULE and then to the base
    presets. Per-run overrides go through ``Settings.set`` at a higher priority.
    """
    settings = Settings()
    module = module or os.getenv(SETTINGS_ENVVAR, DEFAULT_SETTINGS_MODULE)
    settings.setmodule(module, priority="project")
    return settings
