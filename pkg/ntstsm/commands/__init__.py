"""
Base class for the ``ntstsm`` subcommands. Every module of this package that
defines a ``Command`` becomes a subcommand named after the module, with
underscores turned into dashes.
"""
import logging

from scrapy.commands import ScrapyCommand
from scrapy.exceptions import UsageError

__all__ = ["NtstsmCommand", "UsageError"]


class NtstsmCommand(ScrapyCommand):
    """Scrapy command without a crawler: the global options (-s, -L, --logfile,
    --nolog) fill ``self.settings``, which ``run`` hands to the simulator."""

    requires_project = False

    def syntax(self):
        return "[options]"

    @property
    def logger(self):
        return logging.getLogger(type(self).__module__)
