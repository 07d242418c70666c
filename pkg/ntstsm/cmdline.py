import argparse
import inspect
import logging
import sys

from scrapy.utils.log import configure_logging
from scrapy.utils.misc import walk_modules

from ntstsm.commands import NtstsmCommand, UsageError
from ntstsm.conf import get_project_settings
from ntstsm.exceptions import NtstsmError


def _iter_command_classes(module_name):
    for module in walk_modules(module_name):
        for obj in vars(module).values():
            if (
                inspect.isclass(obj)
                and issubclass(obj, NtstsmCommand)
                and obj.__module__ == module.__name__
                and obj is not NtstsmCommand
            ):
                yield obj


def get_commands(settings):
    commands = {}
    for cls in _iter_command_classes(settings["COMMANDS_MODULE"]):
        name = cls.__module__.split(".")[-1].replace("_", "-")
        commands[name] = cls()
    return commands


def build_parser(commands, settings):
    parser = argparse.ArgumentParser(
        prog="ntstsm", description="Task-space sliding-mode control simulator"
    )
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    for name, cmd in sorted(commands.items()):
        cmd.settings = settings
        sub = subparsers.add_parser(
            name,
            help=cmd.short_desc(),
            description=cmd.long_desc(),
            usage=f"ntstsm {name} {cmd.syntax()}",
        )
        cmd.add_options(sub)
    return parser


def _run_print_help(parser, func, *a, **kw):
    try:
        func(*a, **kw)
    except UsageError as e:
        if str(e):
            parser.error(str(e))
        if e.print_help:
            parser.print_help()
        sys.exit(2)


def execute(argv=None, settings=None):
    if argv is None:
        argv = sys.argv[1:]
    if settings is None:
        settings = get_project_settings()
    commands = get_commands(settings)
    parser = build_parser(commands, settings)
    opts = parser.parse_args(argv)
    if not opts.command:
        parser.print_help()
        return 2
    cmd = commands[opts.command]
    _run_print_help(parser, cmd.process_options, [], opts)
    configure_logging(settings)
    try:
        _run_print_help(parser, cmd.run, [], opts)
    except NtstsmError as e:
        logging.getLogger(__name__).error("%s: %s", type(e).__name__, e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(execute())
