import json
import sys
from functools import partial

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from detector.exceptions import EXIT_USAGE, DetectorError, UsageError

"""
Base class of the detector commands

Organisation:
- every command implements run(**options) and returns a JSON-ready object
- library errors become CommandError with the matching exit code
    (1 usage, 2 data, 3 runtime)
- argument errors print the usage text and exit 1
- reports go to stdout as JSON, logs to stderr
"""


def _usage_error(parser, message):
    parser.print_usage(sys.stderr)
    sys.stderr.write(f"{parser.prog}: error: {message}\n")
    sys.exit(EXIT_USAGE)


def parse_int_list(value):
    """ "1,16,32" -> [1, 16, 32] """
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError as err:
        raise UsageError(f"expected comma-separated integers, got '{value}'") from err


def parse_float_list(value):
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as err:
        raise UsageError(f"expected comma-separated numbers, got '{value}'") from err


class DetectorCommand(BaseCommand):
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = partial(_usage_error, parser)
        return parser

    def handle(self, *args, **options):
        try:
            result = self.run(**options)
        except DetectorError as err:
            raise CommandError(f"{type(err).__name__}: {err}", returncode=err.exit_code) from err
        if result is not None:
            self.write_json(result)

    def run(self, **options):
        raise NotImplementedError

    def write_json(self, obj):
        self.stdout.write(json.dumps(obj, indent=1))

    @staticmethod
    def checkpoint_dir(value=None):
        return value or settings.CHECKPOINT_DIR
