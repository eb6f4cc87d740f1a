"""
Shared behaviour of the pipeline management commands.

Every configuration key is mirrored as ``--key-with-dashes``; pipeline
errors become ``CommandError`` with the error's exit code, and argument
parsing failures exit with the usage code 1.
"""
import sys

from django.core.management.base import BaseCommand, CommandError

from dupless.exceptions import ConfigError, DataError, NumericalError, PipelineError
from pipeline.config import ConfigLoader

EXIT_USAGE = ConfigError.exit_code
EXIT_DATA = DataError.exit_code
EXIT_NUMERICAL = NumericalError.exit_code


class StageCommand(BaseCommand):
    stage = ''
    per_extractor = False

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            help='key=value file overriding the settings defaults',
        )
        for key in ConfigLoader.keys():
            parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, metavar='VALUE')
        if self.per_extractor:
            parser.add_argument(
                '--extractor',
                action='append',
                help='Extractor tag to process; repeat for several (default: every configured extractor)',
            )
        self.add_stage_arguments(parser)

    def add_stage_arguments(self, parser):
        pass

    def run_from_argv(self, argv):
        # argparse exits with 2 on bad arguments; that code belongs to data errors here
        self._called_from_command_line = True
        parser = self.create_parser(argv[0], argv[1])
        try:
            parser.parse_args(argv[2:])
        except SystemExit as e:
            if e.code:
                sys.exit(EXIT_USAGE)
            raise
        super().run_from_argv(argv)

    def handle(self, *args, **options):
        self.stdout.write('=' * 70)
        self.stdout.write(self.stage.upper().replace('_', ' '))
        self.stdout.write('=' * 70)
        try:
            config = ConfigLoader.resolve(
                overrides={key: options.get(key) for key in ConfigLoader.keys()},
                config_file=options.get('config'),
            )
            result = self.run_stage(config, options)
        except PipelineError as e:
            raise CommandError(f"{self.stage}: {e}", returncode=e.exit_code) from e
        except ArithmeticError as e:
            raise CommandError(f"{self.stage}: numerical failure: {e}", returncode=EXIT_NUMERICAL) from e
        except (ValueError, OSError) as e:
            raise CommandError(f"{self.stage}: {e}", returncode=EXIT_DATA) from e

        for path in result if isinstance(result, list) else [result]:
            self.stdout.write(self.style.SUCCESS(f"✓ {path}"))

    def run_stage(self, config, options):
        raise NotImplementedError
