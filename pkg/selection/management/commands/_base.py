"""Shared plumbing for the selection management commands."""

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from selection.exceptions import ConfigError, SelectionError
from selection.pipeline import RunConfig, load_run_config
from selection.scoring import StatisticKind


class SelectionCommand(BaseCommand):
    """Base command: maps SelectionError onto CommandError with the matching exit code."""

    def add_config_arguments(self, parser, *, permutations=True):
        parser.add_argument("--config", required=True, help="JSON run configuration (schema_version 1).")
        parser.add_argument("--seed", type=int, help="Master seed; overrides the configuration.")
        if permutations:
            parser.add_argument("--permutations", type=int, help="Number of derangements J.")
            parser.add_argument(
                "--statistic",
                action="append",
                choices=[k.value for k in StatisticKind],
                help="Statistic kind; repeat for several. Overrides the configuration.",
            )
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        parser.add_argument("--threads", type=int, help="Worker threads (default PERMSEL_THREADS).")
        parser.add_argument("--output-dir", help="Directory for result files.")

    def threads(self, options) -> int:
        threads = options.get("threads")
        if threads is None:
            threads = settings.PERMSEL_THREADS
        if threads < 1:
            raise ConfigError(f"--threads must be at least 1, got {threads}")
        return threads

    def load_config(self, options) -> RunConfig:
        return load_run_config(
            options["config"],
            seed=options.get("seed"),
            permutations=options.get("permutations"),
            statistics=options.get("statistic"),
        )

    def output_dir(self, options, config: RunConfig | None = None):
        if options.get("output_dir"):
            return options["output_dir"]
        return config.output_dir if config is not None else "results"

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except SelectionError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError

    def report_written(self, paths):
        for path in paths:
            self.stdout.write(f"  {path}")
