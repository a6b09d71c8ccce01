"""Single-model permutation test of every configured model."""

from selection.pipeline import run_permtests
from selection.reports import write_permtests

from ._base import SelectionCommand


class Command(SelectionCommand):
    help = "Run the single-model permutation test (with Westfall-Young adjustment) for each model."

    def add_arguments(self, parser):
        self.add_config_arguments(parser)

    def run(self, **options):
        config = self.load_config(options)
        results = run_permtests(config, threads=self.threads(options))
        paths = write_permtests(results, self.output_dir(options, config))
        for kind, rows in results.items():
            for row in rows:
                self.stdout.write(
                    f"{kind.title:>8}  {row.model_id}: p = {row.p_value:.4f} "
                    f"(adjusted {row.adjusted_p_value:.4f}, {row.exceed_count}/{row.permutations})"
                )
        self.stdout.write(self.style.SUCCESS("Permutation tests finished."))
        self.report_written(paths)
