"""Fit every configured model once and report criteria and influential years."""

from selection.pipeline import run_fit
from selection.reports import write_fit

from ._base import SelectionCommand


class Command(SelectionCommand):
    help = "Fit each model: coefficients, log-likelihood, AIC/AICc, Cook's distances, optional forecast."

    def add_arguments(self, parser):
        self.add_config_arguments(parser, permutations=False)
        parser.add_argument(
            "--forecast",
            action="store_true",
            help="Also forecast next year's count per model by Monte-Carlo simulation.",
        )

    def run(self, **options):
        config = self.load_config(options)
        fits = run_fit(config, forecast=options["forecast"], threads=self.threads(options))
        paths = write_fit(fits, self.output_dir(options, config))
        failed = [f.model_id for f in fits if f.error]
        if failed:
            self.stdout.write(self.style.WARNING(f"Models not fitted: {', '.join(failed)}"))
        self.stdout.write(self.style.SUCCESS(f"Fitted {len(fits) - len(failed)} of {len(fits)} models."))
        self.report_written(paths)
