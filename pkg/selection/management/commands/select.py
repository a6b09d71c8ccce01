"""Score tables plus the model-selection permutation test."""

from selection.pipeline import run_selection
from selection.reports import write_bundle

from ._base import SelectionCommand


class Command(SelectionCommand):
    help = (
        "Build score tables, test every model and the whole selection by permutation, "
        "and write tables, ECDFs and a results bundle with provenance."
    )

    def add_arguments(self, parser):
        self.add_config_arguments(parser)

    def run(self, **options):
        config = self.load_config(options)
        bundle = run_selection(config, threads=self.threads(options))
        paths = write_bundle(bundle, self.output_dir(options, config))
        if bundle.dropped_models:
            self.stdout.write(f"Dropped before testing: {', '.join(bundle.dropped_models)}")
        for result in bundle.results:
            selection = result.selection
            line = (
                f"{result.kind.title}: best {selection.best_model}, "
                f"selection p = {selection.p_value:.4f} "
                f"({selection.exceed_count}/{selection.permutation_count})"
            )
            if selection.degenerate:
                self.stdout.write(self.style.WARNING(line + " - degenerate, null model only"))
            else:
                self.stdout.write(line)
        self.stdout.write(self.style.SUCCESS("Selection finished."))
        self.report_written(paths)
