"""Type-I error inflation experiment on pure-noise data."""

from django.conf import settings

from selection.exceptions import ConfigError
from selection.experiments import run_experiment1_grid
from selection.forms import Experiment1Form
from selection.reports import write_experiment1
from selection.scoring import StatisticKind

from ._base import SelectionCommand


class Command(SelectionCommand):
    help = "Compare naive best-model testing with the selection permutation test on noise data."

    def add_arguments(self, parser):
        parser.add_argument("--case", choices=["independent", "dependent"], default="independent")
        parser.add_argument("--k", type=int, help="Shared variables in the dependent case.")
        parser.add_argument("--n-models", help="Comma-separated grid of model counts.")
        parser.add_argument("--n-outcomes", type=int)
        parser.add_argument("--repeats", type=int)
        parser.add_argument("--alpha", type=float)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--permutations", type=int)
        parser.add_argument("--statistic", choices=[k.value for k in StatisticKind])
        self.add_run_arguments(parser)

    def run(self, **options):
        data = {
            "case": options["case"],
            "k": options.get("k"),
            "n_models": options.get("n_models") or "",
            "n_outcomes": options.get("n_outcomes"),
            "repeats": options.get("repeats"),
            "alpha": options.get("alpha"),
            "permutations": options.get("permutations"),
            "seed": options["seed"] if options.get("seed") is not None else settings.PERMSEL_SEED,
            "statistic": options.get("statistic") or "",
        }
        form = Experiment1Form(data={k: v for k, v in data.items() if v is not None})
        if not form.is_valid():
            problems = "; ".join(
                f"{field}: {' '.join(errors)}" if field != "__all__" else " ".join(errors)
                for field, errors in form.errors.items()
            )
            raise ConfigError(f"invalid experiment options: {problems}")

        config = form.base_config()
        grid = form.cleaned_data["n_models"]
        results = run_experiment1_grid(config, grid, threads=self.threads(options))
        paths = write_experiment1(results, self.output_dir(options))
        low, high = results[0].binomial_band
        self.stdout.write(f"Nominal alpha {config.alpha}, binomial band [{low:.4f}, {high:.4f}]")
        for r in results:
            self.stdout.write(
                f"  {r.case} n_models={r.n_models}: naive {r.naive_reject_rate:.4f}, "
                f"selection {r.selection_test_reject_rate:.4f}"
            )
        self.stdout.write(self.style.SUCCESS("Experiment 1 finished."))
        self.report_written(paths)
