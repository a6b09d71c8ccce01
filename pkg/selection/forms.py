"""Forms for the selection app.

Experiment1Form validates the `experiment1` command options the same way a
web form would, so bad combinations are rejected before any work starts:
- the dependent case needs k,
- every requested n_models must be at most 2^k - 1 there.
"""

from django import forms
from django.core.exceptions import ValidationError

from .experiments import DEFAULT_GRID, DependentCase, Experiment1Config, IndependentCase
from .scoring import StatisticKind


class Experiment1Form(forms.Form):
    case = forms.ChoiceField(choices=[("independent", "independent"), ("dependent", "dependent")])
    k = forms.IntegerField(min_value=1, required=False)
    n_models = forms.CharField(
        required=False,
        help_text="Comma-separated grid (e.g. 1,2,3,7). Defaults to 1,2,3,7,15,31.",
    )
    n_outcomes = forms.IntegerField(min_value=2, required=False)
    repeats = forms.IntegerField(min_value=1, required=False)
    alpha = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    permutations = forms.IntegerField(min_value=1, required=False)
    seed = forms.IntegerField(min_value=0, required=False)
    statistic = forms.ChoiceField(choices=[(k.value, k.title) for k in StatisticKind], required=False)

    def clean_n_models(self):
        raw = (self.cleaned_data.get("n_models") or "").strip()
        if not raw:
            return None
        try:
            values = [int(part) for part in raw.split(",") if part.strip()]
        except ValueError:
            raise ValidationError("n_models must be comma-separated integers.")
        if not values or any(v < 1 for v in values):
            raise ValidationError("n_models values must be at least 1.")
        return values

    def clean_alpha(self):
        alpha = self.cleaned_data.get("alpha")
        if alpha is not None and not 0 < alpha < 1:
            raise ValidationError("alpha must lie strictly between 0 and 1.")
        return alpha

    def clean(self):
        cleaned = super().clean()
        case, k, grid = cleaned.get("case"), cleaned.get("k"), cleaned.get("n_models")
        if case == "dependent":
            if k is None:
                raise ValidationError("The dependent case needs k.")
            limit = 2**k - 1
            if grid is None:
                grid = [n for n in DEFAULT_GRID if n <= limit]
            too_many = [n for n in grid if n > limit]
            if too_many:
                raise ValidationError(
                    f"With k={k} only {limit} distinct models exist; got n_models {too_many}."
                )
        cleaned["n_models"] = grid or list(DEFAULT_GRID)
        return cleaned

    def base_config(self) -> Experiment1Config:
        """Config for the first grid value; `with_n_models` gives the others."""
        data = self.cleaned_data
        first = data["n_models"][0]
        case = (
            DependentCase(k=data["k"], n_models=first)
            if data["case"] == "dependent"
            else IndependentCase(n_models=first)
        )
        extras = {
            name: data[name]
            for name in ("n_outcomes", "repeats", "alpha", "permutations", "seed", "statistic")
            if data.get(name) not in (None, "")
        }
        return Experiment1Config(case=case, **extras)
