"""DRF serializers for run configuration files and result bundles.

Input side (strict, unknown keys rejected):
- ModelSpecSerializer
- RunConfigSerializer

Output side (read-only):
- ScoreRowSerializer
- PermTestResultSerializer
- ProvenanceSerializer
- ResultsBundleSerializer
"""

from collections.abc import Mapping

from rest_framework import serializers

from .exceptions import ConfigError
from .popmodel import Family, ModelSpec
from .scoring import AiccConvention, ForecastScale, StatisticKind

SCHEMA_VERSION = 1


class StrictSerializer(serializers.Serializer):
    """Serializer that fails on keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown field."] for key in unknown})
        return super().to_internal_value(data)


class ModelSpecSerializer(StrictSerializer):
    """One candidate model of the model set."""

    label = serializers.CharField(max_length=64)
    family = serializers.ChoiceField(choices=[f.value for f in Family])
    density = serializers.BooleanField(default=False)
    covariates = serializers.ListField(child=serializers.CharField(), default=list)
    interactions = serializers.ListField(
        child=serializers.ListField(child=serializers.CharField(), min_length=2, max_length=2),
        default=list,
    )
    k_override = serializers.IntegerField(min_value=1, required=False, allow_null=True)

    def validate(self, attrs):
        try:
            _spec_from(attrs)
        except ConfigError as exc:
            raise serializers.ValidationError(str(exc)) from None
        return attrs

    def create(self, validated_data):
        return _spec_from(validated_data)


def _spec_from(attrs) -> ModelSpec:
    return ModelSpec(
        family=attrs["family"],
        covariate_names=tuple(attrs.get("covariates", ())),
        interactions=tuple(tuple(pair) for pair in attrs.get("interactions", ())),
        include_density=attrs.get("density", False),
        label=attrs["label"],
        k_override=attrs.get("k_override"),
    )


class RunConfigSerializer(StrictSerializer):
    """Top-level run configuration document (schema version 1)."""

    schema_version = serializers.IntegerField()
    dataset = serializers.CharField()
    models = ModelSpecSerializer(many=True, allow_empty=False)
    statistics = serializers.ListField(
        child=serializers.ChoiceField(choices=[k.value for k in StatisticKind]),
        allow_empty=False,
        default=lambda: [StatisticKind.AIC.value],
    )
    permutations = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    output_dir = serializers.CharField(required=False)
    add_one = serializers.BooleanField(required=False)
    aicc_convention = serializers.ChoiceField(
        choices=[c.value for c in AiccConvention], required=False
    )
    forecast_scale = serializers.ChoiceField(
        choices=[s.value for s in ForecastScale], default=ForecastScale.RELATIVE.value
    )
    forecast_samples = serializers.IntegerField(min_value=1, required=False)
    kde_bandwidth = serializers.FloatField(required=False, allow_null=True)
    drop_best = serializers.IntegerField(min_value=0, default=0)
    exclude_years = serializers.ListField(child=serializers.IntegerField(), default=list)
    influence_threshold = serializers.FloatField(min_value=0.0, required=False, allow_null=True)

    def validate_schema_version(self, value):
        if value != SCHEMA_VERSION:
            raise serializers.ValidationError(
                f"unsupported schema version {value}, expected {SCHEMA_VERSION}"
            )
        return value

    def validate_statistics(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError("statistics are listed more than once")
        return value

    def validate_kde_bandwidth(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("bandwidth must be positive")
        return value

    def validate(self, attrs):
        labels = [m["label"] for m in attrs["models"]]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise serializers.ValidationError({"models": [f"duplicate labels: {duplicates}"]})
        non_null = sum(m["family"] != Family.NULL.value for m in attrs["models"])
        if attrs["drop_best"] > 0 and attrs["drop_best"] >= non_null:
            raise serializers.ValidationError(
                {"drop_best": [f"cannot drop {attrs['drop_best']} of {non_null} non-null models"]}
            )
        return attrs


# ---------- output ----------

class ScoreRowSerializer(serializers.Serializer):
    """One score table line."""

    model = serializers.CharField(source="model_id")
    statistic = serializers.SerializerMethodField()
    delta_vs_null = serializers.FloatField(allow_null=True)
    p_value = serializers.FloatField(allow_null=True)
    adjusted_p_value = serializers.FloatField(allow_null=True)
    exceed_count = serializers.IntegerField(allow_null=True)
    k = serializers.IntegerField(source="k_params", allow_null=True)
    loglik = serializers.FloatField(allow_null=True)
    is_null = serializers.BooleanField()
    error = serializers.CharField(allow_null=True)

    def get_statistic(self, row):
        return None if row.statistic is None else float(row.statistic.value)


class PermTestResultSerializer(serializers.Serializer):
    kind = serializers.CharField()
    observed = serializers.FloatField(source="observed_stat")
    best_model = serializers.CharField(allow_null=True)
    exceed_count = serializers.IntegerField()
    permutations = serializers.IntegerField(source="permutation_count")
    p_value = serializers.FloatField()
    failed_refits = serializers.IntegerField()
    add_one = serializers.BooleanField()
    degenerate = serializers.BooleanField()
    models = serializers.ListField(source="model_ids", child=serializers.CharField())


class ProvenanceSerializer(serializers.Serializer):
    """Everything needed to rerun and reproduce a bundle."""

    version = serializers.CharField()
    seed = serializers.IntegerField()
    permutations = serializers.IntegerField()
    statistics = serializers.ListField(child=serializers.CharField())
    config_sha256 = serializers.CharField()
    dataset_sha256 = serializers.CharField()
    config = serializers.DictField()


class KindResultSerializer(serializers.Serializer):
    kind = serializers.CharField()
    table = ScoreRowSerializer(many=True)
    selection = PermTestResultSerializer(allow_null=True)
    ecdf = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), allow_null=True
    )


class ResultsBundleSerializer(serializers.Serializer):
    results = KindResultSerializer(many=True)
    dropped_models = serializers.ListField(child=serializers.CharField())
    provenance = ProvenanceSerializer()
