"""App configuration for the Selection Django application."""

from django.apps import AppConfig


class SelectionConfig(AppConfig):
    """Configuration for the selection app."""
    name = "selection"
    verbose_name = "Model-selection permutation tests"
