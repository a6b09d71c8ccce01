"""
Module: selection_extras.py
Purpose: Template filters for the plain-text result tables.
Numbers are formatted here so every table prints them the same way.
"""

from django import template

register = template.Library()


@register.filter
def fmt_stat(value, digits=3):
    """Fixed-point statistic, or '-' when missing."""
    if value is None or value == "":
        return "-"
    return f"{float(value):.{int(digits)}f}"


@register.filter
def fmt_p(value):
    """p-value with four decimals, or '-' when the model was not tested."""
    if value is None or value == "":
        return "-"
    return f"{float(value):.4f}"


@register.filter
def aligned(cells, widths):
    """
    Join cells into one line: first column left-aligned, the rest right-aligned,
    each padded to its width and separated by two spaces.
    """
    parts = []
    for i, (cell, width) in enumerate(zip(cells, widths)):
        text = str(cell)
        parts.append(text.ljust(width) if i == 0 else text.rjust(width))
    return "  ".join(parts).rstrip()
