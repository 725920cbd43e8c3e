"""
Small helpers shared across the project: chunked iteration for bulk writes,
stable number formatting for CSV output and scalar parsing for overrides.
"""

import json
import math
from itertools import zip_longest

import numpy as np

_MISSING = object()


def grouper(iterable, n):
    """Groups elements from an iterable into lists of at most ``n`` items."""
    iterators = [iter(iterable)] * n
    for values in zip_longest(*iterators, fillvalue=_MISSING):
        yield [v for v in values if v is not _MISSING]


def format_value(value, digits=17):
    """
    Formats a cell for CSV and summary output.

    Floats use ``digits`` significant digits so doubles round-trip exactly;
    non-finite values become ``nan``/``inf``/``-inf``.

    Args:
        value: A number, string, bool or None.
        digits (int): Significant digits for floating point values.

    Returns:
        str: The formatted value.
    """
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, f".{digits}g")
    return str(value)


def parse_scalar(text):
    """Parses an override value as JSON, falling back to the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text
