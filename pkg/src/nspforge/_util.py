"""Small helpers shared across modules: item ordering, CSV comment stripping."""

import re

_DIGITS = re.compile(r"(\d+)")


def natural_key(item):
    """Sort key that orders ``N2`` before ``N10``."""
    parts = _DIGITS.split(str(item))
    return tuple((0, int(p)) if p.isdigit() else (1, p) for p in parts)


def sorted_items(items):
    return sorted(items, key=natural_key)


def trailing_index(item):
    """1-based number at the end of an item id (``Nurse_3`` -> 3), or None."""
    match = re.search(r"(\d+)\s*$", str(item))
    return int(match.group(1)) if match else None


def content_lines(text):
    """Yield ``(lineno, line)`` for non-blank, non-comment lines; inline ``#`` comments are dropped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line
