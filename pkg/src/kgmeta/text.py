"""Tokenization shared by entity matching and sentence encoding."""

from __future__ import annotations

import re

# Alphanumeric runs only: lowercase, then split on every non-alphanumeric
# character (underscore included). Unicode letters and digits count.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase `text` and split it into alphanumeric tokens."""
    return _TOKEN_RE.findall(text.lower())
