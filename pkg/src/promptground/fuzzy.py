"""Normalized edit-distance similarity on a 0..100 scale."""

from __future__ import annotations

from . import _kernels


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character edits turning ``a`` into ``b``."""
    if a == b:
        return 0
    return int(_kernels.lev_active(_kernels.encode(a), _kernels.encode(b)))


def fuzzy_similarity(a: str, b: str) -> float:
    """Similarity score ``100 * (1 - distance / max(len(a), len(b)))``.

    Two empty strings score 100. The score is symmetric, lies in
    [0, 100], and hits 100 exactly when the strings are equal.
    """
    if a == b:
        return 100.0
    longest = max(len(a), len(b))
    return 100.0 * (1.0 - levenshtein(a, b) / longest)
