"""Independent reference implementations used to check the real ones.

Everything in here is deliberately written the slow, obvious way and must
stay decoupled from the package internals: the production code paths are
validated against these, never the other way around.
"""

from __future__ import annotations


def levenshtein_dp(a: str, b: str) -> int:
    """Textbook full-matrix dynamic-programming edit distance."""
    n, m = len(a), len(b)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            dist[i][j] = min(
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
                dist[i - 1][j - 1] + cost,
            )
    return dist[n][m]


def similarity_dp(a: str, b: str) -> float:
    """Normalized similarity on a 0..100 scale, from the DP distance."""
    if not a and not b:
        return 100.0
    return 100.0 * (1.0 - levenshtein_dp(a, b) / max(len(a), len(b)))


def cosine_argmax_brute(vectors, query) -> tuple[int, float]:
    """Scan every row with the plain dot/|a||b| formula; first max wins."""
    import math

    best_i = 0
    best_s = -2.0
    for i, row in enumerate(vectors):
        dot = sum(x * y for x, y in zip(row, query))
        na = math.sqrt(sum(x * x for x in row))
        nb = math.sqrt(sum(y * y for y in query))
        s = dot / (na * nb)
        if s > best_s:
            best_i, best_s = i, s
    return best_i, best_s


KIND_RANK = {"ExactFullPath": 0, "Subgroup": 1, "PartialName": 2, "Fuzzy": 3}


def match_order_ok(earlier, later) -> bool:
    """Pairwise predicate for the ranked-match ordering contract."""
    ka, kb = KIND_RANK[earlier.kind], KIND_RANK[later.kind]
    if ka != kb:
        return ka < kb
    if earlier.score != later.score:
        return earlier.score > later.score
    return earlier.path <= later.path
