"""Minimum-cost assignment with forbidden cells.

Costs form an n x m matrix whose cells are finite floats or FORBIDDEN.
Internally the matrix is padded to a square one, with dummy cells (and
forbidden cells) priced at a constant larger than any admissible total, and
solved with the O(n^3) shortest-augmenting-path formulation of the Hungarian
method (row/column potentials, one augmentation per row). Because the
padding constant dominates every admissible total, the optimum uses as many
admissible cells as possible and, among those matchings, the cheapest one.
Pairs landing on padded or forbidden cells are dropped from the result, so a
row or column whose admissible cells are exhausted simply stays unmatched.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import InvariantError, ValidationError

FORBIDDEN = math.inf


def hungarian(cost: Sequence) -> list:
    """Solve the assignment problem; returns (row, col) pairs sorted by row.

    The returned matching has the largest possible number of admissible
    pairs and, among such matchings, the minimum total cost. No returned
    pair ever sits on a FORBIDDEN cell.
    """
    n = len(cost)
    if n == 0:
        raise ValidationError("cost matrix must have at least one row")
    m = len(cost[0])
    if m == 0:
        raise ValidationError("cost matrix must have at least one column")
    finite_sum = 0.0
    for i, row in enumerate(cost):
        if len(row) != m:
            raise ValidationError(f"row {i} has {len(row)} columns, expected {m}")
        for value in row:
            if value != value:
                raise ValidationError("cost matrix contains NaN")
            if value == -math.inf:
                raise ValidationError("cost matrix contains -inf")
            if value != FORBIDDEN:
                finite_sum += abs(value)
    big = 1.0 + 2.0 * finite_sum

    size = max(n, m)
    padded = [[big] * size for _ in range(size)]
    for i in range(n):
        row = cost[i]
        for j in range(m):
            if row[j] != FORBIDDEN:
                padded[i][j] = row[j]

    col_match = _solve_square(padded, size)

    pairs = []
    for j, i in enumerate(col_match):
        if i < n and j < m and cost[i][j] != FORBIDDEN:
            pairs.append((i, j))
    pairs.sort()
    for i, j in pairs:
        if cost[i][j] == FORBIDDEN:
            raise InvariantError("assignment returned a forbidden pair")
    return pairs


def _solve_square(a: list, size: int) -> list:
    """Shortest-augmenting-path Hungarian on a square matrix.

    Returns col -> row of the minimum-cost perfect matching. Uses 1-based
    scratch arrays with column 0 as the virtual start of each augmenting
    path.
    """
    u = [0.0] * (size + 1)
    v = [0.0] * (size + 1)
    match = [0] * (size + 1)  # column -> matched row, 0 = free
    for i in range(1, size + 1):
        match[0] = i
        j0 = 0
        minv = [math.inf] * (size + 1)
        way = [0] * (size + 1)
        used = [False] * (size + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = math.inf
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, size + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(size + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    return [match[j] - 1 for j in range(1, size + 1)]


def matching_cost(cost: Sequence, pairs: Sequence) -> float:
    return sum(cost[i][j] for i, j in pairs)
