"""Alignments of two index ranges: validity, counting, budgeted enumeration, scoring.

An alignment pairs positions 1..n of one series with positions 1..m of another:
both index tuples are nondecreasing, start at (1, 1), end at (n, m), advance by
at most one per step, and never repeat the same pair twice.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ground import CpdScoreSpec, GroundKernelSpec, eval_cpd, eval_kernel
from .timeseries import TimeSeries


class BudgetExceededError(ValueError):
    """Enumeration refused because it would exceed the configured budget."""


class InvalidAlignmentError(ValueError):
    """An alignment does not fit the series pair it was applied to."""


@dataclass(frozen=True)
class Alignment:
    """A candidate alignment; see is_valid for the rules it may or may not satisfy."""

    pi1: tuple[int, ...]
    pi2: tuple[int, ...]

    def __post_init__(self):
        p1 = tuple(int(v) for v in self.pi1)
        p2 = tuple(int(v) for v in self.pi2)
        if len(p1) != len(p2) or not p1:
            raise InvalidAlignmentError("pi1 and pi2 must be equal-length, non-empty index tuples")
        object.__setattr__(self, "pi1", p1)
        object.__setattr__(self, "pi2", p2)

    def __len__(self) -> int:
        return len(self.pi1)


@dataclass(frozen=True)
class AlignmentBudget:
    """Hard limits that keep exhaustive enumeration from blowing up."""

    max_cells: int = 64
    max_count: int = 1_000_000

    def __post_init__(self):
        if self.max_cells < 1 or self.max_count < 1:
            raise ValueError("budget limits must be >= 1")


DEFAULT_BUDGET = AlignmentBudget()


def is_valid(a: Alignment, n: int, m: int) -> bool:
    p1, p2 = a.pi1, a.pi2
    if p1[0] != 1 or p2[0] != 1 or p1[-1] != n or p2[-1] != m:
        return False
    for k in range(len(p1) - 1):
        d1 = p1[k + 1] - p1[k]
        d2 = p2[k + 1] - p2[k]
        if d1 not in (0, 1) or d2 not in (0, 1) or d1 + d2 < 1:
            return False
    return True


def count_alignments(n: int, m: int) -> int:
    """Number of alignments of an (n, m) pair, as an exact integer."""
    if n < 1 or m < 1:
        raise ValueError("series lengths must be >= 1")
    prev = [1] * m
    for _ in range(1, n):
        cur = [0] * m
        cur[0] = 1
        for j in range(1, m):
            cur[j] = prev[j] + cur[j - 1] + prev[j - 1]
        prev = cur
    return prev[m - 1]


def enumerate_alignments(
    n: int, m: int, budget: AlignmentBudget = DEFAULT_BUDGET
) -> list[Alignment]:
    """All alignments of an (n, m) pair, in lexicographic move order.

    Moves from a pair are explored diagonal first, then advancing the second
    index alone, then the first. Refuses to start when n*m or the exact count
    exceeds the budget.
    """
    if n < 1 or m < 1:
        raise ValueError("series lengths must be >= 1")
    cells = n * m
    if cells > budget.max_cells:
        raise BudgetExceededError(
            f"n*m = {cells} cells exceeds the enumeration budget of {budget.max_cells}"
        )
    total = count_alignments(n, m)
    if total > budget.max_count:
        raise BudgetExceededError(
            f"{total} alignments exceed the enumeration budget of {budget.max_count}"
        )

    out: list[Alignment] = []
    p1 = [1]
    p2 = [1]

    def walk(i: int, j: int) -> None:
        if i == n and j == m:
            out.append(Alignment(tuple(p1), tuple(p2)))
            return
        if i < n and j < m:
            p1.append(i + 1)
            p2.append(j + 1)
            walk(i + 1, j + 1)
            p1.pop()
            p2.pop()
        if j < m:
            p1.append(i)
            p2.append(j + 1)
            walk(i, j + 1)
            p1.pop()
            p2.pop()
        if i < n:
            p1.append(i + 1)
            p2.append(j)
            walk(i + 1, j)
            p1.pop()
            p2.pop()

    walk(1, 1)
    return out


def _require_valid(a: Alignment, x: TimeSeries, y: TimeSeries) -> None:
    if not is_valid(a, len(x), len(y)):
        raise InvalidAlignmentError(
            f"alignment of length {len(a)} is not valid for series of lengths ({len(x)}, {len(y)})"
        )


def score(a: Alignment, x: TimeSeries, y: TimeSeries, phi: CpdScoreSpec) -> float:
    """Additive score of one alignment: sum of phi over the aligned point pairs."""
    _require_valid(a, x, y)
    xs, ys = x.values, y.values
    return float(sum(eval_cpd(phi, xs[i - 1], ys[j - 1]) for i, j in zip(a.pi1, a.pi2)))


def product_weight(a: Alignment, x: TimeSeries, y: TimeSeries, k: GroundKernelSpec) -> float:
    """Multiplicative weight of one alignment: product of k over the aligned pairs."""
    _require_valid(a, x, y)
    xs, ys = x.values, y.values
    w = 1.0
    for i, j in zip(a.pi1, a.pi2):
        w *= eval_kernel(k, xs[i - 1], ys[j - 1])
    return w
