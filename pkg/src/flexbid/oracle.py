"""Exhaustive reference solver for market-based aggregation.

Enumerates every partition of the offer set into at most ``max_orders``
blocks and, per block, every canonical alignment, crediting a block's
energy only when some alignment makes it order-conforming. The search is
exponential and meant for instances of at most ~8 offers, where it serves
as ground truth for the heuristics. Also provides the partition-count
arithmetic quantifying why exhaustive search cannot scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial
from typing import Iterator, Sequence

from .aggregation import AggregatedFlexOffer, Alignment, aggregate_at
from .core import FlexOffer, energy
from .heuristics import MaggConfig, is_order_conforming


class OracleBudgetExceeded(RuntimeError):
    """Raised when the search would pass its evaluation budget.

    Carries the best solution found so far; the caller decides whether a
    partial bound is usable.
    """

    def __init__(self, partial: "OracleResult"):
        super().__init__(
            f"oracle budget exhausted after {partial.explored} "
            "(partition, alignment) pairs"
        )
        self.partial = partial


@dataclass(frozen=True)
class OracleResult:
    best_energy: float
    best_partition: tuple[tuple[tuple[int, ...], Alignment | None], ...]
    explored: int            # (partition, alignment) pairs, pre-memoization
    evaluated: int           # alignments actually built (memoized blocks count once)
    partitions: int


def _partitions_up_to(items: Sequence, max_blocks: int) -> Iterator[list[list]]:
    """All set partitions with at most ``max_blocks`` blocks.

    Items are assigned in order, each to an existing block or a new one, so
    blocks stay sorted by their smallest element and the enumeration is
    deterministic.
    """

    def rec(i: int, blocks: list[list]):
        if i == len(items):
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(items[i])
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < max_blocks:
            blocks.append([items[i]])
            yield from rec(i + 1, blocks)
            blocks.pop()

    yield from rec(0, [])


def canonical_alignments(fos: Sequence[FlexOffer]) -> Iterator[Alignment]:
    """Every left-normalized joint placement of the given offers."""
    ranges = [range(f.time_flexibility + 1) for f in fos]
    for shifts in itertools.product(*ranges):
        if min(shifts) != 0:
            continue
        yield Alignment.of(
            {f.id: f.t_es + s for f, s in zip(fos, shifts)}
        )


def _alignment_count(fos: Sequence[FlexOffer]) -> int:
    total, inner = 1, 1
    for f in fos:
        total *= f.time_flexibility + 1
        inner *= f.time_flexibility
    return total - inner


def solve_exact(
    fos: Sequence[FlexOffer],
    cfg: MaggConfig,
    budget: int = 5_000_000,
) -> OracleResult:
    """Maximize conforming-aggregate energy over all partitions and alignments.

    Non-conforming blocks stay in the output with zero contribution. Block
    feasibility is memoized across partitions; ``explored`` still counts
    every conceptual (partition, alignment) pair against the budget. Ties
    resolve toward the lexicographically smallest partition encoding.
    """
    items = sorted(fos, key=lambda f: f.id)
    if not items:
        raise ValueError("cannot solve an empty instance")
    if len({f.id for f in items}) != len(items):
        raise ValueError("offer ids must be unique")

    evaluated = 0
    block_memo: dict[frozenset[int], tuple[bool, Alignment | None]] = {}

    def block_feasible(block: Sequence[FlexOffer]) -> tuple[bool, Alignment | None]:
        nonlocal evaluated
        key = frozenset(f.id for f in block)
        if key in block_memo:
            return block_memo[key]
        found: Alignment | None = None
        for al in canonical_alignments(block):
            evaluated += 1
            afo = aggregate_at(block, al)
            if is_order_conforming(afo, cfg):
                found = al
                break
        block_memo[key] = (found is not None, found)
        return block_memo[key]

    explored = 0
    partitions = 0
    best_value = -1.0
    best_encoding: tuple[tuple[int, ...], ...] | None = None
    best_blocks: tuple[tuple[tuple[int, ...], Alignment | None], ...] = ()

    def current_result() -> OracleResult:
        return OracleResult(
            best_energy=max(best_value, 0.0),
            best_partition=best_blocks,
            explored=explored,
            evaluated=evaluated,
            partitions=partitions,
        )

    for blocks in _partitions_up_to(items, cfg.max_orders):
        partitions += 1
        explored += sum(_alignment_count(b) for b in blocks)
        if explored > budget:
            raise OracleBudgetExceeded(current_result())
        value = 0.0
        detail = []
        for b in blocks:
            ok, al = block_feasible(b)
            if ok:
                value += sum(energy(f) for f in b)
            detail.append((tuple(f.id for f in b), al))
        encoding = tuple(ids for ids, _ in detail)
        if value > best_value or (value == best_value and encoding < best_encoding):
            best_value = value
            best_encoding = encoding
            best_blocks = tuple(detail)
    return current_result()


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind, exact."""
    if k < 0 or k > n:
        return 0
    return sum((-1) ** j * comb(k, j) * (k - j) ** n for j in range(k + 1)) // factorial(k)


def count_partitions(n: int, max_k: int) -> int:
    """Exact number of partitions of ``n`` items into 1..max_k blocks."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(stirling2(n, k) for k in range(1, max_k + 1))


def count_solution_space(n: int, max_k: int, avg_alignments: float = 1.0) -> float:
    """Estimated size of the full search space.

    The exact big-integer partition count times an assumed average number of
    alignments per partition.
    """
    return float(count_partitions(n, max_k)) * avg_alignments


def count_alignment_combinations(
    tfs: Sequence[int], per_offer_positions: bool = True
) -> int:
    """Number of joint alignments for offers with the given flexibilities.

    With ``per_offer_positions`` each offer contributes ``tf + 1`` start
    positions (the worked-example convention); otherwise ``tf`` (the
    product formula as printed elsewhere).
    """
    total = 1
    for tf in tfs:
        total *= (tf + 1) if per_offer_positions else tf
    return total
