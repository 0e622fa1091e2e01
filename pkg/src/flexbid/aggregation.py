"""Alignment semantics and flex-offer aggregation.

An alignment places each offer at an absolute start hour inside its own
window. Only canonical (left-normalized) alignments are used: at least one
offer sits at its earliest start, since any joint right-shift is already
expressed by the aggregate's remaining flexibility. Aggregation sums the
placed profiles hour by hour; gaps between non-overlapping offers become
zero-power slices, which later stages filter out naturally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .core import FlexOffer


@dataclass(frozen=True)
class Alignment:
    """Absolute start hour per constituent offer id."""

    starts: tuple[tuple[int, int], ...]   # (fo_id, start), sorted by id

    def __post_init__(self):
        object.__setattr__(
            self, "starts", tuple(sorted((int(i), int(s)) for i, s in self.starts))
        )
        ids = [i for i, _ in self.starts]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate offer id in alignment")

    @classmethod
    def of(cls, mapping: dict[int, int]) -> "Alignment":
        return cls(tuple(mapping.items()))

    def start_of(self, fo_id: int) -> int:
        for i, s in self.starts:
            if i == fo_id:
                return s
        raise KeyError(fo_id)

    def as_dict(self) -> dict[int, int]:
        return dict(self.starts)


@dataclass(frozen=True)
class AggregatedFlexOffer(FlexOffer):
    """A flex-offer built by summing constituent profiles at fixed alignments.

    ``starts`` maps every constituent offer id to the absolute hour where its
    profile was placed. The aggregate id is the smallest constituent id.
    """

    constituents: frozenset[int] = frozenset()
    starts: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "constituents", frozenset(self.constituents))
        object.__setattr__(self, "starts", tuple(sorted(self.starts)))
        if {i for i, _ in self.starts} != self.constituents:
            raise ValueError("starts must cover exactly the constituent ids")

    def constituent_start(self, fo_id: int) -> int:
        for i, s in self.starts:
            if i == fo_id:
                return s
        raise KeyError(fo_id)


def _as_aggregate(f: FlexOffer) -> AggregatedFlexOffer:
    if isinstance(f, AggregatedFlexOffer):
        return f
    return AggregatedFlexOffer(
        id=f.id,
        t_es=f.t_es,
        t_ls=f.t_ls,
        profile=f.profile,
        constituents=frozenset({f.id}),
        starts=((f.id, f.t_es),),
    )


def _merge(items: Sequence[FlexOffer], placed_at: Sequence[int]) -> AggregatedFlexOffer:
    """Sum profiles of ``items`` placed at the given absolute start hours."""
    aggs = [_as_aggregate(f) for f in items]
    t_es = min(placed_at)
    end = max(a + f.num_slices for f, a in zip(aggs, placed_at))
    profile = [0.0] * (end - t_es)
    for f, a in zip(aggs, placed_at):
        for k, p in enumerate(f.profile):
            profile[a - t_es + k] += p
    tf = min(f.t_ls - a for f, a in zip(aggs, placed_at))
    starts: dict[int, int] = {}
    constituents: set[int] = set()
    for f, a in zip(aggs, placed_at):
        shift = a - f.t_es
        for cid, cstart in f.starts:
            starts[cid] = cstart + shift
        constituents |= f.constituents
    return AggregatedFlexOffer(
        id=min(constituents),
        t_es=t_es,
        t_ls=t_es + tf,
        profile=tuple(profile),
        constituents=frozenset(constituents),
        starts=tuple(starts.items()),
    )


def aggregate_at(fos: Iterable[FlexOffer], alignment: Alignment) -> AggregatedFlexOffer:
    """Aggregate offers at the given canonical alignment.

    Rejects alignments that place an offer outside its window, leave left
    slack (no offer at its earliest start), or do not cover exactly the
    given offer set.
    """
    items = sorted(fos, key=lambda f: f.id)
    if not items:
        raise ValueError("cannot aggregate an empty set")
    amap = alignment.as_dict()
    if set(amap) != {f.id for f in items}:
        raise ValueError("alignment must cover exactly the given offers")
    placed = [amap[f.id] for f in items]
    for f, a in zip(items, placed):
        if not f.t_es <= a <= f.t_ls:
            raise ValueError(
                f"offer {f.id} placed at {a}, outside window [{f.t_es}, {f.t_ls}]"
            )
    if min(a - f.t_es for f, a in zip(items, placed)) != 0:
        raise ValueError("alignment is not left-normalized")
    return _merge(items, placed)


def start_align(fos: Iterable[FlexOffer]) -> AggregatedFlexOffer:
    """Aggregate with every offer at its earliest start hour."""
    items = sorted(fos, key=lambda f: f.id)
    if not items:
        raise ValueError("cannot aggregate an empty set")
    return _merge(items, [f.t_es for f in items])


def enumerate_binary_alignments(a: FlexOffer, b: FlexOffer) -> Iterator[Alignment]:
    """All canonical alignments of a pair, ``tf(a) + tf(b) + 1`` in total.

    Order: ascending shift of ``a`` (with ``b`` pinned), except that the
    zero-shift column first walks all shifts of ``b``.
    """
    for shift_a in range(a.time_flexibility + 1):
        if shift_a == 0:
            for shift_b in range(b.time_flexibility + 1):
                yield Alignment.of({a.id: a.t_es, b.id: b.t_es + shift_b})
        else:
            yield Alignment.of({a.id: a.t_es + shift_a, b.id: b.t_es})


def binary_aggregation(
    f_ini: FlexOffer,
    f: FlexOffer,
    al: Alignment,
    tft: float,
    ppt: int,
) -> AggregatedFlexOffer | None:
    """Aggregate a pair if the result stays within the thresholds.

    Returns None (a normal outcome, not an error) when the aggregate's time
    flexibility falls below ``tft`` or its profile grows beyond ``ppt``
    slices.
    """
    afo = aggregate_at([f_ini, f], al)
    if afo.time_flexibility < tft or afo.num_slices > ppt:
        return None
    return afo


def sa_baseline(fos: Iterable[FlexOffer]) -> list[AggregatedFlexOffer]:
    """Start-alignment baseline: the whole set collapses into one aggregate."""
    return [start_align(fos)]


def sag_baseline(fos: Iterable[FlexOffer]) -> list[AggregatedFlexOffer]:
    """Start-alignment-grouping baseline.

    Offers sharing both earliest start and time flexibility are start-aligned
    group by group; output is ordered by (t_es, tf) key.
    """
    items = sorted(fos, key=lambda f: f.id)
    if not items:
        raise ValueError("cannot aggregate an empty set")
    groups: dict[tuple[int, int], list[FlexOffer]] = {}
    for f in items:
        groups.setdefault((f.t_es, f.time_flexibility), []).append(f)
    return [start_align(groups[key]) for key in sorted(groups)]
