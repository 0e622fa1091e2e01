"""Aggregation heuristics: initialization fences, processing pass, main loop."""

import random

import pytest

from flexbid.core import FlexOffer, energy
from flexbid.heuristics import (
    MaggConfig,
    MaggState,
    examine,
    initialize_dp,
    initialize_dtf,
    initialize_lp,
    is_order_conforming,
    lower_fence,
    objective_energy,
    process,
    run_magg,
    tukey_hinges,
    upper_fence,
)

F1 = FlexOffer(1, 1, 5, (1, 1))
F2 = FlexOffer(2, 2, 3, (1, 1))
F3 = FlexOffer(3, 4, 5, (1,))

DESK = MaggConfig(variant="lp", spt_base=2.0, e=0.1)


def _fo(fo_id, t_es, tf, m, power=1.0):
    return FlexOffer(fo_id, t_es, t_es + tf, (power,) * m)


# Reconstruction of the six-offer initialization example: one very long
# offer (f1), one with no flexibility (f3), and f6 the most flexible of
# the common-length rest. Chosen so the profile-length upper fence is 4
# and the flexibility lower fence is 6.
FENCE_SET = [
    _fo(1, 0, 6, 10),
    _fo(2, 1, 6, 4),
    _fo(3, 2, 0, 4),
    _fo(4, 3, 6, 4),
    _fo(5, 4, 6, 4),
    _fo(6, 5, 7, 4),
]


# ── config ───────────────────────────────────────────────────────────────────

def test_config_defaults_scale_band_with_lot():
    assert MaggConfig(variant="lp").e == 5.0
    assert MaggConfig(variant="lp", spt_base=2.0).e == pytest.approx(0.1)
    assert MaggConfig(variant="lp", spt_base=2.0, e=0.07).e == 0.07


@pytest.mark.parametrize(
    "kwargs",
    [
        {"variant": "xx"},
        {"variant": "lp", "spt_base": 0},
        {"variant": "lp", "ppt": 0},
        {"variant": "lp", "ppt": 24},
        {"variant": "lp", "e": 60.0},
        {"variant": "lp", "max_orders": 0},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        MaggConfig(**kwargs)


# ── is_order_conforming ──────────────────────────────────────────────────────

def test_conforming_pair_example():
    f12 = FlexOffer(1, 2, 3, (2.0, 2.0))
    assert is_order_conforming(f12, DESK)


def test_single_low_slice_not_conforming():
    assert not is_order_conforming(F3, DESK)


def test_zero_flexibility_not_conforming():
    assert not is_order_conforming(FlexOffer(1, 2, 2, (2.0, 2.0)), DESK)


def test_too_many_slices_not_conforming():
    cfg = MaggConfig(variant="lp", spt_base=2.0, e=0.1, ppt=3)
    f = FlexOffer(1, 0, 2, (2.0,) * 4)
    assert not is_order_conforming(f, cfg)


def test_higher_lot_multiples_conform():
    cfg = MaggConfig(variant="lp", spt_base=100.0, e=5.0)
    f = FlexOffer(1, 0, 2, (199.0, 201.5, 204.9))
    assert is_order_conforming(f, cfg)
    assert not is_order_conforming(FlexOffer(1, 0, 2, (199.0, 205.0)), cfg)


def test_zero_band_needs_exact_multiples():
    cfg = MaggConfig(variant="lp", spt_base=2.0, e=0)
    assert is_order_conforming(FlexOffer(1, 0, 1, (4.0, 4.0)), cfg)
    assert not is_order_conforming(FlexOffer(1, 0, 1, (4.0, 4.0001)), cfg)


def test_mixed_multiples_not_conforming():
    cfg = MaggConfig(variant="lp", spt_base=100.0, e=5.0)
    assert not is_order_conforming(FlexOffer(1, 0, 2, (100.0, 200.0)), cfg)


# ── fences ───────────────────────────────────────────────────────────────────

def test_tukey_hinges_split_halves():
    assert tukey_hinges([0, 6, 6, 6, 6, 7]) == (6, 6)
    assert tukey_hinges([0, 6, 6, 7, 7, 8]) == (6, 7)
    assert tukey_hinges([1, 2, 3, 4, 5]) == (2, 4)  # odd: median in both halves
    assert tukey_hinges([5]) == (5, 5)


def test_fences_from_hinges():
    assert upper_fence([1, 1, 1, 1, 1, 20]) == 1.0
    assert lower_fence([6, 6, 7, 7, 8, 0]) == 4.5


# ── initialization variants ──────────────────────────────────────────────────

def test_lp_picks_most_flexible_among_longest():
    pf, uf, f_ini, tft, _ = initialize_lp([F1, F2, F3])
    assert f_ini == F1          # length 2 shared with f2, but tf 4 > 1
    assert {f.id for f in pf} == {2, 3}
    assert uf == [] and tft == 1.0


def test_lp_singleton():
    pf, uf, f_ini, _, _ = initialize_lp([F3])
    assert f_ini == F3 and pf == [] and uf == []


def test_lp_tie_breaks_to_lowest_id():
    fos = [_fo(i, 0, 3, 2) for i in (4, 2, 9)]
    _, _, f_ini, _, _ = initialize_lp(fos)
    assert f_ini.id == 2


def test_dp_excludes_profile_outlier():
    pf, uf, f_ini, tft, _ = initialize_dp(FENCE_SET)
    assert [f.id for f in uf] == [1]          # upper fence 4, f1 has 10 slices
    assert f_ini.id == 6                      # most flexible of the length-4 rest
    assert {f.id for f in pf} == {2, 3, 4, 5}
    assert tft == 1.0


def test_dp_keeps_equal_lengths():
    fos = [_fo(i, i, i, 3) for i in range(5)]
    pf, uf, f_ini, _, _ = initialize_dp(fos)
    assert uf == []
    assert f_ini.id == 4                      # most flexible, all same length


def test_dp_excludes_extreme_length():
    fos = [_fo(i, 0, 1, 1) for i in range(5)] + [_fo(9, 0, 1, 20)]
    _, uf, _, _, _ = initialize_dp(fos)
    assert [f.id for f in uf] == [9]


def test_dtf_excludes_low_flexibility():
    pf, uf, f_ini, tft, fallback = initialize_dtf(FENCE_SET)
    assert tft == 6.0                         # lower fence of {6,6,0,6,6,7}
    assert [f.id for f in uf] == [3]
    assert f_ini.id == 1                      # unique longest within pf
    assert not fallback


def test_dtf_equal_flexibility_keeps_all():
    fos = [_fo(i, i, 4, 2) for i in range(4)]
    pf, uf, f_ini, tft, fallback = initialize_dtf(fos)
    assert uf == [] and tft == 4.0 and not fallback


def test_dtf_fence_example():
    tfs = [6, 6, 7, 7, 8, 0]
    fos = [_fo(i, 0, tf, 2) for i, tf in enumerate(tfs)]
    _, uf, _, tft, _ = initialize_dtf(fos)
    assert [f.time_flexibility for f in uf] == [0]
    assert tft == 4.5


def test_dtf_falls_back_when_filter_empties():
    fos = [_fo(i, 0, 0, 2) for i in range(3)]
    pf, uf, f_ini, tft, fallback = initialize_dtf(fos)
    assert fallback and tft == 1.0 and uf == []
    assert {f.id for f in pf} | {f_ini.id} == {0, 1, 2}


# ── process ──────────────────────────────────────────────────────────────────

def test_process_worked_example_snapshots_pair():
    """Step through the three-offer example at lot 2: the pinned pair lands
    in band, its offers leave the pool, and the target climbs one lot."""
    pf, uf, f_ini, tft, _ = initialize_lp([F1, F2, F3])
    state = MaggState(pf=pf, uf=uf, af=[], f_ini=f_ini, tft=tft, spt=2.0)
    out, trace = process(state, DESK)
    assert trace.f_a is not None
    assert (trace.f_a.t_es, trace.f_a.t_ls, trace.f_a.profile) == (2, 3, (2.0, 2.0))
    assert trace.f_a.constituents == {1, 2}
    assert trace.snapshot_spts == [2.0]
    assert out.spt == 4.0
    assert [f.id for f in out.pf] == [3]
    assert len(out.af) == 1


def test_process_snapshots_seed_already_in_band():
    seed = FlexOffer(1, 0, 2, (2.0, 2.0))
    far = FlexOffer(2, 30, 30, (0.5,))
    state = MaggState(pf=[far], uf=[], af=[], f_ini=seed, tft=1.0, spt=2.0)
    out, trace = process(state, DESK)
    assert trace.f_a is not None and trace.f_a.constituents == {1}
    assert out.spt == 4.0
    assert [f.id for f in out.pf] == [2]      # nothing merged, nothing consumed


def test_process_without_candidates_changes_nothing():
    a = FlexOffer(1, 0, 0, (0.4,))
    b = FlexOffer(2, 20, 20, (0.4,))
    state = MaggState(pf=[b], uf=[], af=[], f_ini=a, tft=1.0, spt=2.0)
    out, trace = process(state, DESK)
    assert trace.f_a is None and trace.accepted == []
    assert [f.id for f in out.pf] == [2]
    assert out.af == []


def test_process_empty_pool_returns_unchanged():
    state = MaggState(pf=[], uf=[], af=[], f_ini=F1, tft=1.0, spt=2.0)
    out, trace = process(state, DESK)
    assert trace.f_a is None and out.pf == [] and out.af == []


# ── examine ──────────────────────────────────────────────────────────────────

def _afo_with_energy(kwh: float):
    f = FlexOffer(99, 0, 1, (kwh,))
    from flexbid.aggregation import start_align

    return start_align([f])


def test_examine_stops_on_empty_pool():
    cfg = MaggConfig(variant="lp")
    pool, cont = examine([], [], [], cfg)
    assert pool == [] and cont is False


def test_examine_prunes_when_remainder_cannot_compete():
    cfg = MaggConfig(variant="lp")
    af = [_afo_with_energy(500.0) for _ in range(5)]
    pool, cont = examine([FlexOffer(1, 0, 1, (10.0,))], [], af, cfg)
    assert cont is False


def test_examine_continues_below_order_count():
    cfg = MaggConfig(variant="lp")
    af = [_afo_with_energy(500.0) for _ in range(3)]
    pool, cont = examine([FlexOffer(1, 0, 1, (10.0,))], [], af, cfg)
    assert cont is True
    assert [f.id for f in pool] == [1]


def test_examine_merges_processing_and_excluded_sets():
    cfg = MaggConfig(variant="lp")
    pool, cont = examine([F2], [F1], [], cfg)
    assert [f.id for f in pool] == [1, 2] and cont is True


# ── run_magg ─────────────────────────────────────────────────────────────────

def test_run_magg_worked_example():
    res = run_magg([F1, F2, F3], DESK)
    assert len(res.orders_afos) == 1
    assert res.orders_afos[0].profile == (2.0, 2.0)
    assert [f.id for f in res.leftover] == [3]
    assert objective_energy(res) == 4.0


def test_run_magg_unaggregatable_offers_become_leftover():
    fos = [FlexOffer(1, 0, 0, (1.0,)), FlexOffer(2, 5, 5, (1.0,))]
    res = run_magg(fos, DESK)
    assert res.orders_afos == []
    assert [f.id for f in res.leftover] == [1, 2]
    assert objective_energy(res) == 0.0


def test_run_magg_rejects_empty_and_duplicate_ids():
    with pytest.raises(ValueError):
        run_magg([], DESK)
    with pytest.raises(ValueError):
        run_magg([F1, FlexOffer(1, 0, 1, (1.0,))], DESK)


def _random_fleet(rng: random.Random, n: int) -> list[FlexOffer]:
    fos = []
    for i in range(n):
        t_es = rng.randint(0, 8)
        tf = rng.randint(0, 5)
        m = rng.randint(1, 4)
        profile = tuple(rng.choice([0.5, 1.0, 1.5, 2.0]) for _ in range(m))
        fos.append(FlexOffer(i, t_es, t_es + tf, profile))
    return fos


@pytest.mark.parametrize("variant", ["lp", "dp", "dtf"])
def test_orders_conform_and_respect_limit(variant):
    rng = random.Random(hash(variant) % 1000)
    for _ in range(30):
        fos = _random_fleet(rng, rng.randint(2, 12))
        cfg = MaggConfig(variant=variant, spt_base=2.0, e=0.1, max_orders=3)
        res = run_magg(fos, cfg)
        assert len(res.orders_afos) <= 3
        for afo in res.orders_afos:
            assert is_order_conforming(afo, cfg)


def test_constituents_partition_input():
    """Completed aggregates are pairwise disjoint; every offer is either in
    a traded aggregate or in the leftover set, never both."""
    rng = random.Random(99)
    for _ in range(25):
        fos = _random_fleet(rng, rng.randint(3, 14))
        res = run_magg(fos, MaggConfig(variant="lp", spt_base=2.0, e=0.1))
        seen: set[int] = set()
        for afo in res.all_afos:
            assert not (afo.constituents & seen)
            seen |= afo.constituents
        traded = set()
        for afo in res.orders_afos:
            traded |= afo.constituents
        leftover_ids = {f.id for f in res.leftover}
        assert traded | leftover_ids == {f.id for f in fos}
        assert not (traded & leftover_ids)
        untraded = seen - traded
        assert untraded <= leftover_ids


def test_snapshot_targets_climb_one_lot_per_snapshot():
    rng = random.Random(5)
    hits = 0
    for _ in range(40):
        fos = _random_fleet(rng, rng.randint(4, 14))
        res = run_magg(fos, MaggConfig(variant="lp", spt_base=2.0, e=0.1))
        for trace in res.traces:
            spts = trace.snapshot_spts
            if len(spts) >= 2:
                hits += 1
                assert all(
                    b - a == pytest.approx(2.0) for a, b in zip(spts, spts[1:])
                )
    assert hits > 0


def test_accepted_rmse_strictly_decreases_per_target():
    rng = random.Random(6)
    hits = 0
    for _ in range(40):
        fos = _random_fleet(rng, rng.randint(4, 14))
        res = run_magg(fos, MaggConfig(variant="lp", spt_base=2.0, e=0.1))
        for trace in res.traces:
            by_spt: dict[float, list[float]] = {}
            for spt, rmse in trace.accepted:
                by_spt.setdefault(spt, []).append(rmse)
            for chain in by_spt.values():
                if len(chain) >= 2:
                    hits += 1
                    assert all(b < a for a, b in zip(chain, chain[1:]))
    assert hits > 0


def test_run_magg_deterministic():
    rng = random.Random(77)
    fos = _random_fleet(rng, 20)
    cfg = MaggConfig(variant="dtf", spt_base=2.0, e=0.1)
    r1 = run_magg(fos, cfg)
    r2 = run_magg(fos, cfg)
    assert r1.orders_afos == r2.orders_afos
    assert r1.all_afos == r2.all_afos
    assert [f.id for f in r1.leftover] == [f.id for f in r2.leftover]
    assert r1.stats.comparisons == r2.stats.comparisons
    assert r1.stats.iterations == r2.stats.iterations
