import json
from dataclasses import replace
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfqecc.montecarlo import (
    ALL_ARMS,
    Arm,
    CdfTable,
    ExperimentSpec,
    cdf_from_csv,
    cdf_from_json,
    cdf_to_csv,
    cdf_to_json,
    census_from_csv,
    census_from_json,
    census_of_sets,
    census_to_csv,
    census_to_json,
    compare_arms,
    derive_seed,
    dominates,
    export_results,
    fault_sweep,
    fault_tolerance_census,
    paired_gap_interval,
    realization_messages,
    run_experiment,
    run_realizations,
)
from sfqecc.spread import SpreadModel


def test_spec_validation():
    for bad in (dict(realizations=0), dict(messages_per_realization=0), dict(fault_prob=1.2), dict(arm="nope")):
        with pytest.raises(ValueError):
            ExperimentSpec(**bad)


def test_derive_seed_streams_differ():
    seeds = {derive_seed(0, r, s) for r in range(50) for s in range(3)}
    assert len(seeds) == 150
    assert derive_seed(1, 2, 0) == derive_seed(1, 2, 0)


@pytest.mark.parametrize("arm", ALL_ARMS)
def test_fault_free_is_unit_step(arm):
    table = run_experiment(ExperimentSpec(arm=arm, realizations=20, messages_per_realization=30))
    assert table.points == ((0, 1.0),)


@pytest.mark.parametrize("arm", ALL_ARMS)
def test_fully_dead_counts_nonzero_messages(arm):
    spec = ExperimentSpec(arm=arm, realizations=10, messages_per_realization=50, fault_prob=1.0)
    n_err = run_realizations(spec)[arm, 1.0]
    for r in range(10):
        assert n_err[r] == int(realization_messages(spec, r).any(axis=1).sum())


def test_cdf_validity():
    spec = ExperimentSpec(realizations=200, fault_prob=0.02, spread=SpreadModel())
    table = run_experiment(spec)
    ns = [n for n, _ in table.points]
    ps = [p for _, p in table.points]
    assert ns == sorted(set(ns)) and 0 <= ns[0] and ns[-1] <= 100
    assert ps == sorted(ps) and ps[-1] == 1.0
    assert table.meta["arm"] == "rm13_after_ecc" and table.meta["spread_pct"] == 0.2


def test_cdf_at():
    t = CdfTable.from_counts([0, 0, 2, 5])
    assert t.points == ((0, 0.5), (2, 0.75), (5, 1.0))
    assert [t.at(x) for x in (-1, 0, 1, 2, 4, 5, 9)] == [0.0, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0]
    assert t.p_zero == 0.5


def test_dominates():
    a, b = CdfTable.from_counts([0, 0, 1]), CdfTable.from_counts([0, 1, 1])
    assert dominates(a, b) and not dominates(b, a) and dominates(a, a)


def test_common_random_numbers_dominance():
    specs = [ExperimentSpec(arm=a, realizations=300, fault_prob=0.01, spread=SpreadModel(), seed=2) for a in ALL_ARMS]
    cmp = compare_arms(specs)
    assert cmp.dominance is True and cmp.violations == ()
    assert (cmp.n_err[Arm.AFTER_ECC] <= cmp.n_err[Arm.BEFORE_ECC]).all()
    assert cmp.p_zero[Arm.AFTER_ECC] >= cmp.p_zero[Arm.BEFORE_ECC]


def test_fault_free_arms_identical():
    specs = [ExperimentSpec(arm=a, realizations=25, seed=4) for a in ALL_ARMS]
    tables = compare_arms(specs).tables
    assert {t.points for t in tables.values()} == {((0, 1.0),)}


def test_compare_rejects_mismatched_specs():
    with pytest.raises(ValueError):
        compare_arms([ExperimentSpec(seed=1), ExperimentSpec(arm=Arm.BEFORE_ECC, seed=2)])
    with pytest.raises(ValueError):
        compare_arms([])


def test_cdfs_ordered_in_fault_prob():
    spec = ExperimentSpec(realizations=300, seed=5)
    probs = (0.001, 0.01, 0.02, 0.05)
    res = run_realizations(spec, ALL_ARMS, probs)
    for arm in ALL_ARMS:
        tables = [CdfTable.from_counts(res[arm, p]) for p in probs]
        assert all(dominates(lo, hi) for lo, hi in zip(tables, tables[1:]))


def test_fault_sweep_tables():
    sweep = fault_sweep(ExperimentSpec(realizations=100, seed=1), [0.0, 0.02])
    assert sweep[0.0].points == ((0, 1.0),)
    assert sweep[0.02].meta["fault_prob"] == 0.02


def test_worker_count_independent():
    spec = ExperimentSpec(realizations=60, fault_prob=0.02, spread=SpreadModel(), seed=9)
    one = run_realizations(spec, ALL_ARMS, workers=1)
    three = run_realizations(spec, ALL_ARMS, workers=3)
    assert one.keys() == three.keys()
    assert all(np.array_equal(one[k], three[k]) for k in one)


def test_messages_shared_across_arms():
    a = realization_messages(ExperimentSpec(arm=Arm.AFTER_ECC, seed=3), 7)
    b = realization_messages(ExperimentSpec(arm=Arm.NO_ENCODER, seed=3), 7)
    assert np.array_equal(a, b)


def test_paired_gap_interval():
    rng = np.random.default_rng(0)
    worse = rng.integers(0, 3, 500)
    better = np.minimum(worse, rng.integers(0, 2, 500))
    gap, lo, hi = paired_gap_interval(better, worse, seed=1)
    assert lo <= gap <= hi
    assert gap == pytest.approx(np.mean(better == 0) - np.mean(worse == 0))
    assert lo > 0


# ----------------------------------------------------------------- export


def test_unit_step_csv():
    assert cdf_to_csv(CdfTable.from_counts([0, 0, 0])) == "n_err,cum_prob\n0,1.0\n"


@settings(max_examples=100)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=300), st.integers(0, 10))
def test_cdf_round_trips(counts, seed):
    t = CdfTable.from_counts(counts, ExperimentSpec(seed=seed).meta())
    assert cdf_from_json(cdf_to_json(t)) == t
    assert cdf_from_csv(cdf_to_csv(t)).points == t.points


def test_cdf_json_meta():
    t = run_experiment(ExperimentSpec(realizations=5, seed=3))
    doc = json.loads(cdf_to_json(t))
    assert set(doc["meta"]) == {"arm", "seed", "fault_prob", "spread_pct", "realizations", "messages"}
    assert doc["points"] == [[0, 1.0]]


def test_export_results(tmp_path):
    t = CdfTable.from_counts([0, 1])
    path = tmp_path / "x.csv"
    text = export_results(t, "csv", path)
    assert path.read_text() == text == cdf_to_csv(t)
    assert export_results(t, "json") == cdf_to_json(t)
    with pytest.raises(ValueError):
        export_results(t, "xml")


# ----------------------------------------------------------------- census


def test_census_size_one(ref):
    report = fault_tolerance_census(ref, 1)
    assert len(report.rows) == 49
    s = report.summary()[1]
    assert sum(s.values()) == 49
    assert s == {"harmless": 0, "correctable": 24, "uncorrectable": 25}


def test_census_size_two_counts(ref):
    report = fault_tolerance_census(ref, 2)
    assert sum(report.summary()[2].values()) == comb(49, 2)
    assert report.worst({"dff_c8_1", "dff_c8_2"}) == 1


def test_census_empty_and_guard(ref):
    assert fault_tolerance_census(ref, 0).rows == ()
    with pytest.raises(ValueError):
        fault_tolerance_census(ref, 4)


def test_input_splitter_is_uncorrectable(ref):
    # the first splitter on m1 removes m1 from every codeword bit
    root = ref.receiver["m1"]
    assert census_of_sets(ref, [[root]]).rows[0].worst_bit_errors == 8


def test_private_triples(ref):
    triples = [
        ("xor_c1", "xor_m2m4", "clk_c1"),
        ("xor_c2", "dff_m2", "clk_c2"),
        ("xor_c7", "dff_m1", "clk_c7"),
        ("dff_c8_1", "dff_c8_2", "clk_c8"),
    ]
    report = census_of_sets(ref, triples)
    assert [r.worst_bit_errors for r in report.rows] == [1, 1, 1, 1]


def test_census_round_trips(ref):
    report = fault_tolerance_census(ref, 1)
    assert census_from_json(census_to_json(report)) == report
    assert census_from_csv(census_to_csv(report), report.cell_count) == report
    assert census_to_csv(report).splitlines()[0] == "size,fault_set,worst_bit_errors,class"
    pair = census_of_sets(ref, [["dff_c8_2", "dff_c8_1"]])
    assert census_to_csv(pair).splitlines()[1] == "2,dff_c8_1+dff_c8_2,1,correctable"
