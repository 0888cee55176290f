import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfqecc.netlist import CellKind, build_no_encoder, build_rm13_reference
from sfqecc.spread import (
    DEFAULT_FAIL_AT_20,
    SpreadModel,
    apply_spread,
    calibrate_fail_probs,
    margins_for,
)


def test_validation():
    with pytest.raises(ValueError):
        SpreadModel(spread_pct=0.6)
    with pytest.raises(ValueError):
        SpreadModel(spread_pct=-0.1)
    with pytest.raises(ValueError):
        SpreadModel(margins={CellKind.XOR: 0.0})
    with pytest.raises(ValueError):
        SpreadModel(margins={CellKind.XOR: 0.7})


def test_none_disables(ref):
    assert apply_spread(ref, None, 3) == frozenset()


def test_zero_spread_never_fails(ref):
    model = SpreadModel(spread_pct=0.0, margins={k: 0.01 for k in DEFAULT_FAIL_AT_20})
    assert all(apply_spread(ref, model, s) == frozenset() for s in range(200))


def test_spread_within_margins_never_fails(ref):
    model = SpreadModel(spread_pct=0.05, margins={k: 0.05 for k in DEFAULT_FAIL_AT_20})
    assert all(apply_spread(ref, model, s) == frozenset() for s in range(200))
    assert model.fail_probability(CellKind.XOR) == 0.0


def test_fail_probability_inverts_margins():
    model = SpreadModel(0.2, margins_for(0.2, {CellKind.XOR: 0.25}))
    assert model.fail_probability(CellKind.XOR) == pytest.approx(0.25)
    assert model.fail_probability(CellKind.DFF) == 0.0


@settings(max_examples=30)
@given(st.integers(0, 2**40))
def test_deterministic(seed):
    ref = build_rm13_reference()
    assert apply_spread(ref, SpreadModel(), seed) == apply_spread(ref, SpreadModel(), seed)


def test_zero_failure_fraction_binomial(ref):
    p, n = 0.012, 10_000
    model = SpreadModel(0.2, margins_for(0.2, {k: p for k in DEFAULT_FAIL_AT_20}))
    clean = np.mean([not apply_spread(ref, model, s) for s in range(n)])
    expect = (1 - p) ** 49
    assert abs(clean - expect) < 3 * np.sqrt(expect * (1 - expect) / n)


def test_calibration_reproduces_defaults(ref):
    probs = calibrate_fail_probs(ref, 0.554)
    for kind, p in DEFAULT_FAIL_AT_20.items():
        assert probs[kind] == pytest.approx(p, rel=0.01)


def test_calibration_hits_targets(ref):
    probs = calibrate_fail_probs(ref, 0.554)
    yield_ = np.prod([1 - probs[ref.cells[c].kind] for c in ref.cells if ref.cells[c].kind in probs])
    assert yield_ == pytest.approx(0.554)
    bare = build_no_encoder(4)
    assert (1 - probs[CellKind.SFQ2DC]) ** 4 == pytest.approx(0.80)
    assert sum(bare.cells[c].kind is CellKind.SFQ2DC for c in bare.cells) == 4


def test_calibration_rejects_impossible(ref):
    with pytest.raises(ValueError):
        calibrate_fail_probs(ref, 0.9)
    with pytest.raises(ValueError):
        calibrate_fail_probs(ref, 0.0)


def test_default_model_yield(ref):
    n = 20_000
    clean = np.mean([not apply_spread(ref, SpreadModel(), s) for s in range(n)])
    assert abs(clean - 0.554) < 3 * np.sqrt(0.554 * 0.446 / n)
