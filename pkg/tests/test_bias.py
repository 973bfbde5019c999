import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biasmax.bias import (AffineSkew, BiasFunction, BiasSpec, Identity, Multiplicative, Table,
                          TfIdfSkew, apply_bias, reduce_overlapping_groups)
from biasmax.errors import ConfigurationError, InputError
from biasmax.groups import GroupStructure

KINDS = [Identity, Multiplicative(0.3), AffineSkew(0.25), TfIdfSkew(1.7),
         Table([0, 1, 3], [0.1, 0.5, 4.0]), Multiplicative(0.5).compose(AffineSkew(0.1))]


def test_multiplicative_halves():
    groups = GroupStructure([0, 1])
    out = apply_bias([[4.0], [4.0]], groups, BiasSpec.multiplicative([1.0, 0.5]))
    assert out.values[1, 0] == 2.0 and out.values[0, 0] == 4.0


def test_affine_skew_fixed_point():
    assert AffineSkew(0.25)(1.0) == 1.0
    assert AffineSkew(0.25)(0.0) == 0.25


def test_identity_spec_is_exact(rng):
    W = rng.random((10, 3))
    out = apply_bias(W, GroupStructure(rng.integers(0, 2, 10), 2), BiasSpec.identity(2))
    assert np.array_equal(out.values, W)


def test_latent_unchanged(rng):
    W = rng.random((6, 2))
    before = W.copy()
    apply_bias(W, GroupStructure([0, 1] * 3), BiasSpec.multiplicative([1, 0.1]))
    assert np.array_equal(W, before)


def test_missing_transform():
    with pytest.raises(ConfigurationError):
        apply_bias([[1.0], [1.0]], GroupStructure([0, 1]), BiasSpec({0: Identity}))


def test_extended_model_only_touches_one_attribute():
    spec = BiasSpec({0: Identity, 1: Identity, (1, 0): Multiplicative(0.1)})
    out = apply_bias([[2.0, 3.0], [2.0, 3.0]], GroupStructure([0, 1]), spec).values
    assert out.tolist() == [[2.0, 3.0], [pytest.approx(0.2), 3.0]]


@pytest.mark.parametrize("f", KINDS, ids=str)
def test_transforms_increasing_and_nonnegative(f):
    z = np.linspace(0, 10, 401)
    y = f(z)
    assert np.all(np.diff(y) >= 0)
    assert np.all(y >= 0)


def test_table_validation():
    with pytest.raises(InputError):
        Table([0, 1, 1], [0, 1, 2])
    with pytest.raises(InputError):
        Table([0, 1], [1, 0.5])
    with pytest.raises(InputError):
        AffineSkew(1.5)


def test_parse_round_trip():
    for f in KINDS[:5]:
        assert BiasFunction.parse(str(f)) == f


def test_config_round_trip():
    spec = BiasSpec({0: Identity, 1: Multiplicative(0.01), (1, 2): AffineSkew(0.25)})
    cfg = spec.to_config()
    assert cfg["bias.2"] == "multiplicative:0.01"
    assert cfg["bias.2.3"] == "affine_skew:0.25"
    assert BiasSpec.from_config(cfg) == spec


def test_two_overlapping_groups():
    f1, f2 = Multiplicative(0.5), AffineSkew(0.2)
    memberships = [{0, 1}, {0}, {1}, set()]
    groups, spec = reduce_overlapping_groups(memberships, BiasSpec({0: f1, 1: f2}))
    assert groups.p == 4 and len(set(groups.assignment.tolist())) == 4
    w = np.array([0.3, 1.0, 2.5])
    by_item = [spec.lookup(int(groups.assignment[i]), 0)(w) for i in range(4)]
    assert np.allclose(by_item[0], f1(f2(w)))
    assert np.allclose(by_item[1], f1(w))
    assert np.allclose(by_item[2], f2(w))
    assert np.allclose(by_item[3], w)
    assert groups.labels[groups.assignment[0]] == (0, 1)


def test_no_overlap_keeps_groups():
    spec = BiasSpec({0: Identity, 1: Multiplicative(0.3)})
    groups, out = reduce_overlapping_groups([{0}, {1}, {0}, {1}], spec)
    assert groups == GroupStructure([0, 1, 0, 1])
    assert out == spec


@settings(max_examples=50, deadline=None)
@given(b1=st.floats(0.01, 5), b2=st.floats(0.01, 5),
       w=st.lists(st.floats(0, 100), min_size=1, max_size=5))
def test_multiplicative_composition(b1, b2, w):
    _, spec = reduce_overlapping_groups([{0, 1}], BiasSpec({0: Multiplicative(b1), 1: Multiplicative(b2)}))
    assert np.allclose(spec.lookup(0, 0)(np.array(w)), b1 * b2 * np.array(w), rtol=1e-12)


def test_too_many_raw_groups():
    with pytest.raises(InputError):
        reduce_overlapping_groups([set(range(21))], BiasSpec({g: Identity for g in range(21)}))


@settings(max_examples=60, deadline=None)
@given(data=st.data(), f=st.sampled_from(KINDS))
def test_within_group_order_preserved(data, f):
    n = 12
    vals = data.draw(st.lists(st.sampled_from([0.0, 0.5, 1.0, 2.0, 7.5]), min_size=n, max_size=n))
    W = np.array(vals).reshape(n, 1)
    groups = GroupStructure(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), 2)
    out = apply_bias(W, groups, BiasSpec({0: Identity, 1: f})).values
    for g in range(2):
        rows = groups.members(g)
        a, b = W[rows, 0], out[rows, 0]
        # weak orderings agree: comparisons between every pair keep their sign
        assert np.array_equal(np.sign(a[:, None] - a[None, :]), np.sign(b[:, None] - b[None, :]))
