import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accd.errors import DimensionMismatchError
from accd.metrics import MetricSpec, distance, rowwise_distance

L1 = MetricSpec(kind="L1")
L2 = MetricSpec(kind="L2")


def test_identical_points_distance_zero():
    p = np.array([1.5, -2.0, 7.25])
    assert distance(p, p, L1) == 0.0
    assert distance(p, p, L2) == 0.0


def test_pythagorean_triple():
    assert distance([0.0, 0.0], [3.0, 4.0], L2) == 5.0


def test_weighted_l1_hand_computed():
    m = MetricSpec(kind="L1", weighted=True, weights=[2.0, 1.0])
    # 2*|1-4| + 1*|2-6| = 10
    assert distance([1.0, 2.0], [4.0, 6.0], m) == 10.0


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionMismatchError):
        distance([1.0, 2.0], [1.0, 2.0, 3.0], L2)


def test_metric_spec_rules():
    with pytest.raises(ValueError):
        MetricSpec(kind="L1", weighted=True)  # weights missing
    with pytest.raises(ValueError):
        MetricSpec(kind="L2", weighted=False, weights=np.ones(3))
    with pytest.raises(ValueError):
        MetricSpec(kind="L2", weighted=True, weights=[-1.0, 2.0])
    with pytest.raises(ValueError):
        MetricSpec.from_name("unweighted l2")  # case-sensitive


def test_from_name_round_trip():
    for name in ("Unweighted L1", "Unweighted L2"):
        assert MetricSpec.from_name(name).display_name() == name
    m = MetricSpec.from_name("Weighted L2", weights=[1.0, 0.5])
    assert m.display_name() == "Weighted L2"


def test_rowwise_matches_scalar():
    r = np.random.default_rng(7)
    a = r.normal(size=(40, 6))
    b = r.normal(size=(40, 6))
    out = rowwise_distance(a, b, L2)
    for i in range(40):
        assert out[i] == distance(a[i], b[i], L2)


_coords = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=64),
    min_size=1,
    max_size=8,
)


@given(data=st.data(), kind=st.sampled_from(["L1", "L2"]), weighted=st.booleans())
@settings(max_examples=200, deadline=None)
def test_metric_axioms(data, kind, weighted):
    """Nonnegativity, symmetry, and the triangle inequality: everything the
    bound filtering relies on."""
    p = np.array(data.draw(_coords))
    q = np.array(data.draw(_coords.filter(lambda v: True)))
    r = np.array(data.draw(_coords))
    d = len(p)
    q = np.resize(q, d)
    r = np.resize(r, d)
    if weighted:
        w = np.array(
            data.draw(
                st.lists(
                    st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
                    min_size=d,
                    max_size=d,
                )
            )
        )
        metric = MetricSpec(kind=kind, weighted=True, weights=w)
    else:
        metric = MetricSpec(kind=kind)
    dpq = distance(p, q, metric)
    dqp = distance(q, p, metric)
    dpr = distance(p, r, metric)
    drq = distance(r, q, metric)
    assert dpq >= 0.0
    assert dpq == dqp
    # Small float slack: the inequality holds exactly in reals.
    assert dpq <= dpr + drq + 1e-9 * max(1.0, dpq)


@given(data=st.data())
@settings(max_examples=100, deadline=None)
def test_zero_iff_equal_for_positive_weights(data):
    p = np.array(data.draw(_coords))
    metric = MetricSpec(kind="L2")
    assert distance(p, p, metric) == 0.0
    q = p.copy()
    q[0] += 1.0
    assert distance(p, q, metric) > 0.0
