import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from samplecover.bounds import (adaptive_simpson, adversarial_loss, covering_number_model,
                                entropy_integral, global_complexity_bound, load_loss_table,
                                powerset_index, powerset_subsets, refined_complexity_bound,
                                selection_bound, transform_powerset)
from samplecover.transforms import compose, preset

import oracles


def test_global_bound_examples():
    assert global_complexity_bound(1, 4, 100) == 4.8
    assert global_complexity_bound(1, 0, 100) == 0.0
    assert global_complexity_bound(0.5, 50, 50) == 12.0
    with pytest.raises(ValueError):
        global_complexity_bound(1, 5, 4)
    with pytest.raises(ValueError):
        global_complexity_bound(1, 0, 0)


def test_covering_model():
    assert covering_number_model(0.5, 1.0, 3) == 64.0
    assert covering_number_model(1.0, 1.0, 3) == 1.0


def test_simpson_on_polynomial_and_exp():
    assert adaptive_simpson(lambda t: t ** 3, 0, 2) == pytest.approx(4.0, rel=1e-12)
    assert adaptive_simpson(math.exp, 0, 1, 1e-10) == pytest.approx(math.e - 1, rel=1e-10)


@pytest.mark.parametrize("a", [0.0, 1e-8, 0.01, 0.2, 0.45])
def test_entropy_integral_matches_closed_form(a):
    # with B = 1: int_{2a}^1 sqrt(log(2/tau)) dtau = 2 int_a^{1/2} sqrt(log(1/t)) dt
    got = entropy_integral(1.0, 1, 1, 2 * a)
    assert got == pytest.approx(2 * oracles.entropy_integral_closed(a), rel=1e-6)


def test_entropy_integral_matches_trapezoid():
    ref = oracles.entropy_integral_trapezoid(0.0, 0.5)
    assert ref == pytest.approx(0.6281, abs=5e-5)
    assert entropy_integral(1.0, 4, 100, 0.0) == pytest.approx(2 * 0.2 * ref, rel=1e-5)


def test_refined_bound_examples():
    assert refined_complexity_bound(1, 0, 0, 4, 100, 0) == pytest.approx(3.015, rel=0.02)
    assert refined_complexity_bound(1, 2, 0.1, 4, 100, 0) == pytest.approx(
        4 * 2 * 0.1 * math.sqrt(0.96) + 24 * 0.2 * oracles.entropy_integral_closed(0), rel=1e-6)
    full = refined_complexity_bound(1, 7, 3, 10, 10, 0)
    assert full == pytest.approx(refined_complexity_bound(1, 0, 0, 10, 10, 0), rel=1e-12)
    assert refined_complexity_bound(1, 0, 0, 4, 100, 1.0) == 4.0
    assert refined_complexity_bound(1, 0, 0, 0, 100, 0.3) == pytest.approx(1.2)
    with pytest.raises(ValueError):
        refined_complexity_bound(1, 0, 0, 4, 100, 1.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 5), st.floats(0, 3), st.floats(0, 2), st.integers(1, 50),
       st.integers(50, 200), st.floats(0, 1))
def test_refined_bound_monotone_in_kappa_eps_B(B, kappa, eps, m, n, frac):
    alpha = frac * B
    base = refined_complexity_bound(B, kappa, eps, m, n, alpha)
    assert refined_complexity_bound(B, kappa * 1.5 + 0.1, eps, m, n, alpha) >= base - 1e-12
    assert refined_complexity_bound(B, kappa, eps * 1.5 + 0.1, m, n, alpha) >= base - 1e-12
    assert refined_complexity_bound(B * 1.3, kappa, eps, m, n, alpha) >= base - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 5), st.integers(1, 49), st.integers(50, 200), st.floats(0, 1))
def test_refined_bound_monotone_in_m_and_n_without_lipschitz_term(B, m, n, frac):
    alpha = frac * B
    base = refined_complexity_bound(B, 0, 0, m, n, alpha)
    assert refined_complexity_bound(B, 0, 0, m + 1, n, alpha) >= base - 1e-12
    assert refined_complexity_bound(B, 0, 0, m, n + 1, alpha) <= base + 1e-12


def test_refined_bound_is_not_monotone_in_m_with_lipschitz_term():
    # the first term shrinks as the cover grows, so the sum can fall with m
    lo = refined_complexity_bound(0.01, 10, 1, 99, 100, 0)
    hi = refined_complexity_bound(0.01, 10, 1, 100, 100, 0)
    assert hi < lo


def test_adversarial_loss_examples():
    adv = adversarial_loss([[0.1, 0.9, 0.3]])
    assert adv.maxima.tolist() == [0.9]
    col = np.array([0.2, 0.5, 0.0])
    np.testing.assert_array_equal(adversarial_loss(col).maxima, col)
    assert adversarial_loss(np.zeros((4, 3))).mean == 0.0
    with pytest.raises(ValueError):
        adversarial_loss([[0.5, 1.5]])
    with pytest.raises(ValueError):
        adversarial_loss(np.zeros((0, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_adversarial_mean_dominates_every_column(n, k, seed):
    t = np.random.default_rng(seed).random((n, k))
    adv = adversarial_loss(t)
    assert np.all(adv.mean >= t.mean(axis=0) - 1e-15)


def test_loss_table_csv(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("0.1,0.9,0.3\n0,0.2,0.1\n")
    assert adversarial_loss(load_loss_table(p)).mean == pytest.approx(0.55)
    p.write_text("0.1,abc\n")
    with pytest.raises(ValueError, match="l.csv"):
        load_loss_table(p)


def test_selection_bound_example_against_decimal():
    got = selection_bound(0.1, 0.05, 1, 100, 0.05)
    ref = oracles.selection_bound_decimal(0.1, 0.05, 1, 100, 0.05)
    assert abs(got - float(ref)) <= 1e-9
    assert got == pytest.approx(0.744, abs=5e-4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10 ** 6), st.floats(1e-6, 1 - 1e-6, exclude_min=True))
def test_selection_bound_reduces_to_confidence_term(n, delta):
    assert selection_bound(0, 0, 1, n, delta) == 3 * math.sqrt(math.log(4 / delta) / (2 * n))


def test_selection_bound_limits_and_errors():
    far = selection_bound(0.1, 0.05, 7, 10 ** 12, 0.05)
    assert far == pytest.approx(0.3, abs=1e-5)
    assert selection_bound(0, 0, 8, 100, 0.5) > selection_bound(0, 0, 1, 100, 0.5)
    for args in ((0.1, 0, 0, 10, 0.1), (0.1, 0, 1, 0, 0.1), (0.1, 0, 1, 10, 1.0)):
        with pytest.raises(ValueError):
            selection_bound(*args)


def test_powerset_order():
    assert powerset_subsets(1) == [(), (1,)]
    assert powerset_subsets(2) == [(), (1,), (2,), (1, 2)]
    assert powerset_index({1, 2}, 2) == 3
    assert powerset_index((), 5) == 0
    assert len(powerset_subsets(16)) == 2 ** 16
    with pytest.raises(ValueError):
        powerset_subsets(17)
    with pytest.raises(ValueError):
        powerset_index({3}, 2)


def test_transform_powerset_composites():
    flip, rot = preset("flip"), preset("rotate")
    specs = transform_powerset([flip, rot])
    assert specs[0] == preset("identity")
    assert specs[1] == flip and specs[2] == rot
    assert specs[3] == compose([flip, rot])
    assert specs[powerset_index({1, 2}, 2)] == compose([flip, rot])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 8), st.data())
def test_powerset_index_inverts_enumeration(L, data):
    subsets = powerset_subsets(L)
    k = data.draw(st.integers(0, len(subsets) - 1))
    assert powerset_index(subsets[k], L) == k
