import itertools
import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    angular_coefficient_oracle,
    delta_moment_oracle,
    log_coefficient_oracle,
    s_integral_oracle,
    sphere_moment,
    to_fraction,
)
from psdocalc.cli.grammar import parse_expression
from psdocalc.momentum_calculus import (
    DeltaMomentSpec,
    angular_average,
    angular_coefficient,
    assemble_profile,
    delta_moment,
    delta_reduce,
    log_coefficient,
    pairings,
    s_integral,
    s_integral_at,
)
from psdocalc.term_algebra import Expression, make_kernel

P = parse_expression

# frozen from the Gaussian-moment oracle
FROZEN_ANGULAR = {1: Fraction(1, 4), 2: Fraction(1, 24), 3: Fraction(1, 192), 4: Fraction(1, 1920)}


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_angular_coefficient_matches_gaussian_oracle(k):
    assert to_fraction(angular_coefficient_oracle(k)) == FROZEN_ANGULAR[k]
    assert angular_coefficient(k) == FROZEN_ANGULAR[k]


def _evaluate_metric_sum(e: Expression, assignment: dict) -> Fraction:
    """Substitute concrete components for free labels; p^2 set to 1 (unit sphere)."""
    total = Fraction(0)
    for mono, value in e.items():
        assert not mono.momentum.open
        t = Fraction(1)
        for a, b in mono.metrics:
            t *= 1 if assignment[a] == assignment[b] else 0
        total += value.re * t
    return total


def _moment_expression(length: int) -> tuple:
    labels = [f"i{j}" for j in range(length)]
    return labels, P(" ".join(f"p[{l}]" for l in labels))


@pytest.mark.parametrize("length", [2, 4])
def test_low_moments_all_components(length):
    labels, e = _moment_expression(length)
    avg = angular_average(e)
    for comps in itertools.product(range(4), repeat=length):
        assert _evaluate_metric_sum(avg, dict(zip(labels, comps))) == to_fraction(sphere_moment(comps))


@pytest.mark.parametrize("length", [6, 8])
def test_high_moments_sampled_components(length):
    labels, e = _moment_expression(length)
    avg = angular_average(e)
    rng = random.Random(length)
    cases = [tuple(rng.randrange(4) for _ in range(length)) for _ in range(60)]
    cases += [(0,) * length, (0, 0, 1, 1, 2, 2, 3, 3)[:length]]
    for comps in cases:
        assert _evaluate_metric_sum(avg, dict(zip(labels, comps))) == to_fraction(sphere_moment(comps))


def test_two_moment_example():
    assert angular_average(P("p[mu] p[nu]")) == P("1/4 g[mu,nu] p[a] p[a]")


@pytest.mark.parametrize("length", [1, 3, 5, 7])
def test_odd_moments_vanish(length):
    _, e = _moment_expression(length)
    assert angular_average(e).is_zero()


def test_six_moment_has_fifteen_pairings():
    _, e = _moment_expression(6)
    avg = angular_average(e)
    assert len(avg) == 15
    assert {v.re for _, v in avg.items()} == {Fraction(1, 192)}
    assert len(list(pairings(tuple(range(8))))) == 105


def test_moment_bound():
    _, e = _moment_expression(10)
    with pytest.raises(ValueError):
        angular_average(e)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(0, 3), min_size=8, max_size=8))
def test_trace_recursion(k, comps):
    """Contracting one pair of a 2k-moment gives the (2k-2)-moment times p^2."""
    labels = [f"i{j}" for j in range(2 * k - 2)]
    inner = " ".join(f"p[{l}]" for l in labels)
    contracted = angular_average(P(f"p[z] p[z] {inner}".strip()))
    lower = angular_average(P(inner)) if labels else Expression.unit()
    env = dict(zip(labels, comps))
    assert _evaluate_metric_sum(contracted, env) == _evaluate_metric_sum(lower, env)


# -- s integral


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_s_integral_closed_form(n):
    a = sp.Symbol("a", positive=True)
    assert sp.simplify(s_integral_oracle(n, a) - sp.Rational(1, n) / (1 + a) ** n) == 0
    for val in (Fraction(0), Fraction(1, 3), Fraction(5, 2)):
        assert s_integral_at(n, val) == to_fraction(s_integral_oracle(n, sp.Rational(val.numerator, val.denominator)))
    inv_n, kernel = s_integral(n)
    assert inv_n == Fraction(1, n) and kernel.m2_denominator == n and kernel.lambda0_power == 2 * n


def test_s_integral_examples():
    assert s_integral_at(1, Fraction(0)) == 1
    assert s_integral_at(2, Fraction(1)) == Fraction(1, 8)
    with pytest.raises(ValueError):
        s_integral(0)


# -- log coefficient


def test_log_coefficient_examples():
    assert log_coefficient(make_kernel(1, (("m2", 2),))) == {0: Fraction(1)}
    assert log_coefficient(make_kernel(1, (("m2", 3),))) == {}
    assert log_coefficient(make_kernel(0, (("m2", 1),))) == {0: Fraction(1)}


@pytest.mark.parametrize("w,n", [(w, n) for w in range(0, 4) for n in range(1, 6)])
def test_log_coefficient_matches_series_oracle(w, n):
    got = log_coefficient(make_kernel(w, (("m2", n),)))
    want = {k: to_fraction(v) for k, v in log_coefficient_oracle(w, n).items() if v != 0}
    assert got == want


def test_log_coefficient_is_linear_in_kernel():
    k1, k2 = make_kernel(1, (("m2", 2),)), make_kernel(2, (("m2", 3),))
    e = P("2 u^1 R[2] + 3 u^2 R[3]")
    prof = assemble_profile(e)
    want = 2 * log_coefficient(k1).get(0, 0) + 3 * log_coefficient(k2).get(0, 0)
    assert prof.log == P(str(want)) if want else prof.log.is_zero()


# -- delta moments


@pytest.mark.parametrize("k,w", [(k, w) for k in range(5) for w in range(4)])
def test_delta_moment_matches_sympy(k, w):
    want = {j: to_fraction(c) for j, c in delta_moment_oracle(k, w).items()}
    assert delta_moment(DeltaMomentSpec(k, w)) == want
    assert delta_reduce(DeltaMomentSpec(k, w)) == want.get(0, Fraction(0))


def test_delta_examples():
    assert delta_reduce(DeltaMomentSpec(0, 0)) == 2
    assert delta_reduce(DeltaMomentSpec(2, 0)) == 0
    assert delta_moment(DeltaMomentSpec(1, 1, with_log=False)) == {}
    with pytest.raises(ValueError):
        delta_reduce(DeltaMomentSpec(5, 0))


# -- profiles


def test_field_free_profile_is_empty():
    prof = assemble_profile(Expression.zero())
    assert prof.log.is_zero() and prof.lambda2.is_zero() and prof.lambda1.is_zero()


def test_lambda0_must_cancel():
    with pytest.raises(ArithmeticError):
        assemble_profile(P("A[a] A[a] u^1 R[2] L0^2"))


def test_quadratic_channel_binned():
    prof = assemble_profile(P("A[a] A[a] u^1 R[1]"))
    assert prof.lambda2 == P("1/2 A[a] A[a]")
    assert prof.log == P("-1*m2 A[a] A[a]")


def test_open_indices_rejected():
    with pytest.raises(ValueError):
        assemble_profile(P("p[a] A[a] u^1 R[2]"))
