import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import FieldModel, brute_force_heat_on_one, brute_force_klein_gordon_on_one, evaluate_expression
from psdocalc.cli.grammar import parse_expression
from psdocalc.term_algebra import (
    EMPTY_MONOMIAL,
    I,
    ONE,
    Expression,
    FieldAtom,
    GaussRat,
    MultField,
    Partial,
    ProductRegime,
    canonicalize,
    evaluate_on_one,
    field_word_is_order_preserved,
    heat_operator,
    klein_gordon_operator,
    moyal_shift_normalize,
    multiply,
    under_integral,
)

KG = klein_gordon_operator()


def P(src, **kw):
    return parse_expression(src, **kw)


# -- evaluate_on_one


def test_order_zero_is_unit():
    assert evaluate_on_one(KG, 0) == Expression.unit()


def test_order_one_matches_symbol():
    expected = P("i*e d[mu] A[mu] - e^2 A[mu] A[mu] - 2*e p[mu] A[mu]")
    assert evaluate_on_one(KG, 1) == expected


@pytest.mark.parametrize("n", [1, 2])
def test_klein_gordon_power_matches_brute_force(n):
    model = FieldModel(seed=n)
    assert evaluate_expression(evaluate_on_one(KG, n), model) == brute_force_klein_gordon_on_one(n, model)


@pytest.mark.parametrize("r", [1, 2])
def test_heat_operator_power_matches_brute_force(r):
    model = FieldModel(seed=10 + r)
    assert evaluate_expression(evaluate_on_one(heat_operator(), r), model) == brute_force_heat_on_one(r, model)


def test_term_counts_are_stable():
    # frozen after the brute-force comparison above
    assert [len(evaluate_on_one(KG, n)) for n in range(5)] == [1, 3, 22, 192, 1996]


@pytest.mark.parametrize("n", range(5))
def test_mass_dimension_is_2n(n):
    # Box and p.D both carry dimension two, so every term of the n-th power has 2n
    for mono, _ in evaluate_on_one(KG, n).items():
        assert mono.dimension() == 2 * n


def test_order_bound_enforced():
    with pytest.raises(ValueError):
        evaluate_on_one(KG, 6)
    assert len(evaluate_on_one(KG, 5, max_order=5)) > 0


def test_trailing_partial_annihilates():
    assert evaluate_on_one(((Partial("mu"),),), 1).is_zero()


def test_rejects_foreign_generator():
    with pytest.raises(TypeError):
        evaluate_on_one((("not a generator",),), 1)


def _constant_abelian_value(e: Expression, a, p, coupling) -> Fraction:
    """Evaluate with A_mu = a_mu constant and commuting; derivative terms vanish."""
    total = Fraction(0)
    for mono, value in e.items():
        if any(atom.derivs for atom in mono.word):
            continue
        labels = sorted({l for l in mono.labels() if isinstance(l, int)})
        acc = Fraction(0)
        for env in itertools.product(range(4), repeat=len(labels)):
            env = dict(zip(labels, env))
            t = Fraction(1)
            for atom in mono.word:
                t *= a[env[atom.indices[0]]]
            for l in mono.momentum.open:
                t *= p[env[l]]
            t *= sum(x * x for x in p) ** mono.momentum.p2
            acc += t
        assert value.im == 0 or acc == 0
        total += value.re * coupling**mono.e_power * acc
    return total


rationals = st.fractions(min_value=-3, max_value=3, max_denominator=5)


@settings(max_examples=25, deadline=None)
@given(st.lists(rationals, min_size=4, max_size=4), st.lists(rationals, min_size=4, max_size=4), st.integers(0, 3))
def test_constant_abelian_field_gives_scalar_power(a, p, n):
    e = Fraction(2, 3)
    aa = sum(x * x for x in a)
    pa = sum(x * y for x, y in zip(p, a))
    expected = (-(e**2) * aa - 2 * e * pa) ** n
    assert _constant_abelian_value(evaluate_on_one(KG, n), a, p, e) == expected


def test_moyal_regime_preserves_word_order_and_marks_shift():
    e = evaluate_on_one(klein_gordon_operator(ProductRegime.MOYAL), 2, ProductRegime.MOYAL)
    assert all(a.shifted for m, _ in e.items() for a in m.word)
    flat = evaluate_on_one(KG, 2)
    assert len(e) == len(flat)


# -- multiply


def test_multiply_unit():
    e = P("A[mu] d[mu] A[nu] A[nu]")
    assert multiply(Expression.unit(), e) == e
    assert multiply(e, Expression.unit()) == e


def test_matrix_words_do_not_commute_but_f_does():
    ab = multiply(P("A[mu]"), P("A[nu]"))
    ba = multiply(P("A[nu]"), P("A[mu]"))
    assert ab != ba
    assert multiply(P("f"), P("A[mu]")) == multiply(P("A[mu]"), P("f"))


def test_multiply_rejects_free_collision():
    with pytest.raises(ValueError):
        multiply(P("A[mu]"), P("A[mu] A[nu] A[nu]"))


def test_multiply_preserves_order_in_moyal_regime():
    x = P("A~[a] A~[b] A~[b]", regime="moyal")
    y = P("d[c] A~[c]", regime="moyal")
    out = multiply(x, y)
    for m, _ in out.items():
        assert field_word_is_order_preserved(next(iter(x.items()))[0].word + next(iter(y.items()))[0].word, m.word)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2))
def test_multiply_adds_dimension(n1, n2):
    e1, e2 = evaluate_on_one(KG, n1), evaluate_on_one(KG, n2)
    dims = {m.dimension() for m, _ in multiply(e1, e2).items()}
    assert dims <= {2 * (n1 + n2)}


# -- canonical form


def test_alpha_equivalence_merges():
    assert P("p[a] p[b] A[a] A[b]") + P("p[x] p[y] A[x] A[y]") == P("2 p[c] p[d] A[c] A[d]")


def test_cancellation_prunes():
    e = P("i*e d[mu] A[mu] - e^2 A[mu] A[mu]")
    assert (e - e).is_zero()
    assert len(e + e.scale(-1)) == 0


def test_symmetric_derivative_relabelling():
    assert P("d[a] d[b] A[a] A[b]") == P("d[b] d[a] A[a] A[b]")


@st.composite
def random_expression(draw):
    n = draw(st.integers(1, 3))
    base = evaluate_on_one(KG, n)
    items = base.items()
    picks = draw(st.lists(st.integers(0, len(items) - 1), min_size=1, max_size=50))
    coeffs = draw(st.lists(st.integers(-3, 3), min_size=len(picks), max_size=len(picks)))
    return [(GaussRat(Fraction(c)), items[i][0]) for i, c in zip(picks, coeffs)]


@settings(max_examples=40, deadline=None)
@given(random_expression(), st.randoms())
def test_canonicalize_idempotent_and_order_independent(pairs, rnd):
    e = Expression.from_pairs(pairs)
    assert canonicalize(canonicalize(e)) == canonicalize(e)
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    assert Expression.from_pairs(shuffled) == e


def test_dummy_used_three_times_rejected():
    mono = EMPTY_MONOMIAL._replace(word=(FieldAtom("A", (0,)), FieldAtom("A", (0,)), FieldAtom("A", (0,))))
    with pytest.raises(ValueError, match="occurs 3 times"):
        Expression.from_pairs([(ONE, mono)])


# -- Moyal shift


def test_shift_removed_under_integral():
    e = under_integral(P("A~[mu] A~[mu]", regime="moyal"))
    assert moyal_shift_normalize(e) == under_integral(P("A[mu] A[mu]", regime="moyal"))


def test_shift_noop_without_markers():
    e = under_integral(P("F[a,b] F[a,b]", regime="moyal"))
    assert moyal_shift_normalize(e) == e


def test_shift_refused_pointwise():
    with pytest.raises(ValueError, match="spatial-integral"):
        moyal_shift_normalize(P("A~[mu] A~[mu]", regime="moyal"))


def test_gaussrat_arithmetic():
    assert I * I == GaussRat(Fraction(-1))
    assert (GaussRat(Fraction(1), Fraction(2)) / GaussRat(Fraction(1), Fraction(2))) == ONE
    assert MultField(FieldAtom("A", ("mu",))).atom.dimension() == 1
