"""Euclidean Clifford traces in four dimensions, sigma.F bookkeeping and
truncated composition of matrix-valued symbols."""

from __future__ import annotations

from fractions import Fraction
from math import factorial

from .term_algebra import (
    EMPTY_MONOMIAL,
    I,
    Expression,
    FieldAtom,
    GaussRat,
    Monomial,
    MomentumFactor,
    ProductRegime,
    canonical_monomial,
    free_labels,
    make_kernel,
    relabel,
)

SPACETIME_DIM = 4
SPINOR_DIM = 4
MAX_COMPOSE_ORDER = 4


def gamma_pairings(word: tuple) -> list:
    """Signed metric pairings of tr(gamma^w1 ... gamma^wk) / 4: [(sign, [(a, b), ...])]."""
    if len(word) % 2:
        return []
    if not word:
        return [(1, [])]
    first, rest = word[0], word[1:]
    out = []
    for j, other in enumerate(rest):
        sign = -1 if j % 2 else 1
        for s, tail in gamma_pairings(rest[:j] + rest[j + 1 :]):
            out.append((sign * s, [(first, other)] + tail))
    return out


def _contract_pairs(pairs: list, mono: Monomial) -> tuple:
    """Resolve metric pairs against dummies of ``mono``; returns (factor, monomial)."""
    factor = 1
    pairs = list(pairs)
    metrics = list(mono.metrics)
    while pairs:
        a, b = pairs.pop(0)
        if a == b:
            if not isinstance(a, int):
                raise ValueError(f"free index {a} repeated")
            factor *= SPACETIME_DIM
            continue
        if isinstance(a, int) or isinstance(b, int):
            old, new = (a, b) if isinstance(a, int) else (b, a)
            ren = lambda l, old=old, new=new: new if l == old else l
            pairs = [(ren(x), ren(y)) for x, y in pairs]
            mono = relabel(mono._replace(metrics=tuple(metrics)), ren)
            metrics = list(mono.metrics)
        else:
            metrics.append((a, b))
    for a, b in metrics:
        if a == b:
            raise ValueError("free index contracted with itself")
    return factor, mono._replace(metrics=tuple(tuple(sorted(p)) for p in metrics))


def _traced_pairs(gammas: tuple, mono: Monomial) -> list:
    out = []
    for sign, pairs in gamma_pairings(tuple(gammas)):
        factor, m = _contract_pairs(pairs, mono)
        out.append((GaussRat(Fraction(sign * factor * SPINOR_DIM)), m))
    return out


def spin_trace(gammas: tuple, atoms: tuple = (), regime: ProductRegime = ProductRegime.COMMUTATIVE) -> Expression:
    """tr_spin(gamma^g1 ... gamma^gk) times the gauge-matrix word ``atoms`` (kept in order).

    Gamma indices may be free (str) or dummies (int) shared with ``atoms``.
    """
    return Expression.from_pairs(_traced_pairs(gammas, EMPTY_MONOMIAL._replace(word=tuple(atoms))), regime)


def gamma_trace(word: tuple) -> Expression:
    """tr(gamma^w1 ... gamma^wk) as metric products (4 for the empty word)."""
    return spin_trace(tuple(word))


def expand_sigma_f(atoms: tuple, first_label: int = 0) -> list:
    """Replace each SigmaF by (1/2) gamma^a gamma^b F_ab; returns [(coefficient, gammas, atoms)].

    Other atoms are gauge matrices that commute with gammas.
    """
    gammas: list = []
    out_atoms = []
    coeff = Fraction(1)
    label = first_label
    for atom in atoms:
        if atom.kind == "SigmaF":
            a, b = label, label + 1
            label += 2
            gammas += [a, b]
            out_atoms.append(FieldAtom("F", (a, b), atom.derivs, atom.shifted))
            coeff /= 2
        else:
            out_atoms.append(atom)
    return [(coeff, tuple(gammas), tuple(out_atoms))]


def spin_trace_sigma(e: Expression) -> Expression:
    """Take the spinor trace of an expression whose matrix atoms include SigmaF."""
    pairs = []
    for mono, value in e.items():
        used = [l for l in mono.labels() if isinstance(l, int)]
        base = max(used) + 1 if used else 0
        for c, gammas, atoms in expand_sigma_f(mono.word, base):
            for v, m in _traced_pairs(gammas, mono._replace(word=atoms)):
                pairs.append((value * v * c, m))
    return normalize_field_strength(Expression.from_pairs(pairs, e.regime, e.integrated))


def normalize_field_strength(e: Expression, max_rounds: int = 16) -> Expression:
    """Use F_ab = -F_ba (and F_aa = 0) to put F indices in increasing label order."""
    for _ in range(max_rounds):
        changed = False
        pairs = []
        for mono, value in e.items():
            sign = 1
            word = []
            dead = False
            for atom in mono.word:
                if atom.kind == "F":
                    a, b = atom.indices
                    if a == b:
                        dead = True
                        break
                    if _label_order(b) < _label_order(a):
                        atom = atom._replace(indices=(b, a))
                        sign = -sign
                        changed = True
                word.append(atom)
            if dead:
                changed = True
                continue
            pairs.append((value * sign, mono._replace(word=tuple(word))))
        e = Expression.from_pairs(pairs, e.regime, e.integrated)
        if not changed:
            return e
    raise RuntimeError("field-strength normalization did not settle")


def _label_order(l) -> tuple:
    return (0, l, 0) if isinstance(l, str) else (1, "", l)


def sigma_f_identities() -> dict:
    """Symbolic check of tr_spin(sigma.F) = 0 and tr_spin((sigma.F)^2) = -2 F_ab F_ab."""
    sigma = FieldAtom("SigmaF")
    single = spin_trace_sigma(Expression.from_pairs([(GaussRat(Fraction(1)), EMPTY_MONOMIAL._replace(word=(sigma,)))]))
    double = spin_trace_sigma(
        Expression.from_pairs([(GaussRat(Fraction(1)), EMPTY_MONOMIAL._replace(word=(sigma, sigma)))])
    )
    f = FieldAtom("F", (0, 1))
    expected = Expression.from_pairs([(GaussRat(Fraction(-2)), EMPTY_MONOMIAL._replace(word=(f, f)))])
    return {
        "trace_sigma_f": single,
        "trace_sigma_f_squared": double,
        "trace_sigma_f_vanishes": single.is_zero(),
        "trace_sigma_f_squared_matches": double == expected,
    }


# ---------------------------------------------------------------------------
# symbol composition


def _p_derivative(value: GaussRat, mono: Monomial, mu) -> list:
    """d/dp_mu of the p-dependent factors (open momenta, p^2 powers, radial kernel)."""
    out = []
    mom = mono.momentum
    for j, nu in enumerate(mom.open):
        rest = mom.open[:j] + mom.open[j + 1 :]
        m = mono._replace(momentum=MomentumFactor(rest, mom.p2))
        # delta_{mu nu}; resolved once both sides are joined
        out.append((value, m._replace(metrics=m.metrics + ((mu, nu),))))
    with_p = MomentumFactor(mom.open + (mu,), mom.p2)
    if mom.p2:
        out.append((value * (2 * mom.p2), mono._replace(momentum=MomentumFactor(with_p.open, mom.p2 - 1))))
    k = mono.kernel
    if k.u_power:
        kk = make_kernel(k.u_power - 1, k.denominators, k.lambda0_power)
        out.append((value * (2 * k.u_power), mono._replace(momentum=with_p, kernel=kk)))
    n = k.m2_denominator
    if n:
        kk = make_kernel(k.u_power, (("m2", n + 1),), k.lambda0_power)
        out.append((value * (-2 * n), mono._replace(momentum=with_p, kernel=kk)))
    return out


def _x_derivative(value: GaussRat, mono: Monomial, mu) -> list:
    return [
        (value, mono._replace(word=mono.word[:j] + (a._replace(derivs=a.derivs + (mu,)),) + mono.word[j + 1 :]))
        for j, a in enumerate(mono.word)
    ]


def _max_dummy(monos) -> int:
    used = [l for m in monos for l in m.labels() if isinstance(l, int)]
    return max(used) + 1 if used else 0


def symbol_compose(s1: Expression, s2: Expression, order: int) -> Expression:
    """sum_{|alpha| <= order} (-i)^|alpha| / alpha! d_p^alpha s1 * d_x^alpha s2.

    Written with repeated dummy indices, so the multinomial alpha! becomes k!.
    """
    if order > MAX_COMPOSE_ORDER:
        raise ValueError(f"composition order {order} above bound {MAX_COMPOSE_ORDER}")
    s1._check(s2)
    f1 = set().union(*(free_labels(m) for m, _ in s1.items())) if len(s1) else set()
    f2 = set().union(*(free_labels(m) for m, _ in s2.items())) if len(s2) else set()
    if f1 & f2:
        raise ValueError(f"index collision on free labels {sorted(f1 & f2)}")
    base = _max_dummy(m for m, _ in s1.items())
    shift = base + order
    pairs = []
    for m1, v1 in s1.items():
        for m2, v2 in s2.items():
            m2s = relabel(m2, lambda l: l + shift if isinstance(l, int) else l)
            left = [(v1, m1)]
            right = [(v2, m2s)]
            for k in range(order + 1):
                if k:
                    mu = base + k - 1
                    left = [t for v, m in left for t in _p_derivative(v, m, mu)]
                    right = [t for v, m in right for t in _x_derivative(v, m, mu)]
                if not left or not right:
                    break
                scale = GaussRat(Fraction(1, factorial(k)))
                for _ in range(k):
                    scale = scale * -I
                for va, ma in left:
                    for vb, mb in right:
                        pairs.append((scale * va * vb, _resolve_metrics(_join(ma, mb))))
    return Expression.from_pairs(pairs, s1.regime, s1.integrated and s2.integrated)


def _join(a: Monomial, b: Monomial) -> Monomial:
    return Monomial(
        a.e_power + b.e_power,
        a.m2_power + b.m2_power,
        a.pi_inv2_power + b.pi_inv2_power,
        a.word + b.word,
        MomentumFactor(a.momentum.open + b.momentum.open, a.momentum.p2 + b.momentum.p2),
        a.kernel * b.kernel,
        a.metrics + b.metrics,
    )


def _resolve_metrics(mono: Monomial) -> Monomial:
    """Absorb metric factors that carry a dummy index into the dummy's partner."""
    metrics = list(mono.metrics)
    while True:
        hit = next((p for p in metrics if isinstance(p[0], int) or isinstance(p[1], int)), None)
        if hit is None:
            return mono._replace(metrics=tuple(metrics))
        metrics.remove(hit)
        a, b = hit
        old, new = (a, b) if isinstance(a, int) else (b, a)
        mono = relabel(mono._replace(metrics=tuple(metrics)), lambda l: new if l == old else l)
        metrics = list(mono.metrics)


def momentum_degree(mono: Monomial) -> int:
    """Large-p scaling power of a symbol term (open momenta, p^2 and radial kernel)."""
    k = mono.kernel
    return mono.momentum.degree() + 2 * (k.u_power - k.m2_denominator)
