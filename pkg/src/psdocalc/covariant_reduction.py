"""Trace invariants under the spatial integral, modulo integration by
parts and cyclicity of the trace, decided by exact linear algebra."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .term_algebra import (
    CENTRAL_KINDS,
    I,
    EMPTY_MONOMIAL,
    Coefficient,
    Expression,
    FieldAtom,
    GaussRat,
    Monomial,
    ProductRegime,
    canonical_monomial,
    monomial_sort_key,
)

MAX_DIMENSION = 4
MAX_A_ATOMS = 4
REDUCIBLE_KINDS = frozenset({"A", "F", "f", "chi"})


def _fresh(mono: Monomial) -> int:
    used = [l for l in mono.labels() if isinstance(l, int)]
    return max(used) + 1 if used else 0


def _leibniz(value: GaussRat, mono: Monomial, index) -> list:
    """d_index of the whole field word, one term per atom."""
    out = []
    for j, atom in enumerate(mono.word):
        if atom.is_operator:
            raise ValueError(f"cannot differentiate through operator letter {atom.kind}")
        hit = atom._replace(derivs=atom.derivs + (index,))
        out.append((value, mono._replace(word=mono.word[:j] + (hit,) + mono.word[j + 1 :])))
    return out


def _with_word(mono: Monomial, word: tuple, e_extra: int = 0) -> Monomial:
    return mono._replace(word=word, e_power=mono.e_power + e_extra)


def _expand_letters(value: GaussRat, mono: Monomial) -> list:
    """Expand D and Box letters (operators acting on everything to their right, then on 1)."""
    fresh = _fresh(mono)
    letters = []
    for atom in mono.word:
        if atom.kind == "Box":
            if atom.derivs:
                raise ValueError("Box letter cannot carry derivatives")
            letters += [FieldAtom("D", (fresh,)), FieldAtom("D", (fresh,))]
            fresh += 1
        else:
            letters.append(atom)
    states = [(value, mono._replace(word=()))]
    for atom in reversed(letters):
        nxt = []
        for v, m in states:
            if atom.kind == "D":
                if atom.derivs:
                    raise ValueError("D letter cannot carry derivatives")
                (mu,) = atom.indices
                nxt.extend(_leibniz(v, m, mu))
                nxt.append((v * I, _with_word(m, (FieldAtom("A", (mu,), (), atom.shifted),) + m.word, 1)))
            else:
                nxt.append((v, _with_word(m, (atom,) + m.word)))
        states = nxt
    return states


def _field_strength_words(atom: FieldAtom) -> list:
    """F_{ab} = d_a A_b - d_b A_a + ie (A_a A_b - A_b A_a), then the atom's own derivatives."""
    a, b = atom.indices
    s = atom.shifted
    base = [
        (GaussRat(Fraction(1)), 0, (FieldAtom("A", (b,), (a,), s),)),
        (GaussRat(Fraction(-1)), 0, (FieldAtom("A", (a,), (b,), s),)),
        (I, 1, (FieldAtom("A", (a,), (), s), FieldAtom("A", (b,), (), s))),
        (-I, 1, (FieldAtom("A", (b,), (), s), FieldAtom("A", (a,), (), s))),
    ]
    out = []
    for v, e, word in base:
        states = [(v, word)]
        for d in atom.derivs:
            nxt = []
            for vv, w in states:
                for j, x in enumerate(w):
                    nxt.append((vv, w[:j] + (x._replace(derivs=x.derivs + (d,)),) + w[j + 1 :]))
            states = nxt
        out.extend((vv, e, w) for vv, w in states)
    return out


def _expand_strengths(value: GaussRat, mono: Monomial) -> list:
    states = [(value, 0, ())]
    for atom in mono.word:
        if atom.kind == "F":
            parts = _field_strength_words(atom)
        else:
            parts = [(GaussRat(Fraction(1)), 0, (atom,))]
        states = [(v * pv, e + pe, w + pw) for v, e, w in states for pv, pe, pw in parts]
    return [(v, _with_word(mono, w, e)) for v, e, w in states]


def expand_covariant(e: Expression) -> Expression:
    """Rewrite D/Box letters and F atoms in terms of d and A."""

    def expand(value, mono):
        out = []
        for v, m in _expand_letters(value, mono):
            out.extend(_expand_strengths(v, m))
        return out

    return e.map_monomials(expand)


# ---------------------------------------------------------------------------
# relation span


def _rotate(mono: Monomial) -> Monomial:
    """Move the last matrix-valued atom to the front (cyclicity of tr)."""
    central = tuple(a for a in mono.word if a.kind in CENTRAL_KINDS)
    rest = tuple(a for a in mono.word if a.kind not in CENTRAL_KINDS)
    if len(rest) < 2:
        return mono
    return mono._replace(word=central + rest[-1:] + rest[:-1])


def _check_reducible(mono: Monomial, max_dimension: int) -> None:
    for atom in mono.word:
        if atom.kind not in REDUCIBLE_KINDS:
            raise ValueError(f"atom {atom.kind} must be expanded before reduction")
    if mono.momentum.open or mono.momentum.p2:
        raise ValueError("momentum factors cannot stand under the spatial trace invariant")
    if mono.dimension() > max_dimension:
        raise ValueError(f"dimension {mono.dimension()} above configured bound {max_dimension}")
    if sum(a.kind == "A" for a in mono.word) > MAX_A_ATOMS:
        raise ValueError(f"more than {MAX_A_ATOMS} gauge-field atoms")


def relation_rows(mono: Monomial, abelian: bool = False) -> list:
    """Relations generated by one monomial, each a list of (GaussRat, Monomial) summing to zero."""
    rows = []
    rot = _rotate(mono)
    if rot != mono:
        rows.append([(GaussRat(Fraction(1)), mono), (GaussRat(Fraction(-1)), rot)])
    for j, atom in enumerate(mono.word):
        for k, d in enumerate(atom.derivs):
            if k and d == atom.derivs[k - 1]:
                continue
            inner = atom._replace(derivs=atom.derivs[:k] + atom.derivs[k + 1 :])
            w = mono._replace(word=mono.word[:j] + (inner,) + mono.word[j + 1 :])
            rows.append(_leibniz(GaussRat(Fraction(1)), w, d))
    if abelian:
        word = mono.word
        for j in range(len(word) - 1):
            swapped = word[:j] + (word[j + 1], word[j]) + word[j + 2 :]
            rows.append([(GaussRat(Fraction(1)), mono), (GaussRat(Fraction(-1)), mono._replace(word=swapped))])
    return rows


def _order_key(mono: Monomial) -> tuple:
    return (sum(len(a.derivs) for a in mono.word), monomial_sort_key(mono))


class RelationBasis:
    """Closure of IBP and cyclic relations over a set of starting monomials.

    Rows are kept in echelon form with the pivot at the largest monomial
    under ``_order_key``; reduction removes every pivot monomial, which
    makes the remainder a canonical representative.
    """

    def __init__(
        self,
        monomials: Iterable[Monomial],
        regime: ProductRegime = ProductRegime.COMMUTATIVE,
        abelian: bool = False,
        max_dimension: int = MAX_DIMENSION,
    ):
        regime = ProductRegime(regime)
        if abelian and regime is ProductRegime.MOYAL:
            raise ValueError("reordering relations are not valid for star products")
        self.regime = regime
        self.abelian = abelian
        self.max_dimension = max_dimension
        self.monomials: list = []
        self.rows: list = []
        seen: set = set()
        queue = [canonical_monomial(m) for m in monomials]
        raw = []
        while queue:
            m = queue.pop()
            if m in seen:
                continue
            _check_reducible(m, max_dimension)
            seen.add(m)
            for row in relation_rows(m, abelian):
                row = [(v, canonical_monomial(x)) for v, x in row]
                raw.append(row)
                queue.extend(x for _, x in row if x not in seen)
        self.monomials = sorted(seen, key=_order_key)
        self._column = {m: i for i, m in enumerate(self.monomials)}
        self._pivots: dict = {}
        for row in raw:
            vec: dict = {}
            for v, x in row:
                if v.im:
                    raise ValueError("relation rows must be rational")
                c = self._column[x]
                vec[c] = vec.get(c, Fraction(0)) + v.re
            self.rows.append({c: q for c, q in vec.items() if q})
            self._insert(self.rows[-1])

    def _reduce_vector(self, vec: dict) -> dict:
        vec = {c: q for c, q in vec.items() if q}
        pending = sorted((c for c in vec if c in self._pivots), reverse=True)
        while pending:
            c = pending.pop(0)
            q = vec.get(c)
            if not q:
                continue
            for cc, qq in self._pivots[c].items():
                nv = vec.get(cc, Fraction(0)) - q * qq
                if nv:
                    vec[cc] = nv
                else:
                    vec.pop(cc, None)
            pending = sorted((c for c in vec if c in self._pivots), reverse=True)
        return vec

    def _insert(self, row: dict) -> None:
        vec = self._reduce_vector(row)
        if not vec:
            return
        lead = max(vec)
        q = vec[lead]
        self._pivots[lead] = {c: v / q for c, v in vec.items()}

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def covers(self, mono: Monomial) -> bool:
        return canonical_monomial(mono) in self._column

    def coordinates(self, e: Expression) -> dict:
        """Reduced coordinates {monomial: GaussRat} of ``e``."""
        re_vec: dict = {}
        im_vec: dict = {}
        for mono, value in e.items():
            c = self._column[mono]
            if value.re:
                re_vec[c] = re_vec.get(c, Fraction(0)) + value.re
            if value.im:
                im_vec[c] = im_vec.get(c, Fraction(0)) + value.im
        re_vec = self._reduce_vector(re_vec)
        im_vec = self._reduce_vector(im_vec)
        out = {}
        for c in sorted(set(re_vec) | set(im_vec)):
            out[self.monomials[c]] = GaussRat(re_vec.get(c, Fraction(0)), im_vec.get(c, Fraction(0)))
        return out

    def row_expressions(self) -> list:
        return [
            Expression.from_pairs(
                ((GaussRat(q), self.monomials[c]) for c, q in row.items()), self.regime, integrated=True
            )
            for row in self.rows
        ]


@dataclass
class CanonicalForm:
    """Coordinates of an invariant over the non-pivot monomials of its relation span."""

    coordinates: dict
    regime: ProductRegime
    rank: int
    basis_size: int

    @property
    def is_zero(self) -> bool:
        return not self.coordinates

    def as_expression(self) -> Expression:
        return Expression.from_pairs(((v, m) for m, v in self.coordinates.items()), self.regime, integrated=True)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CanonicalForm):
            return NotImplemented
        return self.regime == other.regime and self.coordinates == other.coordinates


def _check_uniform_dimension(e: Expression) -> None:
    dims = {m.dimension() for m, _ in e.items()}
    if len(dims) > 1:
        raise ValueError(f"terms of mixed mass dimension {sorted(dims)}")


def reduce_mod_relations(
    e: Expression,
    abelian: bool = False,
    max_dimension: int = MAX_DIMENSION,
    basis: RelationBasis | None = None,
) -> CanonicalForm:
    """Project ``e`` onto the complement of the IBP/cyclicity span."""
    _check_uniform_dimension(e)
    if basis is None or not all(basis.covers(m) for m, _ in e.items()):
        basis = RelationBasis((m for m, _ in e.items()), e.regime, abelian, max_dimension)
    coords = basis.coordinates(e)
    return CanonicalForm(coords, e.regime, basis.rank, len(basis.monomials))


def equals_mod_relations(e1: Expression, e2: Expression, abelian: bool = False) -> bool:
    if e1.regime != e2.regime:
        raise ValueError("regime mismatch")
    d1 = {m.dimension() for m, _ in e1.items()}
    d2 = {m.dimension() for m, _ in e2.items()}
    if d1 and d2 and d1 != d2:
        raise ValueError(f"dimension mismatch {sorted(d1)} vs {sorted(d2)}")
    return reduce_mod_relations(e1 - e2, abelian).is_zero


def gauge_variation(e: Expression) -> Expression:
    """First-order change under dF = ie[F, chi] (F-form input only)."""
    for mono, _ in e.items():
        for atom in mono.word:
            if atom.kind not in ("F", "f"):
                raise ValueError("gauge variation needs an expression written with F atoms")
            if atom.kind == "F" and atom.derivs:
                raise ValueError("derivatives of F are not covariant; vary D-form instead")

    def vary(value, mono):
        out = []
        for j, atom in enumerate(mono.word):
            if atom.kind != "F":
                continue
            chi = FieldAtom("chi", (), (), atom.shifted)
            pre, post = mono.word[:j], mono.word[j + 1 :]
            m = mono._replace(e_power=mono.e_power + 1)
            out.append((value * I, m._replace(word=pre + (atom, chi) + post)))
            out.append((-value * I, m._replace(word=pre + (chi, atom) + post)))
        return out

    return e.map_monomials(vary)


def field_strength_square(regime: ProductRegime = ProductRegime.COMMUTATIVE) -> Expression:
    """tr F_{mu nu} F_{mu nu} under the integral."""
    f = FieldAtom("F", (0, 1))
    mono = EMPTY_MONOMIAL._replace(word=(f, f))
    return Expression.from_pairs([(GaussRat(Fraction(1)), mono)], regime, integrated=True)


def scalar_multiple(e: Expression, target: Expression, abelian: bool = False) -> Coefficient | None:
    """Find c with e = c * target modulo relations (c may carry e, m2 and pi powers).

    Returns None when no such multiple exists; zero target raises.
    """
    t_expanded = expand_covariant(target)
    e_expanded = expand_covariant(e)
    if t_expanded.is_zero():
        raise ValueError("target reduces to zero")
    t_lead_mono, t_lead_val = t_expanded.items()[-1]
    # shift by the scalar offset of each candidate term and check
    offsets = set()
    for mono, _ in e_expanded.items():
        offsets.add(
            (
                mono.e_power - t_lead_mono.e_power,
                mono.m2_power,
                mono.pi_inv2_power - t_lead_mono.pi_inv2_power,
            )
        )
    if e_expanded.is_zero():
        return Coefficient(GaussRat(), 0, 0, 0)
    basis = RelationBasis(
        [m for m, _ in e_expanded.items()]
        + [_offset(m, off) for off in offsets for m, _ in t_expanded.items()],
        e.regime,
        abelian,
    )
    ce = basis.coordinates(e_expanded)
    for de, dm, dp in sorted(offsets):
        shifted = t_expanded.scale(Coefficient(GaussRat(Fraction(1)), de, dm, dp))
        ct = basis.coordinates(shifted)
        if not ct:
            continue
        lead = max(ct, key=_order_key)
        if lead not in ce:
            continue
        lam = ce[lead] / ct[lead]
        diff = basis.coordinates(e_expanded - shifted.scale(lam))
        if not diff:
            return Coefficient(lam, de, dm, dp)
    return None


def _offset(mono: Monomial, off: tuple) -> Monomial:
    de, dm, dp = off
    return canonical_monomial(
        mono._replace(
            e_power=mono.e_power + de, m2_power=mono.m2_power + dm, pi_inv2_power=mono.pi_inv2_power + dp
        )
    )
