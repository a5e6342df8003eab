"""Exact algebra of field monomials and operator words.

Everything here is exact: coefficients are Gaussian rationals times
monomials in the coupling ``e``, the mass ``m2`` and ``pi**-2``.

Index labels are plain Python values.  A ``str`` is a free index, an
``int`` is a dummy that must occur exactly twice in a finished term.
Operator words may use their own ints; they are renamed to fresh labels
each time the word is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Union

Label = Union[int, str]
Rational = Union[int, Fraction]


class ProductRegime(str, Enum):
    COMMUTATIVE = "commutative"
    MOYAL = "moyal"


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True, slots=True)
class GaussRat:
    """Exact complex number a + b*i with rational parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(value: Union["GaussRat", Rational]) -> "GaussRat":
        if isinstance(value, GaussRat):
            return value
        return GaussRat(Fraction(value), Fraction(0))

    def __add__(self, other: Union["GaussRat", Rational]) -> "GaussRat":
        o = GaussRat.of(other)
        return GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other: Union["GaussRat", Rational]) -> "GaussRat":
        o = GaussRat.of(other)
        return GaussRat(self.re - o.re, self.im - o.im)

    def __neg__(self) -> "GaussRat":
        return GaussRat(-self.re, -self.im)

    def __mul__(self, other: Union["GaussRat", Rational]) -> "GaussRat":
        o = GaussRat.of(other)
        return GaussRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other: Union["GaussRat", Rational]) -> "GaussRat":
        o = GaussRat.of(other)
        norm = o.re * o.re + o.im * o.im
        if norm == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussRat(num.re / norm, num.im / norm)

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def conjugate(self) -> "GaussRat":
        return GaussRat(self.re, -self.im)

    def __str__(self) -> str:
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*i)"


ONE = GaussRat(Fraction(1))
I = GaussRat(Fraction(0), Fraction(1))


@dataclass(frozen=True, slots=True)
class Coefficient:
    """value * e**e_power * m2**m2_power * pi**(-2*pi_inv2_power)."""

    value: GaussRat = ONE
    e_power: int = 0
    m2_power: int = 0
    pi_inv2_power: int = 0

    def __mul__(self, other: "Coefficient") -> "Coefficient":
        return Coefficient(
            self.value * other.value,
            self.e_power + other.e_power,
            self.m2_power + other.m2_power,
            self.pi_inv2_power + other.pi_inv2_power,
        )

    def __str__(self) -> str:
        return format_coefficient(self)


def format_coefficient(c: Coefficient) -> str:
    """Render as e.g. ``e^2/(96*pi^2)`` or ``-i*e*m2/2``."""
    v = c.value
    sign = ""
    num: list = []
    den: list = []
    if v.re and v.im:
        num.append(str(v))
    else:
        r = v.re if v.re else v.im
        if r < 0:
            sign, r = "-", -r
        if r.numerator != 1:
            num.append(str(r.numerator))
        if r.denominator != 1:
            den.append(str(r.denominator))
        if v.im:
            num.append("i")
    for name, power in (("e", c.e_power), ("m2", c.m2_power)):
        if power == 1:
            num.append(name)
        elif power:
            num.append(f"{name}^{power}")
    if c.pi_inv2_power > 0:
        den.append(f"pi^{2 * c.pi_inv2_power}")
    elif c.pi_inv2_power < 0:
        num.append(f"pi^{-2 * c.pi_inv2_power}")
    top = "*".join(num) or "1"
    if not den:
        return sign + top
    bottom = den[0] if len(den) == 1 else "(" + "*".join(den) + ")"
    return f"{sign}{top}/{bottom}"


# ---------------------------------------------------------------------------
# monomials

FIELD_RANK = {"A": 1, "F": 2, "f": 0, "SigmaF": 0, "chi": 0}
OPERATOR_RANK = {"D": 1, "Box": 0}
MASS_DIMENSION = {"A": 1, "F": 2, "f": 0, "SigmaF": 2, "chi": 0, "D": 1, "Box": 2}
CENTRAL_KINDS = frozenset({"f"})


class FieldAtom(NamedTuple):
    """A field (or covariant operator letter) with derivatives on it.

    ``derivs`` is a multiset of partial-derivative indices acting on the
    field; ``shifted`` marks an argument shifted by -Theta p / 2.
    """

    kind: str
    indices: tuple = ()
    derivs: tuple = ()
    shifted: bool = False

    @property
    def is_operator(self) -> bool:
        return self.kind in OPERATOR_RANK

    def dimension(self) -> int:
        return MASS_DIMENSION[self.kind] + len(self.derivs)


class MomentumFactor(NamedTuple):
    open: tuple = ()
    p2: int = 0

    def degree(self) -> int:
        return len(self.open) + 2 * self.p2


class RadialKernel(NamedTuple):
    """u**u_power * prod (u + shift)**(-power) * Lambda0**lambda0_power.

    Denominators with shift 0 are folded into ``u_power``; what remains is
    at most one ``("m2", n)`` factor.
    """

    u_power: int = 0
    denominators: tuple = ()
    lambda0_power: int = 0

    def __mul__(self, other: "RadialKernel") -> "RadialKernel":  # type: ignore[override]
        return make_kernel(
            self.u_power + other.u_power,
            self.denominators + other.denominators,
            self.lambda0_power + other.lambda0_power,
        )

    @property
    def m2_denominator(self) -> int:
        return sum(p for s, p in self.denominators if s == "m2")


def make_kernel(u_power: int = 0, denominators: Iterable = (), lambda0_power: int = 0) -> RadialKernel:
    m2 = 0
    for shift, power in denominators:
        if power < 1:
            raise ValueError(f"denominator power must be positive, got {power}")
        if shift == "0" or shift == 0:
            u_power -= power
        elif shift == "m2":
            m2 += power
        else:
            raise ValueError(f"unknown denominator shift {shift!r}")
    dens = (("m2", m2),) if m2 else ()
    return RadialKernel(u_power, dens, lambda0_power)


class Monomial(NamedTuple):
    """Everything of a term except its Gaussian-rational value."""

    e_power: int
    m2_power: int
    pi_inv2_power: int
    word: tuple
    momentum: MomentumFactor
    kernel: RadialKernel
    metrics: tuple  # pairs of free labels

    def dimension(self) -> int:
        return sum(a.dimension() for a in self.word) + self.momentum.degree()

    def labels(self) -> Iterator[Label]:
        for atom in self.word:
            yield from atom.indices
            yield from atom.derivs
        yield from self.momentum.open
        for pair in self.metrics:
            yield from pair


EMPTY_MONOMIAL = Monomial(0, 0, 0, (), MomentumFactor(), RadialKernel(), ())


@dataclass(frozen=True)
class Term:
    coefficient: Coefficient
    word: tuple
    momentum: MomentumFactor
    kernel: RadialKernel
    metrics: tuple = ()

    @property
    def monomial(self) -> Monomial:
        c = self.coefficient
        return Monomial(c.e_power, c.m2_power, c.pi_inv2_power, self.word, self.momentum, self.kernel, self.metrics)


def label_key(label: Label) -> tuple:
    return (0, label, 0) if isinstance(label, str) else (1, "", label)


def free_labels(mono: Monomial) -> frozenset:
    return frozenset(l for l in mono.labels() if isinstance(l, str))


# ---------------------------------------------------------------------------
# canonical index labelling


def canonical_monomial(mono: Monomial) -> Monomial:
    """Relabel dummies by first occurrence; sort derivative multisets.

    Unordered groups (derivatives on one atom, open momentum indices) are
    ordered by where each dummy's partner sits, which is label-free; two
    dummies with equal partner positions can be swapped without changing
    the term, so the result is a true normal form.
    """
    word = list(mono.word)
    # central atoms go first, keeping their relative order
    if any(a.kind in CENTRAL_KINDS for a in word):
        central = sorted((a for a in word if a.kind in CENTRAL_KINDS), key=lambda a: len(a.derivs))
        word = central + [a for a in word if a.kind not in CENTRAL_KINDS]

    open_idx = list(mono.momentum.open)
    p2 = mono.momentum.p2
    counts: dict = {}
    for l in open_idx:
        if isinstance(l, int):
            counts[l] = counts.get(l, 0) + 1
    paired = {l for l, c in counts.items() if c == 2}
    if paired:
        p2 += len(paired)
        open_idx = [l for l in open_idx if l not in paired]

    # occurrence slots: position descriptors are label independent
    where: dict = {}
    for ai, atom in enumerate(word):
        for k, l in enumerate(atom.indices):
            if isinstance(l, int):
                where.setdefault(l, []).append((ai, 0, k))
        for l in atom.derivs:
            if isinstance(l, int):
                where.setdefault(l, []).append((ai, 1, 0))
    for l in open_idx:
        if isinstance(l, int):
            where.setdefault(l, []).append((len(word), 2, 0))
    for l, slots in where.items():
        if len(slots) != 2:
            raise ValueError(f"dummy index {l} occurs {len(slots)} times")

    new: dict = {}

    def partner(l: int, here: tuple) -> tuple:
        a, b = where[l]
        return b if a == here else a

    def relabel_group(labels: Iterable[Label], here: tuple) -> tuple:
        labels = list(labels)
        frees = sorted(l for l in labels if isinstance(l, str))
        fresh = sorted({l for l in labels if isinstance(l, int) and l not in new}, key=lambda l: partner(l, here))
        for l in fresh:
            new[l] = len(new)
        ints = sorted(new[l] for l in labels if isinstance(l, int))
        return tuple(frees) + tuple(ints)

    out = []
    for ai, atom in enumerate(word):
        idx = []
        for l in atom.indices:
            if isinstance(l, int):
                if l not in new:
                    new[l] = len(new)
                idx.append(new[l])
            else:
                idx.append(l)
        derivs = relabel_group(atom.derivs, (ai, 1, 0))
        out.append(FieldAtom(atom.kind, tuple(idx), derivs, atom.shifted))
    mom = relabel_group(open_idx, (len(word), 2, 0))
    for pair in mono.metrics:
        if not all(isinstance(l, str) for l in pair):
            raise ValueError("metric factors may only carry free indices")
    metrics = tuple(sorted(tuple(sorted(p)) for p in mono.metrics))
    return Monomial(
        mono.e_power, mono.m2_power, mono.pi_inv2_power, tuple(out), MomentumFactor(mom, p2), mono.kernel, metrics
    )


def monomial_sort_key(mono: Monomial) -> tuple:
    word = tuple(
        (a.kind, tuple(label_key(l) for l in a.indices), tuple(label_key(l) for l in a.derivs), a.shifted)
        for a in mono.word
    )
    return (
        mono.e_power,
        mono.m2_power,
        mono.pi_inv2_power,
        len(mono.word),
        word,
        tuple(label_key(l) for l in mono.momentum.open),
        mono.momentum.p2,
        mono.kernel,
        mono.metrics,
    )


# ---------------------------------------------------------------------------
# expressions


class Expression:
    """Canonical multiset of terms.

    ``integrated`` records that the expression stands under a spatial
    integral (and trace); only then may shifted arguments be undone.
    """

    __slots__ = ("_terms", "regime", "integrated")

    def __init__(
        self,
        terms: dict | None = None,
        regime: ProductRegime = ProductRegime.COMMUTATIVE,
        integrated: bool = False,
    ):
        self._terms: dict = terms or {}
        self.regime = ProductRegime(regime)
        self.integrated = integrated

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple],
        regime: ProductRegime = ProductRegime.COMMUTATIVE,
        integrated: bool = False,
    ) -> "Expression":
        """Build from (GaussRat, Monomial) pairs, canonicalizing each."""
        acc: dict = {}
        for value, mono in pairs:
            if not value:
                continue
            key = canonical_monomial(mono)
            acc[key] = acc.get(key, GaussRat()) + value
        return cls({k: v for k, v in acc.items() if v}, regime, integrated)

    @classmethod
    def unit(cls, regime: ProductRegime = ProductRegime.COMMUTATIVE) -> "Expression":
        return cls({EMPTY_MONOMIAL: ONE}, regime)

    @classmethod
    def zero(cls, regime: ProductRegime = ProductRegime.COMMUTATIVE) -> "Expression":
        return cls({}, regime)

    @classmethod
    def from_terms(cls, terms: Iterable[Term], regime=ProductRegime.COMMUTATIVE, integrated=False) -> "Expression":
        return cls.from_pairs(((t.coefficient.value, t.monomial) for t in terms), regime, integrated)

    # -- access
    def items(self) -> list:
        return sorted(self._terms.items(), key=lambda kv: monomial_sort_key(kv[0]))

    def terms(self) -> list:
        out = []
        for mono, value in self.items():
            c = Coefficient(value, mono.e_power, mono.m2_power, mono.pi_inv2_power)
            out.append(Term(c, mono.word, mono.momentum, mono.kernel, mono.metrics))
        return out

    def coefficient_of(self, mono: Monomial) -> GaussRat:
        return self._terms.get(canonical_monomial(mono), GaussRat())

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self.items())

    def is_zero(self) -> bool:
        return not self._terms

    def free_indices(self) -> frozenset:
        sets = {free_labels(m) for m in self._terms}
        if len(sets) > 1:
            raise ValueError("terms disagree on free indices")
        return next(iter(sets), frozenset())

    # -- arithmetic
    def _check(self, other: "Expression") -> None:
        if self.regime != other.regime:
            raise ValueError(f"regime mismatch: {self.regime.value} vs {other.regime.value}")

    def __add__(self, other: "Expression") -> "Expression":
        self._check(other)
        acc = dict(self._terms)
        for k, v in other._terms.items():
            acc[k] = acc.get(k, GaussRat()) + v
        return Expression({k: v for k, v in acc.items() if v}, self.regime, self.integrated and other.integrated)

    def __neg__(self) -> "Expression":
        return Expression({k: -v for k, v in self._terms.items()}, self.regime, self.integrated)

    def __sub__(self, other: "Expression") -> "Expression":
        return self + (-other)

    def scale(self, factor: Union[Coefficient, GaussRat, Rational]) -> "Expression":
        if not isinstance(factor, Coefficient):
            factor = Coefficient(GaussRat.of(factor))
        if not factor.value:
            return Expression.zero(self.regime)
        out = {}
        for m, v in self._terms.items():
            m2 = m._replace(
                e_power=m.e_power + factor.e_power,
                m2_power=m.m2_power + factor.m2_power,
                pi_inv2_power=m.pi_inv2_power + factor.pi_inv2_power,
            )
            out[m2] = v * factor.value
        return Expression(out, self.regime, self.integrated)

    def with_flags(self, regime: ProductRegime | None = None, integrated: bool | None = None) -> "Expression":
        return Expression(
            dict(self._terms),
            self.regime if regime is None else ProductRegime(regime),
            self.integrated if integrated is None else integrated,
        )

    def map_monomials(self, fn) -> "Expression":
        """Apply ``fn(value, mono) -> iterable of (value, mono)`` and re-canonicalize."""
        pairs = []
        for mono, value in self._terms.items():
            pairs.extend(fn(value, mono))
        return Expression.from_pairs(pairs, self.regime, self.integrated)

    def filter(self, keep) -> "Expression":
        return Expression({m: v for m, v in self._terms.items() if keep(m)}, self.regime, self.integrated)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Expression):
            return NotImplemented
        return self.regime == other.regime and self._terms == other._terms

    def __hash__(self) -> int:  # pragma: no cover - expressions are compared, rarely hashed
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        return f"Expression({len(self)} terms, {self.regime.value})"


def under_integral(e: Expression) -> Expression:
    """Mark ``e`` as standing under the spatial integral and trace."""
    return e.with_flags(integrated=True)


# ---------------------------------------------------------------------------
# operator words


@dataclass(frozen=True)
class Partial:
    index: Label


@dataclass(frozen=True)
class MultField:
    atom: FieldAtom


@dataclass(frozen=True)
class ScalarConst:
    coefficient: Coefficient


@dataclass(frozen=True)
class MomContract:
    index: Label


GENERATORS = (Partial, MultField, ScalarConst, MomContract)

OperatorWord = tuple
Operator = tuple  # a sum of OperatorWords


def mult_a(index: Label, shifted: bool = False) -> MultField:
    return MultField(FieldAtom("A", (index,), (), shifted))


def scalar(value: Union[GaussRat, Rational], e: int = 0, m2: int = 0) -> ScalarConst:
    return ScalarConst(Coefficient(GaussRat.of(value), e, m2))


def _word_labels(word: OperatorWord) -> set:
    out = set()
    for g in word:
        if isinstance(g, (Partial, MomContract)):
            out.add(g.index)
        elif isinstance(g, MultField):
            out.update(g.atom.indices)
            out.update(g.atom.derivs)
    return {l for l in out if isinstance(l, int)}


def _validate(op: Operator) -> None:
    for word in op:
        for g in word:
            if not isinstance(g, GENERATORS):
                raise TypeError(f"unsupported generator {g!r}")


def box_words(shifted: bool = False) -> list:
    """Box_A = d.d + ie d o A + ie A o d - e^2 A.A as operator words."""
    return [
        (Partial(-1), Partial(-1)),
        (scalar(I, e=1), Partial(-1), mult_a(-1, shifted)),
        (scalar(I, e=1), mult_a(-1, shifted), Partial(-1)),
        (scalar(-1, e=2), mult_a(-1, shifted), mult_a(-1, shifted)),
    ]


def covariant_words(index: Label, shifted: bool = False) -> list:
    """D_mu = d_mu + ie A_mu."""
    return [(Partial(index),), (scalar(I, e=1), mult_a(index, shifted))]


def klein_gordon_operator(regime: ProductRegime = ProductRegime.COMMUTATIVE) -> Operator:
    """Box_A + 2i p.D_A; in the Moyal regime every field carries the shift marker."""
    shifted = ProductRegime(regime) is ProductRegime.MOYAL
    mom = [
        (scalar(2 * I), MomContract(-1), Partial(-1)),
        (scalar(-2, e=1), MomContract(-1), mult_a(-1, shifted)),
    ]
    return tuple(box_words(shifted) + mom)


def heat_operator(regime: ProductRegime = ProductRegime.COMMUTATIVE) -> Operator:
    """m^2 - Box_A - 2i p.D_A."""
    kg = klein_gordon_operator(regime)
    return (( scalar(1, m2=1),),) + tuple((scalar(-1),) + w for w in kg)


def letter_operator() -> Operator:
    """Box + 2i p.D with Box and D kept as opaque noncommuting letters."""
    return (
        (MultField(FieldAtom("Box")),),
        (scalar(2 * I), MomContract(-1), MultField(FieldAtom("D", (-1,)))),
    )


def _apply_word(word: OperatorWord, value: GaussRat, mono: Monomial) -> list:
    used = [l for l in mono.labels() if isinstance(l, int)]
    base = (max(used) + 1) if used else 0
    local = sorted(_word_labels(word))
    ren = {l: base + k for k, l in enumerate(local)}

    def r(l: Label) -> Label:
        return ren.get(l, l) if isinstance(l, int) else l

    states = [(value, mono)]
    for g in reversed(word):
        nxt = []
        for v, m in states:
            if isinstance(g, ScalarConst):
                c = g.coefficient
                nxt.append(
                    (
                        v * c.value,
                        m._replace(
                            e_power=m.e_power + c.e_power,
                            m2_power=m.m2_power + c.m2_power,
                            pi_inv2_power=m.pi_inv2_power + c.pi_inv2_power,
                        ),
                    )
                )
            elif isinstance(g, MultField):
                a = g.atom
                atom = FieldAtom(a.kind, tuple(r(l) for l in a.indices), tuple(r(l) for l in a.derivs), a.shifted)
                nxt.append((v, m._replace(word=(atom,) + m.word)))
            elif isinstance(g, MomContract):
                mom = m.momentum
                nxt.append((v, m._replace(momentum=MomentumFactor(mom.open + (r(g.index),), mom.p2))))
            else:  # Partial: Leibniz over every field in the word
                idx = r(g.index)
                for j, atom in enumerate(m.word):
                    if atom.is_operator:
                        raise ValueError(f"cannot differentiate through operator letter {atom.kind}")
                    hit = atom._replace(derivs=atom.derivs + (idx,))
                    nxt.append((v, m._replace(word=m.word[:j] + (hit,) + m.word[j + 1 :])))
        states = nxt
    return states


def apply_operator(op: Operator, e: Expression) -> Expression:
    """Apply a sum of operator words to a function-valued expression."""
    _validate(op)
    pairs = []
    for mono, value in e._terms.items():
        for word in op:
            pairs.extend(_apply_word(word, value, mono))
    return Expression.from_pairs(pairs, e.regime, e.integrated)


DEFAULT_MAX_ORDER = 5


def evaluate_on_one(
    op: Operator,
    n: int,
    regime: ProductRegime = ProductRegime.COMMUTATIVE,
    max_order: int = DEFAULT_MAX_ORDER,
) -> Expression:
    """Normal-ordered expansion of op**n applied to the constant function 1."""
    if n < 0:
        raise ValueError("order must be non-negative")
    if n > max_order:
        raise ValueError(f"order {n} exceeds configured bound {max_order}")
    _validate(op)
    e = Expression.unit(regime)
    for _ in range(n):
        e = apply_operator(op, e)
    return e


def multiply(e1: Expression, e2: Expression) -> Expression:
    """Product e1 * e2; words concatenate in order (star order in the Moyal regime)."""
    e1._check(e2)
    f1 = set().union(*(free_labels(m) for m in e1._terms)) if len(e1) else set()
    f2 = set().union(*(free_labels(m) for m in e2._terms)) if len(e2) else set()
    if f1 & f2:
        raise ValueError(f"index collision on free labels {sorted(f1 & f2)}")
    pairs = []
    for m1, v1 in e1._terms.items():
        used = [l for l in m1.labels() if isinstance(l, int)]
        base = (max(used) + 1) if used else 0
        for m2, v2 in e2._terms.items():
            m2s = shift_dummies(m2, base)
            pairs.append(
                (
                    v1 * v2,
                    Monomial(
                        m1.e_power + m2s.e_power,
                        m1.m2_power + m2s.m2_power,
                        m1.pi_inv2_power + m2s.pi_inv2_power,
                        m1.word + m2s.word,
                        MomentumFactor(m1.momentum.open + m2s.momentum.open, m1.momentum.p2 + m2s.momentum.p2),
                        m1.kernel * m2s.kernel,
                        m1.metrics + m2s.metrics,
                    ),
                )
            )
    return Expression.from_pairs(pairs, e1.regime, e1.integrated and e2.integrated)


def shift_dummies(mono: Monomial, offset: int) -> Monomial:
    return relabel(mono, lambda l: l + offset if isinstance(l, int) else l)


def relabel(mono: Monomial, fn) -> Monomial:
    word = tuple(
        FieldAtom(a.kind, tuple(fn(l) for l in a.indices), tuple(fn(l) for l in a.derivs), a.shifted) for a in mono.word
    )
    mom = MomentumFactor(tuple(fn(l) for l in mono.momentum.open), mono.momentum.p2)
    metrics = tuple(tuple(fn(l) for l in p) for p in mono.metrics)
    return mono._replace(word=word, momentum=mom, metrics=metrics)


def moyal_shift_normalize(e: Expression) -> Expression:
    """Drop the x -> x - Theta p / 2 argument shift from every field.

    Only legal under the spatial integral: translating the integration
    variable removes the shift, pointwise it is false.
    """
    if not e.integrated:
        raise ValueError("shift removal needs the spatial-integral context; call under_integral first")

    def strip(value, mono):
        return [(value, mono._replace(word=tuple(a._replace(shifted=False) for a in mono.word)))]

    return e.map_monomials(strip)


def has_shift_markers(e: Expression) -> bool:
    return any(a.shifted for m in e._terms for a in m.word)


def canonicalize(e: Expression) -> Expression:
    """Re-run labelling, merging and zero pruning (idempotent)."""
    return Expression.from_pairs(((v, m) for m, v in e._terms.items()), e.regime, e.integrated)


def field_word_is_order_preserved(before: tuple, after: tuple) -> bool:
    """True when the non-central atoms of ``after`` keep the kinds/order of ``before``."""
    strip = lambda w: [a.kind for a in w if a.kind not in CENTRAL_KINDS]
    return strip(before) == strip(after)
