"""Text form of expressions: recursive-descent parser and canonical printer.

    expr   := term (('+' | '-') term)*
    term   := coeff? factor* (at least one of the two)
    coeff  := '-'? rational ('*' 'i')? ('*' 'e^' int)? ('*' 'm2^' int)? ('*' 'pi^' int)?
            | 'i' ...
    factor := 'd[' idx ']' factor | 'A' '~'? '[' idx ']' | 'F' '~'? '[' idx ',' idx ']'
            | 'D[' idx ']' | 'Box' | 'p[' idx ']' | 'f' | 'SigmaF' | 'chi'
            | 'g[' idx ',' idx ']' | 'u^' int | 'R[' int ']' | 'L0^' int

An index used twice in a term is a contraction.  ``pi^k`` takes even k
(``pi^-2`` is 1/pi^2).  ``R[n]`` is (u+m2)^-n and ``u``/``L0`` carry the
radial variable and the reference scale.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ..term_algebra import (
    EMPTY_MONOMIAL,
    Expression,
    FieldAtom,
    GaussRat,
    Monomial,
    MomentumFactor,
    ProductRegime,
    RadialKernel,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<sym>[\[\],*^/+\-~])
    """,
    re.VERBOSE,
)

ATOM_KINDS = {"A": 1, "F": 2, "SigmaF": 0, "chi": 0, "f": 0}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(src: str) -> list:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind != "ws":
                tokens.append(Token(kind, text, line, col))
            col += len(text)
        pos = m.end()
    tokens.append(Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None):
        t = tok or self.tok
        raise ParseError(message, t.line, t.column)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("sym", "ident") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.tok
        if not self.accept(text):
            self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return t

    def integer(self, signed: bool = False) -> int:
        sign = 1
        if signed and self.accept("-"):
            sign = -1
        t = self.tok
        if t.kind != "num":
            self.error("expected an integer")
        self.i += 1
        return sign * int(t.text)

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident":
            self.error("expected an index name")
        self.i += 1
        return t

    # -- grammar
    def expression(self) -> list:
        terms = []
        sign = 1
        if self.accept("-"):
            sign = -1
        elif self.tok.kind == "end":
            self.error("empty expression")
        while True:
            terms.append(self.term(sign))
            if self.accept("+"):
                sign = 1
            elif self.accept("-"):
                sign = -1
            elif self.tok.kind == "end":
                return terms
            else:
                self.error(f"unexpected {self.tok.text!r}")

    def coefficient(self) -> tuple:
        """Returns (GaussRat, e, m2, pi_inv2, present)."""
        value = GaussRat(Fraction(1))
        e = m2 = pi = 0
        present = False
        if self.tok.kind == "num":
            num = self.integer()
            den = 1
            if self.accept("/"):
                den = self.integer()
                if den == 0:
                    self.error("zero denominator")
            value = GaussRat(Fraction(num, den))
            present = True
            if not self._star_follows():
                return value, e, m2, pi, present
            self.expect("*")
        elif not (self.tok.kind == "ident" and self.tok.text in ("i", "e", "m2", "pi")):
            return value, e, m2, pi, present
        while True:
            t = self.tok
            if self.accept("i"):
                value = value * GaussRat(Fraction(0), Fraction(1))
            elif self.accept("e"):
                e += self._power()
            elif self.accept("m2"):
                m2 += self._power()
            elif self.accept("pi"):
                self.expect("^")
                k = self.integer(signed=True)
                if k % 2:
                    self.error("pi powers must be even", t)
                pi -= k // 2
            else:
                self.error("expected i, e, m2 or pi in coefficient")
            present = True
            if not self._star_follows():
                return value, e, m2, pi, present
            self.expect("*")

    def _power(self) -> int:
        if self.accept("^"):
            return self.integer(signed=True)
        return 1

    def _star_follows(self) -> bool:
        return self.tok.kind == "sym" and self.tok.text == "*"

    def term(self, sign: int):
        start = self.tok
        value, e, m2, pi, present = self.coefficient()
        factors = []
        while self.tok.kind == "ident":
            factors.append(self.factor())
        if not present and not factors:
            self.error("expected a term", start)
        return sign, value, e, m2, pi, factors, start

    def index_list(self, count: int) -> list:
        self.expect("[")
        out = [self.ident()]
        for _ in range(count - 1):
            self.expect(",")
            out.append(self.ident())
        self.expect("]")
        return out

    def factor(self) -> tuple:
        t = self.tok
        name = t.text
        if name == "d":
            self.i += 1
            (idx,) = self.index_list(1)
            inner = self.factor()
            if inner[0] != "atom" or inner[1] in ("D", "Box"):
                self.error("d[...] must act on a field atom", t)
            kind, base, shifted, indices, derivs = inner[1:]
            return ("atom", kind, base, shifted, indices, (idx,) + derivs)
        self.i += 1
        if name in ATOM_KINDS:
            shifted = self.accept("~")
            rank = ATOM_KINDS[name]
            indices = tuple(self.index_list(rank)) if rank else ()
            return ("atom", name, name, shifted, indices, ())
        if name == "D":
            return ("atom", "D", "D", self.accept("~"), tuple(self.index_list(1)), ())
        if name == "Box":
            return ("atom", "Box", "Box", self.accept("~"), (), ())
        if name == "p":
            return ("p", self.index_list(1)[0])
        if name == "g":
            return ("g", tuple(self.index_list(2)))
        if name == "u":
            self.expect("^")
            return ("u", self.integer(signed=True))
        if name == "L0":
            self.expect("^")
            return ("L0", self.integer(signed=True))
        if name == "R":
            self.expect("[")
            n = self.integer()
            self.expect("]")
            return ("R", n)
        self.error(f"unknown factor {name!r}", t)


def _build_monomial(sign, value, e, m2, pi, factors, start) -> tuple:
    counts: dict = {}
    for f in factors:
        for idx in _factor_indices(f):
            counts.setdefault(idx.text, []).append(idx)
    for name, uses in counts.items():
        if len(uses) > 2:
            t = uses[2]
            raise ParseError(f"index {name!r} used {len(uses)} times", t.line, t.column)
    dummies = {name: k for k, name in enumerate(n for n, u in counts.items() if len(u) == 2)}

    def label(t: Token):
        return dummies.get(t.text, t.text)

    word, open_idx, metrics = [], [], []
    u_power = lambda0 = den = 0
    for f in factors:
        tag = f[0]
        if tag == "atom":
            _, kind, _, shifted, indices, derivs = f
            word.append(FieldAtom(kind, tuple(label(x) for x in indices), tuple(label(x) for x in derivs), shifted))
        elif tag == "p":
            open_idx.append(label(f[1]))
        elif tag == "g":
            a, b = (label(x) for x in f[1])
            metrics.append((a, b))
        elif tag == "u":
            u_power += f[1]
        elif tag == "L0":
            lambda0 += f[1]
        elif tag == "R":
            den += f[1]
    # metrics with a dummy merge into the dummy's other occurrence
    resolved = []
    rename: dict = {}

    def fix(l):
        while l in rename:
            l = rename[l]
        return l

    for a, b in metrics:
        a, b = fix(a), fix(b)
        if isinstance(a, int) and isinstance(b, int) and a == b:
            value = value * 4
        elif isinstance(a, int):
            rename[a] = b
        elif isinstance(b, int):
            rename[b] = a
        else:
            resolved.append((a, b))
    if rename:
        word = [FieldAtom(x.kind, tuple(map(fix, x.indices)), tuple(map(fix, x.derivs)), x.shifted) for x in word]
        open_idx = [fix(l) for l in open_idx]
    kernel = RadialKernel(u_power, (("m2", den),) if den else (), lambda0)
    mono = Monomial(e, m2, pi, tuple(word), MomentumFactor(tuple(open_idx), 0), kernel, tuple(resolved))
    return value * sign, mono


def _factor_indices(f) -> list:
    if f[0] == "atom":
        return list(f[4]) + list(f[5])
    if f[0] == "p":
        return [f[1]]
    if f[0] == "g":
        return list(f[1])
    return []


def parse_expression(
    src: str, regime: ProductRegime | str = ProductRegime.COMMUTATIVE, integrated: bool = False
) -> Expression:
    """Parse text into a canonical Expression."""
    parser = _Parser(src)
    raw = parser.expression()
    pairs = []
    for term in raw:
        start = term[-1]
        try:
            pairs.append(_build_monomial(*term))
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), start.line, start.column) from exc
    try:
        return Expression.from_pairs(pairs, ProductRegime(regime), integrated)
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1) from exc


# ---------------------------------------------------------------------------
# printing


def format_label(label) -> str:
    return f"_{label}" if isinstance(label, int) else str(label)


def format_atom(atom: FieldAtom) -> str:
    parts = [f"d[{format_label(d)}]" for d in atom.derivs]
    mark = "~" if atom.shifted else ""
    if atom.kind == "Box":
        core = "Box" + mark
    elif atom.indices:
        core = f"{atom.kind}{mark}[{','.join(format_label(l) for l in atom.indices)}]"
    else:
        core = atom.kind + mark
    return " ".join(parts + [core])


def _format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _format_scalars(mono: Monomial) -> list:
    out = []
    if mono.e_power:
        out.append("e" if mono.e_power == 1 else f"e^{mono.e_power}")
    if mono.m2_power:
        out.append("m2" if mono.m2_power == 1 else f"m2^{mono.m2_power}")
    if mono.pi_inv2_power:
        out.append(f"pi^{-2 * mono.pi_inv2_power}")
    return out


def format_monomial_body(mono: Monomial) -> str:
    """Factors of a monomial without its numeric coefficient."""
    parts = [format_atom(a) for a in mono.word]
    parts += [f"p[{format_label(l)}]" for l in mono.momentum.open]
    base = len([l for l in mono.labels() if isinstance(l, int)])
    for k in range(mono.momentum.p2):
        lab = f"_{base // 2 + k}"
        parts += [f"p[{lab}]", f"p[{lab}]"]
    parts += [f"g[{format_label(a)},{format_label(b)}]" for a, b in mono.metrics]
    k = mono.kernel
    if k.u_power:
        parts.append(f"u^{k.u_power}")
    if k.m2_denominator:
        parts.append(f"R[{k.m2_denominator}]")
    if k.lambda0_power:
        parts.append(f"L0^{k.lambda0_power}")
    return " ".join(parts)


def _format_term(q: Fraction, imaginary: bool, mono: Monomial, first: bool) -> str:
    sign = "-" if q < 0 else "+"
    mag = abs(q)
    coeff = []
    scalars = _format_scalars(mono)
    body = format_monomial_body(mono)
    if mag != 1 or not (imaginary or scalars or body):
        coeff.append(_format_rational(mag))
    if imaginary:
        coeff.append("i")
    coeff += scalars
    text = " ".join(x for x in ("*".join(coeff), body) if x)
    if first:
        return text if sign == "+" else "-" + text
    return f" {sign} {text}"


def format_expression(e: Expression) -> str:
    """Canonical text; parse(format(e)) == e."""
    if e.is_zero():
        return "0"
    out = []
    for mono, value in e.items():
        if value.re:
            out.append(_format_term(value.re, False, mono, not out))
        if value.im:
            out.append(_format_term(value.im, True, mono, not out))
    return "".join(out)


_LATEX_KIND = {"Box": r"\Box", "SigmaF": r"\sigma\cdot F", "chi": r"\chi", "f": "f"}


def _latex_label(label) -> str:
    return f"a_{{{label}}}" if isinstance(label, int) else f"\\{label}" if label in _GREEK else str(label)


_GREEK = {"mu", "nu", "rho", "sigma", "alpha", "beta", "lambda", "kappa", "tau"}


def format_latex(e: Expression) -> str:
    """LaTeX rendering for reports (not parseable)."""
    if e.is_zero():
        return "0"
    pieces = []
    for mono, value in e.items():
        coeff = _latex_coefficient(value, mono)
        atoms = []
        for a in mono.word:
            d = "".join(f"\\partial_{{{_latex_label(l)}}}" for l in a.derivs)
            kind = _LATEX_KIND.get(a.kind, a.kind)
            if a.kind == "D":
                kind = "D"
            sub = "".join(_latex_label(l) for l in a.indices)
            core = f"{kind}_{{{sub}}}" if sub else kind
            if a.shifted:
                core = f"\\tilde{{{core}}}"
            atoms.append(f"({d}{core})" if d else core)
        mom = "".join(f"p^{{{_latex_label(l)}}}" for l in mono.momentum.open)
        if mono.momentum.p2:
            mom += f"(p^2)^{{{mono.momentum.p2}}}" if mono.momentum.p2 > 1 else "p^2"
        extra = [f"\\delta_{{{_latex_label(a)}{_latex_label(b)}}}" for a, b in mono.metrics]
        k = mono.kernel
        if k.u_power:
            extra.append("u" if k.u_power == 1 else f"u^{{{k.u_power}}}")
        if k.m2_denominator:
            extra.append(f"(u+m^2)^{{-{k.m2_denominator}}}")
        if k.lambda0_power:
            extra.append(f"\\Lambda_0^{{{k.lambda0_power}}}")
        body = " ".join(atoms + ([mom] if mom else []) + extra)
        sep = "\\," if coeff not in ("", "-") else ""
        if atoms:
            pieces.append(f"{coeff}{sep}\\mathrm{{tr}}\\,{body}")
        elif body:
            pieces.append(f"{coeff}{sep}{body}")
        else:
            pieces.append(coeff if coeff not in ("", "-") else coeff + "1")
    return " + ".join(pieces).replace("+ -", "- ")


def _latex_coefficient(value: GaussRat, mono: Monomial) -> str:
    def frac(q: Fraction) -> str:
        sign = "-" if q < 0 else ""
        q = abs(q)
        return sign + (str(q.numerator) if q.denominator == 1 else f"\\frac{{{q.numerator}}}{{{q.denominator}}}")

    if value.re and value.im:
        num = f"({frac(value.re)}+{frac(value.im)}i)"
    elif value.im:
        num = f"{frac(value.im)}i"
    else:
        num = frac(value.re)
    num = {"1": "", "-1": "-", "1i": "i", "-1i": "-i"}.get(num, num)
    extra = ""
    if mono.e_power:
        extra += f"e^{{{mono.e_power}}}"
    if mono.m2_power:
        extra += f"m^{{{2 * mono.m2_power}}}"
    if mono.pi_inv2_power:
        extra += f"\\pi^{{{-2 * mono.pi_inv2_power}}}"
    return num + extra


def expression_from_text_or_empty(src: str, **kw) -> Expression:
    return Expression.zero(kw.get("regime", ProductRegime.COMMUTATIVE)) if src.strip() == "0" else parse_expression(src, **kw)


__all__ = [
    "ParseError",
    "parse_expression",
    "format_expression",
    "format_latex",
    "format_atom",
    "format_monomial_body",
    "EMPTY_MONOMIAL",
]
