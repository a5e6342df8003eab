"""Canonical JSON AST for expressions (lossless, unlike the LaTeX output)."""

from __future__ import annotations

from fractions import Fraction

from ..term_algebra import (
    Expression,
    FieldAtom,
    GaussRat,
    Monomial,
    MomentumFactor,
    ProductRegime,
    RadialKernel,
)

AST_VERSION = 1


def _label_out(l):
    return l if isinstance(l, int) else str(l)


def _label_in(l):
    if isinstance(l, bool) or not isinstance(l, (int, str)):
        raise ValueError(f"bad index label {l!r}")
    return l


def expression_to_json(e: Expression) -> dict:
    terms = []
    for mono, value in e.items():
        terms.append(
            {
                "re": str(value.re),
                "im": str(value.im),
                "e": mono.e_power,
                "m2": mono.m2_power,
                "pi_inv2": mono.pi_inv2_power,
                "word": [
                    {
                        "kind": a.kind,
                        "indices": [_label_out(l) for l in a.indices],
                        "derivs": [_label_out(l) for l in a.derivs],
                        "shifted": a.shifted,
                    }
                    for a in mono.word
                ],
                "momentum": {"open": [_label_out(l) for l in mono.momentum.open], "p2": mono.momentum.p2},
                "kernel": {
                    "u": mono.kernel.u_power,
                    "m2_denominator": mono.kernel.m2_denominator,
                    "lambda0": mono.kernel.lambda0_power,
                },
                "metrics": [list(p) for p in mono.metrics],
            }
        )
    return {"version": AST_VERSION, "regime": e.regime.value, "integrated": e.integrated, "terms": terms}


def expression_from_json(data: dict) -> Expression:
    if data.get("version") != AST_VERSION:
        raise ValueError(f"unsupported AST version {data.get('version')!r}")
    pairs = []
    for t in data["terms"]:
        word = tuple(
            FieldAtom(
                a["kind"],
                tuple(_label_in(l) for l in a["indices"]),
                tuple(_label_in(l) for l in a["derivs"]),
                bool(a["shifted"]),
            )
            for a in t["word"]
        )
        k = t["kernel"]
        den = k["m2_denominator"]
        kernel = RadialKernel(k["u"], (("m2", den),) if den else (), k["lambda0"])
        mom = MomentumFactor(tuple(_label_in(l) for l in t["momentum"]["open"]), t["momentum"]["p2"])
        mono = Monomial(t["e"], t["m2"], t["pi_inv2"], word, mom, kernel, tuple(tuple(p) for p in t["metrics"]))
        pairs.append((GaussRat(Fraction(t["re"]), Fraction(t["im"])), mono))
    return Expression.from_pairs(pairs, ProductRegime(data["regime"]), bool(data["integrated"]))
