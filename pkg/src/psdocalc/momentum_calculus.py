"""Angular moments on the unit 3-sphere, radial large-cutoff asymptotics
and delta-derivative moments; assembly of divergence profiles."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterator

from .term_algebra import (
    Coefficient,
    Expression,
    GaussRat,
    Monomial,
    MomentumFactor,
    RadialKernel,
    has_shift_markers,
    make_kernel,
    relabel,
)

DEFAULT_MAX_MOMENT = 8


def angular_coefficient(k: int) -> Fraction:
    """Sphere average of p^{mu_1}..p^{mu_2k} per metric pairing, in units of p^{2k}."""
    return Fraction(1, 2**k * factorial(k + 1))


def pairings(items: tuple) -> Iterator[list]:
    """All perfect matchings of ``items`` ((2k-1)!! of them)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for j, other in enumerate(rest):
        remaining = rest[:j] + rest[j + 1 :]
        for tail in pairings(remaining):
            yield [(first, other)] + tail


def _contract(mono: Monomial, matching: list) -> Monomial:
    ren: dict = {}
    metrics = list(mono.metrics)
    for a, b in matching:
        if isinstance(b, int):
            ren[b] = a
        elif isinstance(a, int):
            ren[a] = b
        else:
            metrics.append((a, b))
    out = relabel(mono._replace(momentum=MomentumFactor((), mono.momentum.p2)), lambda l: ren.get(l, l))
    return out._replace(metrics=tuple(metrics))


def angular_average(e: Expression, max_moment: int = DEFAULT_MAX_MOMENT) -> Expression:
    """Replace every open momentum tuple by its unit-sphere average.

    Odd tuples vanish; an even tuple of length 2k becomes
    p^{2k} * c_k * (sum over metric pairings).
    """
    if has_shift_markers(e):
        raise ValueError("fields still depend on p through shifted arguments; undo the shift first")
    pairs = []
    for mono, value in e.items():
        idx = mono.momentum.open
        if len(idx) % 2:
            continue
        if len(idx) > max_moment:
            raise ValueError(f"moment of order {len(idx)} exceeds configured maximum {max_moment}")
        k = len(idx) // 2
        weight = value * angular_coefficient(k)
        for matching in pairings(idx):
            m = _contract(mono, matching)
            pairs.append((weight, m._replace(momentum=MomentumFactor((), m.momentum.p2 + k))))
    return Expression.from_pairs(pairs, e.regime, e.integrated)


# ---------------------------------------------------------------------------
# radial integrals


def s_integral(n: int) -> tuple:
    """Closed form of int_0^1 s^(n-1) / (1 + s a)^(n+1) ds = 1 / (n (1+a)^n).

    With 1 + a = (u + m^2) / Lambda0^2 this is returned as the pair
    (1/n, kernel (u+m^2)^-n * Lambda0^(2n)).
    """
    if n < 1:
        raise ValueError("s-integral needs n >= 1")
    return Fraction(1, n), make_kernel(0, (("m2", n),), 2 * n)


def s_integral_at(n: int, a: Fraction) -> Fraction:
    """The same closed form evaluated at a rational a > -1."""
    if n < 1:
        raise ValueError("s-integral needs n >= 1")
    return Fraction(1, n) / (1 + Fraction(a)) ** n


def radial_expansion(kernel: RadialKernel, extra_u: int = 0, lowest: int = -1) -> list:
    """Large-u expansion of u^(a) (u+m^2)^(-n) down to u^lowest.

    Returns (u_exponent, m2_power, coefficient) triples.
    """
    n = kernel.m2_denominator
    a = kernel.u_power + extra_u
    out = []
    j = 0
    while a - n - j >= lowest:
        c = (-1) ** j * comb(n + j - 1, j) if n else (1 if j == 0 else 0)
        if c:
            out.append((a - n - j, j, Fraction(c)))
        if not n:
            break
        j += 1
    return out


def log_coefficient(kernel: RadialKernel, extra_u: int = 0) -> dict:
    """m^2-graded coefficient of log(Lambda) in int_1^{Lambda^2} du/2 k(u).

    The u^-1 term of the expansion integrates to (1/2) log(Lambda^2) = log(Lambda).
    """
    if any(p < 0 for _, p in kernel.denominators):
        raise ValueError("kernel has no large-u expansion")
    return {m2: c for exp, m2, c in radial_expansion(kernel, extra_u) if exp == -1}


def power_coefficients(kernel: RadialKernel, extra_u: int = 0) -> dict:
    """Coefficients of Lambda^(2j+2) for j >= 0, graded by m^2 power: {(j, m2): c}."""
    out = {}
    for exp, m2, c in radial_expansion(kernel, extra_u, lowest=0):
        out[(exp, m2)] = c / (2 * (exp + 1))
    return out


@dataclass(frozen=True)
class DeltaMomentSpec:
    """int du g(u) delta^(k)(Lambda^2 - u) with g = u^w [* log((u+m^2)/Lambda0^2)]."""

    derivative_order: int
    u_power: int
    with_log: bool = True


MAX_DELTA_ORDER = 4
MAX_DELTA_POWER = 3


def delta_moment(spec: DeltaMomentSpec) -> dict:
    """{j: c}: the result contains c * Lambda^(2j) * log(Lambda) for each j >= 0.

    Uses d^k/du^k delta(L^2-u) = (-1)^k delta^(k)(L^2-u), so k integrations
    by parts give g^(k)(Lambda^2).  Only the k derivatives landing on u^w
    keep the logarithm; log(Lambda^2 + m^2) = 2 log(Lambda) + power series.
    """
    k, w = spec.derivative_order, spec.u_power
    if not spec.with_log or k > w:
        return {}
    return {w - k: Fraction(2 * factorial(w), factorial(w - k))}


def delta_reduce(spec: DeltaMomentSpec, bounded: bool = True) -> Fraction:
    """Coefficient of log(Lambda) (no power of Lambda) from one delta moment."""
    if bounded and (spec.derivative_order > MAX_DELTA_ORDER or spec.u_power > MAX_DELTA_POWER):
        raise ValueError("delta moment outside the configured (k <= 4, w <= 3) grid")
    return delta_moment(spec).get(0, Fraction(0))


def delta_weight(spec: DeltaMomentSpec) -> Fraction:
    """Factor w!/(w-k)! multiplying u^(w-k) log(...) after the integrations by parts."""
    k, w = spec.derivative_order, spec.u_power
    return Fraction(factorial(w), factorial(w - k)) if k <= w else Fraction(0)


# ---------------------------------------------------------------------------
# profiles


@dataclass
class DivergenceProfile:
    """Coefficients of Lambda^2, Lambda and log(Lambda) as field expressions."""

    lambda2: Expression
    lambda1: Expression
    log: Expression
    finite_flag: bool = True
    reference_scale_power: dict = field(default_factory=lambda: {"lambda2": 0, "lambda1": 0, "log": 0})
    extra: dict = field(default_factory=dict)

    def __add__(self, other: "DivergenceProfile") -> "DivergenceProfile":
        extra = dict(self.extra)
        for k, v in other.extra.items():
            extra[k] = extra[k] + v if k in extra else v
        return DivergenceProfile(
            self.lambda2 + other.lambda2,
            self.lambda1 + other.lambda1,
            self.log + other.log,
            self.finite_flag or other.finite_flag,
            dict(self.reference_scale_power),
            extra,
        )

    def scale(self, c) -> "DivergenceProfile":
        return DivergenceProfile(
            self.lambda2.scale(c),
            self.lambda1.scale(c),
            self.log.scale(c),
            self.finite_flag,
            dict(self.reference_scale_power),
            {k: v.scale(c) for k, v in self.extra.items()},
        )


def empty_profile(regime) -> DivergenceProfile:
    z = Expression.zero(regime)
    return DivergenceProfile(z, z, z)


def _strip_p(mono: Monomial, m2_extra: int) -> Monomial:
    return mono._replace(
        m2_power=mono.m2_power + m2_extra, momentum=MomentumFactor(), kernel=RadialKernel()
    )


def assemble_profile(e: Expression, delta_order: int | None = None) -> DivergenceProfile:
    """Bin every term by its Lambda behaviour.

    Terms must be p-integrated down to p^2 powers and radial kernels.  In
    the resolvent route the kernel is expanded at large u; with
    ``delta_order`` set the kernel multiplies delta^(k)(Lambda^2 - u) and a
    log((u+m^2)/Lambda0^2), handled by :func:`delta_moment`.
    """
    lam2, log, power_log = [], [], []
    for mono, value in e.items():
        if mono.momentum.open:
            raise ValueError("open momentum indices left; run angular_average first")
        kernel = mono.kernel
        u_extra = mono.momentum.p2
        if delta_order is not None:
            if kernel.denominators:
                raise ValueError("delta route expects pure u powers")
            spec = DeltaMomentSpec(delta_order, kernel.u_power + u_extra, True)
            for j, c in delta_moment(spec).items():
                target = log if j == 0 else power_log
                target.append((value * c, _strip_p(mono, 0)._replace(kernel=RadialKernel(j))))
            continue
        for m2, c in log_coefficient(kernel, u_extra).items():
            if kernel.lambda0_power:
                raise ArithmeticError(
                    f"reference scale does not cancel in the log coefficient (Lambda0^{kernel.lambda0_power})"
                )
            log.append((value * c, _strip_p(mono, m2)))
        for (j, m2), c in power_coefficients(kernel, u_extra).items():
            if j > 0:
                raise ValueError("growth beyond Lambda^2 is outside the profile")
            lam2.append((value * c, _strip_p(mono, m2)))
    regime, integ = e.regime, e.integrated
    profile = DivergenceProfile(
        Expression.from_pairs(lam2, regime, integ),
        Expression.zero(regime),
        Expression.from_pairs(log, regime, integ),
    )
    if power_log:
        profile.extra["lambda_power_log"] = Expression.from_pairs(power_log, regime, integ)
    return profile


def attach_radial(e: Expression, coefficient: Coefficient, kernel: RadialKernel) -> Expression:
    """Multiply every term by a constant and a radial kernel."""

    def attach(value, mono):
        c = coefficient
        return [
            (
                value * c.value,
                mono._replace(
                    e_power=mono.e_power + c.e_power,
                    m2_power=mono.m2_power + c.m2_power,
                    pi_inv2_power=mono.pi_inv2_power + c.pi_inv2_power,
                    kernel=mono.kernel * kernel,
                ),
            )
        ]

    return e.map_monomials(attach)


def momentum_degree_split(e: Expression) -> dict:
    """Group terms by p^2 power: {k: Expression with the p^2 power removed}."""
    groups: dict = {}
    for mono, value in e.items():
        k = mono.momentum.p2
        groups.setdefault(k, []).append((value, mono._replace(momentum=MomentumFactor())))
    return {k: Expression.from_pairs(v, e.regime, e.integrated) for k, v in sorted(groups.items())}


MEASURE = Coefficient(GaussRat(Fraction(1, 8)), 0, 0, 1)
"""d^4p/(2pi)^4 = (1/(8 pi^2)) * (du/2) * u * <.> with u = p^2."""
