"""End-to-end pipelines for the log-divergent coefficients and the
heat-kernel comparison."""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from math import factorial

from .covariant_reduction import (
    CanonicalForm,
    RelationBasis,
    expand_covariant,
    field_strength_square,
    gauge_variation,
    reduce_mod_relations,
    scalar_multiple,
)
from .gamma_algebra import (
    gamma_trace,
    momentum_degree,
    sigma_f_identities,
    spin_trace_sigma,
    symbol_compose,
)
from .momentum_calculus import (
    MEASURE,
    DeltaMomentSpec,
    DivergenceProfile,
    angular_average,
    assemble_profile,
    attach_radial,
    delta_weight,
    empty_profile,
    momentum_degree_split,
    s_integral,
)
from .term_algebra import (
    EMPTY_MONOMIAL,
    Coefficient,
    Expression,
    FieldAtom,
    GaussRat,
    MomContract,
    ProductRegime,
    evaluate_on_one,
    format_coefficient,
    heat_operator,
    klein_gordon_operator,
    letter_operator,
    make_kernel,
    moyal_shift_normalize,
    multiply,
    under_integral,
)


class DerivationCase(str, Enum):
    BOSON = "boson-clog"
    FERMION = "fermion-clog"
    GAUGE_INVARIANT = "gauge-invariant-clog"
    HEAT_KERNEL = "heat-kernel-a4"
    MOYAL = "moyal-clog"


DEFAULT_ORDERS = {
    DerivationCase.BOSON: 4,
    DerivationCase.FERMION: 4,
    DerivationCase.GAUGE_INVARIANT: 5,
    DerivationCase.HEAT_KERNEL: 4,
    DerivationCase.MOYAL: 4,
}
REQUIRED_ORDERS = {
    DerivationCase.BOSON: 4,
    DerivationCase.FERMION: 4,
    DerivationCase.GAUGE_INVARIANT: 4,
    DerivationCase.HEAT_KERNEL: 4,
    DerivationCase.MOYAL: 4,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Orders and bounds used by a derivation; serialized into every report."""

    order: int | None = None
    compose_order: int = 2
    max_dimension: int = 4
    regime: str | None = None
    threads: int | None = None

    def order_for(self, case: DerivationCase) -> int:
        return DEFAULT_ORDERS[case] if self.order is None else self.order

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Stage:
    name: str
    digest: str
    terms: int
    detail: dict = field(default_factory=dict)


@dataclass
class DerivationReport:
    case: DerivationCase
    config: dict
    stages: list
    profile: DivergenceProfile | None
    final: CanonicalForm | None
    target: CanonicalForm | None
    verdict: str
    coefficient: str
    target_coefficient: str
    notes: list = field(default_factory=list)
    premises: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    ratio: str | None = None
    final_expression: Expression | None = None
    target_expression: Expression | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# helpers


def expression_digest(e: Expression) -> str:
    h = hashlib.sha256()
    h.update(e.regime.value.encode())
    for mono, value in e.items():
        h.update(f"{value.re}|{value.im}|{mono!r}\n".encode())
    return h.hexdigest()


def thread_count(config: PipelineConfig) -> int:
    if config.threads:
        return max(1, config.threads)
    env = os.environ.get("PSDOCALC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"PSDOCALC_THREADS must be an integer, got {env!r}") from None
    return 1


def parallel_map(fn, items, threads: int) -> list:
    """Order-preserving map; results are identical for any thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _stage(stages: list, name: str, e: Expression, **detail) -> None:
    stages.append(Stage(name, expression_digest(e), len(e), {k: str(v) for k, v in detail.items()}))


def _run_stage(name: str, fn, *args):
    try:
        return fn(*args)
    except (ValueError, ArithmeticError, KeyError) as exc:
        raise StageError(name, exc) from exc


def coefficient_of_traces(n_e: int, num: int, den: int, n_pi: int = 1) -> Coefficient:
    return Coefficient(GaussRat(Fraction(num, den)), n_e, 0, n_pi)


def field_free(e: Expression) -> Expression:
    """Set the gauge field to zero: drop every term containing a field atom."""
    return e.filter(lambda m: not any(a.kind in ("A", "F", "SigmaF", "D") for a in m.word))


def regulator_function() -> Expression:
    """The spatial regulator f as a central scalar atom."""
    return Expression.from_pairs([(GaussRat(Fraction(1)), EMPTY_MONOMIAL._replace(word=(FieldAtom("f"),)))])


def log_series_term(
    n: int,
    regime: ProductRegime = ProductRegime.COMMUTATIVE,
    operator=None,
    prefix: Expression | None = None,
) -> tuple:
    """One order of -sum (1/n) (u+m^2)^-n <(Box + 2i p.D)^n 1> under d^4p.

    Returns (raw expansion, angular-averaged integrand, profile).
    """
    regime = ProductRegime(regime)
    op = klein_gordon_operator(regime) if operator is None else operator
    raw = evaluate_on_one(op, n, regime)
    e = raw
    if prefix is not None:
        e = multiply(prefix.with_flags(regime=regime), e)
    if regime is ProductRegime.MOYAL:
        e = moyal_shift_normalize(under_integral(e))
    averaged = angular_average(e)
    inv_n, kernel = s_integral(n)
    # measure u and the (Lambda0^-2)^n from rescaling the operator
    kernel = kernel * make_kernel(1, (), -2 * n)
    integrand = attach_radial(averaged, Coefficient(GaussRat(-inv_n)) * MEASURE, kernel)
    return raw, integrand, assemble_profile(integrand)


def letter_bundle(n: int) -> Expression:
    """Order-n log coefficient with D and Box kept as letters (no m^2 part)."""
    _, _, profile = log_series_term(n, operator=letter_operator())
    return under_integral(profile.log.filter(lambda m: m.m2_power == 0))


def letter_normal_form(e: Expression) -> Expression:
    """Fold adjacent contracted D_a D_a letters into Box.

    Letters act on everything to their right and finally on 1, so no
    cyclic rotation is allowed at this level.
    """

    def fold(value, mono):
        word = mono.word
        j = 0
        while j < len(word) - 1:
            a, b = word[j], word[j + 1]
            if a.kind == b.kind == "D" and a.indices == b.indices and isinstance(a.indices[0], int):
                word = word[:j] + (FieldAtom("Box"),) + word[j + 2 :]
                j = max(j - 1, 0)
            else:
                j += 1
        return [(value, mono._replace(word=word))]

    return e.map_monomials(fold)


def parse_letters(*words: tuple) -> Expression:
    """Build a letter expression from (coefficient Fraction, e_power, pi_inv2, tuple-of-letters)."""
    pairs = []
    for value, e_pow, pi_pow, letters in words:
        atoms = tuple(FieldAtom("Box") if l == "Box" else FieldAtom("D", (l,)) for l in letters)
        pairs.append((GaussRat(Fraction(value)), EMPTY_MONOMIAL._replace(word=atoms, e_power=e_pow, pi_inv2_power=pi_pow)))
    return under_integral(Expression.from_pairs(pairs))


def reference_bundles() -> dict:
    """Per-order log-coefficient bundles quoted for the resolvent expansion."""
    return {
        2: parse_letters((Fraction(-1, 16), 0, 1, ("Box", "Box"))),
        3: parse_letters((Fraction(1, 12), 0, 1, ("Box", "Box")), (Fraction(1, 24), 0, 1, (0, "Box", 0))),
        4: parse_letters(
            (Fraction(-1, 48), 0, 1, ("Box", "Box")),
            (Fraction(-1, 48), 0, 1, (0, 1, 0, 1)),
            (Fraction(-1, 48), 0, 1, (0, "Box", 0)),
        ),
    }


def _compare(final: Expression, target: Expression, abelian: bool = False) -> tuple:
    """Canonical forms of both sides over one shared relation basis."""
    fe, te = expand_covariant(final), expand_covariant(target)
    basis = RelationBasis([m for m, _ in fe.items()] + [m for m, _ in te.items()], final.regime, abelian)
    cf = CanonicalForm(basis.coordinates(fe), final.regime, basis.rank, len(basis.monomials))
    ct = CanonicalForm(basis.coordinates(te), final.regime, basis.rank, len(basis.monomials))
    return cf, ct


def _fs_target(coefficient: Coefficient, regime=ProductRegime.COMMUTATIVE) -> Expression:
    return field_strength_square(regime).scale(coefficient)


def _coefficient_text(e: Expression, regime=ProductRegime.COMMUTATIVE) -> str:
    if e.is_zero():
        return "0"
    lam = scalar_multiple(e, field_strength_square(regime))
    return "not a multiple of tr F^2" if lam is None else format_coefficient(lam)


BOSON_TARGET = coefficient_of_traces(2, 1, 96)
FERMION_TARGET = coefficient_of_traces(2, -1, 24)
SIGMA_CHANNEL = coefficient_of_traces(2, 1, 16)

F_CONVENTION_NOTE = (
    "field strength taken as F = (1/ie)[D,D] = dA - dA + ie[A,A]; the star-product field strength "
    "is quoted elsewhere with an index typo and without the i"
)


# ---------------------------------------------------------------------------
# boson


def boson_log(config: PipelineConfig, regime=ProductRegime.COMMUTATIVE, stages: list | None = None) -> tuple:
    """Summed log profile over n = 1..order plus per-order profiles."""
    regime = ProductRegime(regime)
    stages = [] if stages is None else stages
    n_max = config.order_for(DerivationCase.MOYAL if regime is ProductRegime.MOYAL else DerivationCase.BOSON)
    orders = list(range(1, n_max + 1))
    results = parallel_map(lambda n: _run_stage(f"order-{n}", log_series_term, n, regime), orders, thread_count(config))
    total = empty_profile(regime)
    per_order = {}
    for n, (raw, integrand, profile) in zip(orders, results):
        _stage(stages, f"expand n={n}", raw)
        _stage(stages, f"angular average n={n}", integrand, kernel=f"(u+m2)^-{n}")
        _stage(stages, f"log coefficient n={n}", profile.log)
        per_order[n] = profile
        total = total + profile
    return total, per_order


def _insufficient(case: DerivationCase, config: PipelineConfig) -> str | None:
    n = config.order_for(case)
    if n < REQUIRED_ORDERS[case]:
        return f"insufficient order: n <= {n} misses log-divergent channels up to n = {REQUIRED_ORDERS[case]}"
    return None


def run_boson_clog(config: PipelineConfig = PipelineConfig()) -> DerivationReport:
    regime = ProductRegime(config.regime or "commutative")
    if regime is not ProductRegime.COMMUTATIVE:
        raise ValueError("boson pipeline runs in the commutative regime; use moyal-clog for star products")
    return _run_resolvent_case(DerivationCase.BOSON, config, regime)


def run_moyal_clog(config: PipelineConfig = PipelineConfig()) -> DerivationReport:
    regime = ProductRegime(config.regime or "moyal")
    report = _run_resolvent_case(DerivationCase.MOYAL, config, regime)
    if regime is ProductRegime.MOYAL:
        report.notes.append(F_CONVENTION_NOTE)
        report.notes.append("shifted field arguments removed only under the spatial integral")
        report.checks["theta_free_coefficient"] = "theta" not in report.coefficient
    return report


def _run_resolvent_case(case: DerivationCase, config: PipelineConfig, regime: ProductRegime) -> DerivationReport:
    stages: list = []
    notes: list = []
    total, per_order = boson_log(config, regime, stages)
    log = under_integral(total.log)
    m0 = log.filter(lambda m: m.m2_power == 0)
    mass = log.filter(lambda m: m.m2_power != 0)
    target = _fs_target(BOSON_TARGET, regime)
    final_cf, target_cf = _compare(m0, target)
    checks = {
        "mass_channel_vanishes": expand_covariant(mass).is_zero(),
        "lambda1_vanishes": total.lambda1.is_zero(),
    }
    notes.append(
        "order-1 and order-2 m^2 tr Box channels come out with opposite signs to the quoted ones; they cancel either way"
    )
    notes.append("the quoted closed-form statement of this coefficient omits the factor e^2 that the expansion produces")
    short = _insufficient(case, config)
    verdict = "pass" if final_cf == target_cf and checks["mass_channel_vanishes"] and not short else "fail"
    if short:
        notes.append(short)
    _stage(stages, "reduce modulo IBP and cyclicity", final_cf.as_expression(), rank=final_cf.rank)
    return DerivationReport(
        case=case,
        config=config.as_dict(),
        stages=stages,
        profile=total,
        final=final_cf,
        target=target_cf,
        verdict=verdict,
        coefficient=_coefficient_text(m0, regime),
        target_coefficient=format_coefficient(BOSON_TARGET),
        notes=notes,
        checks=checks,
        final_expression=m0,
        target_expression=target,
    )


# ---------------------------------------------------------------------------
# fermion


def sigma_channel(order: int = 2) -> dict:
    """Second-order sigma.F channel of log(X - ie sigma.F) and its audits."""
    resolvent = Expression.from_pairs([(GaussRat(Fraction(1)), EMPTY_MONOMIAL._replace(kernel=make_kernel(0, (("m2", 1),))))])
    sigma = Expression.from_pairs([(GaussRat(Fraction(1)), EMPTY_MONOMIAL._replace(word=(FieldAtom("SigmaF"),)))])
    first = symbol_compose(resolvent, sigma, order)
    second = symbol_compose(symbol_compose(first, resolvent, order), sigma, order)
    # log(X - Z) = log X - X^-1 Z - (1/2) X^-1 Z X^-1 Z - ..., Z = ie sigma.F
    channel = second.scale(Coefficient(GaussRat(Fraction(1, 2)), 2))
    leading = [m for m, _ in second.items() if momentum_degree(m) == -4]
    rest = [m for m, _ in second.items() if momentum_degree(m) != -4]
    linear_ok = all(sum(a.kind == "SigmaF" for a in m.word) == 1 for m, _ in first.items())
    linear_trace = spin_trace_sigma(first.filter(lambda m: True))
    averaged = angular_average(channel)
    integrand = attach_radial(averaged, MEASURE, make_kernel(1))
    profile = assemble_profile(integrand)
    return {
        "symbol": channel,
        "profile": profile,
        "log": under_integral(profile.log),
        "leading_terms": len(leading),
        "decay_ok": all(momentum_degree(m) <= -5 for m in rest),
        "linear_lone_sigma": linear_ok,
        "linear_spin_trace_zero": linear_trace.is_zero(),
    }


def run_fermion_clog(config: PipelineConfig = PipelineConfig()) -> DerivationReport:
    if ProductRegime(config.regime or "commutative") is not ProductRegime.COMMUTATIVE:
        raise ValueError("fermion pipeline runs in the commutative regime")
    stages: list = []
    notes = [
        "squared Dirac operator fixed as Box + ie sigma.F; the opposite sign also appears, and only (sigma.F)^2 enters",
    ]
    premises = ["Tr log(-iD + im) is even in m (imported, not derived)"]
    total, _ = boson_log(config, ProductRegime.COMMUTATIVE, stages)
    spin_unit = gamma_trace(())
    (unit_mono, unit_val), = spin_unit.items()
    boson = under_integral(total.log.filter(lambda m: m.m2_power == 0)).scale(unit_val)
    _stage(stages, "spin trace of identity times scalar loop", boson, factor=unit_val)

    ch = _run_stage("sigma channel", sigma_channel, config.compose_order)
    _stage(stages, "sigma.F second-order symbol", ch["symbol"], order=config.compose_order)
    channel_log = ch["log"].filter(lambda m: m.m2_power == 0)
    _stage(stages, "sigma.F log coefficient", channel_log)
    expected_channel = Expression.from_pairs(
        [(GaussRat(Fraction(1)), EMPTY_MONOMIAL._replace(word=(FieldAtom("SigmaF"), FieldAtom("SigmaF"))))]
    ).scale(SIGMA_CHANNEL)
    traced = spin_trace_sigma(channel_log)
    _stage(stages, "spin trace of sigma.F channel", traced)
    ids = sigma_f_identities()

    # 2 Tr log(-iD+im) = Tr log(-D^2+m^2): halve the squared-operator result
    final = (boson + traced).scale(Fraction(1, 2))
    target = _fs_target(FERMION_TARGET)
    final_cf, target_cf = _compare(final, target)
    checks = {
        "sigma_channel_matches": channel_log == under_integral(expected_channel),
        "trace_sigma_f_vanishes": ids["trace_sigma_f_vanishes"],
        "trace_sigma_f_squared_is_minus_two_F2": ids["trace_sigma_f_squared_matches"],
        "commutator_decay_ok": ch["decay_ok"],
        "linear_channel_lone_sigma": ch["linear_lone_sigma"] and ch["linear_spin_trace_zero"],
    }
    short = _insufficient(DerivationCase.FERMION, config)
    if short:
        notes.append(short)
    ok = final_cf == target_cf and all(checks.values()) and not short
    return DerivationReport(
        case=DerivationCase.FERMION,
        config=config.as_dict(),
        stages=stages,
        profile=total,
        final=final_cf,
        target=target_cf,
        verdict="pass" if ok else "fail",
        coefficient=_coefficient_text(final),
        target_coefficient=format_coefficient(FERMION_TARGET),
        notes=notes,
        premises=premises,
        checks=checks,
        final_expression=final,
        target_expression=target,
    )


# ---------------------------------------------------------------------------
# gauge-invariant cut-off


def delta_series_term(n: int, operator=None) -> tuple:
    """Order n of sum (1/n!) delta^(n-1)(Lambda^2 - u) <(Box + 2i p.D)^n 1> log((u+m^2)/Lambda0^2)."""
    op = klein_gordon_operator() if operator is None else operator
    raw = evaluate_on_one(op, n)
    averaged = angular_average(raw)
    c = Coefficient(GaussRat(Fraction(1, 2 * factorial(n)))) * MEASURE  # 1/2 from du/2
    integrand = attach_radial(averaged, c, make_kernel(1))
    return raw, integrand, assemble_profile(integrand, delta_order=n - 1)


CHANNELS = {
    "Box": parse_letters((1, 0, 0, ("Box",))),
    "Box Box": parse_letters((1, 0, 0, ("Box", "Box"))),
    "D Box D": parse_letters((1, 0, 0, (0, "Box", 0))),
    "D D D D": parse_letters((1, 0, 0, (0, 1, 0, 1))),
}


def delta_channel_weights(n_max: int = 4) -> dict:
    """{channel: [weight per order]} with weight = coefficient * w!/(w-k)!."""
    keys = {letter_normal_form(e).items()[0][0]: name for name, e in CHANNELS.items()}
    out: dict = {name: [] for name in CHANNELS}
    for n in range(1, n_max + 1):
        raw = evaluate_on_one(letter_operator(), n)
        averaged = under_integral(angular_average(raw))
        per: dict = {}
        for k, part in momentum_degree_split(averaged).items():
            w = 1 + k
            factor = delta_weight(DeltaMomentSpec(n - 1, w)) / factorial(n)
            for mono, value in letter_normal_form(part).items():
                name = keys.get(mono)
                if name is None:
                    continue
                per[name] = per.get(name, GaussRat()) + value * factor
        for name, v in per.items():
            if v:
                if v.im:
                    raise ArithmeticError("channel weight is not real")
                out[name].append(v.re)
    return out


REFERENCE_WEIGHTS = {
    "Box": [Fraction(1), Fraction(-1)],
    "Box Box": [Fraction(1, 2), Fraction(-2, 3), Fraction(1, 6)],
    "D Box D": [Fraction(-1, 3), Fraction(1, 6)],
    "D D D D": [Fraction(1, 6)],
}


def telescope_decay_audit(n_max: int = 4) -> bool:
    """Every term of the log-difference symbol decays at least like 1/p."""
    for n in range(1, n_max + 1):
        raw = evaluate_on_one(klein_gordon_operator(), n)
        for mono, _ in raw.items():
            if mono.momentum.degree() - 2 * n > -1:
                return False
    return True


def run_gauge_invariant_clog(config: PipelineConfig = PipelineConfig()) -> DerivationReport:
    if ProductRegime(config.regime or "commutative") is not ProductRegime.COMMUTATIVE:
        raise ValueError("gauge-invariant pipeline runs in the commutative regime")
    stages: list = []
    notes: list = []
    boson_order = None if config.order is None else min(config.order, 4)
    boson_config = PipelineConfig(order=boson_order, threads=config.threads)
    total, _ = boson_log(boson_config, ProductRegime.COMMUTATIVE, stages)
    c_log = under_integral(total.log.filter(lambda m: m.m2_power == 0))

    n_max = config.order_for(DerivationCase.GAUGE_INVARIANT)
    orders = list(range(1, n_max + 1))
    results = parallel_map(lambda n: _run_stage(f"delta order-{n}", delta_series_term, n), orders, thread_count(config))
    delta_profile = empty_profile(ProductRegime.COMMUTATIVE)
    for n, (raw, integrand, profile) in zip(orders, results):
        _stage(stages, f"delta expand n={n}", raw)
        _stage(stages, f"delta log coefficient n={n}", profile.log, derivative_order=n - 1)
        delta_profile = delta_profile + profile
    delta_log = under_integral(delta_profile.log)
    weights = delta_channel_weights(min(n_max, 4))
    tilde = c_log + delta_log

    delta_ref = _fs_target(Coefficient(GaussRat(Fraction(-1, 96)), 2, 0, 1))
    delta_cf, delta_ref_cf = _compare(delta_log, delta_ref)
    lam_c = scalar_multiple(c_log, field_strength_square())
    lam_t = scalar_multiple(tilde, field_strength_square())
    ratio = None
    if lam_c is not None and lam_t is not None and lam_c.value:
        if lam_t.value:
            ratio = str((lam_t.value / lam_c.value).re)
        else:
            ratio = "0"
    target = c_log.scale(Fraction(1, 2))
    final_cf, target_cf = _compare(tilde, target)
    checks = {
        "channel_weights_match": weights == REFERENCE_WEIGHTS,
        "delta_term_matches_quoted_display": delta_cf == delta_ref_cf,
        "second_telescope_term_has_no_log": telescope_decay_audit(min(n_max, 4)),
        "order_five_vanishes": n_max < 5 or results[4][2].log.is_zero(),
    }
    notes.append(
        "delta term: log((Lambda^2+m^2)/Lambda0^2) = 2 log Lambda + O(Lambda^-2), so its log Lambda coefficient "
        "is -c_log and the total is 0; reading that logarithm as a single log Lambda gives the quoted ratio 1/2"
    )
    notes.append("the quoted delta-term and c_log displays omit the factor e^2 carried by every channel")
    short = _insufficient(DerivationCase.GAUGE_INVARIANT, config)
    if short:
        notes.append(short)
    ok = final_cf == target_cf and all(checks.values()) and not short
    _stage(stages, "combine with scalar loop", tilde)
    return DerivationReport(
        case=DerivationCase.GAUGE_INVARIANT,
        config=config.as_dict(),
        stages=stages,
        profile=total + delta_profile,
        final=final_cf,
        target=target_cf,
        verdict="pass" if ok else "fail",
        coefficient=_coefficient_text(tilde),
        target_coefficient=format_coefficient(Coefficient(GaussRat(Fraction(1, 192)), 2, 0, 1)),
        notes=notes,
        checks=checks,
        ratio=ratio,
        final_expression=tilde,
        target_expression=target,
    )


# ---------------------------------------------------------------------------
# heat kernel


def heat_kernel_table(r_max: int = 4, regulator: Expression | None = None) -> dict:
    """{(r, 2t): d(f, r, 2t)} read off <f (m^2 - Box - 2i p.D)^r 1> / (8 pi^2)."""
    if r_max < 4:
        raise ValueError("heat-kernel table needs r_max >= 4")
    f = regulator_function() if regulator is None else regulator
    table = {}
    for r in range(0, r_max + 1):
        raw = evaluate_on_one(heat_operator(), r)
        averaged = angular_average(multiply(f, raw))
        split = momentum_degree_split(averaged)
        for t in range(0, r // 2 + 1):
            part = split.get(t, Expression.zero())
            # coefficient of (-2i)^(2t) p^(2t), times the angular normalization
            scale = Coefficient(GaussRat(Fraction(1, (-4) ** t))) * MEASURE
            table[(r, 2 * t)] = under_integral(part.scale(scale))
        for t in split:
            if t > r // 2 and not split[t].is_zero():
                raise ArithmeticError(f"unexpected p^{2 * t} term at r = {r}")
    return table


def heat_kernel_a4(table: dict) -> Expression:
    """Residue of Gamma(s) zeta(s) at s = 0 from the d-table."""
    d00 = table[(0, 0)]
    chi0 = d00.scale(Fraction(1, 4))
    gamma_pole = d00.scale(Fraction(-1, 4))
    a4 = chi0 + gamma_pole
    for t in range(0, 3):
        c = Fraction(factorial(1 + t), factorial(2 + t)) * Fraction(4**t, 2)
        a4 = a4 + table[(t + 2, 2 * t)].scale(c)
    return a4


def heat_kernel_clog(table: dict) -> Expression:
    """c_log(f, A) assembled from the d-table (expansion in 1/p^2)."""
    out = table[(0, 0)].scale(Coefficient(GaussRat(Fraction(1, 2)), 0, 2))
    for t in range(0, 3):
        out = out - table[(t + 2, 2 * t)].scale(Fraction(4**t, t + 2))
    return out


def resolvent_clog_with_regulator(n_max: int = 4) -> Expression:
    """c_log(f, A) from the resolvent expansion in 1/(p^2+m^2), f to the left."""
    f = regulator_function()
    out = Expression.zero()
    for n in range(1, n_max + 1):
        _, _, profile = log_series_term(n, prefix=f)
        out = out + profile.log
    return under_integral(out)


def run_heat_kernel_a4(config: PipelineConfig = PipelineConfig()) -> DerivationReport:
    stages: list = []
    notes = ["regulator f modeled as a central scalar placed left of the operator word"]
    r_max = config.order_for(DerivationCase.HEAT_KERNEL)
    short = None
    if r_max < 4:
        short = f"insufficient order: r <= {r_max} misses the d(f, t+2, 2t) entries up to r = 4"
        r_max_table = 4
    else:
        r_max_table = r_max
    table = _run_stage("heat-kernel table", heat_kernel_table, r_max_table)
    for key in sorted(table):
        _stage(stages, f"d(f,{key[0]},{key[1]})", table[key])
    d00 = table[(0, 0)]
    a4 = heat_kernel_a4(table)
    _stage(stages, "a4 residue", a4)
    clog_d = heat_kernel_clog(table)
    clog_r = _run_stage("resolvent c_log", resolvent_clog_with_regulator, min(r_max, 4))
    _stage(stages, "c_log from resolvent", clog_r)
    residual = clog_r.scale(Fraction(-1, 2)) + d00.scale(Coefficient(GaussRat(Fraction(1, 4)), 0, 2)) - a4
    _stage(stages, "identity residual", residual)
    f_int = under_integral(regulator_function())
    exact_routes = clog_d == clog_r
    routes_equal = exact_routes or reduce_mod_relations(expand_covariant(clog_d - clog_r)).is_zero
    m4_term = d00.scale(Coefficient(GaussRat(Fraction(1, 4)), 0, 2))
    checks = {
        "d00_is_f_over_8pi2": d00 == f_int.scale(MEASURE),
        "m4_term_is_f_over_32pi2": m4_term == f_int.scale(Coefficient(GaussRat(Fraction(1, 32)), 0, 2, 1)),
        "clog_routes_agree": routes_equal,
        "clog_routes_agree_exactly": exact_routes,
        "residual_zero": residual.is_zero(),
        "a4_field_free_is_pure_m4": field_free(a4) == m4_term,
    }
    if short:
        notes.append(short)
    ok = all(checks[k] for k in ("d00_is_f_over_8pi2", "m4_term_is_f_over_32pi2", "clog_routes_agree", "residual_zero"))
    ok = ok and not short
    zero_cf = CanonicalForm({}, ProductRegime.COMMUTATIVE, 0, 0)
    res_cf = CanonicalForm({m: v for m, v in residual.items()}, ProductRegime.COMMUTATIVE, 0, len(residual))
    return DerivationReport(
        case=DerivationCase.HEAT_KERNEL,
        config=config.as_dict(),
        stages=stages,
        profile=None,
        final=res_cf,
        target=zero_cf,
        verdict="pass" if ok else "fail",
        coefficient=format_coefficient(Coefficient(GaussRat(Fraction(1, 32)), 0, 2, 1)),
        target_coefficient=format_coefficient(Coefficient(GaussRat(Fraction(1, 32)), 0, 2, 1)),
        notes=notes,
        checks=checks,
        final_expression=residual,
        target_expression=Expression.zero(),
    )


# ---------------------------------------------------------------------------
# positive powers


MAX_POSITIVE_POWER = 4


def positive_power_symbol(l: int) -> Expression:
    """Symbol of (-Box + m^2)^(l+1) by repeated left application of p^2 + m^2 - Box - 2i p.D."""
    if l < 0 or l > MAX_POSITIVE_POWER:
        raise ValueError(f"power must lie in 0..{MAX_POSITIVE_POWER}")
    op = heat_operator() + ((MomContract(-2), MomContract(-2)),)
    return evaluate_on_one(op, l + 1)


RUNNERS = {
    DerivationCase.BOSON: run_boson_clog,
    DerivationCase.FERMION: run_fermion_clog,
    DerivationCase.GAUGE_INVARIANT: run_gauge_invariant_clog,
    DerivationCase.HEAT_KERNEL: run_heat_kernel_a4,
    DerivationCase.MOYAL: run_moyal_clog,
}


def run_case(case: DerivationCase | str, config: PipelineConfig = PipelineConfig()) -> DerivationReport:
    return RUNNERS[DerivationCase(case)](config)


def gauge_variation_vanishes(e: Expression) -> bool:
    """First-order gauge variation of an F-form invariant reduces to zero."""
    return reduce_mod_relations(gauge_variation(e)).is_zero
