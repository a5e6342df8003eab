"""Report emitters.  JSON output is byte-deterministic for a fixed config."""

from __future__ import annotations

import json
from fractions import Fraction

from .. import __version__
from ..covariant_reduction import CanonicalForm
from ..derivations import DerivationReport
from ..momentum_calculus import DivergenceProfile
from ..term_algebra import ONE, Expression, GaussRat
from .grammar import format_expression, format_latex

SCHEMA_VERSION = "1"


def _rational(q: Fraction) -> str:
    return str(q)


def _value(v: GaussRat) -> dict:
    return {"re": _rational(v.re), "im": _rational(v.im)}


def _plain(obj):
    """Turn nested report fields into JSON-ready values."""
    if isinstance(obj, Expression):
        return format_expression(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return str(obj)


def canonical_form_json(cf: CanonicalForm | None) -> dict | None:
    if cf is None:
        return None
    coords = [
        {"monomial": format_expression(Expression.from_pairs([(ONE, m)], cf.regime, True)), **_value(v)}
        for m, v in cf.as_expression().items()
    ]
    return {
        "regime": cf.regime.value,
        "rank": cf.rank,
        "basis_size": cf.basis_size,
        "expression": format_expression(cf.as_expression()),
        "coordinates": coords,
    }


def profile_json(p: DivergenceProfile | None) -> dict | None:
    if p is None:
        return None
    return {
        "lambda2": format_expression(p.lambda2),
        "lambda1": format_expression(p.lambda1),
        "log": format_expression(p.log),
        "finite_flag": p.finite_flag,
        "reference_scale_power": _plain(p.reference_scale_power),
        "extra": _plain(p.extra),
    }


def report_dict(report: DerivationReport, run_config: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "case": report.case.value,
        "config": _plain(run_config),
        "pipeline": _plain(report.config),
        "stages": [
            {"name": s.name, "digest": s.digest, "terms": s.terms, "detail": _plain(s.detail)} for s in report.stages
        ],
        "profile": profile_json(report.profile),
        "final": canonical_form_json(report.final),
        "target": canonical_form_json(report.target),
        "final_expression": _plain(report.final_expression),
        "target_expression": _plain(report.target_expression),
        "coefficient": report.coefficient,
        "target_coefficient": report.target_coefficient,
        "ratio": report.ratio,
        "checks": _plain(report.checks),
        "premises": _plain(report.premises),
        "notes": _plain(report.notes),
        "verdict": report.verdict,
        "metadata": {"tool": "psdocalc", "version": __version__},
    }


def render_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def render_text(data: dict) -> str:
    lines = [
        f"case        {data['case']}",
        f"verdict     {data['verdict']}",
        f"coefficient {data['coefficient']}",
        f"target      {data['target_coefficient']}",
    ]
    if data.get("ratio") is not None:
        lines.append(f"ratio       {data['ratio']}")
    if data.get("final"):
        lines.append(f"final       {data['final']['expression']}")
    if data.get("target"):
        lines.append(f"target form {data['target']['expression']}")
    if data["checks"]:
        lines.append("checks")
        lines += [f"  {k}: {v}" for k, v in sorted(data["checks"].items())]
    lines.append("stages")
    lines += [f"  {s['name']} [{s['terms']} terms] {s['digest'][:12]}" for s in data["stages"]]
    for key in ("premises", "notes"):
        if data[key]:
            lines.append(key)
            lines += [f"  - {n}" for n in data[key]]
    return "\n".join(lines) + "\n"


def render_latex(data: dict, report: DerivationReport) -> str:
    final = format_latex(report.final.as_expression()) if report.final else "0"
    target = format_latex(report.target.as_expression()) if report.target else "0"
    esc = lambda s: s.replace("_", r"\_")
    out = [
        r"\begin{tabular}{ll}",
        rf"case & \texttt{{{esc(data['case'])}}} \\",
        rf"verdict & \texttt{{{data['verdict']}}} \\",
        rf"coefficient & \texttt{{{esc(data['coefficient'])}}} \\",
        r"\end{tabular}",
        r"\begin{align*}",
        rf"\text{{final}} &= {final} \\",
        rf"\text{{target}} &= {target}",
        r"\end{align*}",
    ]
    return "\n".join(out) + "\n"


def render(report: DerivationReport, run_config: dict, fmt: str) -> str:
    data = report_dict(report, run_config)
    if fmt == "json":
        return render_json(data)
    if fmt == "text":
        return render_text(data)
    return render_latex(data, report)
