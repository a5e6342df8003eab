import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psdocalc.cli.ast_json import expression_from_json, expression_to_json
from psdocalc.cli.config import ConfigError, RunConfig, load_config
from psdocalc.cli.grammar import ParseError, format_expression, format_latex, parse_expression
from psdocalc.cli.main import main
from psdocalc.derivations import heat_kernel_table, letter_bundle, sigma_channel
from psdocalc.term_algebra import evaluate_on_one, klein_gordon_operator

# -- grammar fuzz

# (template, number of index slots); slots are filled with paired labels
FACTORS = [
    ("A{s}[{0}]", 1),
    ("d[{0}] A{s}[{1}]", 2),
    ("d[{0}] d[{1}] A{s}[{2}]", 3),
    ("F{s}[{0},{1}]", 2),
    ("d[{0}] F{s}[{1},{2}]", 3),
    ("chi{s}", 0),
    ("f", 0),
    ("SigmaF", 0),
    ("p[{0}]", 1),
    ("g[{0},{1}]", 2),
]
SCALARS = st.lists(st.sampled_from(["i", "e", "e^2", "m2", "pi^-2", "pi^2"]), max_size=3)
KERNEL = st.lists(st.sampled_from(["u^1", "u^2", "R[1]", "R[3]", "L0^2"]), max_size=2)
LABELS = ["a", "b", "c", "mu", "nu", "rho", "s", "t", "x", "y", "z", "w"]


@st.composite
def term_text(draw, shifted):
    picks = draw(st.lists(st.sampled_from(FACTORS), min_size=1, max_size=4))
    slots = sum(k for _, k in picks)
    if slots % 2:
        picks.append(("p[{0}]", 1))
        slots += 1
    pool = draw(st.permutations(LABELS))[: slots // 2]
    labels = draw(st.permutations(pool + pool)) if pool else []
    out, pos = [], 0
    for template, k in picks:
        out.append(template.format(*labels[pos : pos + k], s="~" if shifted else ""))
        pos += k
    num = draw(st.fractions(min_value=-7, max_value=7, max_denominator=6).filter(bool))
    coeff = "*".join([str(abs(num))] + draw(SCALARS))
    text = " ".join([coeff] + out + draw(KERNEL))
    return ("- " if num < 0 else "+ ") + text


@st.composite
def expression_text(draw):
    regime = draw(st.sampled_from(["commutative", "moyal"]))
    terms = draw(st.lists(term_text(regime == "moyal"), min_size=1, max_size=4))
    return " ".join(terms).lstrip("+ "), regime, draw(st.booleans())


@settings(max_examples=200, deadline=None)
@given(expression_text())
def test_format_parse_round_trip(case):
    src, regime, integrated = case
    e = parse_expression(src, regime, integrated)
    text = format_expression(e)
    assert parse_expression(text, regime, integrated) == e
    assert format_expression(parse_expression(text, regime, integrated)) == text
    assert expression_from_json(json.loads(json.dumps(expression_to_json(e)))) == e


@pytest.mark.parametrize(
    "build",
    [
        lambda: evaluate_on_one(klein_gordon_operator(), 3),
        lambda: letter_bundle(4),
        lambda: heat_kernel_table(4)[(4, 4)],
        lambda: sigma_channel(2)["symbol"],
    ],
)
def test_engine_outputs_round_trip(build):
    e = build()
    assert parse_expression(format_expression(e), e.regime, e.integrated) == e
    assert expression_from_json(expression_to_json(e)) == e


def test_zero_prints_and_parses():
    assert format_expression(parse_expression("A[a] - A[a]")) == "0"


def test_dummies_print_with_underscore():
    assert format_expression(parse_expression("p[x] p[x] A[y] A[y]")) == "A[_0] A[_0] p[_1] p[_1]"


@pytest.mark.parametrize(
    "src,line,column",
    [
        ("A[mu] + ?", 1, 9),
        ("A[mu", 1, 5),
        ("A[mu] A[mu] A[mu]", 1, 15),
        ("d[a] Box", 1, 1),
        ("A[a] A[a]\n + Q", 2, 4),
    ],
)
def test_parse_errors_carry_position(src, line, column):
    with pytest.raises(ParseError) as err:
        parse_expression(src)
    assert (err.value.line, err.value.column) == (line, column)


def test_odd_pi_power_rejected():
    with pytest.raises(ParseError, match="even"):
        parse_expression("pi^-3 f")


def test_latex_output():
    text = format_latex(parse_expression("-1/12*e^2*pi^-2 F[mu,nu] F[mu,nu]"))
    assert text.startswith(r"-\frac{1}{12}")
    assert r"\mathrm{tr}\,F_{a_{0}a_{1}} F_{a_{0}a_{1}}" in text
    assert format_latex(parse_expression("d[mu] A[nu]")) == r"\mathrm{tr}\,(\partial_{\mu}A_{\nu})"
    assert format_latex(parse_expression("-1 g[mu,nu] R[2]")) == r"-\delta_{\mu\nu} (u+m^2)^{-2}"
    assert format_latex(parse_expression("-1")) == "-1"


def test_ast_version_checked():
    data = expression_to_json(parse_expression("f"))
    data["version"] = 99
    with pytest.raises(ValueError):
        expression_from_json(data)


# -- config


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"order": 4, "colour": "red"}')
    with pytest.raises(ConfigError, match="colour"):
        load_config(path)


@pytest.mark.parametrize(
    "kw", [{"order": 0}, {"grid": 100}, {"regime": "quantum"}, {"case": "nope"}, {"format": "pdf"}, {"compose_order": 9}]
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_config_merge_ignores_missing():
    base = RunConfig(order=3)
    assert base.merged(order=None, threads=2) == RunConfig(order=3, threads=2)


def test_heat_kernel_r_max_maps_to_order():
    assert RunConfig(case="heat-kernel-a4", r_max=6).pipeline().order == 6
    assert RunConfig(case="boson-clog", r_max=6).pipeline().order is None


# -- command line


def test_derive_boson_json(capsys):
    assert main(["derive", "boson-clog"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["verdict"] == "pass"
    assert data["coefficient"] == "e^2/(96*pi^2)"
    assert data["schema_version"] == "1"
    assert "timestamp" not in json.dumps(data["metadata"])


def test_derive_text_and_latex(capsys):
    assert main(["derive", "fermion-clog", "--format", "text"]) == 0
    assert "-e^2/(24*pi^2)" in capsys.readouterr().out
    assert main(["derive", "boson-clog", "--format", "latex"]) == 0
    assert r"\frac" in capsys.readouterr().out


def test_insufficient_order_exits_one(capsys):
    assert main(["derive", "boson-clog", "--order", "1"]) == 1
    assert "insufficient order" in capsys.readouterr().out


def test_gauge_invariant_fails_with_ratio(capsys):
    assert main(["derive", "gauge-invariant-clog"]) == 1
    assert json.loads(capsys.readouterr().out)["ratio"] == "0"


def test_usage_errors_exit_two(capsys):
    assert main(["derive", "nope"]) == 2
    assert main(["derive", "boson-clog", "--regime", "moyal"]) == 2
    assert main(["verify-identity", "A[mu", "f"]) == 2
    assert main(["--config", "/nonexistent.json", "derive", "boson-clog"]) == 2
    assert main([]) == 2


def test_report_is_byte_deterministic(tmp_path, monkeypatch, capsys):
    paths = []
    for threads in ("1", "3"):
        monkeypatch.setenv("PSDOCALC_THREADS", threads)
        path = tmp_path / f"r{threads}.json"
        assert main(["derive", "moyal-clog", "--report", str(path)]) == 0
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert "moyal-clog: pass" in capsys.readouterr().out


def test_config_file_is_applied(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text('{"order": 2}')
    assert main(["--config", str(path), "derive", "boson-clog"]) == 1
    assert json.loads(capsys.readouterr().out)["config"]["order"] == 2


@pytest.mark.parametrize(
    "lhs,rhs,code",
    [
        ("D[mu] Box D[mu] - D[nu] D[mu] D[nu] D[mu]", "1/2*e^2 F[mu,nu] F[mu,nu]", 0),
        ("Box Box", "D[mu] Box D[mu]", 1),
        ("d[mu] A[mu] A[nu] A[nu]", "-A[mu] d[mu] A[nu] A[nu] - A[mu] A[nu] d[mu] A[nu]", 0),
        ("Box", "Box Box", 2),
    ],
)
def test_verify_identity(lhs, rhs, code, capsys):
    assert main(["verify-identity", lhs, rhs]) == code
    out = capsys.readouterr().out
    if code == 0:
        assert out.strip() == "equal"
    elif code == 1:
        assert out.startswith("not equal")


def test_abelian_flag_allows_reordering(capsys):
    lhs, rhs = "A[a] A[b] A[a] A[b]", "A[a] A[a] A[b] A[b]"
    assert main(["verify-identity", lhs, rhs]) == 1
    assert main(["verify-identity", "--abelian", lhs, rhs]) == 0


def test_moyal_check_command(capsys):
    assert main(["moyal-check", "--grid", "64"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["config"]["grid"] == 64
    assert all(row["passed"] for row in data["checks"])


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "psdocalc", "verify-identity", "Box", "-1*e^2 A[mu] A[mu]"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert out.returncode == 0 and out.stdout.strip() == "equal"


@pytest.mark.parametrize(
    "src,want",
    [("d[a] A[b] g[a,c] g[c,b]", "d[_0] A[_0]"), ("g[a,c] g[c,a]", "4"), ("A[a] g[a,b] g[b,c] g[c,d] A[d]", "A[_0] A[_0]")],
)
def test_metric_chains_collapse(src, want):
    assert format_expression(parse_expression(src)) == want
