import math

import pytest
from hypothesis import given, strategies as st

from imts_forge.dsl import (
    ArityError,
    Binary,
    DslError,
    DslSyntaxError,
    DuplicateNameError,
    Literal,
    RhsDomainError,
    UnknownSymbolError,
    Unary,
    Var,
    eval_rhs,
    parse_expression,
    parse_system,
    render_expr,
    render_system,
)
from imts_forge.systems import default_registry

LIN = "system lin\nchannels 1\nconstants a=1.0\ninit 1.0\nd0 = a * x0\n"
LORENZ = """
system lorenz
channels 3
constants sigma=10 rho=28 beta=8/3
init 2 1 1
duration_unit "dimensionless"
d0 = sigma * (x1 - x0)
d1 = x0 * (rho - x2) - x1
d2 = x0 * x1 - beta * x2
"""


def test_parse_lin():
    spec = parse_system(LIN)
    assert spec.name == "lin"
    assert spec.channels == 1
    assert spec.constants == (("a", 1.0),)
    assert spec.initial_values == (1.0,)


def test_parse_lorenz_constants():
    spec = parse_system(LORENZ)
    assert spec.channels == 3
    assert spec.constant_names == ("sigma", "rho", "beta")
    assert spec.constant_values == (10.0, 28.0, 8 / 3)
    assert spec.duration_unit == "dimensionless"


def test_unknown_symbol_location():
    src = "system s\nchannels 1\nconstants a=1\ninit 1\nd0 = b * x0\n"
    with pytest.raises(UnknownSymbolError) as info:
        parse_system(src)
    assert info.value.symbol == "b"
    assert info.value.line == 5
    assert info.value.column == 6


@pytest.mark.parametrize(
    "src, err",
    [
        ("system s\nchannels 2\ninit 1 1\nd0 = x0\n", ArityError),
        ("system s\nchannels 1\ninit 1 2\nd0 = x0\n", ArityError),
        ("system s\nchannels 1\nconstants a=1 a=2\ninit 1\nd0 = a\n", DuplicateNameError),
        ("system s\nchannels 1\nconstants x0=1\ninit 1\nd0 = x0\n", DuplicateNameError),
        ("system s\nchannels 1\ninit 1\nd0 = x0\nd0 = x0\n", DuplicateNameError),
        ("system s\nchannels 1\ninit 1\nd0 = (x0\n", DslSyntaxError),
        ("system s\nchannels 1\ninit 1\nd0 = x1\n", UnknownSymbolError),
        ("system s\nchannels 1\ninit 1\nd0 = sin(x0, x0)\n", DslSyntaxError),
        ("channels 1\ninit 1\nd0 = x0\n", DslSyntaxError),
    ],
)
def test_structured_errors(src, err):
    with pytest.raises(err) as info:
        parse_system(src)
    assert info.value.line >= 1


def test_comments_and_repeated_constants():
    src = "# header\nsystem s # trailing\nchannels 1\nconstants a=2\nconstants b=3\ninit 1\nd0 = a*b*x0\n"
    spec = parse_system(src)
    assert spec.constant_values == (2.0, 3.0)
    assert eval_rhs(spec, 0.0, (1.0,), spec.constant_values) == (6.0,)


def test_eval_lin_and_lorenz():
    assert eval_rhs(parse_system(LIN), 0.0, (2.0,), (3.0,)) == (6.0,)
    spec = parse_system(LORENZ)
    out = eval_rhs(spec, 0.0, (1.0, 2.0, 3.0), (10.0, 28.0, 8 / 3))
    assert out == pytest.approx((10.0, 23.0, -6.0), abs=1e-12)


def test_precedence_and_power():
    spec = parse_system("system s\nchannels 1\ninit 1\nd0 = -x0^2 + 2^3^2 / 64 + pow(x0, 3) - t\n")
    # -(3^2) + 512/64 + 27 - 1
    assert eval_rhs(spec, 1.0, (3.0,), ()) == (-9.0 + 8.0 + 27.0 - 1.0,)


@pytest.mark.parametrize(
    "rhs, x",
    [("log(x0)", 0.0), ("log(x0)", -1.0), ("sqrt(x0)", -1.0), ("1 / x0", 0.0), ("exp(x0)", 1e6)],
)
def test_domain_errors_name_channel(rhs, x):
    spec = parse_system(f"system s\nchannels 2\ninit 1 1\nd0 = x1\nd1 = {rhs}\n")
    with pytest.raises(RhsDomainError) as info:
        eval_rhs(spec, 0.0, (x, x), ())
    assert info.value.channel == 1


def test_nan_input_is_domain_error():
    spec = parse_system(LIN)
    with pytest.raises(RhsDomainError):
        eval_rhs(spec, 0.0, (math.nan,), (1.0,))


def test_referential_transparency():
    spec = parse_system(LORENZ)
    a = eval_rhs(spec, 0.3, (1.1, -2.2, 3.3), spec.constant_values)
    b = eval_rhs(spec, 0.3, (1.1, -2.2, 3.3), spec.constant_values)
    assert a == b


def test_builtins_round_trip():
    reg = default_registry()
    for name, *_ in reg.list():
        spec = reg.get(name)
        assert parse_system(render_system(spec)) == spec


# -- property tests ---------------------------------------------------------

_atoms = st.one_of(
    st.floats(min_value=0, max_value=1e6, allow_nan=False).map(Literal),
    st.sampled_from(["x0", "x1", "t", "k"]).map(Var),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["neg", "sin", "cos", "exp", "log", "sqrt", "abs", "tanh"]),
                  children).map(lambda p: Unary(*p)),
        st.tuples(st.sampled_from(["+", "-", "*", "/", "^"]), children, children).map(
            lambda p: Binary(*p)
        ),
    )


exprs = st.recursive(_atoms, _extend, max_leaves=12)


@given(exprs)
def test_expression_render_round_trip(node):
    assert parse_expression(render_expr(node)) == node


@given(exprs, exprs)
def test_system_render_round_trip(e0, e1):
    src = (
        "system prop\nchannels 2\nconstants k=1.5\ninit 0.5 -2\n"
        f"d0 = {render_expr(e0)}\nd1 = {render_expr(e1)}\n"
    )
    spec = parse_system(src)
    assert parse_system(render_system(spec)) == spec


@given(st.binary(max_size=300))
def test_parser_total_on_bytes(data):
    try:
        parse_system(data)
    except DslError:
        pass


@given(st.text(alphabet="systemchanelinitd0123=+-*/^() xk\n.,#\"", max_size=200))
def test_parser_total_on_grammar_soup(text):
    try:
        parse_system(text)
    except DslError:
        pass


def test_deep_nesting_is_an_error_not_a_crash():
    with pytest.raises(DslError):
        parse_system("system s\nchannels 1\ninit 1\nd0 = " + "(" * 5000 + "x0" + ")" * 5000 + "\n")
