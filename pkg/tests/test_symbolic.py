import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blochlab.symbolic import (
    Add,
    BranchError,
    BranchWarning,
    Const,
    Div,
    ExprFunction,
    IntPow,
    Ln,
    Mul,
    Neg,
    NonFiniteError,
    ParseError,
    PoleError,
    RealPow,
    Sub,
    UnknownFunctionError,
    Var,
    VariableIndexError,
    eval_jet,
    parse,
    unparse,
    validate_self_map,
)

from conftest import central_diff, holomorphic_near, oracle_eval, random_expr, random_point


# --- parsing -----------------------------------------------------------------


def test_parse_variable():
    assert parse("z1", 1) == Var(1)


def test_parse_quotient():
    e = parse("z1/(1 - 0.5*z1)", 1)
    assert e == Div(Var(1), Sub(Const(1), Mul(Const(0.5), Var(1))))


def test_parse_precedence():
    assert parse("-z1^2", 1) == Neg(IntPow(Var(1), 2))
    assert parse("z1 + z2*z1", 2) == Add(Var(1), Mul(Var(2), Var(1)))
    assert parse("z1 - z1 - z1", 1) == Sub(Sub(Var(1), Var(1)), Var(1))


def test_parse_literals_and_powers():
    assert parse("i", 1) == Const(1j)
    assert parse("2.5i", 1) == Const(2.5j)
    assert parse("1e-3", 1) == Const(0.001)
    assert parse("z1^3", 1) == IntPow(Var(1), 3)
    assert parse("z1^0.5", 1) == RealPow(Var(1), 0.5)
    assert parse("(1 - z1)^-2", 1) == RealPow(Sub(Const(1), Var(1)), -2.0)
    assert parse("ln(z1 + 2)", 1) == Ln(Add(Var(1), Const(2)))


def test_whitespace_insignificant():
    assert parse(" z1*( 1+z1 ) ", 1) == parse("z1*(1+z1)", 1)


def test_variable_out_of_range():
    with pytest.raises(VariableIndexError):
        parse("z3", 2)
    with pytest.raises(VariableIndexError):
        parse("z0", 2)


def test_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse("sin(z1)", 1)


@pytest.mark.parametrize("text,pos", [("z1 +", 4), ("(z1", 3), ("z1 $ 2", 3), ("", 0), ("z1 z1", 3)])
def test_syntax_error_position(text, pos):
    with pytest.raises(ParseError) as ei:
        parse(text, 1)
    assert ei.value.position == pos


# --- round trip ------------------------------------------------------------------

_consts = st.one_of(
    st.floats(0, 10, allow_nan=False).map(lambda x: Const(x)),
    st.floats(0.01, 10, allow_nan=False).map(lambda x: Const(complex(0, x))),
)
_leaves = st.one_of(st.integers(1, 3).map(Var), _consts)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        children.map(Ln),
        st.tuples(children, children).map(lambda t: Add(*t)),
        st.tuples(children, children).map(lambda t: Sub(*t)),
        st.tuples(children, children).map(lambda t: Mul(*t)),
        st.tuples(children, children).map(lambda t: Div(*t)),
        st.tuples(children, st.integers(0, 12)).map(lambda t: IntPow(*t)),
        st.tuples(children, st.floats(-5, 5, allow_nan=False).filter(lambda x: x != int(x))).map(
            lambda t: RealPow(*t)
        ),
    )


exprs = st.recursive(_leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_round_trip(e):
    assert parse(unparse(e), 3) == e


def test_round_trip_other_constants():
    # constants the parser never produces still re-parse to the same value
    for c in (-2.5, complex(1, -2), complex(-0.5, 0.25)):
        v = eval_jet(parse(unparse(Const(c)), 1), np.zeros(1)).value
        assert v == c


# --- jets ------------------------------------------------------------------------


def test_jet_examples():
    j = eval_jet(parse("z1^2", 1), np.array([0.5]))
    assert j.value == 0.25 and j.partials[0] == 1.0
    j = eval_jet(parse("z1/(1 - 0.5*z1)", 1), np.zeros(1))
    assert j.value == 0 and j.partials[0] == 1.0
    j = eval_jet(parse("ln(4/(1 - 0.5*z1))", 1), np.zeros(1))
    assert abs(j.value - math.log(4)) < 1e-15
    assert abs(j.partials[0] - 0.5) < 1e-15


def test_ln_example_against_step_oracle():
    text = "ln(4/(1 - 0.5*z1))"
    fd = central_diff(text, [0.0], 0, h=1e-7)
    assert abs(fd - 0.5) < 1e-8


def test_batch_matches_pointwise():
    e = parse("z1*z2^2 + ln(2 + z1)", 2)
    rng = np.random.default_rng(0)
    Z = np.array([random_point(rng, 2) for _ in range(20)])
    batch = eval_jet(e, Z)
    for i, z in enumerate(Z):
        one = eval_jet(e, z)
        assert one.value == batch.value[i]
        np.testing.assert_array_equal(one.partials, batch.partials[i])


def test_constant_has_zero_partials_in_batch():
    j = eval_jet(parse("2 + i", 2), np.zeros((3, 2)))
    assert j.partials.shape == (3, 2) and not j.partials.any()


def _fd_check(text, n, z):
    j = eval_jet(parse(text, n), z)
    assert abs(j.value - oracle_eval(text, z)) <= 1e-12 * max(1.0, abs(j.value))
    for k in range(n):
        for direction in (1.0, 1j):
            fd = central_diff(text, z, k, direction=direction)
            d = j.partials[k]
            assert abs(d - fd) <= 1e-5 * max(abs(d), 1.0), (text, z, k, direction, d, fd)


def test_jets_against_central_differences():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        n = int(rng.integers(1, 4))
        text = random_expr(rng, n)
        z = random_point(rng, n)
        e = parse(text, n)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                if not holomorphic_near(e, z):
                    continue
                _fd_check(text, n, z)
        except (PoleError, BranchError, NonFiniteError, BranchWarning, ZeroDivisionError, OverflowError):
            continue
        checked += 1


@settings(max_examples=100, deadline=None)
@given(
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    st.integers(0, 2**32 - 1),
)
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    f, g = random_expr(rng, 2), random_expr(rng, 2)
    z = random_point(rng, 2)
    fa, ga = parse(f, 2), parse(g, 2)
    combo = Add(Mul(Const(a), fa), Mul(Const(b), ga))
    try:
        jf, jg, jc = eval_jet(fa, z), eval_jet(ga, z), eval_jet(combo, z)
    except (PoleError, BranchError, NonFiniteError):
        return
    scale = abs(a) * (abs(jf.value) + np.abs(jf.partials).max()) + abs(b) * (abs(jg.value) + np.abs(jg.partials).max())
    tol = 1e-13 * max(scale, 1.0)
    assert abs(jc.value - (a * jf.value + b * jg.value)) <= tol
    assert np.abs(jc.partials - (a * jf.partials + b * jg.partials)).max() <= tol


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_product_rule(seed):
    rng = np.random.default_rng(seed)
    f, g = parse(random_expr(rng, 2), 2), parse(random_expr(rng, 2), 2)
    z = random_point(rng, 2)
    try:
        jf, jg, jp = eval_jet(f, z), eval_jet(g, z), eval_jet(Mul(f, g), z)
    except (PoleError, BranchError, NonFiniteError):
        return
    expect = jf.value * jg.partials + jg.value * jf.partials
    scale = max(1.0, abs(jf.value) * np.abs(jg.partials).max(), abs(jg.value) * np.abs(jf.partials).max())
    assert np.abs(jp.partials - expect).max() <= 8 * np.finfo(float).eps * scale


# --- guards ------------------------------------------------------------------------


def test_pole_guard_reports_witness():
    with pytest.raises(PoleError) as ei:
        eval_jet(parse("1/z1", 1), np.zeros(1))
    np.testing.assert_array_equal(ei.value.witness, [0])


def test_log_of_zero():
    with pytest.raises(BranchError):
        eval_jet(parse("ln(z1)", 1), np.zeros(1))


def test_branch_cut_warns():
    with pytest.warns(BranchWarning):
        eval_jet(parse("ln(z1)", 1), np.array([-0.5]))


def test_in_scope_log_never_warns():
    Z = np.array([[0.999 * np.exp(1j * t)] for t in np.linspace(0, 2 * np.pi, 64)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        eval_jet(parse("ln(4/(1 - 0.999*z1))", 1), Z)


def test_expr_function_dimension_check():
    with pytest.raises(ValueError):
        ExprFunction(parse("z2", 2), 1)


# --- self-map validation -------------------------------------------------------------


def test_self_map_half():
    rep = validate_self_map([parse("z1/2", 1)], np.array([[0.0], [0.9], [-0.99j]]))
    assert rep.ok and rep.verdict == "OK" and rep.max_modulus <= 0.5


def test_self_map_violation_witness():
    rep = validate_self_map([parse("2*z1", 1)], np.array([[0.1], [0.9]]))
    assert not rep.ok and rep.verdict == "VIOLATION"
    assert rep.witness[0] == 0.9 and abs(rep.max_modulus - 1.8) < 1e-15


def test_self_map_disk_image():
    r = 1 - np.logspace(-1, -9, 60)
    Z = (r[:, None] * np.exp(1j * np.linspace(-0.3, 0.3, 11))[None, :]).reshape(-1, 1)
    rep = validate_self_map([parse("(z1+1)/2", 1)], Z)
    assert rep.ok and rep.max_modulus > 1 - 1e-8


def test_self_map_rejects_exterior_samples():
    with pytest.raises(ValueError):
        validate_self_map([parse("z1", 1)], np.array([[1.0]]))
