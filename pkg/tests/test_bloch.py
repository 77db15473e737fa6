import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blochlab.bloch import (
    DIVERGENT,
    BlochParams,
    bloch_norm,
    check_growth_bound,
    check_holder,
    growth_coefficient,
    growth_factor,
    one_minus_abs2,
)
from blochlab.sampling import SampleBudget
from blochlab.symbolic import Const, ExprFunction, unparse

BUDGET = SampleBudget(base_count=20_000, shells=12, refine_rounds=2)


def test_params_validation():
    with pytest.raises(ValueError):
        BlochParams(-1, 1, 1)
    with pytest.raises(ValueError):
        BlochParams(1, math.inf, 1)
    with pytest.raises(ValueError):
        BlochParams(1, 1, 0)


@pytest.mark.parametrize("p", [0, 0.5, 1, 2])
def test_norm_of_coordinate(p):
    rep = bloch_norm("z1", p, BUDGET, n=1)
    assert rep.value_at_zero == 0
    assert abs(rep.norm - 1) <= 1e-6


def test_norm_invariants():
    rep = bloch_norm("2 + z1*z2", 1.0, BUDGET, n=2)
    assert rep.value_at_zero == 2.0
    assert rep.norm >= rep.value_at_zero and rep.norm >= rep.seminorm.value


def test_fw_bound():
    w = 0.5
    rep = bloch_norm(f"z1/(1 - {w}*z1)", 1.0, BUDGET, n=1)
    assert rep.norm <= 4 / (1 - w * w)


@pytest.mark.parametrize("w", [0.0, 0.5, 0.9, 0.99])
def test_gw_bound(w):
    rep = bloch_norm(f"ln(4/(1 - {w}*z1))", 1.0, BUDGET, n=1)
    assert rep.norm <= 2 + math.log(4)


def test_divergent_sentinel():
    rep = bloch_norm("ln(1 - z1)", 0.0, BUDGET, n=1)
    assert rep.norm is DIVERGENT and not rep.finite
    assert repr(DIVERGENT) == "DIVERGENT"


def test_p0_norm_of_pole_outside_disk_is_finite():
    # sup |f'| = 1/(1-0.9)^2 = 100 on the disk
    rep = bloch_norm("z1/(1-0.9*z1)", 0.0, SampleBudget(base_count=50_000), n=1)
    assert rep.finite and abs(rep.norm - 100) < 0.05


def test_string_input_needs_dimension():
    with pytest.raises(ValueError):
        bloch_norm("z1", 1.0)


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_scaling(c):
    base = "1 + z1^2 - 0.5*z1*z2"
    f = ExprFunction.from_string(base, 2)
    cf = ExprFunction.from_string(f"{unparse(Const(c))}*({base})", 2)
    small = SampleBudget(base_count=3000, refine_rounds=1)
    a = bloch_norm(f, 1.5, small).norm
    b = bloch_norm(cf, 1.5, small).norm
    assert abs(b - abs(c) * a) <= 1e-10 * abs(c) * a


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0, 0.999999),
    st.floats(0, 5),
    st.floats(0, 5),
)
def test_weight_monotone_in_p(r, p1, p2):
    p1, p2 = min(p1, p2), max(p1, p2)
    s = one_minus_abs2(np.array([r]))[0]
    assert s**p1 >= s**p2


# --- growth bound ---------------------------------------------------------------


def test_growth_constants():
    assert growth_coefficient(1.0, 1) == pytest.approx(0.5 + 1 / (2 * math.log(2)))
    assert growth_coefficient(0.5, 2) == 5.0
    assert growth_coefficient(2.0, 2) == 0.5 + 2.0


def test_growth_constant_function():
    f = ExprFunction.from_string("0.7 + 0.2i", 2)
    Z = np.zeros((1, 2))
    rep = check_growth_bound(f, 1.0, Z, norm=abs(0.7 + 0.2j))
    assert rep.holds
    expect = abs(0.7 + 0.2j) / (growth_coefficient(1.0, 2) * 2 * math.log(4) * abs(0.7 + 0.2j))
    assert rep.max_ratio == pytest.approx(expect)


def test_growth_example_half():
    f = ExprFunction.from_string("z1", 1)
    rep = check_growth_bound(f, 0.5, np.array([[0.9]]), norm=1.0)
    assert rep.holds and rep.max_ratio == pytest.approx(0.9 / 3)
    assert growth_factor(np.array([0.9]), 0.5) == 3.0


def _dense_grid(N=1000):
    r = 1 - np.logspace(-7, 0, N)[::-1] * 0.999999
    r = np.concatenate([[0.0], r])
    t = np.linspace(0, 2 * np.pi, N, endpoint=False)
    return (r[:, None] * np.exp(1j * t)[None, :]).ravel()


def test_growth_random_polynomial_with_grid_oracle():
    rng = np.random.default_rng(11)
    grid = _dense_grid()
    for _ in range(5):
        coeffs = (rng.uniform(-1, 1, 5) + 1j * rng.uniform(-1, 1, 5)) / np.sqrt(2)
        text = " + ".join(f"{unparse(Const(complex(c)))}*z1^{k}" for k, c in enumerate(coeffs))
        f = ExprFunction.from_string(text, 1)
        dP = np.polynomial.polynomial.polyval(grid, np.polynomial.polynomial.polyder(coeffs))
        oracle = abs(coeffs[0]) + np.max(np.abs(dP) * (1 - np.abs(grid) ** 2) ** 2)
        est = bloch_norm(f, 2.0, BUDGET).norm
        # both are lower bounds of the true sup; they must agree closely
        assert abs(est - oracle) <= 1e-3 * oracle
        pts = rng.uniform(0, 1, (10_000, 1)) ** 0.25 * np.exp(2j * np.pi * rng.uniform(size=(10_000, 1)))
        assert check_growth_bound(f, 2.0, pts, norm=oracle).violations == 0


def test_growth_skipped_when_divergent():
    f = ExprFunction.from_string("ln(1 - z1)", 1)
    rep = check_growth_bound(f, 0.0, np.zeros((1, 1)), norm=DIVERGENT)
    assert not rep.holds and rep.skipped


# --- Hoelder estimate ------------------------------------------------------------


def test_holder_example():
    f = ExprFunction.from_string("z1", 1)
    rep = check_holder(f, 0.5, (np.array([[0.64]]), np.array([[0.0]])), norm=1.0)
    assert rep.holds and rep.max_ratio == pytest.approx(0.64 / 3.2)


def test_holder_identical_points():
    f = ExprFunction.from_string("z1^2 + z1", 1)
    Z = np.array([[0.3 + 0.1j], [-0.5j]])
    rep = check_holder(f, 0.25, np.stack([Z, Z], axis=1), norm=3.0)
    assert rep.holds and rep.max_ratio == 0.0


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_holder_rejects_p(p):
    f = ExprFunction.from_string("z1", 1)
    with pytest.raises(ValueError, match="p < 1"):
        check_holder(f, p, (np.zeros((1, 1)), np.zeros((1, 1))), norm=1.0)


def test_holder_random_rational():
    rng = np.random.default_rng(5)
    done = 0
    while done < 3:
        a, b = rng.uniform(-0.9, 0.9, 2)
        text = f"z1/(1 - ({a})*z1) + ({b})*z1^2"
        f = ExprFunction.from_string(text, 1)
        nrm = bloch_norm(f, 0.5, SampleBudget(base_count=100_000)).norm
        if nrm > 2:
            continue  # rejection sample to norm <= 2
        Z = rng.uniform(0, 1, (10_000, 1)) ** 0.5 * np.exp(2j * np.pi * rng.uniform(size=(10_000, 1)))
        W = rng.uniform(0, 1, (10_000, 1)) ** 0.5 * np.exp(2j * np.pi * rng.uniform(size=(10_000, 1)))
        assert check_holder(f, 0.5, (Z, W), norm=nrm).violations == 0
        done += 1
