import cmath
import dataclasses
import re

import numpy as np
import pytest

from blochlab.sampling import SampleBudget
from blochlab.symbolic import Div, Expr, Ln, RealPow, eval_jet

SMALL = SampleBudget(base_count=4000, shells=12, refine_rounds=1, seed=42)

_IMAG = re.compile(r"(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+)i\b")


def to_python(text: str) -> str:
    """Grammar string -> Python expression over z1..zn (independent evaluator)."""
    s = _IMAG.sub(r"(\1j)", text)
    s = re.sub(r"\bi\b", "1j", s)
    return s.replace("^", "**")


def oracle_eval(text: str, z) -> complex:
    """Evaluate with plain Python complex arithmetic and cmath."""
    env = {f"z{k + 1}": complex(v) for k, v in enumerate(np.atleast_1d(z))}
    env["ln"] = cmath.log
    return complex(eval(to_python(text), {"__builtins__": {}}, env))


def central_diff(text: str, z, k: int, h: float = 1e-6, direction: complex = 1.0) -> complex:
    z = np.array(np.atleast_1d(z), dtype=complex)
    e = np.zeros_like(z)
    e[k] = h * direction
    return (oracle_eval(text, z + e) - oracle_eval(text, z - e)) / (2 * h * direction)


def random_expr(rng: np.random.Generator, n: int, depth: int = 3) -> str:
    """Random holomorphic expression; denominators and log / power bases are
    shifted away from zero and the negative real axis on the unit polydisk
    for shallow trees, and callers skip the rare evaluation failures."""
    if depth == 0 or rng.uniform() < 0.25:
        if rng.uniform() < 0.6:
            return f"z{rng.integers(1, n + 1)}"
        c = complex(*np.round(rng.uniform(-1, 1, 2), 3))
        return f"({c.real} + {c.imag}i)" if c.imag >= 0 else f"({c.real} - {-c.imag}i)"
    a = random_expr(rng, n, depth - 1)
    b = random_expr(rng, n, depth - 1)
    op = rng.integers(0, 8)
    if op == 0:
        return f"({a} + {b})"
    if op == 1:
        return f"({a} - {b})"
    if op == 2:
        return f"({a} * {b})"
    if op == 3:
        return f"({a} / (4 + 0.5*{b}))"
    if op == 4:
        return f"({a})^{rng.integers(0, 4)}"
    if op == 5:
        return f"(3 + 0.5*{a})^{np.round(rng.uniform(-1.5, 1.5), 3)}"
    if op == 6:
        return f"ln(4/(1 - 0.5*{a}))"
    return f"(-{a})"


def _subnodes(e):
    yield e
    for f in dataclasses.fields(e):
        child = getattr(e, f.name)
        if isinstance(child, Expr):
            yield from _subnodes(child)


def holomorphic_near(expr: Expr, z) -> bool:
    """True if every log / real-power argument at ``z`` has positive real part
    and every denominator is not small, so finite differences are meaningful."""
    for node in _subnodes(expr):
        if isinstance(node, (Ln, RealPow)):
            arg = node.arg if isinstance(node, Ln) else node.base
            if eval_jet(arg, z).value.real <= 1e-3:
                return False
        if isinstance(node, Div) and abs(eval_jet(node.right, z).value) < 1e-3:
            return False
    return True


def random_point(rng: np.random.Generator, n: int, rmax: float = 0.95) -> np.ndarray:
    r = rmax * np.sqrt(rng.uniform(size=n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))


# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_budget():
    return SMALL
