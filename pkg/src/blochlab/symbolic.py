"""Holomorphic expressions on the unit polydisk.

Expressions in ``z1..zn`` are parsed into a small immutable AST and evaluated
by forward-mode propagation of first-order jets (value plus the ``n`` complex
partials).  Evaluation is vectorised: a batch of points ``(N, n)`` yields
values of shape ``(N,)`` and partials of shape ``(N, n)``.

Grammar (whitespace insignificant)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := base ('^' ['-' | '+'] NUMBER)?
    base     := NUMBER | NUMBER 'i' | 'i' | 'z' DIGITS
              | '(' expr ')' | 'ln' '(' expr ')'

An exponent written with digits only (``^3``) is an integer power; anything
else (``^0.5``, ``^-1``, ``^2e0``) is a real power evaluated on the principal
branch as ``exp(a * ln w)``.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import Protocol, Sequence, Union, runtime_checkable

import numpy as np

POLE_GUARD = 1e-14
LOG_GUARD = 1e-300
# |Im w| / |w| below this on the negative real axis counts as "near the cut"
BRANCH_RISK = 1e-12


class ParseError(ValueError):
    """Syntax error; ``position`` is the 0-based offset into the source text."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        where = f" at position {position}"
        if text:
            where += f"\n  {text}\n  {' ' * position}^"
        super().__init__(message + where)


class VariableIndexError(ParseError):
    pass


class UnknownFunctionError(ParseError):
    pass


class EvaluationError(ArithmeticError):
    """Raised during jet evaluation; ``witness`` is the offending point."""

    def __init__(self, message: str, witness=None):
        self.witness = None if witness is None else np.asarray(witness)
        if witness is not None:
            message = f"{message} (witness z = {_fmt_point(self.witness)})"
        super().__init__(message)


class PoleError(EvaluationError):
    pass


class BranchError(EvaluationError):
    pass


class NonFiniteError(EvaluationError):
    pass


class BranchWarning(RuntimeWarning):
    pass


def _fmt_point(z) -> str:
    z = np.atleast_1d(z)
    return "(" + ", ".join(f"{c.real:.6g}{c.imag:+.6g}i" for c in z) + ")"


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base class of expression nodes.  Nodes are frozen dataclasses."""

    __slots__ = ()

    def __str__(self) -> str:
        return unparse(self)


@dataclass(frozen=True)
class Const(Expr):
    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("variable index must be >= 1")


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IntPow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("integer power exponent must be >= 0")


@dataclass(frozen=True)
class RealPow(Expr):
    base: Expr
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "exponent", float(self.exponent))
        if not math.isfinite(self.exponent):
            raise ValueError("real power exponent must be finite")


@dataclass(frozen=True)
class Ln(Expr):
    arg: Expr


_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def max_index(expr: Expr) -> int:
    """Largest variable index appearing in ``expr`` (0 for constants)."""
    match expr:
        case Var(index=k):
            return k
        case Const():
            return 0
        case Neg(arg=a) | Ln(arg=a) | IntPow(base=a) | RealPow(base=a):
            return max_index(a)
        case Add(l, r) | Sub(l, r) | Mul(l, r) | Div(l, r):
            return max(max_index(l), max_index(r))
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9_]))?
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, imag, ident, op, end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        if m.group("num") is not None:
            kind = "imag" if m.group("imag") else "num"
            toks.append(_Tok(kind, m.group("num"), pos))
        elif m.group("ident") is not None:
            toks.append(_Tok("ident", m.group("ident"), pos))
        elif m.group("op") is not None:
            toks.append(_Tok("op", m.group("op"), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=ParseError):
        tok = tok or self.tok
        return cls(msg, tok.pos, self.text)

    def accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == op:
            self.i += 1
            return True
        return False

    def expect(self, op: str):
        if not self.accept(op):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {op!r}, found {found!r}")

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected token {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = Add(e, self.term())
            elif self.accept("-"):
                e = Sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = Mul(e, self.unary())
            elif self.accept("/"):
                e = Div(e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.base()
        if not self.accept("^"):
            return base
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        tok = self.tok
        if tok.kind != "num":
            raise self.error("exponent must be a real number literal")
        self.i += 1
        if tok.text.isdigit() and sign > 0:
            return IntPow(base, int(tok.text))
        return RealPow(base, sign * float(tok.text))

    def base(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "imag":
            self.i += 1
            return Const(complex(0.0, float(tok.text)))
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name == "i":
                return Const(1j)
            if name == "ln":
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return Ln(e)
            m = re.fullmatch(r"z(\d+)", name)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n:
                    raise self.error(
                        f"variable {name} out of range for n={self.n}", tok, VariableIndexError
                    )
                return Var(k)
            if self.tok.kind == "op" and self.tok.text == "(":
                raise self.error(f"unknown function {name!r}", tok, UnknownFunctionError)
            raise self.error(f"unknown name {name!r}", tok, UnknownFunctionError)
        found = tok.text or "end of input"
        raise self.error(f"unexpected token {found!r}")


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` into an expression in the variables ``z1..zn``."""
    if n < 1:
        raise ValueError("dimension n must be >= 1")
    return _Parser(text, n).parse()


def _fmt_real(x: float) -> str:
    return repr(float(x))


def unparse(expr: Expr) -> str:
    """Serialize to a string that :func:`parse` maps back to an equal tree.

    Round-tripping is structural for every tree the parser can produce
    (literal constants are non-negative reals or non-negative multiples of i).
    Other constants are written as parenthesised arithmetic.
    """
    match expr:
        case Const(value=v):
            positive_zero_real = v.real == 0.0 and math.copysign(1.0, v.real) > 0
            if v.imag == 0.0 and (v.real > 0 or positive_zero_real):
                return _fmt_real(v.real)
            if positive_zero_real and v.imag > 0:
                return "i" if v.imag == 1.0 else _fmt_real(v.imag) + "i"
            re_part = _fmt_real(v.real)
            if v.imag == 0.0:
                return f"({re_part})"
            sign = "-" if v.imag < 0 else "+"
            return f"({re_part} {sign} {_fmt_real(abs(v.imag))}i)"
        case Var(index=k):
            return f"z{k}"
        case Neg(arg=a):
            return f"(-{unparse(a)})"
        case Ln(arg=a):
            return f"ln({unparse(a)})"
        case IntPow(base=b, exponent=e):
            return f"{_power_base(b)}^{e}"
        case RealPow(base=b, exponent=e):
            return f"{_power_base(b)}^{_fmt_real(e)}"
        case Add(l, r) | Sub(l, r) | Mul(l, r) | Div(l, r):
            return f"({unparse(l)} {_BINARY[type(expr)]} {unparse(r)})"
    raise TypeError(f"not an expression node: {expr!r}")


def _power_base(b: Expr) -> str:
    s = unparse(b)
    if isinstance(b, (Var, Ln, Const)) or s.startswith("("):
        return s
    return f"({s})"


# ---------------------------------------------------------------------------
# Jets


@dataclass(frozen=True)
class Jet:
    """Value and first partials of a holomorphic function.

    For a single point ``value`` is a complex scalar and ``partials`` has shape
    ``(n,)``; for a batch of ``N`` points the shapes are ``(N,)`` and ``(N, n)``.
    """

    value: np.ndarray
    partials: np.ndarray

    @property
    def n(self) -> int:
        return self.partials.shape[-1]


@runtime_checkable
class HolomorphicFunction(Protocol):
    """Anything with a dimension ``n`` and a vectorised ``jet(z)``."""

    n: int

    def jet(self, z) -> Jet: ...


def as_points(z, n: int | None = None) -> tuple[np.ndarray, bool]:
    """Coerce ``z`` to a complex ``(N, n)`` array; flag whether it was a single point."""
    arr = np.asarray(z, dtype=complex)
    single = arr.ndim <= 1
    arr = np.atleast_2d(arr) if arr.ndim == 1 else arr
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"points must have shape (n,) or (N, n), got {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise ValueError(f"dimension mismatch: expected n={n}, got {arr.shape[1]}")
    return arr, single


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def _check_log_arg(w: np.ndarray, Z: np.ndarray, what: str):
    aw = np.abs(w)
    small = aw < LOG_GUARD
    if small.any():
        i = _first_bad(small)
        raise BranchError(f"{what} argument has modulus {aw[i]:.3g} (log of zero)", Z[i])
    risk = (w.real < 0) & (np.abs(w.imag) <= BRANCH_RISK * aw)
    if risk.any():
        i = _first_bad(risk)
        warnings.warn(
            f"{what} argument {w[i]:.6g} lies on the principal branch cut "
            f"at z = {_fmt_point(Z[i])}",
            BranchWarning,
            stacklevel=4,
        )


def _jet(node: Expr, Z: np.ndarray):
    N, n = Z.shape
    match node:
        case Const(value=c):
            return np.full(N, c, dtype=complex), np.zeros((1, n), dtype=complex)
        case Var(index=k):
            if k > n:
                raise ValueError(f"variable z{k} out of range for n={n}")
            d = np.zeros((1, n), dtype=complex)
            d[0, k - 1] = 1.0
            return Z[:, k - 1].copy(), d
        case Neg(arg=a):
            v, d = _jet(a, Z)
            return -v, -d
        case Add(l, r):
            (u, du), (v, dv) = _jet(l, Z), _jet(r, Z)
            return u + v, du + dv
        case Sub(l, r):
            (u, du), (v, dv) = _jet(l, Z), _jet(r, Z)
            return u - v, du - dv
        case Mul(l, r):
            (u, du), (v, dv) = _jet(l, Z), _jet(r, Z)
            return u * v, u[:, None] * dv + v[:, None] * du
        case Div(l, r):
            (u, du), (v, dv) = _jet(l, Z), _jet(r, Z)
            small = np.abs(v) < POLE_GUARD
            if small.any():
                i = _first_bad(small)
                raise PoleError(f"denominator {unparse(r)} has modulus {abs(v[i]):.3g}", Z[i])
            q = u / v
            return q, (du - q[:, None] * dv) / v[:, None]
        case IntPow(base=b, exponent=m):
            v, d = _jet(b, Z)
            if m == 0:
                return np.ones(N, dtype=complex), np.zeros((1, n), dtype=complex)
            vm1 = v ** (m - 1)
            return vm1 * v, (m * vm1)[:, None] * d
        case RealPow(base=b, exponent=a):
            w, d = _jet(b, Z)
            _check_log_arg(w, Z, "real power")
            val = np.exp(a * np.log(w))
            return val, (a * val / w)[:, None] * d
        case Ln(arg=a):
            w, d = _jet(a, Z)
            _check_log_arg(w, Z, "ln")
            return np.log(w), d / w[:, None]
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(f: Expr, z) -> Jet:
    """Value and exact partials of ``f`` at ``z`` (one point or a batch)."""
    Z, single = as_points(z)
    with np.errstate(all="ignore"):
        v, d = _jet(f, Z)
    d = np.broadcast_to(d, (Z.shape[0], Z.shape[1])).copy()
    bad = ~(np.isfinite(v) & np.isfinite(d).all(axis=1))
    if bad.any():
        i = _first_bad(bad)
        raise NonFiniteError(f"non-finite jet for {unparse(f)}", Z[i])
    if single:
        return Jet(v[0], d[0])
    return Jet(v, d)


@dataclass(frozen=True)
class ExprFunction:
    """A parsed expression viewed as a :class:`HolomorphicFunction`."""

    expr: Expr
    n: int

    def __post_init__(self):
        if max_index(self.expr) > self.n:
            raise ValueError(f"expression uses z{max_index(self.expr)} but n={self.n}")

    @classmethod
    def from_string(cls, text: str, n: int) -> "ExprFunction":
        return cls(parse(text, n), n)

    def jet(self, z) -> Jet:
        Z, single = as_points(z, self.n)
        return eval_jet(self.expr, Z[0] if single else Z)

    def __str__(self) -> str:
        return unparse(self.expr)


FunctionLike = Union[str, Expr, HolomorphicFunction]


def as_function(f: FunctionLike, n: int) -> HolomorphicFunction:
    if isinstance(f, str):
        return ExprFunction.from_string(f, n)
    if isinstance(f, Expr):
        return ExprFunction(f, n)
    if getattr(f, "n", None) != n:
        raise ValueError(f"function has dimension {getattr(f, 'n', None)}, expected {n}")
    return f


# ---------------------------------------------------------------------------
# Self-map validation


@dataclass(frozen=True)
class SelfMapReport:
    ok: bool
    max_modulus: float
    witness: np.ndarray | None = None  # point attaining max_modulus
    witness_image: np.ndarray | None = None
    samples: int = 0

    @property
    def verdict(self) -> str:
        return "OK" if self.ok else "VIOLATION"


def phi_images(phi: Sequence[Expr], Z: np.ndarray) -> list[Jet]:
    return [eval_jet(e, Z) for e in phi]


def validate_self_map(phi: Sequence[Expr], samples) -> SelfMapReport:
    """Check ``max_l |phi_l(z)| < 1`` over ``samples``."""
    Z, _ = as_points(samples, len(phi))
    if Z.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    if (np.abs(Z) >= 1).any():
        raise ValueError("samples must lie in the open polydisk")
    W = np.column_stack([j.value for j in phi_images(phi, Z)])
    mods = np.abs(W).max(axis=1)
    i = int(np.argmax(mods))
    m = float(mods[i])
    return SelfMapReport(m < 1.0, m, Z[i].copy(), W[i].copy(), Z.shape[0])
