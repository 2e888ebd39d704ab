"""Scalar expressions of coordinates: parsing, printing and jet evaluation.

Grammar (infix, no implicit multiplication)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?            # right associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Supported functions: ``sin cos sinh cosh tanh exp ln sqrt arcsin arctanh``.
``pi`` is a built-in constant unless shadowed by a declared symbol.  The
exponent of ``^`` may depend on parameters but never on coordinates; a
non-integer exponent requires a strictly positive base.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .jets import Jet

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "tanh", "exp", "ln", "sqrt", "arcsin", "arctanh")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for parse-time errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownSymbolError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown symbol {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class UnsupportedFunctionError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unsupported function {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation left the domain of an elementary operation."""

    def __init__(self, node: "Expr", value, detail: str):
        super().__init__(f"{detail} in {node} (input {value!r})")
        self.node = node
        self.value = value


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


class Expr:
    """Immutable expression tree node.  Arithmetic operators build new trees."""

    __slots__ = ()

    # building ------------------------------------------------------------
    def __add__(self, other):
        return Binary("+", self, as_expr(other))

    def __radd__(self, other):
        return Binary("+", as_expr(other), self)

    def __sub__(self, other):
        return Binary("-", self, as_expr(other))

    def __rsub__(self, other):
        return Binary("-", as_expr(other), self)

    def __mul__(self, other):
        return Binary("*", self, as_expr(other))

    def __rmul__(self, other):
        return Binary("*", as_expr(other), self)

    def __truediv__(self, other):
        return Binary("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary("/", as_expr(other), self)

    def __pow__(self, other):
        return Binary("^", self, as_expr(other))

    def __neg__(self):
        return Unary("neg", self)

    # queries -------------------------------------------------------------
    def free_symbols(self) -> set[str]:
        raise NotImplementedError

    def depends_on_coords(self) -> bool:
        raise NotImplementedError

    def precedence(self) -> int:
        return _ATOM

    def __str__(self) -> str:
        return self.to_string()

    def to_string(self) -> str:
        raise NotImplementedError

    def __call__(self, point: Sequence[float], params: Mapping[str, float] | None = None,
                 coords: Sequence[str] | None = None) -> float:
        return evaluate(self, point, params, coords)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: float

    def free_symbols(self):
        return set()

    def depends_on_coords(self):
        return False

    def to_string(self):
        if self.value < 0:
            return f"({self.value!r})"
        return repr(float(self.value))

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Symbol(Expr):
    name: str
    kind: str = "coord"  # 'coord' or 'param'

    def free_symbols(self):
        return {self.name}

    def depends_on_coords(self):
        return self.kind == "coord"

    def to_string(self):
        return self.name

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.kind!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Unary(Expr):
    func: str
    arg: Expr

    def free_symbols(self):
        return self.arg.free_symbols()

    def depends_on_coords(self):
        return self.arg.depends_on_coords()

    def precedence(self):
        return _PREC["neg"] if self.func == "neg" else _ATOM

    def to_string(self):
        if self.func == "neg":
            inner = self.arg.to_string()
            if self.arg.precedence() < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{self.func}({self.arg.to_string()})"

    def __repr__(self):
        return f"Unary({self.func!r}, {self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def free_symbols(self):
        return self.left.free_symbols() | self.right.free_symbols()

    def depends_on_coords(self):
        return self.left.depends_on_coords() or self.right.depends_on_coords()

    def precedence(self):
        return _PREC[self.op]

    def to_string(self):
        p = _PREC[self.op]
        ls, rs = self.left.to_string(), self.right.to_string()
        if self.op == "^":
            if self.left.precedence() <= p:
                ls = f"({ls})"
            if self.right.precedence() < _ATOM:
                rs = f"({rs})"
            return f"{ls}^{rs}"
        if self.left.precedence() < p:
            ls = f"({ls})"
        if self.right.precedence() <= p:
            rs = f"({rs})"
        return f"{ls} {self.op} {rs}"

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Integral(Expr):
    """``offset + ∫_lower^var integrand(y) dy`` evaluated by adaptive quadrature.

    The integrand may depend on the single coordinate ``var`` and on
    parameters.  Derivatives come from the integrand itself, so the jet of an
    integral is as exact as the quadrature of its value.
    """

    integrand: Expr
    var: str
    lower: float = 0.0
    offset: float = 0.0

    def free_symbols(self):
        return (self.integrand.free_symbols() - {self.var}) | {self.var}

    def depends_on_coords(self):
        return True

    def to_string(self):
        return f"integral[{self.var}={self.lower!r}]({self.integrand.to_string()}) + {self.offset!r}"

    def __repr__(self):
        return f"Integral({self.integrand!r}, {self.var!r}, {self.lower!r}, {self.offset!r})"


QUAD_TOL = 1e-10


class QuadratureError(ArithmeticError):
    pass


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Const(float(x))
    raise TypeError(f"cannot convert {x!r} to Expr")


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise UnsupportedFunctionError(name, 0)
    return Unary(name, as_expr(arg))


def coord(name: str) -> Symbol:
    return Symbol(name, "coord")


def param(name: str) -> Symbol:
    return Symbol(name, "param")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, coords, params):
        self.text = text
        self.coords = set(coords)
        self.params = set(params)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] == "end":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {value!r}, found {what}", tok[2])
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            start = self.peek()[2]
            exponent = self.unary()
            if exponent.depends_on_coords():
                raise ExprSyntaxError("exponent must not depend on coordinates", start)
            return Binary("^", base, exponent)
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if val not in FUNCTIONS:
                    raise UnsupportedFunctionError(val, off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            if val in self.coords:
                return Symbol(val, "coord")
            if val in self.params:
                return Symbol(val, "param")
            if val in CONSTANTS:
                return Const(CONSTANTS[val])
            raise UnknownSymbolError(val, off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", off)


def parse(text: str, coords: Sequence[str] = (), params: Sequence[str] = ()) -> Expr:
    """Parse ``text`` into an :class:`Expr` over the declared symbols."""
    overlap = set(coords) & set(params)
    if overlap:
        raise ExprError(f"symbols declared as both coordinate and parameter: {sorted(overlap)}")
    return _Parser(text, coords, params).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _fn_derivs(name: str, v):
    """Function value and first three derivatives at v (numpy arrays)."""
    if name == "sin":
        s, c = np.sin(v), np.cos(v)
        return s, c, -s, -c
    if name == "cos":
        s, c = np.sin(v), np.cos(v)
        return c, -s, -c, s
    if name == "sinh":
        s, c = np.sinh(v), np.cosh(v)
        return s, c, s, c
    if name == "cosh":
        s, c = np.sinh(v), np.cosh(v)
        return c, s, c, s
    if name == "tanh":
        t = np.tanh(v)
        d = 1 - t * t
        return t, d, -2 * t * d, d * (6 * t * t - 2)
    if name == "exp":
        e = np.exp(v)
        return e, e, e, e
    if name == "ln":
        return np.log(v), 1 / v, -1 / v**2, 2 / v**3
    if name == "sqrt":
        s = np.sqrt(v)
        return s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)
    if name == "arcsin":
        w = 1 - v * v
        return np.arcsin(v), w**-0.5, v * w**-1.5, (1 + 2 * v * v) * w**-2.5
    if name == "arctanh":
        w = 1 - v * v
        return np.arctanh(v), 1 / w, 2 * v / w**2, (2 + 6 * v * v) / w**3
    raise UnsupportedFunctionError(name, 0)


def _check_unary(node: Unary, v: float):
    f = node.func
    if f in ("ln", "sqrt") and not v > 0:
        raise DomainError(node, v, f"{f} of non-positive argument")
    if f in ("arcsin", "arctanh") and not abs(v) < 1:
        raise DomainError(node, v, f"{f} of argument outside (-1, 1)")


def _pow_value(node, base, p: float):
    if float(p).is_integer():
        if p < 0 and base == 0:
            raise DomainError(node, base, "negative power of zero")
    elif not base > 0:
        raise DomainError(node, base, "non-integer power of non-positive base")


def _value(x):
    return float(x.value) if isinstance(x, Jet) else float(x)


def _eval(node: Expr, env: Mapping[str, object]):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Symbol):
        try:
            return env[node.name]
        except KeyError:
            raise DomainError(node, None, f"no value bound for symbol {node.name!r}") from None
    if isinstance(node, Unary):
        a = _eval(node.arg, env)
        if node.func == "neg":
            return -a
        v = _value(a)
        _check_unary(node, v)
        if isinstance(a, Jet):
            out = a.apply(*_fn_derivs(node.func, a.value))
        else:
            out = float(_fn_derivs(node.func, np.float64(v))[0])
        if not math.isfinite(_value(out)):
            raise DomainError(node, v, "non-finite result")
        return out
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if op == "+":
            out = a + b
        elif op == "-":
            out = a - b
        elif op == "*":
            out = a * b
        elif op == "/":
            if _value(b) == 0:
                raise DomainError(node, _value(a), "division by zero")
            out = a / b
        else:
            p = _value(b)
            base = _value(a)
            _pow_value(node, base, p)
            if isinstance(a, Jet):
                if float(p).is_integer() and p >= 0:
                    out = _int_power(a, int(p))
                else:
                    out = a.power(p)
            else:
                out = base**p
        if not math.isfinite(_value(out)):
            raise DomainError(node, _value(a), "non-finite result")
        return out
    if isinstance(node, Integral):
        return _eval_integral(node, env)
    raise TypeError(f"not an Expr: {node!r}")


def _eval_integral(node: Integral, env: Mapping[str, object]):
    from scipy.integrate import quad

    x = env.get(node.var)
    if x is None:
        raise DomainError(node, None, f"no value bound for symbol {node.var!r}")
    xv = _value(x)
    consts = {k: _value(v) for k, v in env.items() if k != node.var}

    def integrand(y):
        consts[node.var] = y
        return float(_eval(node.integrand, consts))

    value, err = quad(integrand, node.lower, xv, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    if not math.isfinite(value) or err > 1e3 * QUAD_TOL * (1 + abs(value)):
        raise QuadratureError(f"quadrature of {node.integrand} from {node.lower} to {xv} failed (error {err:.1e})")
    value += node.offset
    if not isinstance(x, Jet):
        return value
    consts[node.var] = Jet.variable(xv, 0, 1, max(x.order - 1, 0))
    inner = _eval(node.integrand, consts)
    if not isinstance(inner, Jet):
        inner = Jet.constant(float(inner), 1, max(x.order - 1, 0))
    d = [inner.parts[k].reshape(-1)[0] if k < len(inner.parts) else 0.0 for k in range(3)]
    return x.apply(value, d[0], d[1], d[2])


def _int_power(a: Jet, k: int) -> Jet:
    if k == 0:
        return Jet.constant(1.0, a.nvars, a.order)
    return a.power(float(k))


def _env(point, params, coords):
    env = dict(params or {})
    if coords is not None:
        if len(coords) != len(point):
            raise ValueError(f"point has {len(point)} entries, expected {len(coords)}")
        env.update({c: float(x) for c, x in zip(coords, point)})
    return env


def evaluate(e: Expr, point: Sequence[float], params: Mapping[str, float] | None = None,
             coords: Sequence[str] | None = None) -> float:
    """Plain floating point value of ``e``.

    ``coords`` names the entries of ``point``; when omitted ``point`` must be
    a mapping from coordinate names to values.
    """
    if coords is None:
        if not isinstance(point, Mapping):
            raise ValueError("coords are required when point is a sequence")
        env = dict(params or {})
        env.update(point)
    else:
        env = _env(point, params, coords)
    return float(_eval(e, env))


_NUMPY_FUNCS = {
    "sin": np.sin, "cos": np.cos, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "exp": np.exp, "ln": np.log, "sqrt": np.sqrt, "arcsin": np.arcsin, "arctanh": np.arctanh,
}


def _eval_array(node: Expr, env: Mapping[str, object]):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Symbol):
        try:
            return env[node.name]
        except KeyError:
            raise DomainError(node, None, f"no value bound for symbol {node.name!r}") from None
    if isinstance(node, Unary):
        a = _eval_array(node.arg, env)
        if node.func == "neg":
            return -a
        a = np.asarray(a, dtype=float)
        if node.func in ("ln", "sqrt"):
            a = np.where(a > 0, a, np.nan)
        elif node.func in ("arcsin", "arctanh"):
            a = np.where(np.abs(a) < 1, a, np.nan)
        return _NUMPY_FUNCS[node.func](a)
    if isinstance(node, Binary):
        a = np.asarray(_eval_array(node.left, env), dtype=float)
        b = np.asarray(_eval_array(node.right, env), dtype=float)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / np.where(b == 0, np.nan, b)
        integer = np.equal(np.mod(b, 1), 0)
        ok = np.where(integer, ~((b < 0) & (a == 0)), a > 0)
        return np.power(np.where(ok, a, np.nan), b)
    if isinstance(node, Integral):
        xs = np.atleast_1d(np.asarray(env[node.var], dtype=float))
        out = np.empty(xs.shape)
        scalars = {k: v for k, v in env.items() if np.ndim(v) == 0}
        for i, x in enumerate(xs.flat):
            try:
                out.flat[i] = _eval_integral(node, dict(scalars, **{node.var: float(x)}))
            except ArithmeticError:
                out.flat[i] = np.nan
        return out
    raise TypeError(f"not an Expr: {node!r}")


def evaluate_array(e: Expr, var: str, values, params: Mapping[str, float] | None = None) -> np.ndarray:
    """Vectorized value of a one-variable expression; NaN outside its domain."""
    xs = np.asarray(values, dtype=float)
    env = dict(params or {})
    env[var] = xs
    with np.errstate(all="ignore"):
        out = np.asarray(_eval_array(e, env), dtype=float)
    out = np.broadcast_to(out, xs.shape).copy()
    out[~np.isfinite(out)] = np.nan
    return out


def eval_jet3(e: Expr, point: Sequence[float] | Mapping[str, float],
              params: Mapping[str, float] | None = None,
              coords: Sequence[str] | None = None, order: int = 3) -> Jet:
    """Value and partial derivatives of ``e`` up to ``order`` at ``point``.

    The derivative axes follow ``coords`` (or the insertion order of a
    ``point`` mapping).
    """
    if coords is None:
        if not isinstance(point, Mapping):
            raise ValueError("coords are required when point is a sequence")
        coords = list(point)
        point = [point[c] for c in coords]
    n = len(coords)
    env = dict(params or {})
    for i, (c, x) in enumerate(zip(coords, point)):
        env[c] = Jet.variable(float(x), i, n, order)
    out = _eval(e, env)
    if not isinstance(out, Jet):
        out = Jet.constant(float(out), n, order)
    return out


Jet3 = Jet


# ---------------------------------------------------------------------------
# Symbolic differentiation (no simplification beyond dropping zeros)
# ---------------------------------------------------------------------------

ZERO = Const(0.0)
ONE = Const(1.0)


def _is_zero(e):
    return isinstance(e, Const) and e.value == 0.0


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Binary("*", a, b)


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Binary("+", a, b)


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Unary("neg", b)
    return Binary("-", a, b)


def diff(e: Expr, var: str) -> Expr:
    """Partial derivative of ``e`` with respect to coordinate ``var`` as a new tree."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Symbol):
        return ONE if e.name == var else ZERO
    if isinstance(e, Unary):
        da = diff(e.arg, var)
        if _is_zero(da):
            return ZERO
        u = e.arg
        f = e.func
        if f == "neg":
            return Unary("neg", da)
        outer = {
            "sin": lambda: Unary("cos", u),
            "cos": lambda: Unary("neg", Unary("sin", u)),
            "sinh": lambda: Unary("cosh", u),
            "cosh": lambda: Unary("sinh", u),
            "tanh": lambda: Binary("-", ONE, Binary("^", Unary("tanh", u), Const(2.0))),
            "exp": lambda: Unary("exp", u),
            "ln": lambda: Binary("/", ONE, u),
            "sqrt": lambda: Binary("/", Const(0.5), Unary("sqrt", u)),
            "arcsin": lambda: Binary("^", Binary("-", ONE, Binary("^", u, Const(2.0))), Const(-0.5)),
            "arctanh": lambda: Binary("/", ONE, Binary("-", ONE, Binary("^", u, Const(2.0)))),
        }[f]()
        return _mul(outer, da)
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = diff(a, var), diff(b, var)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if e.op == "/":
            num = _sub(_mul(da, b), _mul(a, db))
            if _is_zero(num):
                return ZERO
            return Binary("/", num, Binary("^", b, Const(2.0)))
        # exponent never depends on coordinates
        if _is_zero(da):
            return ZERO
        return _mul(_mul(b, Binary("^", a, Binary("-", b, ONE))), da)
    if isinstance(e, Integral):
        return e.integrand if e.var == var else ZERO
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

FD_STEPS = (1e-5, 1e-4, 2e-3)


def finite_difference_parts(fn, point: Sequence[float], order: int = 3,
                            steps: Sequence[float] = FD_STEPS) -> list[np.ndarray]:
    """Central finite-difference estimates of ``fn`` and its partials.

    ``fn`` maps a coordinate vector to an array.  Order ``k`` uses step
    ``steps[k-1]`` with the nested central stencil, i.e. the k-fold product of
    symmetric differences.  Only used as an independent cross-check.
    """
    x0 = np.asarray(point, dtype=float)
    n = len(x0)
    v0 = np.asarray(fn(x0), dtype=float)
    parts = [v0]
    eye = np.eye(n)
    if order >= 1:
        h = steps[0]
        d1 = np.empty(v0.shape + (n,))
        for i in range(n):
            d1[..., i] = (np.asarray(fn(x0 + h * eye[i])) - np.asarray(fn(x0 - h * eye[i]))) / (2 * h)
        parts.append(d1)
    if order >= 2:
        h = steps[1]
        d2 = np.empty(v0.shape + (n, n))
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for si in (1, -1):
                    for sj in (1, -1):
                        acc = acc + si * sj * np.asarray(fn(x0 + h * (si * eye[i] + sj * eye[j])))
                d2[..., i, j] = d2[..., j, i] = acc / (4 * h * h)
        parts.append(d2)
    if order >= 3:
        h = steps[2]
        d3 = np.empty(v0.shape + (n, n, n))
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    acc = 0.0
                    for si in (1, -1):
                        for sj in (1, -1):
                            for sk in (1, -1):
                                shift = h * (si * eye[i] + sj * eye[j] + sk * eye[k])
                                acc = acc + si * sj * sk * np.asarray(fn(x0 + shift))
                    val = acc / (8 * h**3)
                    for a, b, c in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                        d3[..., a, b, c] = val
        parts.append(d3)
    return parts


def eval_fd(e: Expr, point: Sequence[float], params: Mapping[str, float] | None,
            coords: Sequence[str], order: int = 3, steps: Sequence[float] = FD_STEPS) -> Jet:
    """Finite-difference counterpart of :func:`eval_jet3` (oracle only)."""
    return Jet(finite_difference_parts(lambda x: evaluate(e, x, params, coords), point, order, steps))
