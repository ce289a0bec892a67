"""A minimal closed-form expression language over x1, x2, x3.

Nodes are interned: building the same expression twice returns the same
object, so derivative caches and evaluation memos are shared across every
field that mentions a subexpression.  Supported: constants, the three
coordinates, ``+ - * /``, integer powers, ``sin``, ``cos`` and ``exp``.
"""

from __future__ import annotations

import ast
import itertools
import math
import weakref

import numpy as np

N_VARS = 3

_INTERN: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


class ExpressionSyntaxError(ValueError):
    """Parse failure; ``position`` is the 1-based column in the source text."""

    def __init__(self, message: str, text: str = "", position: int | None = None):
        self.text = text
        self.position = position
        self.message = message
        where = f" at column {position}" if position is not None else ""
        super().__init__(f"{message}{where}: {text!r}" if text else f"{message}{where}")


class Expr:
    __slots__ = ("_key", "_hash", "_deriv", "__weakref__")

    def __new__(cls, *args):
        key = (cls, *args)
        node = _INTERN.get(key)
        if node is None:
            node = object.__new__(cls)
            node._key = key
            node._hash = hash(tuple(id(a) if isinstance(a, Expr) else a for a in key))
            node._deriv = {}
            node._init(*args)
            _INTERN[key] = node
        return node

    def _init(self, *args):
        raise NotImplementedError

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __reduce__(self):
        return (type(self), self._key[1:])

    @property
    def children(self) -> tuple["Expr", ...]:
        return ()

    @property
    def is_const(self) -> bool:
        return False

    def diff(self, i: int) -> "Expr":
        """Partial derivative with respect to coordinate ``i`` (zero-based)."""
        d = self._deriv.get(i)
        if d is None:
            d = self._diff(i)
            self._deriv[i] = d
        return d

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1.0, other))

    def __rsub__(self, other):
        return add(other, mul(-1.0, self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return mul(-1.0, self)

    def __pow__(self, n):
        if isinstance(n, Const):
            n = n.value
        if float(n) != int(n):
            raise ValueError("only integer powers are supported")
        return power(self, int(n))

    def __repr__(self):
        return f"Expr({self})"

    def __str__(self):
        return _format(self, 0)

    def __call__(self, x):
        return evaluate([self], x)[0]


class Const(Expr):
    __slots__ = ("value",)

    def _init(self, value):
        self.value = value

    @property
    def is_const(self):
        return True

    def _diff(self, i):
        return ZERO


class Var(Expr):
    __slots__ = ("index",)

    def _init(self, index):
        self.index = index

    def _diff(self, i):
        return ONE if i == self.index else ZERO


class Add(Expr):
    __slots__ = ("terms",)

    def _init(self, terms):
        self.terms = terms

    @property
    def children(self):
        return self.terms

    def _diff(self, i):
        return add(*(t.diff(i) for t in self.terms))


class Mul(Expr):
    __slots__ = ("factors",)

    def _init(self, factors):
        self.factors = factors

    @property
    def children(self):
        return self.factors

    def _diff(self, i):
        fs = self.factors
        terms = []
        for k, f in enumerate(fs):
            df = f.diff(i)
            if df is not ZERO:
                terms.append(mul(*fs[:k], df, *fs[k + 1 :]))
        return add(*terms)


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def _init(self, base, exponent):
        self.base = base
        self.exponent = exponent

    @property
    def children(self):
        return (self.base,)

    def _diff(self, i):
        n = self.exponent
        return mul(float(n), power(self.base, n - 1), self.base.diff(i))


class Func(Expr):
    __slots__ = ("name", "arg")

    def _init(self, name, arg):
        self.name = name
        self.arg = arg

    @property
    def children(self):
        return (self.arg,)

    def _diff(self, i):
        da = self.arg.diff(i)
        if self.name == "sin":
            return mul(func("cos", self.arg), da)
        if self.name == "cos":
            return mul(-1.0, func("sin", self.arg), da)
        return mul(self, da)


FUNCTIONS = {"sin": (math.sin, np.sin), "cos": (math.cos, np.cos), "exp": (math.exp, np.exp)}

ZERO = Const(0.0)
ONE = Const(1.0)
X = tuple(Var(i) for i in range(N_VARS))


def const(value) -> Const:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"non-finite constant {value!r}")
    return Const(v + 0.0)  # folds -0.0


def to_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return const(obj)
    raise TypeError(f"cannot convert {type(obj).__name__} to an expression")


def _split_coeff(t: Expr) -> tuple[float, Expr]:
    if isinstance(t, Const):
        return t.value, ONE
    if isinstance(t, Mul) and isinstance(t.factors[0], Const):
        rest = t.factors[1:]
        return t.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return 1.0, t


def add(*terms) -> Expr:
    """Sum with flattening, constant folding and like-term collection."""
    coeffs: dict[Expr, float] = {}
    for t in terms:
        t = to_expr(t)
        for s in t.terms if isinstance(t, Add) else (t,):
            c, rest = _split_coeff(s)
            coeffs[rest] = coeffs.get(rest, 0.0) + c
    const_part = coeffs.pop(ONE, 0.0)
    out = [const(const_part)] if const_part != 0.0 else []
    for rest, c in coeffs.items():
        if c == 0.0:
            continue
        out.append(rest if c == 1.0 else mul(c, rest))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def mul(*factors) -> Expr:
    """Product with flattening, constant folding and power collection."""
    c = 1.0
    powers: dict[Expr, int] = {}
    for f in factors:
        f = to_expr(f)
        for g in f.factors if isinstance(f, Mul) else (f,):
            if isinstance(g, Const):
                c *= g.value
            elif isinstance(g, Pow):
                powers[g.base] = powers.get(g.base, 0) + g.exponent
            else:
                powers[g] = powers.get(g, 0) + 1
    if c == 0.0:
        return ZERO
    rest = [power(b, n) for b, n in powers.items() if n != 0]
    rest = [r for r in rest if r is not ONE]
    if not rest:
        return const(c)
    if c == 1.0 and len(rest) == 1:
        return rest[0]
    if c != 1.0:
        rest.insert(0, const(c))
    return Mul(tuple(rest))


def power(base, n: int) -> Expr:
    base = to_expr(base)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0.0 and n < 0:
            raise ZeroDivisionError("division by the constant zero")
        return const(base.value**n)
    if isinstance(base, Pow):
        return power(base.base, base.exponent * n)
    return Pow(base, n)


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    arg = to_expr(arg)
    if isinstance(arg, Const):
        return const(FUNCTIONS[name][0](arg.value))
    return Func(name, arg)


def sin(a):
    return func("sin", a)


def cos(a):
    return func("cos", a)


def exp(a):
    return func("exp", a)


def evaluate(exprs, x) -> list:
    """Evaluate several expressions at the points ``x`` (shape ``(N, 3)``).

    Returns one array of shape ``(N,)`` per expression.  Shared
    subexpressions are evaluated once.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    memo: dict[int, object] = {}

    def ev(e: Expr):
        r = memo.get(id(e))
        if r is not None:
            return r
        if isinstance(e, Const):
            r = e.value
        elif isinstance(e, Var):
            r = x[:, e.index]
        elif isinstance(e, Add):
            r = ev(e.terms[0])
            for t in e.terms[1:]:
                r = r + ev(t)
        elif isinstance(e, Mul):
            r = ev(e.factors[0])
            for f in e.factors[1:]:
                r = r * ev(f)
        elif isinstance(e, Pow):
            b = ev(e.base)
            r = b**e.exponent if e.exponent > 0 else 1.0 / b ** (-e.exponent)
        else:
            r = FUNCTIONS[e.name][1](ev(e.arg))
        memo[id(e)] = r
        return r

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return [np.broadcast_to(np.asarray(ev(e), dtype=float), (n,)) for e in exprs]


# --- printing ---------------------------------------------------------------

def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _format(e: Expr, prec: int) -> str:
    # prec: 0 sum context, 1 product context, 2 power base / unary
    if isinstance(e, Const):
        s = _fmt_const(e.value)
        return f"({s})" if e.value < 0 and prec > 0 else s
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Add):
        parts = [_format(e.terms[0], 0)]
        for t in e.terms[1:]:
            c, rest = _split_coeff(t)
            if c < 0:
                neg = const(-c) if rest is ONE else mul(-c, rest)
                parts.append(" - " + _format(neg, 1))
            else:
                parts.append(" + " + _format(t, 0))
        s = "".join(parts)
        return f"({s})" if prec > 0 else s
    if isinstance(e, Mul):
        fs = list(e.factors)
        lead = ""
        if isinstance(fs[0], Const) and fs[0].value < 0:
            lead = "-"
            fs = fs[1:] if fs[0].value == -1.0 else [const(-fs[0].value)] + fs[1:]
        s = lead + "*".join(_format(f, 1) for f in fs)
        return f"({s})" if prec > 1 or (lead and prec > 0) else s
    if isinstance(e, Pow):
        return f"{_format(e.base, 2)}^{e.exponent if e.exponent > 0 else f'({e.exponent})'}"
    return f"{e.name}({_format(e.arg, 0)})"


# --- parsing ----------------------------------------------------------------

_BINOPS = {
    ast.Add: lambda a, b: add(a, b),
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: mul(a, b),
    ast.Div: lambda a, b: a / b,
}
_NAMES = {"x1": X[0], "x2": X[1], "x3": X[2], "pi": None}


def parse(text: str) -> Expr:
    """Parse infix text such as ``"x1^2*sin(x2) - 3/(2 + x3)"``.

    ``^`` and ``**`` both denote integer powers.
    """
    if not isinstance(text, str):
        raise ExpressionSyntaxError("expression must be a string", str(text))
    # '^' binds like '**'; track offsets so errors point into the original text
    src, offsets = [], []
    for k, ch in enumerate(text):
        if ch == "^":
            src.append("**")
            offsets += [k, k]
        else:
            src.append(ch)
            offsets.append(k)
    offsets.append(len(text))
    src = "".join(src)

    def column(node_or_offset) -> int:
        off = node_or_offset if isinstance(node_or_offset, int) else node_or_offset.col_offset
        return offsets[min(max(off, 0), len(offsets) - 1)] + 1

    if not src.strip():
        raise ExpressionSyntaxError("empty expression", text, 1)
    lead = len(src) - len(src.lstrip())
    offsets = offsets[lead:]
    try:
        tree = ast.parse(src.lstrip(), mode="eval")
    except SyntaxError as err:
        raise ExpressionSyntaxError(f"invalid syntax ({err.msg})", text, column((err.offset or 1) - 1)) from None

    def conv(node) -> Expr:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return const(node.value)
        if isinstance(node, ast.Name):
            if node.id not in _NAMES:
                raise ExpressionSyntaxError(f"unknown name {node.id!r}", text, column(node))
            return _NAMES[node.id] or const(math.pi)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            a = conv(node.operand)
            return -a if isinstance(node.op, ast.USub) else a
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = conv(node.left)
                n = conv(node.right)
                if not isinstance(n, Const) or n.value != int(n.value):
                    raise ExpressionSyntaxError("exponent must be an integer constant", text, column(node.right))
                try:
                    return power(base, int(n.value))
                except ZeroDivisionError:
                    raise ExpressionSyntaxError("division by zero", text, column(node)) from None
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ExpressionSyntaxError("unsupported operator", text, column(node))
            try:
                return op(conv(node.left), conv(node.right))
            except ZeroDivisionError:
                raise ExpressionSyntaxError("division by zero", text, column(node)) from None
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionSyntaxError("unknown function", text, column(node))
            if len(node.args) != 1 or node.keywords:
                raise ExpressionSyntaxError(f"{node.func.id} takes exactly one argument", text, column(node))
            return func(node.func.id, conv(node.args[0]))
        raise ExpressionSyntaxError("unsupported construct", text, column(node))

    return conv(tree.body)


# --- arrays of expressions --------------------------------------------------

class ExprArray:
    """A tensor whose entries are expressions, e.g. a displacement field.

    Calling it at points returns an ``ndarray`` of shape ``(N,) + shape``;
    calling it at a :class:`~micromorph.dual.Dual` point set returns a Dual
    carrying the exact x-gradient.
    """

    __slots__ = ("shape", "entries", "_grad", "_const")

    def __init__(self, entries, shape=None):
        if isinstance(entries, ExprArray):
            flat, natural = list(entries.entries), entries.shape
        elif isinstance(entries, (list, tuple)):
            flat, natural = list(_flatten(entries)), _nested_shape(entries)
        else:
            arr = np.asarray(entries, dtype=object)
            flat, natural = list(arr.ravel()), arr.shape
        shape = tuple(natural if shape is None else shape)
        if len(flat) != int(np.prod(shape, dtype=int)):
            raise ValueError(f"{len(flat)} entries do not fill shape {shape}")
        self.shape = shape
        self.entries = tuple(to_expr(e) for e in flat)
        self._grad = None
        self._const = None

    @classmethod
    def constant(cls, values) -> "ExprArray":
        v = np.asarray(values, dtype=float)
        return cls([const(a) for a in v.ravel()], v.shape)

    @classmethod
    def zeros(cls, shape) -> "ExprArray":
        shape = tuple(shape)
        return cls([ZERO] * int(np.prod(shape, dtype=int)), shape)

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx) -> Expr:
        idx = idx if isinstance(idx, tuple) else (idx,)
        return self.entries[np.ravel_multi_index(idx, self.shape)]

    def __iter__(self):
        return iter(self.entries)

    def to_object_array(self) -> np.ndarray:
        arr = np.empty(len(self.entries), dtype=object)
        arr[:] = self.entries
        return arr.reshape(self.shape)

    @property
    def is_constant(self) -> bool:
        return all(e.is_const for e in self.entries)

    @property
    def is_zero(self) -> bool:
        return all(e is ZERO for e in self.entries)

    def constant_value(self) -> np.ndarray:
        if self._const is None:
            if not self.is_constant:
                raise ValueError("expression array is position dependent")
            self._const = np.array([e.value for e in self.entries]).reshape(self.shape)
        return self._const

    def grad(self) -> "ExprArray":
        """Exact gradient; the derivative index is appended as the last slot."""
        if self._grad is None:
            self._grad = ExprArray([e.diff(i) for e in self.entries for i in range(N_VARS)], self.shape + (N_VARS,))
        return self._grad

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if self.is_constant:
            return np.broadcast_to(self.constant_value(), (n,) + self.shape)
        vals = evaluate(self.entries, x)
        return np.stack(vals, axis=-1).reshape((n,) + self.shape)

    def __call__(self, x):
        from .dual import Dual

        if not isinstance(x, Dual):
            return self.evaluate(x)
        value = self.evaluate(x.v)
        if self.is_constant:
            return value
        g = self.grad().evaluate(x.v)
        xd = x.d.reshape(x.d.shape[:1] + (1,) * len(self.shape) + x.d.shape[1:])
        return Dual(value, np.einsum("...k,...kz->...z", g, xd))

    def map(self, fn) -> "ExprArray":
        return ExprArray([fn(e) for e in self.entries], self.shape)

    def transpose(self, axes=None) -> "ExprArray":
        return ExprArray(self.to_object_array().transpose(axes))

    def __add__(self, other):
        other = other if isinstance(other, ExprArray) else ExprArray(other, self.shape)
        return ExprArray([add(a, b) for a, b in zip(self.entries, other.entries)], self.shape)

    def __sub__(self, other):
        other = other if isinstance(other, ExprArray) else ExprArray(other, self.shape)
        return ExprArray([a - b for a, b in zip(self.entries, other.entries)], self.shape)

    def __neg__(self):
        return self.map(lambda e: -e)

    def scale(self, factor) -> "ExprArray":
        f = to_expr(factor)
        return self.map(lambda e: mul(f, e))

    def divergence(self) -> "ExprArray":
        """Symbolic divergence over the last slot."""
        *lead, n = self.shape
        if n != N_VARS:
            raise ValueError("last slot must have dimension 3")
        obj = self.to_object_array()
        out = [add(*(obj[idx + (i,)].diff(i) for i in range(N_VARS))) for idx in np.ndindex(*lead)]
        return ExprArray(out, tuple(lead))

    def to_strings(self):
        """Entries as text, nested like the shape."""
        return np.vectorize(str, otypes=[object])(self.to_object_array()).tolist()

    def __repr__(self):
        return f"ExprArray(shape={self.shape})"


def _nested_shape(items) -> tuple:
    if isinstance(items, (list, tuple)):
        return (len(items),) + (_nested_shape(items[0]) if items else ())
    return ()


def _flatten(items):
    for it in items:
        if isinstance(it, (list, tuple)):
            yield from _flatten(it)
        else:
            yield it


def sym_einsum(spec: str, *operands) -> ExprArray:
    """Einstein summation over expression arrays or numeric tensors.

    Numeric zero coefficients are skipped, so sparse constant tensors give
    short expressions.
    """
    ins, out = spec.replace(" ", "").split("->")
    ins = ins.split(",")
    if len(ins) != len(operands):
        raise ValueError("operand count does not match the subscripts")
    ops = [op.to_object_array() if isinstance(op, ExprArray) else np.asarray(op) for op in operands]
    letters = sorted(set("".join(ins)) | set(out))
    summed = [c for c in letters if c not in out]
    result = []
    for oidx in itertools.product(range(N_VARS), repeat=len(out)):
        env = dict(zip(out, oidx))
        terms = []
        for sidx in itertools.product(range(N_VARS), repeat=len(summed)):
            env.update(zip(summed, sidx))
            factors = []
            for sub, op in zip(ins, ops):
                f = op[tuple(env[c] for c in sub)]
                if isinstance(f, Expr):
                    if f is ZERO:
                        break
                elif f == 0:
                    break
                factors.append(f)
            else:
                terms.append(mul(*factors))
        result.append(add(*terms))
    return ExprArray(result, (N_VARS,) * len(out))
