"""Scalar expressions over a coordinate chart.

Expressions are kept in an expanded normal form: a mapping from monomials to
exact rational coefficients.  A monomial is a sorted product of atoms raised to
nonzero integer powers, where an atom is a chart variable, one of the unary
functions ``sin``, ``cos``, ``exp``, ``ln`` applied to an expression, or the
reciprocal of a multi-term expression.  On the polynomial subclass (variables
only, nonnegative powers) this normal form is unique, so equality there is
exact.  Everything else falls back to sampled comparison.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .report import Verdict

TIME = "t"
FUNCTIONS = ("sin", "cos", "exp", "ln")
DEFAULT_SEED = 20240601
SAMPLE_LOW, SAMPLE_HIGH = -2.0, 2.0


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, pos: int | None = None, source: str | None = None):
        self.pos = pos
        self.source = source
        if pos is not None:
            message = f"{message} at position {pos}"
        super().__init__(message)


class UnknownIdentifier(ParseError):
    pass


class DomainError(ExprError, ArithmeticError):
    pass


class UnboundVariable(ExprError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


def _natural_key(name: str):
    return tuple((0, int(p)) if p.isdigit() else (1, p) for p in re.findall(r"\d+|\D+", name))


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names of a single global chart.

    ``cotangent`` charts are laid out as ``q1..qn, p1..pn``.  A time-extended
    chart carries the time symbol as its first coordinate.
    """

    coords: tuple[str, ...]
    cotangent: bool = False
    time_extended: bool = False

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        if not coords:
            raise ValueError("chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        for c in coords:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", c) or c in FUNCTIONS:
                raise ValueError(f"invalid coordinate name {c!r}")
        if self.time_extended:
            if coords[0] != TIME:
                raise ValueError("time-extended chart must start with t")
        elif TIME in coords:
            raise ValueError("t is reserved for time")
        if self.cotangent:
            space = coords[1:] if self.time_extended else coords
            if len(space) % 2:
                raise ValueError("cotangent chart must have even dimension")

    @classmethod
    def euclidean(cls, n: int, prefix: str = "x") -> "Chart":
        return cls(tuple(f"{prefix}{i}" for i in range(1, n + 1)))

    @classmethod
    def cotangent_chart(cls, n: int) -> "Chart":
        return cls(tuple(f"q{i}" for i in range(1, n + 1)) + tuple(f"p{i}" for i in range(1, n + 1)),
                   cotangent=True)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def space_coords(self) -> tuple[str, ...]:
        return self.coords[1:] if self.time_extended else self.coords

    @property
    def base_dim(self) -> int:
        if not self.cotangent:
            raise ValueError("not a cotangent chart")
        return len(self.space_coords) // 2

    def base(self) -> "Chart":
        """The q-coordinates of a cotangent chart."""
        return Chart(self.space_coords[: self.base_dim])

    def extended(self) -> "Chart":
        if self.time_extended:
            return self
        return Chart((TIME,) + self.coords, cotangent=self.cotangent, time_extended=True)

    def spatial(self) -> "Chart":
        if not self.time_extended:
            return self
        return Chart(self.coords[1:], cotangent=self.cotangent)

    def index(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a coordinate of {self.coords}") from None

    def allows(self, name: str, allow_time: bool = True) -> bool:
        return name in self.coords or (allow_time and name == TIME)

    def to_json(self):
        return {"coordinates": list(self.coords), "cotangent": self.cotangent}


# ---------------------------------------------------------------------------
# atoms


@dataclass(frozen=True)
class Var:
    name: str

    def key(self):
        return (0, _natural_key(self.name))


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"

    def key(self):
        return (1, self.name, self.arg.key())


@dataclass(frozen=True)
class Recip:
    """``1/arg`` for an ``arg`` with more than one term."""

    arg: "Expr"

    def key(self):
        return (2, self.arg.key())


Atom = Var | Func | Recip
Monomial = tuple  # tuple[tuple[Atom, int], ...] sorted by atom key


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    powers = dict(a)
    for atom, k in b:
        e = powers.get(atom, 0) + k
        if e:
            powers[atom] = e
        else:
            del powers[atom]
    return tuple(sorted(powers.items(), key=lambda item: item[0].key()))


def _mono_key(m: Monomial):
    return tuple((atom.key(), k) for atom, k in m)


class Expr:
    """Immutable scalar expression in expanded normal form."""

    __slots__ = ("_terms", "_hash", "_cache")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                if c:
                    clean[m] = Fraction(c)
        self._terms = clean
        self._hash = None
        self._cache = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def const(cls, value) -> "Expr":
        value = _to_fraction(value)
        return cls({(): value}) if value else ZERO

    @classmethod
    def var(cls, name: str) -> "Expr":
        return cls({((Var(name), 1),): Fraction(1)})

    @classmethod
    def coerce(cls, value) -> "Expr":
        if isinstance(value, Expr):
            return value
        return cls.const(value)

    # -- structure --------------------------------------------------------

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return self._terms

    def key(self):
        k = self._cache.get("key")
        if k is None:
            k = tuple(sorted((_mono_key(m), c) for m, c in self._terms.items()))
            self._cache["key"] = k
        return k

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Expr):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == Expr.const(other)._terms
        return NotImplemented

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._terms.get((), Fraction(0))

    def is_polynomial(self) -> bool:
        p = self._cache.get("poly")
        if p is None:
            p = all(isinstance(a, Var) and k > 0 for m in self._terms for a, k in m)
            self._cache["poly"] = p
        return p

    def atoms(self) -> set:
        return {a for m in self._terms for a, _ in m}

    def free_vars(self) -> frozenset[str]:
        fv = self._cache.get("fv")
        if fv is None:
            names = set()
            for m in self._terms:
                for a, _ in m:
                    if isinstance(a, Var):
                        names.add(a.name)
                    else:
                        names |= a.arg.free_vars()
            fv = frozenset(names)
            self._cache["fv"] = fv
        return fv

    def degree(self) -> int:
        if not self.is_polynomial():
            raise ValueError("degree is defined for polynomials only")
        return max((sum(k for _, k in m) for m in self._terms), default=0)

    def _single_term(self):
        if len(self._terms) == 1:
            return next(iter(self._terms.items()))
        return None

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not other._terms:
            return self
        if not self._terms:
            return other
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, 0) + c
        return Expr(terms)

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self._terms.items()})

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not self._terms or not other._terms:
            return ZERO
        terms: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                terms[m] = terms.get(m, 0) + c1 * c2
        return Expr(terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not other.is_constant():
            raise ExprError("division is only defined by nonzero constants")
        value = other.constant_value()
        if value == 0:
            raise DomainError("division by zero")
        return self * Expr.const(1 / value)

    def __pow__(self, k):
        if isinstance(k, Expr):
            if not k.is_constant() or k.constant_value().denominator != 1:
                raise ExprError("exponent must be an integer constant")
            k = int(k.constant_value())
        if not isinstance(k, int):
            raise ExprError("exponent must be an integer")
        if k == 0:
            return ONE
        if k == 1:
            return self
        if k > 0:
            single = self._single_term()
            if single is not None:
                m, c = single
                return Expr({tuple((a, e * k) for a, e in m): c ** k})
            result, base = ONE, self
            while k:
                if k & 1:
                    result = result * base
                k >>= 1
                if k:
                    base = base * base
            return result
        if not self._terms:
            raise DomainError("zero raised to a negative power")
        single = self._single_term()
        if single is not None:
            m, c = single
            mono = tuple((a, e * k) for a, e in m)
            return Expr({mono: c ** k})
        return Expr({((Recip(self), -k),): Fraction(1)})

    # -- calculus ---------------------------------------------------------

    def diff(self, name: str) -> "Expr":
        """Exact partial derivative with respect to the variable ``name``."""
        cache = self._cache.setdefault("diff", {})
        if name in cache:
            return cache[name]
        if name not in self.free_vars():
            cache[name] = ZERO
            return ZERO
        acc: dict = {}
        for m, c in self._terms.items():
            for idx, (atom, k) in enumerate(m):
                inner = _atom_diff(atom, name)
                if inner.is_zero():
                    continue
                rest = m[:idx] + ((atom, k - 1),) + m[idx + 1:] if k != 1 else m[:idx] + m[idx + 1:]
                rest = tuple(sorted(((a, e) for a, e in rest if e), key=lambda it: it[0].key()))
                for m2, c2 in inner._terms.items():
                    mono = _mono_mul(rest, m2)
                    acc[mono] = acc.get(mono, 0) + c * k * c2
        out = Expr(acc)
        cache[name] = out
        return out

    def subs(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        """Simultaneous substitution of variables by expressions."""
        mapping = {k: Expr.coerce(v) for k, v in mapping.items()}
        if not (self.free_vars() & mapping.keys()):
            return self
        atom_cache: dict = {}
        out = ZERO
        for m, c in self._terms.items():
            term = Expr.const(c)
            for atom, k in m:
                val = atom_cache.get(atom)
                if val is None:
                    val = _atom_subs(atom, mapping)
                    atom_cache[atom] = val
                term = term * (val ** k)
            out = out + term
        return out

    # -- evaluation -------------------------------------------------------

    def evaluate(self, env: Mapping[str, object]):
        """Numeric value at ``env``.

        Exact ``Fraction`` when the expression is polynomial and every bound
        value is rational; float otherwise.
        """
        exact = self.is_polynomial() and all(
            isinstance(env.get(v), (int, Fraction)) for v in self.free_vars()
        )
        total = Fraction(0) if exact else 0.0
        for m, c in self._terms.items():
            val = c if exact else float(c)
            for atom, k in m:
                a = _atom_eval(atom, env, exact)
                try:
                    val = val * (a ** k)
                except ZeroDivisionError:
                    raise DomainError(f"division by zero evaluating {_atom_str(atom)}") from None
            total = total + val
        if not exact:
            total = float(total)
        return total

    def compile(self, names: Sequence[str]):
        """Return a fast float function ``f(*values)`` with positional ``names``."""
        return compile_exprs([self], names, scalar=True)

    # -- printing ---------------------------------------------------------

    def __str__(self):
        s = self._cache.get("str")
        if s is None:
            s = _format(self)
            self._cache["str"] = s
        return s

    def __repr__(self):
        return f"Expr({str(self)!r})"


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ExprError("non-finite constant")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, np.integer):
        return Fraction(int(value))
    if isinstance(value, np.floating):
        return Fraction(float(value))
    raise TypeError(f"cannot make a constant from {value!r}")


def _coerce_or_none(value):
    if isinstance(value, Expr):
        return value
    try:
        return Expr.const(value)
    except TypeError:
        return None


ZERO = Expr()
ONE = Expr({(): Fraction(1)})


def const(value) -> Expr:
    return Expr.const(value)


def var(name: str) -> Expr:
    return Expr.var(name)


def _func(name: str, arg: Expr) -> Expr:
    arg = Expr.coerce(arg)
    if arg.is_constant():
        v = arg.constant_value()
        if name == "exp" and v == 0:
            return ONE
        if name == "sin" and v == 0:
            return ZERO
        if name == "cos" and v == 0:
            return ONE
        if name == "ln":
            if v <= 0:
                raise DomainError(f"ln of nonpositive constant {v}")
            if v == 1:
                return ZERO
    return Expr({((Func(name, arg), 1),): Fraction(1)})


def sin(e) -> Expr:
    return _func("sin", e)


def cos(e) -> Expr:
    return _func("cos", e)


def exp(e) -> Expr:
    return _func("exp", e)


def ln(e) -> Expr:
    return _func("ln", e)


def _atom_expr(atom) -> Expr:
    return Expr({((atom, 1),): Fraction(1)})


def _atom_diff(atom, name: str) -> Expr:
    if isinstance(atom, Var):
        return ONE if atom.name == name else ZERO
    du = atom.arg.diff(name)
    if du.is_zero():
        return ZERO
    if isinstance(atom, Recip):
        return -(_atom_expr(atom) ** 2) * du
    u = atom.arg
    if atom.name == "sin":
        return cos(u) * du
    if atom.name == "cos":
        return -sin(u) * du
    if atom.name == "exp":
        return _atom_expr(atom) * du
    if atom.name == "ln":
        return du * (u ** -1)
    raise AssertionError(atom)


def _atom_subs(atom, mapping) -> Expr:
    if isinstance(atom, Var):
        return mapping.get(atom.name, _atom_expr(atom))
    new_arg = atom.arg.subs(mapping)
    if isinstance(atom, Recip):
        return new_arg ** -1
    return _func(atom.name, new_arg)


_FLOAT_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


def _atom_eval(atom, env, exact):
    if isinstance(atom, Var):
        try:
            v = env[atom.name]
        except KeyError:
            raise UnboundVariable(f"unbound variable {atom.name!r}") from None
        if exact:
            return Fraction(v)
        return float(v)
    inner = atom.arg.evaluate(env)
    if isinstance(atom, Recip):
        if inner == 0:
            raise DomainError(f"division by zero in ({atom.arg})^(-1)")
        return 1 / float(inner)
    if atom.name == "ln":
        if inner <= 0:
            raise DomainError(f"ln of nonpositive value {float(inner)!r}")
        return math.log(float(inner))
    try:
        return _FLOAT_FUNCS[atom.name](float(inner))
    except OverflowError:
        raise DomainError(f"overflow in {atom.name}") from None


# ---------------------------------------------------------------------------
# printing and compilation


def _format_fraction(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _atom_str(atom) -> str:
    if isinstance(atom, Var):
        return atom.name
    if isinstance(atom, Func):
        return f"{atom.name}({atom.arg})"
    return f"({atom.arg})"


def _factor_str(atom, k) -> str:
    base = _atom_str(atom)
    if isinstance(atom, Recip):
        return f"{base}^({-k})" if k != 1 else f"{base}^(-1)"
    if k == 1:
        return base
    if k < 0:
        return f"{base}^({k})"
    return f"{base}^{k}"


def _print_order(m: Monomial):
    deg = sum(k for _, k in m)
    return (deg, _mono_key(m))


def _format(e: Expr) -> str:
    if not e.terms:
        return "0"
    parts = []
    for m in sorted(e.terms, key=_print_order):
        c = e.terms[m]
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        factors = [_factor_str(a, k) for a, k in m]
        if not factors:
            body = _format_fraction(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_format_fraction(mag)] + factors)
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def _py_source(e: Expr, names: Mapping[str, str]) -> str:
    if not e.terms:
        return "0.0"
    pieces = []
    for m, c in e.terms.items():
        factors = [repr(float(c))]
        for atom, k in m:
            if isinstance(atom, Var):
                base = names[atom.name]
            elif isinstance(atom, Func):
                fn = {"sin": "_sin", "cos": "_cos", "exp": "_exp", "ln": "_ln"}[atom.name]
                base = f"{fn}({_py_source(atom.arg, names)})"
            else:
                base = f"_recip({_py_source(atom.arg, names)})"
            factors.append(base if k == 1 else f"{base}**{k}")
        pieces.append("*".join(factors))
    return "(" + " + ".join(pieces) + ")"


def _safe_ln(x):
    if x <= 0:
        raise DomainError(f"ln of nonpositive value {x!r}")
    return math.log(x)


def _safe_recip(x):
    if x == 0:
        raise DomainError("division by zero")
    return 1.0 / x


_COMPILE_NS = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp, "_ln": _safe_ln, "_recip": _safe_recip}


def compile_exprs(exprs: Sequence[Expr], names: Sequence[str], scalar: bool = False):
    """Compile expressions into one float function of the positional ``names``.

    Returns ``f(*values) -> tuple`` (or a single float when ``scalar``).  Any
    variable outside ``names`` raises :class:`UnboundVariable` at compile time.
    """
    alias = {n: f"_a{i}" for i, n in enumerate(names)}
    for e in exprs:
        missing = e.free_vars() - alias.keys()
        if missing:
            raise UnboundVariable(f"unbound variables {sorted(missing)}")
    body = ", ".join(_py_source(e, alias) for e in exprs)
    args = ", ".join(alias[n] for n in names)
    if scalar:
        src = f"lambda {args}: {body}"
    else:
        src = f"lambda {args}: ({body}{',' if len(exprs) == 1 else ''})"
    fn = eval(src, dict(_COMPILE_NS))  # noqa: S307 - source is generated from the AST

    def wrapped(*values):
        try:
            return fn(*values)
        except ZeroDivisionError:
            raise DomainError("division by zero") from None
        except OverflowError:
            raise DomainError("overflow") from None

    return wrapped


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos:].lstrip()[:1]!r}", pos, source)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        text = m.group(kind)
        if kind == "op" and text == "**":
            text = "^"
        tokens.append((kind, text, start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, chart: Chart | None, allow_time: bool, names: Iterable[str] | None):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.chart = chart
        self.allow_time = allow_time
        self.names = set(names) if names is not None else None

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, t, pos = self.take()
        if t != text:
            raise ParseError(f"expected {text!r} but found {t or 'end of input'!r}", pos, self.source)

    def parse(self) -> Expr:
        e = self.expr()
        kind, t, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {t!r}", pos, self.source)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op, pos = self.take()[1:]
            rhs = self.unary()
            if op == "*":
                e = e * rhs
            else:
                if not rhs.is_constant():
                    raise ParseError("division is only allowed by nonzero constants", pos, self.source)
                if rhs.constant_value() == 0:
                    raise ParseError("division by zero", pos, self.source)
                e = e / rhs
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            _, _, pos = self.take()
            exponent = self.unary()
            if not exponent.is_constant() or exponent.constant_value().denominator != 1:
                raise ParseError("exponent must be an integer constant", pos, self.source)
            try:
                return base ** int(exponent.constant_value())
            except ExprError as exc:
                raise ParseError(str(exc), pos, self.source) from None
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Expr.const(Fraction(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                try:
                    return _func(text, arg)
                except DomainError as exc:
                    raise ParseError(str(exc), pos, self.source) from None
            if text == TIME and not self.allow_time:
                raise ParseError("time variable t is not allowed here", pos, self.source)
            if not self._declared(text):
                raise UnknownIdentifier(f"unknown identifier {text!r}", pos, self.source)
            return Expr.var(text)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos, self.source)

    def _declared(self, name: str) -> bool:
        if name == TIME:
            return self.allow_time
        if self.names is not None and name in self.names:
            return True
        if self.chart is not None and name in self.chart.coords:
            return True
        return False


def parse(source: str, chart: Chart | None = None, allow_time: bool = True,
          names: Iterable[str] | None = None) -> Expr:
    """Parse infix ``source`` into an expression over ``chart`` (and ``t``).

    ``names`` declares extra admissible variables (used for base charts and
    coefficient functions).
    """
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0, source if isinstance(source, str) else None)
    return _Parser(source, chart, allow_time, names).parse()


def as_expr(value, chart: Chart | None = None, allow_time: bool = True) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value, chart, allow_time)
    return Expr.const(value)


# ---------------------------------------------------------------------------
# differentiation / evaluation front ends


def differentiate(e: Expr, name: str, chart: Chart | None = None) -> Expr:
    if chart is not None and not chart.allows(name):
        raise KeyError(f"{name!r} is neither a coordinate of {chart.coords} nor t")
    return e.diff(name)


def evaluate(e: Expr, point=None, t=None, chart: Chart | None = None):
    """Evaluate ``e`` at a point.

    ``point`` is a mapping of names to values, or a sequence aligned with
    ``chart.coords``.
    """
    env = make_env(point, t, chart)
    return e.evaluate(env)


def make_env(point, t=None, chart: Chart | None = None) -> dict:
    if point is None:
        env = {}
    elif isinstance(point, Mapping):
        env = dict(point)
    else:
        if chart is None:
            raise ValueError("a chart is needed to bind a positional point")
        values = list(point)
        if len(values) != chart.dim:
            raise ValueError(f"point has {len(values)} entries, chart has dimension {chart.dim}")
        env = dict(zip(chart.coords, values))
    if t is not None:
        env[TIME] = t
    return env


# ---------------------------------------------------------------------------
# equality


def sample_rng(seed: int | None = None) -> np.random.Generator:
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def expr_equal(a: Expr, b: Expr, samples: int = 32, tol: float = 1e-10, seed: int | None = None) -> Verdict:
    """Exact comparison on polynomials, sampled comparison elsewhere."""
    a, b = Expr.coerce(a), Expr.coerce(b)
    diff = a - b
    if diff.is_zero():
        return Verdict(True, "exact", residual=0.0)
    if a.is_polynomial() and b.is_polynomial():
        return Verdict(False, "exact", residual=None, details={"difference": str(diff)})
    seed = DEFAULT_SEED if seed is None else seed
    rng = sample_rng(seed)
    names = sorted(a.free_vars() | b.free_vars(), key=_natural_key)
    worst = 0.0
    used = 0
    attempts = 0
    while used < samples and attempts < samples * 20:
        attempts += 1
        env = {n: float(v) for n, v in zip(names, rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, len(names)))}
        try:
            va, vb = a.evaluate(env), b.evaluate(env)
        except DomainError:
            continue
        used += 1
        worst = max(worst, abs(va - vb) / max(1.0, abs(va), abs(vb)))
        if not _close(va, vb, tol):
            return Verdict(False, "sampled", residual=worst, seed=seed, samples=used, tolerance=tol,
                           details={"point": env})
    if used == 0:
        raise DomainError("no admissible sample points for comparison")
    return Verdict(True, "sampled", residual=worst, seed=seed, samples=used, tolerance=tol)


def is_zero(e: Expr, samples: int = 32, tol: float = 1e-10, seed: int | None = None) -> Verdict:
    return expr_equal(e, ZERO, samples=samples, tol=tol, seed=seed)


# ---------------------------------------------------------------------------
# random polynomials (test and acceptance fixtures)


def random_polynomial(names: Sequence[str], rng: np.random.Generator, max_degree: int = 3,
                      n_terms: int = 4, coeff_range: int = 3, nonzero: bool = True) -> Expr:
    """A random polynomial with small integer coefficients."""
    while True:
        e = ZERO
        for _ in range(n_terms):
            c = int(rng.integers(-coeff_range, coeff_range + 1))
            if c == 0:
                continue
            deg = int(rng.integers(0, max_degree + 1))
            mono = Expr.const(c)
            for _ in range(deg):
                mono = mono * Expr.var(names[int(rng.integers(0, len(names)))])
            e = e + mono
        if not nonzero or not e.is_zero():
            return e
