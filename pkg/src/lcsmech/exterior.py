"""Differential forms and vector fields with expression coefficients.

A k-form stores coefficients only on strictly increasing index tuples, so two
forms are equal iff their coefficient tables are.  Indices are 0-based
positions in the chart's coordinate list.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import (ONE, TIME, ZERO, Chart, Expr, as_expr, compile_exprs, expr_equal, make_env,
                   parse)
from .report import Verdict, combine


class ChartMismatch(ValueError):
    pass


def _canonical(indices: Sequence[int]):
    """Sort ``indices`` returning (sorted tuple, sign), or (None, 0) on repeats."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    # insertion sort counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return tuple(idx), sign


class DifferentialForm:
    __slots__ = ("chart", "degree", "terms")

    def __init__(self, chart: Chart, degree: int, terms: Mapping[tuple, Expr] | None = None):
        if degree < 0:
            raise ValueError("negative degree")
        self.chart = chart
        self.degree = degree
        clean: dict = {}
        if terms and degree <= chart.dim:
            for indices, coeff in terms.items():
                indices = tuple(indices)
                if len(indices) != degree:
                    raise ValueError(f"index tuple {indices} does not have length {degree}")
                if any(i < 0 or i >= chart.dim for i in indices):
                    raise ValueError(f"index out of range in {indices}")
                key, sign = _canonical(indices)
                if key is None:
                    continue
                coeff = Expr.coerce(coeff)
                clean[key] = clean.get(key, ZERO) + (coeff if sign > 0 else -coeff)
        self.terms = {k: v for k, v in clean.items() if not v.is_zero()}

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "DifferentialForm":
        return cls(chart, degree)

    @classmethod
    def scalar(cls, chart: Chart, f) -> "DifferentialForm":
        return cls(chart, 0, {(): as_expr(f, chart)})

    @classmethod
    def basis(cls, chart: Chart, *coords) -> "DifferentialForm":
        """``dx^{i1} ∧ ... ∧ dx^{ik}`` from names or indices."""
        idx = tuple(chart.index(c) if isinstance(c, str) else int(c) for c in coords)
        return cls(chart, len(idx), {idx: ONE})

    @classmethod
    def one_form(cls, chart: Chart, coeffs: Sequence) -> "DifferentialForm":
        if len(coeffs) != chart.dim:
            raise ValueError(f"need {chart.dim} coefficients, got {len(coeffs)}")
        return cls(chart, 1, {(i,): as_expr(c, chart) for i, c in enumerate(coeffs)})

    @classmethod
    def parse(cls, chart: Chart, degree: int, spec: Mapping) -> "DifferentialForm":
        """Build from ``{"x1,x3": "expr", ...}`` (names or 0-based indices)."""
        terms = {}
        for key, coeff in spec.items():
            if isinstance(key, str):
                parts = [p.strip() for p in key.split(",") if p.strip()]
            else:
                parts = list(key)
            idx = tuple(chart.index(p) if isinstance(p, str) and not p.isdigit() else int(p) for p in parts)
            f = DifferentialForm(chart, degree, {idx: as_expr(coeff, chart)})
            for k, v in f.terms.items():
                terms[k] = terms.get(k, ZERO) + v
        return cls(chart, degree, terms)

    # -- access -----------------------------------------------------------

    def coeff(self, *indices) -> Expr:
        idx = tuple(self.chart.index(i) if isinstance(i, str) else i for i in indices)
        key, sign = _canonical(idx)
        if key is None:
            return ZERO
        c = self.terms.get(key, ZERO)
        return c if sign > 0 else -c

    def scalar_part(self) -> Expr:
        if self.degree != 0:
            raise ValueError("not a 0-form")
        return self.terms.get((), ZERO)

    def components(self) -> list[Expr]:
        """Coefficients of a 1-form in chart order."""
        if self.degree != 1:
            raise ValueError("components() needs a 1-form")
        return [self.terms.get((i,), ZERO) for i in range(self.chart.dim)]

    def is_zero(self) -> bool:
        return not self.terms

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.terms.values())

    def free_vars(self) -> frozenset:
        out = frozenset()
        for c in self.terms.values():
            out |= c.free_vars()
        return out

    # -- algebra ----------------------------------------------------------

    def _check(self, other: "DifferentialForm"):
        if not isinstance(other, DifferentialForm):
            raise TypeError(f"expected a form, got {type(other).__name__}")
        if other.chart != self.chart:
            raise ChartMismatch("forms live on different charts")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, ZERO) + v
        return DifferentialForm(self.chart, self.degree, terms)

    def __neg__(self):
        return DifferentialForm(self.chart, self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "DifferentialForm":
        f = as_expr(f, self.chart)
        return DifferentialForm(self.chart, self.degree, {k: f * v for k, v in self.terms.items()})

    def __mul__(self, f):
        if isinstance(f, DifferentialForm):
            return NotImplemented
        return self.scale(f)

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def __eq__(self, other):
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        return self.chart == other.chart and self.degree == other.degree and self.terms == other.terms

    def __hash__(self):
        return hash((self.chart, self.degree, frozenset(self.terms.items())))

    def map_coeffs(self, fn: Callable[[Expr], Expr]) -> "DifferentialForm":
        return DifferentialForm(self.chart, self.degree, {k: fn(v) for k, v in self.terms.items()})

    def subs(self, mapping) -> "DifferentialForm":
        return self.map_coeffs(lambda c: c.subs(mapping))

    # -- printing / serialization ----------------------------------------

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for idx in sorted(self.terms):
            basis = "^".join(f"d{self.chart.coords[i]}" for i in idx)
            c = str(self.terms[idx])
            if not idx:
                parts.append(f"({c})")
            elif c == "1":
                parts.append(basis)
            else:
                parts.append(f"({c})*{basis}")
        return " + ".join(parts)

    def __repr__(self):
        return f"DifferentialForm(degree={self.degree}, {self})"

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "terms": [{"indices": list(idx), "coeff": str(self.terms[idx])} for idx in sorted(self.terms)],
        }

    @classmethod
    def from_json(cls, chart: Chart, data: Mapping) -> "DifferentialForm":
        degree = int(data["degree"])
        terms = {}
        for item in data.get("terms", []):
            idx = tuple(chart.index(i) if isinstance(i, str) else int(i) for i in item["indices"])
            f = DifferentialForm(chart, degree, {idx: as_expr(item["coeff"], chart)})
            for k, v in f.terms.items():
                terms[k] = terms.get(k, ZERO) + v
        return cls(chart, degree, terms)


def form_equal(a: DifferentialForm, b: DifferentialForm, samples: int = 32, tol: float = 1e-10,
               seed: int | None = None) -> Verdict:
    """Coefficient-wise :func:`expr_equal`."""
    a._check(b)
    if a.degree != b.degree:
        return Verdict(False, "exact", details={"reason": "degree mismatch"})
    diff = a - b
    if diff.is_zero():
        return Verdict(True, "exact", residual=0.0)
    verdicts = []
    for idx in sorted(set(a.terms) | set(b.terms)):
        v = expr_equal(a.terms.get(idx, ZERO), b.terms.get(idx, ZERO), samples=samples, tol=tol, seed=seed)
        verdicts.append(v)
        if not v:
            return Verdict(False, v.method, residual=v.residual, seed=v.seed, samples=v.samples,
                           tolerance=v.tolerance, details={"indices": list(idx), "difference": str(diff)})
    worst = max((v.residual or 0.0) for v in verdicts)
    return Verdict(True, combine(verdicts), residual=worst, seed=seed if combine(verdicts) == "sampled" else None,
                   samples=samples if combine(verdicts) == "sampled" else None,
                   tolerance=tol if combine(verdicts) == "sampled" else None)


def form_is_zero(a: DifferentialForm, **kw) -> Verdict:
    return form_equal(a, DifferentialForm.zero(a.chart, a.degree), **kw)


# ---------------------------------------------------------------------------
# operations


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    a._check(b)
    k = a.degree + b.degree
    terms: dict = {}
    if k <= a.chart.dim:
        for ia, ca in a.terms.items():
            for ib, cb in b.terms.items():
                key, sign = _canonical(ia + ib)
                if key is None:
                    continue
                prod = ca * cb
                terms[key] = terms.get(key, ZERO) + (prod if sign > 0 else -prod)
    return DifferentialForm(a.chart, k, terms)


def wedge_power(a: DifferentialForm, m: int) -> DifferentialForm:
    out = DifferentialForm.scalar(a.chart, ONE)
    for _ in range(m):
        out = wedge(out, a)
    return out


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    """de Rham differential; on a time-extended chart ``t`` is differentiated too."""
    chart = a.chart
    terms: dict = {}
    if a.degree + 1 <= chart.dim:
        for idx, c in a.terms.items():
            for j, name in enumerate(chart.coords):
                if j in idx:
                    continue
                dc = c.diff(name)
                if dc.is_zero():
                    continue
                key, sign = _canonical((j,) + idx)
                terms[key] = terms.get(key, ZERO) + (dc if sign > 0 else -dc)
    return DifferentialForm(chart, a.degree + 1, terms)


d = exterior_derivative


def ldr_differential(a: DifferentialForm, theta: DifferentialForm) -> DifferentialForm:
    """Lichnerowicz-de Rham differential ``d a - theta ∧ a``."""
    if theta.degree != 1:
        raise ValueError(f"theta must be a 1-form, got degree {theta.degree}")
    a._check(theta)
    return exterior_derivative(a) - wedge(theta, a)


def form_matrix(a: DifferentialForm) -> list[list[Expr]]:
    """Antisymmetric matrix ``M[i][j] = a(∂_i, ∂_j)`` of a 2-form."""
    if a.degree != 2:
        raise ValueError("form_matrix needs a 2-form")
    n = a.chart.dim
    m = [[ZERO] * n for _ in range(n)]
    for (i, j), c in a.terms.items():
        m[i][j] = c
        m[j][i] = -c
    return m


def form_matrix_at(a: DifferentialForm, point, t=None, exact: bool = False) -> np.ndarray:
    """Pointwise value of :func:`form_matrix`.

    With ``exact`` the entries are ``Fraction`` (object array); this requires
    polynomial coefficients and rational coordinates.
    """
    if a.degree != 2:
        raise ValueError("form_matrix_at needs a 2-form")
    env = make_env(point, t, a.chart)
    n = a.chart.dim
    m = np.zeros((n, n), dtype=object if exact else float)
    if exact:
        m[:, :] = Fraction(0)
    for (i, j), c in a.terms.items():
        v = c.evaluate(env)
        if exact:
            v = Fraction(v)
        m[i, j] = v
        m[j, i] = -v
    return m


# ---------------------------------------------------------------------------
# vector fields


class VectorFieldExpr:
    """Vector field with one expression per chart coordinate.

    Components may depend on ``t`` (time-dependent field on a spatial chart).
    """

    __slots__ = ("chart", "components", "_fn")

    def __init__(self, chart: Chart, components: Sequence):
        comps = tuple(as_expr(c, chart) for c in components)
        if len(comps) != chart.dim:
            raise ValueError(f"field needs {chart.dim} components, got {len(comps)}")
        self.chart = chart
        self.components = comps
        self._fn = None

    @classmethod
    def coordinate(cls, chart: Chart, name) -> "VectorFieldExpr":
        i = chart.index(name) if isinstance(name, str) else int(name)
        return cls(chart, [ONE if j == i else ZERO for j in range(chart.dim)])

    @classmethod
    def zero(cls, chart: Chart) -> "VectorFieldExpr":
        return cls(chart, [ZERO] * chart.dim)

    @property
    def time_dependent(self) -> bool:
        return not self.chart.time_extended and any(TIME in c.free_vars() for c in self.components)

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.components)

    def __add__(self, other):
        if other.chart != self.chart:
            raise ChartMismatch("fields live on different charts")
        return VectorFieldExpr(self.chart, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return self + other.scale(-1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, f) -> "VectorFieldExpr":
        f = as_expr(f, self.chart)
        return VectorFieldExpr(self.chart, [f * c for c in self.components])

    def __mul__(self, f):
        return self.scale(f)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, VectorFieldExpr):
            return NotImplemented
        return self.chart == other.chart and self.components == other.components

    def __hash__(self):
        return hash((self.chart, self.components))

    def apply(self, f) -> Expr:
        """Directional derivative ``X(f)``."""
        f = as_expr(f, self.chart)
        out = ZERO
        for name, c in zip(self.chart.coords, self.components):
            if not c.is_zero():
                out = out + c * f.diff(name)
        return out

    def subs(self, mapping) -> "VectorFieldExpr":
        return VectorFieldExpr(self.chart, [c.subs(mapping) for c in self.components])

    def at(self, point, t=None) -> np.ndarray:
        """Float components at ``point`` (sequence aligned with the chart)."""
        if self._fn is None:
            self._fn = compile_exprs(self.components, (TIME,) + tuple(self.chart.coords)
                                     if not self.chart.time_extended else self.chart.coords)
        values = [float(v) for v in point]
        if self.chart.time_extended:
            return np.array(self._fn(*values), dtype=float)
        return np.array(self._fn(0.0 if t is None else float(t), *values), dtype=float)

    def at_exact(self, point, t=None) -> list:
        env = make_env(point, t, self.chart)
        return [c.evaluate(env) for c in self.components]

    def __str__(self):
        parts = [f"({c})*d/d{n}" for n, c in zip(self.chart.coords, self.components) if not c.is_zero()]
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"VectorFieldExpr({self})"

    def to_json(self):
        return {"coordinates": list(self.chart.coords), "components": [str(c) for c in self.components]}


class PointwiseField:
    """Vector field known only through pointwise evaluation ``fn(point, t)``."""

    def __init__(self, chart: Chart, fn: Callable, description: str = ""):
        self.chart = chart
        self._fn = fn
        self.description = description

    def at(self, point, t=None) -> np.ndarray:
        return np.asarray(self._fn(np.asarray(point, dtype=float), t), dtype=float)

    def __repr__(self):
        return f"PointwiseField({self.description or self.chart.coords})"


def interior_product(X: VectorFieldExpr, a: DifferentialForm) -> DifferentialForm:
    """Contraction ``ι_X a`` in the first slot."""
    if a.degree == 0:
        raise ValueError("cannot contract a 0-form")
    if X.chart != a.chart:
        raise ChartMismatch("field and form live on different charts")
    terms: dict = {}
    for idx, c in a.terms.items():
        for r, i in enumerate(idx):
            xi = X.components[i]
            if xi.is_zero():
                continue
            rest = idx[:r] + idx[r + 1:]
            val = xi * c
            terms[rest] = terms.get(rest, ZERO) + (val if r % 2 == 0 else -val)
    return DifferentialForm(a.chart, a.degree - 1, terms)


def lie_derivative(X: VectorFieldExpr, a: DifferentialForm) -> DifferentialForm:
    """Cartan's formula ``ι_X d a + d ι_X a``."""
    if a.degree == 0:
        return DifferentialForm.scalar(a.chart, X.apply(a.scalar_part()))
    return interior_product(X, exterior_derivative(a)) + exterior_derivative(interior_product(X, a))


def bracket(X: VectorFieldExpr, Y: VectorFieldExpr) -> VectorFieldExpr:
    """Lie bracket ``[X, Y]^i = X(Y^i) - Y(X^i)``."""
    if X.chart != Y.chart:
        raise ChartMismatch("fields live on different charts")
    return VectorFieldExpr(X.chart, [X.apply(yi) - Y.apply(xi) for xi, yi in zip(X.components, Y.components)])


def pair(a: DifferentialForm, X: VectorFieldExpr) -> Expr:
    """``a(X)`` for a 1-form ``a``."""
    if a.degree != 1:
        raise ValueError("pairing needs a 1-form")
    return interior_product(X, a).scalar_part()


# ---------------------------------------------------------------------------
# maps between charts


class ChartMap:
    """Map from ``source`` to ``target`` given by one expression per target coordinate.

    When the target chart is time-extended, the ``t`` component must be ``t``.
    """

    def __init__(self, source: Chart, target: Chart, components: Sequence):
        comps = tuple(as_expr(c, source) for c in components)
        if len(comps) != target.dim:
            raise ValueError(f"map needs {target.dim} components, got {len(comps)}")
        if target.time_extended:
            if not source.time_extended:
                raise ValueError("a time-aware map needs a time-extended source chart")
            if comps[0] != Expr.var(TIME):
                raise ValueError("time-aware map must preserve time (t-component must be t)")
        self.source = source
        self.target = target
        self.components = comps
        self._fn = None
        self._jac = None

    @classmethod
    def identity(cls, chart: Chart) -> "ChartMap":
        return cls(chart, chart, [Expr.var(n) for n in chart.coords])

    @classmethod
    def parse(cls, source: Chart, target: Chart, sources: Sequence[str]) -> "ChartMap":
        return cls(source, target, [parse(s, source) if isinstance(s, str) else s for s in sources])

    @property
    def substitution(self) -> dict:
        return dict(zip(self.target.coords, self.components))

    def pull(self, f) -> Expr:
        """``f ∘ φ`` for a scalar on the target."""
        return as_expr(f, self.target).subs(self.substitution)

    def jacobian(self) -> list[list[Expr]]:
        """``J[i][j] = ∂φ^i/∂y^j`` (target row, source column)."""
        if self._jac is None:
            self._jac = [[c.diff(s) for s in self.source.coords] for c in self.components]
        return self._jac

    def __call__(self, point, t=None) -> np.ndarray:
        if self._fn is None:
            names = self.source.coords if self.source.time_extended else (TIME,) + self.source.coords
            self._fn = compile_exprs(self.components, names)
        values = [float(v) for v in point]
        if self.source.time_extended:
            return np.array(self._fn(*values), dtype=float)
        return np.array(self._fn(0.0 if t is None else float(t), *values), dtype=float)

    def jacobian_at(self, point, t=None) -> np.ndarray:
        env = make_env(point, t, self.source)
        return np.array([[float(e.evaluate(env)) for e in row] for row in self.jacobian()], dtype=float)

    def compose(self, inner: "ChartMap") -> "ChartMap":
        """``self ∘ inner``."""
        if inner.target.dim != self.source.dim:
            raise ValueError("dimension mismatch in composition")
        mapping = dict(zip(self.source.coords, inner.components))
        return ChartMap(inner.source, self.target, [c.subs(mapping) for c in self.components])

    def __repr__(self):
        return f"ChartMap({', '.join(str(c) for c in self.components)})"


def pullback(phi: ChartMap, a: DifferentialForm) -> DifferentialForm:
    """``φ* a`` by substitution and the chain rule."""
    if a.chart.dim != phi.target.dim or a.chart.coords != phi.target.coords:
        raise ValueError("form does not live on the map's target chart")
    src = phi.source
    dphi = [DifferentialForm(src, 1, {(j,): e for j, e in enumerate(row)}) for row in phi.jacobian()]
    out = DifferentialForm.zero(src, a.degree)
    sub = phi.substitution
    for idx, c in a.terms.items():
        piece = DifferentialForm.scalar(src, c.subs(sub))
        for i in idx:
            piece = wedge(piece, dphi[i])
            if piece.is_zero():
                break
        else:
            out = out + piece
    return out


def extend_form(a: DifferentialForm, chart: Chart | None = None) -> DifferentialForm:
    """Pull ``a`` back along the projection ``R × M → M`` (indices shift by one)."""
    ext = chart or a.chart.extended()
    if ext.coords[1:] != a.chart.coords:
        raise ValueError("extended chart does not match")
    return DifferentialForm(ext, a.degree, {tuple(i + 1 for i in idx): c for idx, c in a.terms.items()})


def dt_form(chart: Chart) -> DifferentialForm:
    if not chart.time_extended:
        raise ValueError("dt needs a time-extended chart")
    return DifferentialForm.basis(chart, 0)


def exact_solve(matrix, rhs) -> list:
    """Gaussian elimination over ``Fraction``; raises ZeroDivisionError if singular."""
    n = len(rhs)
    a = [[Fraction(matrix[i][j]) for j in range(n)] + [Fraction(rhs[i])] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


# ---------------------------------------------------------------------------
# symbolic linear algebra on expression matrices


def symbolic_det(m: Sequence[Sequence[Expr]]) -> Expr:
    """Determinant by memoized Laplace expansion along rows."""
    n = len(m)
    memo: dict = {}

    def det(row: int, cols: tuple) -> Expr:
        if row == n:
            return ONE
        key = (row, cols)
        if key in memo:
            return memo[key]
        total = ZERO
        for pos, c in enumerate(cols):
            entry = m[row][c]
            if entry.is_zero():
                continue
            minor = det(row + 1, cols[:pos] + cols[pos + 1:])
            term = entry * minor
            total = total + (term if pos % 2 == 0 else -term)
        memo[key] = total
        return total

    return det(0, tuple(range(n)))


def symbolic_inverse(m: Sequence[Sequence[Expr]]):
    """Exact inverse when the determinant is a nonzero constant, else ``None``."""
    n = len(m)
    det = symbolic_det(m)
    if not det.is_constant() or det.is_zero():
        return None
    inv_det = Fraction(1) / det.constant_value()
    inv = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[m[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cof = symbolic_det(minor) if n > 1 else ONE
            if (i + j) % 2:
                cof = -cof
            inv[j][i] = cof * inv_det
    return inv


__all__ = [
    "ChartMap", "ChartMismatch", "DifferentialForm", "PointwiseField", "VectorFieldExpr", "bracket", "d",
    "dt_form", "exact_solve", "extend_form", "exterior_derivative", "form_equal", "form_is_zero", "form_matrix",
    "form_matrix_at", "interior_product", "ldr_differential", "lie_derivative", "pair", "pullback",
    "symbolic_det", "symbolic_inverse", "wedge", "wedge_power",
]
