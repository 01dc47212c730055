"""Contact pairs, Reeb fields, lcs forms built from pairs, and the g41 library.

The library ships three coordinate representations of the nilpotent
algebra g41 on ``x1..x4``, each with its dual coframe, its lcs form
``Ω = dη² + η²∧η⁴`` (Lee form ``η⁴``) and the associated Lie system.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import (DEFAULT_SEED, SAMPLE_HIGH, SAMPLE_LOW, TIME, Chart, Expr, as_expr, compile_exprs, expr_equal,
                   sample_rng)
from .exterior import (DifferentialForm, VectorFieldExpr, bracket, exterior_derivative, form_equal, form_is_zero,
                       form_matrix_at, interior_product, pair, wedge, wedge_power)
from .lcs import DegeneracyDetected, LcsStructure, validate_lcs
from .report import Verdict

CHART = Chart.euclidean(4)
REPRESENTATIONS = ("g41-rep1", "g41-rep2", "g41-rep4")
G41_TABLE = {(1, 4): {3: 1}, (1, 3): {2: 1}}


class ContactError(ValueError):
    pass


class RankDeficient(ArithmeticError):
    def __init__(self, point, rank: int, which: str):
        super().__init__(f"Reeb conditions for {which} are not uniquely solvable at {list(point)} (rank {rank})")
        self.point = list(point)
        self.rank = rank
        self.which = which


class UnknownRepresentation(KeyError):
    pass


class TranscriptionMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class ContactPair:
    alpha: DifferentialForm
    beta: DifferentialForm
    h: int
    k: int = 0

    def __post_init__(self):
        if self.alpha.degree != 1 or self.beta.degree != 1:
            raise ContactError("contact pair needs two one-forms")
        if self.alpha.chart != self.beta.chart:
            raise ContactError("forms live on different charts")
        if self.h < 0 or self.k < 0:
            raise ContactError("type must be non-negative")
        if self.chart.dim != 2 * self.h + 2 * self.k + 2:
            raise ContactError(f"type ({self.h},{self.k}) needs dimension {2 * self.h + 2 * self.k + 2}, "
                               f"chart has {self.chart.dim}")

    @property
    def chart(self) -> Chart:
        return self.alpha.chart

    def top_form(self) -> DifferentialForm:
        """``α ∧ (dα)^h ∧ β ∧ (dβ)^k``."""
        da, db = exterior_derivative(self.alpha), exterior_derivative(self.beta)
        return wedge(wedge(wedge(self.alpha, wedge_power(da, self.h)), self.beta), wedge_power(db, self.k))


def _power_or_zero(a: DifferentialForm, m: int) -> DifferentialForm:
    if a.degree * m > a.chart.dim:
        return DifferentialForm.zero(a.chart, 0)
    return wedge_power(a, m)


def verify_contact_pair(cp: ContactPair, samples: int = 50, seed: int | None = None,
                        tol: float = 1e-12) -> Verdict:
    """Nilpotency of ``dα`` and ``dβ`` exactly; nonvanishing top form at samples."""
    seed = DEFAULT_SEED if seed is None else seed
    da, db = exterior_derivative(cp.alpha), exterior_derivative(cp.beta)
    na = form_is_zero(_power_or_zero(da, cp.h + 1), seed=seed)
    nb = form_is_zero(_power_or_zero(db, cp.k + 1), seed=seed)
    top = cp.top_form()
    n = cp.chart.dim
    coeff = top.coeff(*range(n))
    rng = sample_rng(seed)
    worst = None
    if not coeff.is_zero():
        fn = compile_exprs([coeff], (TIME,) + cp.chart.coords, scalar=True)
        for _ in range(samples):
            x = rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, n)
            v = abs(float(fn(0.0, *x)))
            worst = v if worst is None else min(worst, v)
    else:
        worst = 0.0
    volume_ok = worst > tol
    ok = na.ok and nb.ok and volume_ok
    return Verdict(ok, "sampled", residual=worst, seed=seed, samples=samples, tolerance=tol, details={
        "type": [cp.h, cp.k],
        "alpha_nilpotent": na.to_dict(),
        "beta_nilpotent": nb.to_dict(),
        "top_form": str(coeff),
        "min_abs_top": worst,
    })


def _reeb_system(cp: ContactPair, x):
    n = cp.chart.dim
    da, db = exterior_derivative(cp.alpha), exterior_derivative(cp.beta)
    names = (TIME,) + cp.chart.coords
    one = compile_exprs(cp.alpha.components() + cp.beta.components(), names)
    vals = np.array(one(0.0, *x), dtype=float)
    rows = [vals[:n], vals[n:]]
    # ι_v dα = Mᵀ v for the antisymmetric matrix of dα
    ma, mb = form_matrix_at(da, x), form_matrix_at(db, x)
    return np.vstack(rows + [ma.T, mb.T])


def reeb_fields(cp: ContactPair, point) -> tuple[np.ndarray, np.ndarray]:
    """Reeb vectors ``(A, B)`` at ``point``.

    Solves ``α(A)=1, β(A)=0, ι_A dα = ι_A dβ = 0`` and the analogue for ``B``
    as an overdetermined system, requiring full column rank and an exact fit.
    """
    x = np.asarray(point, dtype=float)
    n = cp.chart.dim
    M = _reeb_system(cp, x)
    rank = int(np.linalg.matrix_rank(M))
    out = []
    for which, rhs_head in (("A", (1.0, 0.0)), ("B", (0.0, 1.0))):
        if rank < n:
            raise RankDeficient(x, rank, which)
        rhs = np.zeros(M.shape[0])
        rhs[:2] = rhs_head
        v, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.max(np.abs(M @ v - rhs)) > 1e-9 * max(1.0, float(np.max(np.abs(M)))):
            raise RankDeficient(x, rank, which)
        out.append(v)
    return out[0], out[1]


def reeb_residuals(cp: ContactPair, point, A, B) -> dict:
    """The defining contractions evaluated at ``point``."""
    M = _reeb_system(cp, np.asarray(point, dtype=float))
    ra, rb = M @ np.asarray(A), M @ np.asarray(B)
    return {
        "alpha(A)-1": abs(ra[0] - 1.0), "beta(B)-1": abs(rb[1] - 1.0),
        "alpha(B)": abs(rb[0]), "beta(A)": abs(ra[1]),
        "i_A d": float(np.max(np.abs(ra[2:]))), "i_B d": float(np.max(np.abs(rb[2:]))),
    }


def lcs_form_from_pair(cp: ContactPair, c=1) -> tuple[DifferentialForm, DifferentialForm]:
    """``(dα + c α∧β, c β)``."""
    c = Expr.coerce(c)
    omega = exterior_derivative(cp.alpha) + wedge(cp.alpha, cp.beta).scale(c)
    return omega, cp.beta.scale(c)


def top_power_decomposition(cp: ContactPair, c=1) -> dict:
    """``Ω^{h+1} = (dα)^{h+1} + c(h+1) α∧(dα)^h∧β`` as its two summands."""
    c = Expr.coerce(c)
    h = cp.h
    da = exterior_derivative(cp.alpha)
    first = _power_or_zero(da, h + 1)
    second = wedge(wedge(cp.alpha, wedge_power(da, h)), cp.beta).scale(c * (h + 1))
    omega, _ = lcs_form_from_pair(cp, c)
    check = form_equal(wedge_power(omega, h + 1), first + second)
    return {"first": str(first), "second": str(second), "identity_holds": check.ok}


def lcs_from_pair(cp: ContactPair, c=1, **kw) -> LcsStructure:
    """Validated lcs structure ``Ω = dα + cα∧β``, ``θ = cβ`` from a pair of type ``(h, 0)``."""
    if cp.k != 0:
        raise ContactError("lcs forms come from pairs of type (h, 0)")
    omega, theta = lcs_form_from_pair(cp, c)
    try:
        return validate_lcs(omega, theta, **kw)
    except DegeneracyDetected as exc:
        exc.details.update(top_power_decomposition(cp, c))
        raise


def nondegeneracy_profile(cp: ContactPair, cs: Sequence[float], samples: int = 50,
                          seed: int | None = None) -> list[dict]:
    """Sampled minimum ``|det Ω|`` for each ``c``."""
    seed = DEFAULT_SEED if seed is None else seed
    out = []
    for c in cs:
        omega, _ = lcs_form_from_pair(cp, c)
        rng = sample_rng(seed)
        dets = [abs(float(np.linalg.det(form_matrix_at(omega, rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, cp.chart.dim)))))
                for _ in range(samples)]
        out.append({"c": float(c), "min_abs_det": min(dets)})
    return out


def verify_lcs_automorphism(S: LcsStructure, X: VectorFieldExpr) -> Verdict:
    """``ℒ_X Ω = 0`` via ``dι_XΩ + ι_X dΩ``, plus the value of ``θ(X)``."""
    if X.chart != S.chart:
        raise ContactError("field and structure live on different charts")
    lie = exterior_derivative(interior_product(X, S.omega)) + interior_product(X, exterior_derivative(S.omega))
    v = form_is_zero(lie)
    th = pair(S.theta, X)
    unit = expr_equal(th, Expr.const(1)).ok
    return Verdict(v.ok, v.method, residual=v.residual, details={
        "lie_derivative": lie.to_json(),
        "theta_of_X": str(th),
        "theta_of_X_is_one": unit,
        "compatible": bool(v.ok and unit),
    })


# ---------------------------------------------------------------------------
# g41 representations


@dataclass(frozen=True)
class Representation:
    id: str
    fields: tuple
    coframe: tuple
    omega: DifferentialForm
    # index of the coefficient a_i multiplying each basis field; the rewritten
    # systems put a1 on d/dx1 = X2, a2 on d/dx2 = X1, a3 on X4 and a4 on X3
    weights: tuple = (2, 1, 4, 3)

    @property
    def chart(self) -> Chart:
        return CHART

    def pair(self) -> ContactPair:
        return ContactPair(self.coframe[1], self.coframe[3], 1, 0)

    @property
    def theta(self) -> DifferentialForm:
        return self.coframe[3]


def _vf(*comps) -> VectorFieldExpr:
    return VectorFieldExpr(CHART, [as_expr(c, CHART) for c in comps])


def _one(spec: dict) -> DifferentialForm:
    return DifferentialForm.parse(CHART, 1, spec)


def _two(spec: dict) -> DifferentialForm:
    return DifferentialForm.parse(CHART, 2, spec)


def _build() -> dict:
    reps = {}
    reps["g41-rep1"] = Representation(
        "g41-rep1",
        (_vf(0, 1, 0, 0), _vf(1, 0, 0, 0), _vf("x2", "x3", 0, 1), _vf(0, 0, 1, 0)),
        (_one({"x2": "1", "x4": "-x3"}), _one({"x1": "1", "x4": "-x2"}), _one({"x4": "1"}), _one({"x3": "1"})),
        _two({"x2,x4": "-1", "x1,x3": "1", "x4,x3": "-x2"}),
    )
    reps["g41-rep2"] = Representation(
        "g41-rep2",
        (_vf(0, 1, 0, 0), _vf(1, 0, 0, 0), _vf("x2", "x3", "x4", 1), _vf(0, 0, 1, 0)),
        (_one({"x2": "1", "x4": "-x3"}), _one({"x1": "1", "x4": "-x2"}), _one({"x4": "1"}),
         _one({"x3": "1", "x4": "-x4"})),
        _two({"x2,x4": "-1", "x1,x3": "1", "x1,x4": "-x4", "x3,x4": "x2"}),
    )
    reps["g41-rep4"] = Representation(
        "g41-rep4",
        (_vf(0, 1, 0, 0), _vf(1, 0, 0, 0), _vf("x2", 0, "x4", -1), _vf("x3", "x4", 1, 0)),
        (_one({"x2": "1", "x3": "-x4", "x4": "-x4^2"}), _one({"x1": "1", "x3": "-x3", "x4": "-(x3*x4 - x2)"}),
         _one({"x4": "-1"}), _one({"x3": "1", "x4": "x4"})),
        _two({"x1,x3": "1", "x1,x4": "x4", "x2,x4": "1", "x3,x4": "-(x4 + x2)"}),
    )
    return reps


def construction_form(rep: Representation) -> DifferentialForm:
    """``dη² + η²∧η⁴`` from the coframe."""
    eta2, eta4 = rep.coframe[1], rep.coframe[3]
    return exterior_derivative(eta2) + wedge(eta2, eta4)


def duality_matrix(rep: Representation) -> list[list[Expr]]:
    return [[pair(eta, X) for X in rep.fields] for eta in rep.coframe]


def check_duality(rep: Representation) -> Verdict:
    m = duality_matrix(rep)
    bad = {f"{i + 1},{j + 1}": str(m[i][j]) for i in range(4) for j in range(4)
           if m[i][j] != Expr.const(1 if i == j else 0)}
    return Verdict(not bad, "exact", details={"mismatches": bad})


def check_construction(rep: Representation) -> Verdict:
    built = construction_form(rep)
    v = form_equal(built, rep.omega)
    return Verdict(v.ok, v.method, details={"constructed": str(built), "transcribed": str(rep.omega)})


def _startup_check(reps: dict):
    for rep in reps.values():
        if not check_duality(rep):
            raise TranscriptionMismatch(f"{rep.id}: coframe is not dual to the fields")
        if not check_construction(rep):
            raise TranscriptionMismatch(f"{rep.id}: stored two-form differs from d(eta2) + eta2^eta4")


_REPS = _build()
_startup_check(_REPS)


def representation(rep_id) -> Representation:
    key = rep_id if isinstance(rep_id, str) else f"g41-rep{rep_id}"
    if key not in _REPS:
        raise UnknownRepresentation(f"unknown representation {rep_id!r}; choose from {list(REPRESENTATIONS)}")
    return _REPS[key]


def builtin_structure(rep_id, **kw) -> LcsStructure:
    """The shipped lcs structure ``(Ω, η⁴)`` of a representation."""
    rep = representation(rep_id)
    return validate_lcs(rep.omega, rep.theta, **kw)


def bracket_coefficients(rep: Representation, i: int, j: int) -> dict:
    """Structure constants ``[X_i, X_j] = Σ c^k X_k`` read through the coframe (1-based)."""
    Z = bracket(rep.fields[i - 1], rep.fields[j - 1])
    coeffs = {}
    for k, eta in enumerate(rep.coframe, start=1):
        c = pair(eta, Z)
        if not c.is_zero():
            coeffs[k] = c
    return coeffs


def bracket_table(rep: Representation) -> dict:
    """Nonzero brackets ``(i, j) -> {k: c}`` for ``i < j``; raises if a coefficient is not constant."""
    table = {}
    for i, j in itertools.combinations(range(1, 5), 2):
        coeffs = bracket_coefficients(rep, i, j)
        for k, c in coeffs.items():
            if c.free_vars():
                raise ContactError(f"{rep.id}: [X{i},X{j}] has non-constant coefficient {c} on X{k}")
        if coeffs:
            table[(i, j)] = {k: c.terms[()] for k, c in coeffs.items()}
    return table


def format_table(table: dict) -> list[str]:
    out = []
    for (i, j), coeffs in sorted(table.items()):
        rhs = " + ".join(f"{'' if c == 1 else ('-' if c == -1 else str(c) + '*')}X{k}" for k, c in sorted(coeffs.items()))
        out.append(f"[X{i},X{j}] = {rhs}")
    return out


def check_g41(rep: Representation) -> Verdict:
    """Literal comparison with ``[X1,X4] = X3, [X1,X3] = X2`` and all other brackets zero."""
    table = bracket_table(rep)
    ok = table == G41_TABLE
    return Verdict(ok, "exact", details={"table": format_table(table), "expected": format_table(G41_TABLE)})


def find_g41_basis(rep: Representation):
    """Search signed permutations ``Y_i = s_i X_{π(i)}`` reproducing the g41 table.

    Returns ``(perm, signs)`` with 1-based ``perm`` or ``None``.
    """
    table = bracket_table(rep)

    def br(a, b):
        if a == b:
            return {}
        if a < b:
            return dict(table.get((a, b), {}))
        return {k: -c for k, c in table.get((b, a), {}).items()}

    for perm in itertools.permutations(range(1, 5)):
        for signs in itertools.product((1, -1), repeat=4):
            inv = {perm[i]: i + 1 for i in range(4)}
            ok = True
            for a, b in itertools.combinations(range(1, 5), 2):
                raw = br(perm[a - 1], perm[b - 1])
                got = {}
                for k, c in raw.items():
                    # X_k = s_m Y_m with perm[m-1] = k
                    m = inv[k]
                    got[m] = got.get(m, 0) + signs[a - 1] * signs[b - 1] * c * signs[m - 1]
                got = {m: c for m, c in got.items() if c != 0}
                if got != G41_TABLE.get((a, b), {}):
                    ok = False
                    break
            if ok:
                return perm, signs
    return None


@dataclass
class LieSystemSpec:
    representation: Representation
    coefficients: tuple

    def __post_init__(self):
        if isinstance(self.representation, (str, int)):
            self.representation = representation(self.representation)
        coeffs = tuple(as_expr(a, allow_time=True) for a in self.coefficients)
        if len(coeffs) != 4:
            raise ContactError("a Lie system needs four coefficient functions")
        for a in coeffs:
            if a.free_vars() - {TIME}:
                raise ContactError(f"coefficient {a} may only depend on t")
        self.coefficients = coeffs

    @property
    def fields(self):
        return self.representation.fields

    @property
    def coframe(self):
        return self.representation.coframe


def lie_system_field(spec: LieSystemSpec) -> VectorFieldExpr:
    """``X_t = Σ a_{w(i)}(t) X_i`` with the representation's weight assignment ``w``."""
    rep = spec.representation
    out = VectorFieldExpr.zero(CHART)
    for X, w in zip(rep.fields, rep.weights):
        out = out + X.scale(spec.coefficients[w - 1])
    return out
