"""Locally conformal symplectic structures on a single chart."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .expr import DEFAULT_SEED, SAMPLE_HIGH, SAMPLE_LOW, ZERO, Chart, DomainError, Expr, compile_exprs, sample_rng
from .exterior import (ChartMap, ChartMismatch, DifferentialForm, PointwiseField, VectorFieldExpr, exact_solve,
                       exterior_derivative, form_equal, form_is_zero, form_matrix, form_matrix_at, interior_product,
                       ldr_differential, pullback, symbolic_inverse)
from .report import Verdict

DEGENERACY_TOL = 1e-12


class LcsError(ValueError):
    pass


class ClosednessViolation(LcsError):
    def __init__(self, message: str, residual: DifferentialForm, which: str):
        super().__init__(f"{message}: {residual}")
        self.residual = residual
        self.which = which


class DegeneracyDetected(LcsError):
    def __init__(self, point, det: float, details: dict | None = None):
        super().__init__(f"two-form is degenerate at {list(point)} (det = {det:g})")
        self.point = list(point)
        self.det = det
        self.details = details or {}


class OddDimension(LcsError):
    pass


class NonClosedBaseForm(LcsError):
    pass


class SingularAtPoint(ArithmeticError):
    def __init__(self, point, t=None, message: str = "two-form is singular"):
        where = list(np.asarray(point, dtype=float)) if point is not None else None
        super().__init__(f"{message} at {where}" + (f", t={t}" if t is not None else ""))
        self.point = where
        self.t = t


@dataclass(frozen=True)
class LcsStructure:
    """A validated triple (chart, Ω, θ) with ``dθ = 0`` and ``dΩ = θ ∧ Ω``.

    Cotangent structures built by :func:`cotangent_lcs` also carry the base
    chart, the base Lee form and the Liouville form.
    """

    chart: Chart
    omega: DifferentialForm
    theta: DifferentialForm
    report: dict = field(default_factory=dict, compare=False)
    base: Chart | None = None
    vartheta: DifferentialForm | None = None
    liouville: DifferentialForm | None = None

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def is_cotangent(self) -> bool:
        return self.base is not None

    @cached_property
    def matrix(self) -> list[list[Expr]]:
        return form_matrix(self.omega)

    @cached_property
    def inverse(self):
        """Exact ``M^{-1}`` of the Ω matrix, or ``None`` outside the polynomial class."""
        if not self.omega.is_polynomial():
            return None
        return symbolic_inverse(self.matrix)

    def matrix_at(self, point, t=None) -> np.ndarray:
        return form_matrix_at(self.omega, point, t)

    def sharp_expr(self, alpha) -> VectorFieldExpr | None:
        """Symbolic ``Ω^♯(α)`` when :attr:`inverse` exists.

        ``ι_X Ω = α`` reads ``Mᵀ X = α``, i.e. ``X = -M^{-1} α``.
        """
        inv = self.inverse
        if inv is None:
            return None
        comps = alpha.components() if isinstance(alpha, DifferentialForm) else [Expr.coerce(a) for a in alpha]
        n = self.dim
        out = []
        for i in range(n):
            acc = ZERO
            for j in range(n):
                if not inv[i][j].is_zero() and not comps[j].is_zero():
                    acc = acc - inv[i][j] * comps[j]
            out.append(acc)
        return VectorFieldExpr(self.chart, out)

    def to_json(self) -> dict:
        if self.is_cotangent:
            return {"cotangent": {"base_dim": self.base.dim, "vartheta": self.vartheta.to_json()}}
        return {"coordinates": list(self.chart.coords), "omega": self.omega.to_json(),
                "theta": self.theta.to_json()}


def _sample_points(chart: Chart, count: int, seed: int):
    rng = sample_rng(seed)
    return rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, size=(count, chart.dim))


def validate_lcs(omega: DifferentialForm, theta: DifferentialForm, sample_count: int = 100,
                 seed: int | None = None, tol: float = DEGENERACY_TOL, **extra) -> LcsStructure:
    """Check closedness exactly (sampled off the polynomial class) and nondegeneracy at samples."""
    if omega.degree != 2:
        raise ValueError("Omega must be a 2-form")
    if theta.degree != 1:
        raise ValueError("theta must be a 1-form")
    if omega.chart != theta.chart:
        raise ChartMismatch("Omega and theta live on different charts")
    chart = omega.chart
    if chart.dim % 2:
        raise OddDimension(f"chart dimension {chart.dim} is odd")
    if "t" in omega.free_vars() | theta.free_vars():
        raise ValueError("Omega and theta must not depend on time")
    seed = DEFAULT_SEED if seed is None else seed

    dtheta = exterior_derivative(theta)
    v_theta = form_is_zero(dtheta, seed=seed)
    if not v_theta:
        raise ClosednessViolation("Lee form is not closed", dtheta, "dtheta")
    residual = ldr_differential(omega, theta)
    v_omega = form_is_zero(residual, seed=seed)
    if not v_omega:
        raise ClosednessViolation("d_theta Omega != 0", residual, "d_theta_omega")

    points = _sample_points(chart, sample_count, seed)
    dets = []
    for x in points:
        try:
            det = float(np.linalg.det(form_matrix_at(omega, x)))
        except DomainError:
            continue
        if abs(det) <= tol:
            raise DegeneracyDetected(x, det)
        dets.append(abs(det))
    report = {
        "closedness": {"dtheta": v_theta.to_dict(), "d_theta_omega": v_omega.to_dict()},
        "nondegeneracy": {"seed": seed, "samples": len(dets), "min_abs_det": min(dets) if dets else None,
                          "tolerance": tol},
    }
    return LcsStructure(chart, omega, theta, report, **extra)


def symplectic(chart: Chart, omega: DifferentialForm, **kw) -> LcsStructure:
    return validate_lcs(omega, DifferentialForm.zero(chart, 1), **kw)


def flat(S: LcsStructure, X: VectorFieldExpr) -> DifferentialForm:
    """``ι_X Ω``."""
    if X.chart != S.chart:
        raise ChartMismatch("field does not live on the structure's chart")
    return interior_product(X, S.omega)


def sharp_at(S: LcsStructure, alpha, point, t=None, exact: bool = False) -> np.ndarray | list:
    """Solve ``ι_v Ω = α`` at ``point``; ``alpha`` is a sequence of covector values.

    ``exact`` solves over ``Fraction`` (polynomial Ω, rational point and α).
    """
    alpha = list(alpha)
    if len(alpha) != S.dim:
        raise ValueError("covector has the wrong length")
    if exact:
        m = form_matrix_at(S.omega, point, t, exact=True)
        try:
            return exact_solve(m.T.tolist(), alpha)
        except ZeroDivisionError:
            raise SingularAtPoint(point, t) from None
    m = form_matrix_at(S.omega, point, t)
    return _solve_transposed(m, np.asarray(alpha, dtype=float), point, t)


def _solve_transposed(m: np.ndarray, rhs: np.ndarray, point, t=None) -> np.ndarray:
    det = np.linalg.det(m)
    if not np.isfinite(det) or abs(det) <= DEGENERACY_TOL:
        raise SingularAtPoint(point, t)
    try:
        return np.linalg.solve(m.T, rhs)
    except np.linalg.LinAlgError:
        raise SingularAtPoint(point, t) from None


def pointwise_sharp(S: LcsStructure, alpha: DifferentialForm, description: str = "") -> PointwiseField:
    """Ω^♯(α) as a pointwise solver; ``alpha`` may depend on ``t``."""
    names = ("t",) + S.chart.coords
    alpha_fn = compile_exprs(alpha.components(), names)
    omega_fn = compile_exprs([c for row in S.matrix for c in row], names)
    n = S.dim

    def fn(x, t):
        tt = 0.0 if t is None else float(t)
        args = (tt, *(float(v) for v in x))
        m = np.array(omega_fn(*args), dtype=float).reshape(n, n)
        return _solve_transposed(m, np.array(alpha_fn(*args), dtype=float), x, t)

    return PointwiseField(S.chart, fn, description)


def lee_field(S: LcsStructure):
    """Lee vector field ``Z`` with ``ι_Z Ω = θ``.

    Symbolic when Ω has an exact polynomial inverse, otherwise a
    :class:`PointwiseField`.
    """
    field_ = S.sharp_expr(S.theta)
    if field_ is not None:
        return field_
    return pointwise_sharp(S, S.theta, "Lee field")


def cotangent_lcs(base_dim: int, vartheta: DifferentialForm | None = None, **kw) -> LcsStructure:
    """The lcs structure ``Ω_θ = -d_θ Θ_Q = ω_Q + θ ∧ Θ_Q`` on ``T*R^n``.

    In coordinates ``Ω_θ = dq^i∧dp_i + θ_i p_j dq^i∧dq^j`` with
    ``Θ_Q = p_i dq^i``.
    """
    chart = Chart.cotangent_chart(base_dim)
    base = chart.base()
    if vartheta is None:
        vartheta = DifferentialForm.zero(base, 1)
    if vartheta.chart != base or vartheta.degree != 1:
        raise ValueError(f"vartheta must be a 1-form on the base chart {base.coords}")
    dv = exterior_derivative(vartheta)
    if not form_is_zero(dv):
        raise NonClosedBaseForm(f"base form is not closed: d(vartheta) = {dv}")
    n = base_dim
    theta = DifferentialForm(chart, 1, {(i,): c for (i,), c in vartheta.terms.items()})
    liouville = DifferentialForm(chart, 1, {(i,): Expr.var(f"p{i + 1}") for i in range(n)})
    omega = -ldr_differential(liouville, theta)
    return validate_lcs(omega, theta, base=base, vartheta=vartheta, liouville=liouville, **kw)


def section_map(S: LcsStructure, gamma) -> ChartMap:
    """The map ``q ↦ (q, γ(q))`` from the base into the cotangent chart."""
    comps = gamma.components() if isinstance(gamma, DifferentialForm) else list(gamma)
    return ChartMap(S.base, S.chart, [Expr.var(n) for n in S.base.coords] + comps)


def is_lagrangian_section(S: LcsStructure, gamma: DifferentialForm) -> Verdict:
    """Image of ``γ`` is Lagrangian iff ``d_ϑ γ = 0``; cross-checks ``γ*Ω_θ = -d_ϑ γ``."""
    if not S.is_cotangent:
        raise ValueError("structure was not built by cotangent_lcs")
    if gamma.chart != S.base or gamma.degree != 1:
        raise ValueError("gamma must be a 1-form on the base chart")
    residual = ldr_differential(gamma, S.vartheta)
    v = form_is_zero(residual)
    pulled = pullback(section_map(S, gamma), S.omega)
    cross = form_equal(pulled, -residual)
    return Verdict(v.ok, v.method, residual=str(residual), details={
        "d_vartheta_gamma": residual.to_json(), "pullback_crosscheck": cross.ok})


def verify_lcs_morphism(F: ChartMap, S1: LcsStructure, S2: LcsStructure) -> Verdict:
    """``F*Ω₂ = Ω₁`` together with its consequence ``F*θ₂ = θ₁``."""
    if S1.dim != S2.dim:
        raise ValueError("lcs morphisms need equal dimensions")
    if F.source != S1.chart or F.target != S2.chart:
        raise ChartMismatch("map charts do not match the structures")
    r_omega = pullback(F, S2.omega) - S1.omega
    r_theta = pullback(F, S2.theta) - S1.theta
    v_omega = form_is_zero(r_omega)
    v_theta = form_is_zero(r_theta)
    method = "exact" if v_omega.method == v_theta.method == "exact" else "sampled"
    return Verdict(v_omega.ok and v_theta.ok, method, details={
        "omega_ok": v_omega.ok, "theta_ok": v_theta.ok,
        "omega_residual": r_omega.to_json(), "theta_residual": r_theta.to_json()})


def is_locally_hamiltonian(S: LcsStructure, X: VectorFieldExpr) -> Verdict:
    """``d_θ(ι_X Ω) = 0``."""
    residual = ldr_differential(flat(S, X), S.theta)
    v = form_is_zero(residual)
    return Verdict(v.ok, v.method, residual=v.residual, seed=v.seed, samples=v.samples, tolerance=v.tolerance,
                   details={"residual": residual.to_json()})


def hamiltonian_vector_field(S: LcsStructure, h):
    """Autonomous Hamiltonian field ``ι_X Ω = d_θ h`` (``h`` may contain ``t``)."""
    from .expr import as_expr

    h = as_expr(h, S.chart)
    alpha = ldr_differential(DifferentialForm.scalar(S.chart, h), S.theta)
    field_ = S.sharp_expr(alpha)
    if field_ is not None:
        return field_
    return pointwise_sharp(S, alpha, f"X_h for h = {h}")
