"""Hamilton-Jacobi tools on time-extended cotangent lcs structures.

A section ``γ(t, q) = (t, q, γ_i(t, q))`` is stored as its fiber
components.  Residuals are vectors of scalar expressions in ``(t, q)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import HamiltonianSystem
from .expr import (DEFAULT_SEED, SAMPLE_HIGH, SAMPLE_LOW, TIME, Chart, DomainError, Expr, as_expr,
                   compile_exprs, is_zero, sample_rng)
from .exterior import DifferentialForm
from .lcs import LcsStructure, SingularAtPoint, pointwise_sharp
from .report import Verdict

RELATED_TOL = 1e-9
UNRELATED_TOL = 1e-6


class SectionError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSection:
    """Fiber components ``γ_i(t, q)`` of a time-dependent section over ``base``."""

    base: Chart
    components: tuple

    def __post_init__(self):
        comps = tuple(as_expr(c, self.base, allow_time=True) for c in self.components)
        if len(comps) != self.base.dim:
            raise SectionError(f"need {self.base.dim} components, got {len(comps)}")
        extra = set().union(*(c.free_vars() for c in comps)) - set(self.base.coords) - {TIME}
        if extra:
            raise SectionError(f"section uses unknown variables {sorted(extra)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def parse(cls, S: LcsStructure, components: Sequence[str]) -> "TimeSection":
        _require_cotangent(S)
        return cls(S.base, tuple(components))

    @property
    def dim(self) -> int:
        return self.base.dim

    def fix_time(self, t) -> "TimeSection":
        """``γ_t``: the section frozen at time ``t``."""
        c = Expr.coerce(t)
        return TimeSection(self.base, tuple(g.subs({TIME: c}) for g in self.components))

    def fix_point(self, q) -> list[Expr]:
        """``γ_q``: the curve ``t ↦ γ(t, q)``."""
        sub = {n: Expr.coerce(v) for n, v in zip(self.base.coords, q)}
        return [g.subs(sub) for g in self.components]

    def time_derivative(self) -> list[Expr]:
        return [g.diff(TIME) for g in self.components]

    def jacobian(self) -> list[list[Expr]]:
        """``J[i][j] = ∂γ_i/∂q^j``."""
        return [[g.diff(n) for n in self.base.coords] for g in self.components]

    def one_form(self) -> DifferentialForm:
        """``γ_i dq^i`` on the base (``t`` enters as a parameter)."""
        return DifferentialForm.one_form(self.base, self.components)

    def at(self, q, t=0.0) -> np.ndarray:
        fn = compile_exprs(self.components, (TIME,) + self.base.coords)
        return np.array(fn(float(t), *(float(v) for v in q)), dtype=float)

    def to_json(self) -> dict:
        return {"components": [str(g) for g in self.components]}


def _require_cotangent(S: LcsStructure):
    if not S.is_cotangent:
        raise ValueError("structure was not built by cotangent_lcs")


def _check_section(gamma: TimeSection, S: LcsStructure):
    _require_cotangent(S)
    if gamma.base != S.base:
        raise SectionError("section base chart does not match the structure")


def _theta_components(S: LcsStructure) -> list[Expr]:
    return S.vartheta.components()


def _fiber_names(S: LcsStructure) -> tuple:
    return S.chart.coords[S.base.dim:]


def _on_section(S: LcsStructure, gamma: TimeSection) -> dict:
    return dict(zip(_fiber_names(S), gamma.components))


def check_theta_closed(gamma: TimeSection, S: LcsStructure, samples: int = 32, seed: int | None = None,
                       tol: float = 1e-10) -> Verdict:
    """Decide ``d_θ γ = 0``.

    The verdict uses the coefficients of ``d_θγ`` on ``dq^i∧dq^j``,
    ``∂_iγ_j - ∂_jγ_i - θ_iγ_j + θ_jγ_i``.  The stronger entrywise system
    ``∂γ_i/∂q^j = θ_j γ_i`` is reported alongside.
    """
    _check_section(gamma, S)
    th = _theta_components(S)
    J = gamma.jacobian()
    g = gamma.components
    n = gamma.dim
    anti = {}
    verdicts = []
    for i in range(n):
        for j in range(i + 1, n):
            r = J[j][i] - J[i][j] - th[i] * g[j] + th[j] * g[i]
            anti[f"{i + 1},{j + 1}"] = str(r)
            verdicts.append(is_zero(r, samples=samples, tol=tol, seed=seed))
    entry = [[J[i][j] - th[j] * g[i] for j in range(n)] for i in range(n)]
    entry_ok = all(is_zero(e, samples=samples, tol=tol, seed=seed).ok for row in entry for e in row)
    ok = all(v.ok for v in verdicts)
    method = "exact" if all(v.method == "exact" for v in verdicts) else "sampled"
    worst = max((v.residual or 0.0 for v in verdicts if v.residual is not None), default=0.0)
    sampled = method == "sampled"
    return Verdict(ok, method, residual=worst if ok else None, seed=(DEFAULT_SEED if seed is None else seed)
                   if sampled else None, samples=samples if sampled else None, tolerance=tol if sampled else None,
                   details={"d_theta_gamma": anti,
                            "componentwise": [[str(e) for e in row] for row in entry],
                            "componentwise_ok": entry_ok})


def vertical_lift(alpha, S: LcsStructure):
    """The field ``α^V`` with ``ι_{α^V} Ω_θ = α``.

    For semi-basic ``α = α_i dq^i`` this is ``-α_i ∂/∂p_i``.
    """
    if not isinstance(alpha, DifferentialForm):
        alpha = DifferentialForm.one_form(S.chart, list(alpha))
    if alpha.chart != S.chart or alpha.degree != 1:
        raise ValueError("alpha must be a one-form on the structure's chart")
    field_ = S.sharp_expr(alpha)
    if field_ is not None:
        return field_
    return pointwise_sharp(S, alpha, "vertical lift")


def _h_partials_on(sys: HamiltonianSystem, gamma: TimeSection):
    S = sys.structure
    n = gamma.dim
    sub = _on_section(S, gamma)
    H = sys.hamiltonian
    coords = S.chart.coords
    Hq = [H.diff(coords[i]).subs(sub) for i in range(n)]
    Hp = [H.diff(coords[n + i]).subs(sub) for i in range(n)]
    return H.subs(sub), Hq, Hp


def hj_residual(sys: HamiltonianSystem, gamma: TimeSection) -> list[Expr]:
    """``R_i = ∂_tγ_i + ∂H/∂q^i∘γ + (∂H/∂p_j∘γ) ∂γ_j/∂q^i - θ_i H∘γ``.

    ``γ`` solves the lcs Hamilton-Jacobi equation iff every ``R_i`` vanishes.
    """
    S = sys.structure
    _check_section(gamma, S)
    n = gamma.dim
    Hg, Hq, Hp = _h_partials_on(sys, gamma)
    J = gamma.jacobian()
    th = _theta_components(S)
    gt = gamma.time_derivative()
    out = []
    for i in range(n):
        r = gt[i] + Hq[i] - th[i] * Hg
        for j in range(n):
            r = r + Hp[j] * J[j][i]
        out.append(r)
    return out


def relatedness_residual(sys: HamiltonianSystem, gamma: TimeSection) -> list[Expr]:
    """Fiber part of ``Tγ(X̃^γ_H) - X̃_H∘γ`` written from the coordinate field.

    ``∂_tγ_i + (∂H/∂p_j) ∂γ_i/∂q^j - b_i∘γ`` with
    ``b_i = -∂H/∂q^i + ∂H/∂p_j (θ_j p_i - θ_i p_j) + θ_i H``.
    """
    S = sys.structure
    _check_section(gamma, S)
    n = gamma.dim
    Hg, Hq, Hp = _h_partials_on(sys, gamma)
    J = gamma.jacobian()
    th = _theta_components(S)
    g = gamma.components
    gt = gamma.time_derivative()
    out = []
    for i in range(n):
        b = -Hq[i] + th[i] * Hg
        r = gt[i]
        for j in range(n):
            b = b + Hp[j] * (th[j] * g[i] - th[i] * g[j])
            r = r + Hp[j] * J[i][j]
        out.append(r - b)
    return out


def identity_defect(sys: HamiltonianSystem, gamma: TimeSection) -> list[Expr]:
    """``relatedness_residual - hj_residual``.

    Equals ``∂H/∂p_j∘γ · (∂_jγ_i - ∂_iγ_j - θ_jγ_i + θ_iγ_j)``, so it
    vanishes whenever ``d_θγ = 0``.
    """
    return [a - b for a, b in zip(relatedness_residual(sys, gamma), hj_residual(sys, gamma))]


def gamma_relatedness(sys: HamiltonianSystem, gamma: TimeSection, samples: int = 50, seed: int | None = None,
                      tol: float = RELATED_TOL, strict_gap: float = UNRELATED_TOL) -> Verdict:
    """Compare ``Tγ(X̃^γ_H)`` with ``X̃_H∘γ`` at sampled ``(t, q)``.

    The field ``X̃_H`` comes from the intrinsic solve ``ι_X Ω = d_θ H``.  Each
    sample records the mismatch and ``max|R_i|``, both divided by
    ``max(1, |X̃_H∘γ|)``; ``consistent`` holds when both are ``<= tol`` or
    both are ``> strict_gap``.
    """
    S = sys.structure
    _check_section(gamma, S)
    seed = DEFAULT_SEED if seed is None else seed
    closed = check_theta_closed(gamma, S, seed=seed)
    n = gamma.dim
    names = (TIME,) + gamma.base.coords
    g_fn = compile_exprs(gamma.components, names)
    rate_fn = compile_exprs(gamma.time_derivative() + [e for row in gamma.jacobian() for e in row], names)
    res_fn = compile_exprs(hj_residual(sys, gamma), names)
    X = sys.field
    rng = sample_rng(seed)
    rows = []
    skipped = 0
    for _ in range(samples):
        z = rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, n + 1)
        t, q = float(z[0]), z[1:]
        try:
            p = np.array(g_fn(t, *q), dtype=float)
            x = np.concatenate([q, p])
            xh = np.asarray(X.at(x, t), dtype=float)
            rates = np.array(rate_fn(t, *q), dtype=float)
            res = np.array(res_fn(t, *q), dtype=float)
        except (SingularAtPoint, DomainError):
            skipped += 1
            continue
        gt, J = rates[:n], rates[n:].reshape(n, n)
        # Tγ applied to the projected field ∂_t + a^i ∂_{q^i}
        a = xh[:n]
        pushed = np.concatenate([a, gt + J @ a])
        # both indicators are relative to the size of the field on the section
        scale = max(1.0, float(np.max(np.abs(xh))))
        mismatch = float(np.max(np.abs(pushed - xh))) / scale
        hj = float(np.max(np.abs(res))) / scale
        consistent = (mismatch <= tol and hj <= tol) or (mismatch > strict_gap and hj > strict_gap)
        rows.append({"t": t, "q": [float(v) for v in q], "mismatch": mismatch, "hj_residual": hj,
                     "consistent": consistent})
    if not rows:
        raise SingularAtPoint(None, None, "no admissible sample points")
    worst = max(r["mismatch"] for r in rows)
    worst_hj = max(r["hj_residual"] for r in rows)
    related = worst <= tol
    details = {
        "related": related,
        "max_mismatch": worst,
        "max_hj_residual": worst_hj,
        "consistent": all(r["consistent"] for r in rows),
        "theta_closed": closed.ok,
        "hypothesis_fails": not closed.ok,
        "skipped": skipped,
        "per_sample": rows,
    }
    return Verdict(related, "sampled", residual=worst, seed=seed, samples=len(rows), tolerance=tol,
                   details=details)
