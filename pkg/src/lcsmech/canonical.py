"""Canonical transformations between time-extended lcs structures.

A candidate is a time-preserving map ``F: R×M₁ → R×M₂`` written on the
extended charts ``(t, x)``.  Checks follow the definition: ``F*t = t``,
``F*θ̃₂ = θ̃₁`` and ``F*Ω̃₂ = Ω̃₁ + d_θ̃₁ K_F ∧ dt``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import HamiltonianSystem, omega_h
from .expr import DEFAULT_SEED, SAMPLE_HIGH, SAMPLE_LOW, TIME, ZERO, Chart, DomainError, Expr, as_expr, sample_rng
from .exterior import (ChartMap, DifferentialForm, dt_form, extend_form, form_equal,
                       form_is_zero, ldr_differential, pullback, wedge)
from .lcs import LcsStructure, SingularAtPoint
from .report import Verdict

DEFAULT_TOL = 1e-9


class CanonicalError(ValueError):
    pass


class MissingKF(CanonicalError):
    pass


class InversionFailure(ArithmeticError):
    pass


@dataclass
class CanonicalCandidate:
    """``F`` with its structures, optional ``K_F`` and optional inverse map."""

    F: ChartMap
    S1: LcsStructure
    S2: LcsStructure
    K_F: Expr | None = None
    inverse: ChartMap | None = None

    def __post_init__(self):
        ext1, ext2 = self.S1.chart.extended(), self.S2.chart.extended()
        if self.S1.dim != self.S2.dim:
            raise CanonicalError("structures have different dimensions")
        if self.F.source != ext1 or self.F.target != ext2:
            raise CanonicalError("map must go between the time-extended charts of S1 and S2")
        if self.K_F is not None:
            self.K_F = as_expr(self.K_F, ext1)
        if self.inverse is not None and (self.inverse.source != ext2 or self.inverse.target != ext1):
            raise CanonicalError("inverse map has the wrong charts")

    @classmethod
    def from_strings(cls, S1: LcsStructure, S2: LcsStructure, components: Sequence[str], K_F=None,
                     inverse: Sequence[str] | None = None) -> "CanonicalCandidate":
        """Build from expressions for the spatial target coordinates (``t`` is implicit)."""
        if S1.dim != S2.dim:
            raise CanonicalError("structures have different dimensions")
        ext1, ext2 = S1.chart.extended(), S2.chart.extended()
        comps = list(components)
        if len(comps) == S2.dim:
            comps = [TIME] + comps
        F = ChartMap(ext1, ext2, [as_expr(c, ext1) for c in comps])
        inv = None
        if inverse is not None:
            inv_comps = list(inverse)
            if len(inv_comps) == S1.dim:
                inv_comps = [TIME] + inv_comps
            inv = ChartMap(ext2, ext1, [as_expr(c, ext2) for c in inv_comps])
        return cls(F, S1, S2, None if K_F is None else as_expr(K_F, ext1), inv)

    @classmethod
    def identity(cls, S: LcsStructure) -> "CanonicalCandidate":
        ext = S.chart.extended()
        return cls(ChartMap.identity(ext), S, S, ZERO, ChartMap.identity(ext))

    @property
    def ext1(self) -> Chart:
        return self.F.source

    @property
    def ext2(self) -> Chart:
        return self.F.target

    def theta1(self):
        return extend_form(self.S1.theta, self.ext1)

    def omega1(self):
        return extend_form(self.S1.omega, self.ext1)


def _tilde(S: LcsStructure, ext: Chart):
    return extend_form(S.omega, ext), extend_form(S.theta, ext)


def kf_residual(c: CanonicalCandidate, K_F=None) -> DifferentialForm:
    """``F*Ω̃₂ - Ω̃₁ - d_θ̃₁ K_F ∧ dt``."""
    K = c.K_F if K_F is None else as_expr(K_F, c.ext1)
    om2, _ = _tilde(c.S2, c.ext2)
    om1, th1 = _tilde(c.S1, c.ext1)
    dk = ldr_differential(DifferentialForm.scalar(c.ext1, K), th1)
    return pullback(c.F, om2) - om1 - wedge(dk, dt_form(c.ext1))


def extract_kf(c: CanonicalCandidate) -> Expr:
    """Best-effort recovery of ``K_F`` from the ``dt`` part of ``F*Ω̃₂ - Ω̃₁``.

    Supported when ``θ₁ = 0`` and the ``dt`` coefficients are polynomial:
    the spatial 1-form is integrated along rays from the origin.  Raises
    :class:`MissingKF` when extraction fails or the result does not verify.
    """
    om2, _ = _tilde(c.S2, c.ext2)
    om1, th1 = _tilde(c.S1, c.ext1)
    D = pullback(c.F, om2) - om1
    ext = c.ext1
    # D = β ∧ dt with β spatial: coefficient of dx^i∧dt is β_i, stored on (0, i) as -β_i
    beta = [-D.coeff(0, i) for i in range(1, ext.dim)]
    if not th1.is_zero():
        raise MissingKF("K_F extraction is only implemented for a vanishing Lee form")
    if not all(b.is_polynomial() for b in beta):
        raise MissingKF("K_F extraction needs polynomial dt-coefficients")
    names = ext.coords[1:]
    s = "_s"
    K = ZERO
    scaled = {n: Expr.var(s) * Expr.var(n) for n in names}
    for b, n in zip(beta, names):
        integrand = b.subs(scaled) * Expr.var(n)
        K = K + _integrate_unit(integrand, s)
    if not form_is_zero(kf_residual(c, K)):
        raise MissingKF("the remainder is not of the form d_theta K ∧ dt")
    return K


def _integrate_unit(e: Expr, s: str) -> Expr:
    """``∫_0^1 e ds`` for ``e`` polynomial in ``s``."""
    out = ZERO
    for mono, coeff in e.terms.items():
        k = 0
        rest = []
        for atom, power in mono:
            if getattr(atom, "name", None) == s:
                k = power
            else:
                rest.append((atom, power))
        out = out + Expr({tuple(rest): coeff / (k + 1)})
    return out


def check_canonical(c: CanonicalCandidate, samples: int = 100, seed: int | None = None,
                    tol: float = DEFAULT_TOL, extract: bool = True) -> Verdict:
    """Conditions (i)-(iv); (i) is certified on sampled points only."""
    if c.K_F is None:
        if not extract:
            raise MissingKF("K_F is required")
        c.K_F = extract_kf(c)
    seed = DEFAULT_SEED if seed is None else seed
    report: dict = {}

    time_ok = c.F.components[0] == Expr.var(TIME)
    report["ii_time"] = {"ok": time_ok, "method": "exact"}

    _, th2 = _tilde(c.S2, c.ext2)
    _, th1 = _tilde(c.S1, c.ext1)
    r_theta = pullback(c.F, th2) - th1
    v_theta = form_is_zero(r_theta, seed=seed)
    report["iii_theta"] = {**v_theta.to_dict(), "residual_form": r_theta.to_json()}

    r_omega = kf_residual(c)
    v_omega = form_is_zero(r_omega, seed=seed)
    report["iv_omega"] = {**v_omega.to_dict(), "residual_form": r_omega.to_json()}

    v_inv = check_invertible(c, samples=min(samples, 20), seed=seed, tol=tol)
    report["i_diffeomorphism"] = v_inv.to_dict()

    ok = time_ok and v_theta.ok and v_omega.ok and v_inv.ok
    method = "exact" if v_theta.method == v_omega.method == "exact" else "sampled"
    return Verdict(ok, method, seed=seed, samples=samples, tolerance=tol,
                   details={"conditions": report, "K_F": str(c.K_F)})


def check_invertible(c: CanonicalCandidate, samples: int = 20, seed: int | None = None,
                     tol: float = DEFAULT_TOL) -> Verdict:
    """Round trip through the supplied inverse, or Newton inversion from a perturbed start."""
    seed = DEFAULT_SEED if seed is None else seed
    rng = sample_rng(seed + 1)
    worst = 0.0
    for _ in range(samples):
        z = rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, c.ext1.dim)
        y = c.F(z)
        if c.inverse is not None:
            back = c.inverse(y)
        else:
            back = _newton_invert(c.F, y, z + 1e-3 * rng.standard_normal(len(z)), tol)
        worst = max(worst, float(np.max(np.abs(back - z))))
    ok = worst <= max(tol, 1e-8)
    return Verdict(ok, "sampled", residual=worst, seed=seed, samples=samples, tolerance=tol,
                   details={"route": "inverse" if c.inverse is not None else "newton"})


def _newton_invert(F: ChartMap, y, start, tol, max_iter: int = 50):
    z = np.array(start, dtype=float)
    for _ in range(max_iter):
        r = F(z) - y
        if np.max(np.abs(r)) <= tol * 1e-3:
            return z
        J = F.jacobian_at(z)
        try:
            z = z - np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise InversionFailure(f"singular Jacobian at {list(z)}") from None
        if not np.all(np.isfinite(z)):
            raise InversionFailure("Newton iteration diverged")
    if np.max(np.abs(F(z) - y)) > tol:
        raise InversionFailure("Newton iteration did not converge")
    return z


def _require_kf(c: CanonicalCandidate):
    if c.K_F is None:
        raise MissingKF("candidate has no K_F; run check_canonical first or supply one")


def transported_hamiltonian(c: CanonicalCandidate, H, verified: Verdict | None = None) -> Expr:
    """``K = H ∘ F + K_F``."""
    _require_kf(c)
    if verified is not None and not verified.ok:
        raise CanonicalError("candidate was not verified canonical")
    H = as_expr(H, c.ext2)
    return c.F.pull(H) + c.K_F


def verify_equivalences(c: CanonicalCandidate, H, samples: int = 100, seed: int | None = None,
                        tol: float = DEFAULT_TOL, potentials=None) -> dict:
    """Conditions 1, 2 and (with potentials) 3 of the equivalence theorem.

    1. ``F*Ω_H = Ω_K`` with ``K = H∘F + K_F`` (exact on polynomials).
    2. ``TF · X̃_K = X̃_H ∘ F`` at sampled points.
    3. ``d_θ̃₁(F*Θ̃₂ - Θ̃₁ - K_F dt) = 0`` for potentials ``Ω_i = d_θi Θ_i``.
    """
    _require_kf(c)
    seed = DEFAULT_SEED if seed is None else seed
    H = as_expr(H, c.ext2)
    K = transported_hamiltonian(c, H)
    sys_H = HamiltonianSystem(c.S2, H)
    sys_K = HamiltonianSystem(c.S1, K)
    report: dict = {"seed": seed, "samples": samples, "tolerance": tol, "K": str(K)}

    r1 = pullback(c.F, omega_h(sys_H)) - omega_h(sys_K)
    v1 = form_is_zero(r1, seed=seed)
    report["condition_1"] = {**v1.to_dict(), "residual_form": r1.to_json()}

    rng = sample_rng(seed)
    XH, XK = sys_H.field, sys_K.field
    worst = 0.0
    used = 0
    for _ in range(samples):
        z = rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, c.ext1.dim)
        try:
            xk = np.concatenate([[1.0], XK.at(z[1:], z[0])])
            pushed = c.F.jacobian_at(z) @ xk
            w = c.F(z)
            xh = np.concatenate([[1.0], XH.at(w[1:], w[0])])
        except (SingularAtPoint, DomainError):
            continue
        used += 1
        worst = max(worst, float(np.max(np.abs(pushed - xh))))
    report["condition_2"] = Verdict(worst <= tol and used > 0, "sampled", residual=worst, seed=seed,
                                    samples=used, tolerance=tol).to_dict()

    if potentials is None:
        report["condition_3"] = {"skipped": True, "notice": "potentials not supplied"}
    else:
        theta1, theta2 = potentials
        report["condition_3"] = condition_3(c, theta1, theta2, seed=seed)
    ok = v1.ok and report["condition_2"]["ok"] and report["condition_3"].get("ok", True)
    report["ok"] = ok
    return report


def _check_potential(S: LcsStructure, Theta: DifferentialForm) -> Verdict:
    return form_equal(ldr_differential(Theta, S.theta), S.omega)


def _tilde_potential(Theta: DifferentialForm, ext: Chart) -> DifferentialForm:
    return extend_form(Theta, ext)


def condition_3(c: CanonicalCandidate, Theta1: DifferentialForm, Theta2: DifferentialForm,
                seed: int | None = None) -> dict:
    p1, p2 = _check_potential(c.S1, Theta1), _check_potential(c.S2, Theta2)
    if not (p1 and p2):
        return {"ok": False, "method": "exact", "notice": "supplied potentials do not satisfy Omega = d_theta Theta",
                "potential_1": p1.ok, "potential_2": p2.ok}
    _, th1 = _tilde(c.S1, c.ext1)
    one_form = (pullback(c.F, _tilde_potential(Theta2, c.ext2)) - _tilde_potential(Theta1, c.ext1)
                - wedge(DifferentialForm.scalar(c.ext1, c.K_F), dt_form(c.ext1)))
    r3 = ldr_differential(one_form, th1)
    v3 = form_is_zero(r3, seed=seed)
    return {**v3.to_dict(), "residual_form": r3.to_json()}


def generating_residual(c: CanonicalCandidate, W, Theta1: DifferentialForm, Theta2: DifferentialForm) -> DifferentialForm:
    """``F*Θ̃₂ - Θ̃₁ - K_F dt - d_θ̃₁ W``; zero iff ``W`` generates ``F`` with ``K_F``."""
    _require_kf(c)
    W = as_expr(W, c.ext1)
    _, th1 = _tilde(c.S1, c.ext1)
    lhs = (pullback(c.F, _tilde_potential(Theta2, c.ext2)) - _tilde_potential(Theta1, c.ext1)
           - wedge(DifferentialForm.scalar(c.ext1, c.K_F), dt_form(c.ext1)))
    return lhs - ldr_differential(DifferentialForm.scalar(c.ext1, W), th1)


def f_dot(c: CanonicalCandidate, Theta2: DifferentialForm) -> Expr:
    """Coefficient of ``dt`` in ``F*Θ₂`` (potential pulled back without its ``dt`` term)."""
    return pullback(c.F, extend_form(Theta2, c.ext2)).coeff(0)


def kf_from_generating_function(c: CanonicalCandidate, W, Theta2: DifferentialForm) -> Expr:
    """``K_F = Ḟ - ∂W/∂t``, read off the ``dt`` part of the generating relation."""
    return f_dot(c, Theta2) - as_expr(W, c.ext1).diff(TIME)


def compose(outer: CanonicalCandidate, inner: CanonicalCandidate) -> CanonicalCandidate:
    """``outer ∘ inner`` with ``K = K_inner + K_outer ∘ inner``."""
    if outer.S1.chart != inner.S2.chart:
        raise CanonicalError("charts do not align for composition")
    _require_kf(outer)
    _require_kf(inner)
    F = outer.F.compose(inner.F)
    K = inner.K_F + inner.F.pull(outer.K_F)
    inv = None
    if outer.inverse is not None and inner.inverse is not None:
        inv = inner.inverse.compose(outer.inverse)
    return CanonicalCandidate(F, inner.S1, outer.S2, K, inv)
