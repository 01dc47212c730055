"""Time-dependent Hamiltonian dynamics on lcs structures and fixed-step integration."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .expr import DEFAULT_SEED, SAMPLE_HIGH, SAMPLE_LOW, TIME, Chart, DomainError, Expr, as_expr, compile_exprs, sample_rng
from .exterior import (DifferentialForm, PointwiseField, VectorFieldExpr, dt_form, extend_form, form_is_zero,
                       interior_product, ldr_differential, wedge)
from .lcs import LcsStructure, SingularAtPoint, pointwise_sharp
from .report import Verdict

METHODS = ("rk4", "euler")


class NonFiniteState(ArithmeticError):
    def __init__(self, t, partial=None):
        super().__init__(f"state became non-finite at t={t}")
        self.t = t
        self.partial = partial


class IntegrationAborted(ArithmeticError):
    """Raised when the field cannot be evaluated mid-run; carries the partial trajectory."""

    def __init__(self, cause: Exception, partial: "Trajectory"):
        super().__init__(str(cause))
        self.cause = cause
        self.partial = partial


@dataclass(frozen=True)
class HamiltonianSystem:
    structure: LcsStructure
    hamiltonian: Expr

    def __post_init__(self):
        h = as_expr(self.hamiltonian, self.structure.chart, allow_time=True)
        extra = h.free_vars() - set(self.structure.chart.coords) - {TIME}
        if extra:
            raise ValueError(f"Hamiltonian uses unknown variables {sorted(extra)}")
        object.__setattr__(self, "hamiltonian", h)

    @property
    def chart(self) -> Chart:
        return self.structure.chart

    def d_theta_h(self) -> DifferentialForm:
        """Spatial ``d_θ H_t`` (time enters as a parameter)."""
        return ldr_differential(DifferentialForm.scalar(self.chart, self.hamiltonian), self.structure.theta)

    @cached_property
    def field(self):
        """Cached :func:`hamiltonian_field`."""
        return hamiltonian_field(self)

    @cached_property
    def _alpha_fn(self):
        return compile_exprs(self.d_theta_h().components(), (TIME,) + self.chart.coords)

    def alpha_at(self, x, t) -> np.ndarray:
        return np.array(self._alpha_fn(float(t), *(float(v) for v in x)), dtype=float)


def hamiltonian_field(sys: HamiltonianSystem):
    """``X`` with ``ι_X Ω = d_θ H_t`` at every ``(t, x)``.

    Returns a time-dependent :class:`VectorFieldExpr` when Ω has an exact
    inverse, otherwise a :class:`PointwiseField`.
    """
    alpha = sys.d_theta_h()
    field_ = sys.structure.sharp_expr(alpha)
    if field_ is not None:
        return field_
    return pointwise_sharp(sys.structure, alpha, f"X_H for H = {sys.hamiltonian}")


def defining_residual(sys: HamiltonianSystem, x, t, value=None) -> float:
    """Max-norm of ``ι_X Ω - d_θ H_t`` at ``(t, x)``."""
    if value is None:
        value = sys.field.at(x, t)
    m = sys.structure.matrix_at(x)
    alpha = sys.alpha_at(x, t)
    return float(np.max(np.abs(m.T @ np.asarray(value, dtype=float) - alpha)))


# ---------------------------------------------------------------------------
# suspension


def omega_h(sys: HamiltonianSystem) -> DifferentialForm:
    """``Ω_H = Ω̃ + d_θ̃ H ∧ dt`` on ``R × M``."""
    ext = sys.chart.extended()
    omega = extend_form(sys.structure.omega, ext)
    theta = extend_form(sys.structure.theta, ext)
    dth = ldr_differential(DifferentialForm.scalar(ext, sys.hamiltonian), theta)
    return omega + wedge(dth, dt_form(ext))


@dataclass
class Suspension:
    field: object  # VectorFieldExpr on the extended chart, or PointwiseField
    verdict: Verdict

    def at(self, point, t=None):
        return self.field.at(point, t)


def suspend(X, chart: Chart | None = None):
    """``∂/∂t + X`` on the time-extended chart."""
    if isinstance(X, VectorFieldExpr):
        ext = X.chart.extended()
        return VectorFieldExpr(ext, [1] + list(X.components))
    base = chart or X.chart
    ext = base.extended()

    def fn(point, t):
        return np.concatenate([[1.0], X.at(point[1:], point[0])])

    return PointwiseField(ext, fn, "suspension")


def suspension(sys: HamiltonianSystem, samples: int = 100, seed: int | None = None, tol: float = 1e-9) -> Suspension:
    """Suspended field with a check of ``ι Ω_H = 0`` and ``ι dt = 1``."""
    X = hamiltonian_field(sys)
    field_ = suspend(X, sys.chart)
    oh = omega_h(sys)
    ext = sys.chart.extended()
    if isinstance(field_, VectorFieldExpr):
        c1 = interior_product(field_, oh)
        c2 = interior_product(field_, dt_form(ext)).scalar_part()
        v1 = form_is_zero(c1, seed=seed)
        if v1.method == "exact":
            ok = v1.ok and c2 == Expr.const(1)
            return Suspension(field_, Verdict(ok, "exact", residual=0.0 if ok else None,
                                              details={"contraction": c1.to_json(), "dt": str(c2)}))
    seed = DEFAULT_SEED if seed is None else seed
    rng = sample_rng(seed)
    from .exterior import form_matrix_at

    worst = 0.0
    worst_dt = 0.0
    for _ in range(samples):
        z = rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, ext.dim)
        v = field_.at(z)
        m = form_matrix_at(oh, z)
        worst = max(worst, float(np.max(np.abs(m.T @ v))))
        worst_dt = max(worst_dt, abs(v[0] - 1.0))
    ok = worst <= tol and worst_dt <= tol
    return Suspension(field_, Verdict(ok, "sampled", residual=max(worst, worst_dt), seed=seed, samples=samples,
                                      tolerance=tol))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    dt: float
    method: str
    coords: tuple = ()
    diagnostics: np.ndarray | None = None
    steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = list(self.coords) or [f"x{i + 1}" for i in range(self.states.shape[1])]
        header = ["t"] + names
        if self.diagnostics is not None:
            header.append("residual")
        writer.writerow(header)
        for k, (t, x) in enumerate(zip(self.times, self.states)):
            row = [repr(float(t))] + [repr(float(v)) for v in x]
            if self.diagnostics is not None:
                row.append(repr(float(self.diagnostics[k])))
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        names = list(self.coords) or [f"x{i + 1}" for i in range(self.states.shape[1])]
        samples = []
        for k, (t, x) in enumerate(zip(self.times, self.states)):
            item = {"t": float(t), "x": [float(v) for v in x]}
            if self.diagnostics is not None:
                item["residual"] = float(self.diagnostics[k])
            samples.append(item)
        return json.dumps({"method": self.method, "dt": self.dt, "coordinates": names, "samples": samples},
                          sort_keys=True)


def _as_rhs(system_or_field, chart=None) -> tuple[Callable, tuple, HamiltonianSystem | None]:
    sys = None
    if isinstance(system_or_field, HamiltonianSystem):
        sys = system_or_field
        field_ = sys.field
    else:
        field_ = system_or_field
    if isinstance(field_, VectorFieldExpr):
        fn = compile_exprs(field_.components, (TIME,) + field_.chart.coords)

        def rhs(t, x):
            return np.array(fn(t, *x), dtype=float)

        return rhs, field_.chart.coords, sys
    if isinstance(field_, PointwiseField):
        return (lambda t, x: field_.at(x, t)), field_.chart.coords, sys
    if callable(field_):
        coords = tuple(chart.coords) if chart is not None else ()
        return (lambda t, x: np.asarray(field_(t, x), dtype=float)), coords, sys
    raise TypeError(f"cannot integrate {type(system_or_field).__name__}")


def integrate(system_or_field, x0: Sequence[float], t0: float, t1: float, dt: float, method: str = "rk4",
              diagnostics: bool = False) -> Trajectory:
    """Fixed-step integration from ``t0`` to exactly ``t1`` (last step shortened).

    ``system_or_field`` is a :class:`HamiltonianSystem`, a (time-dependent)
    vector field, or a callable ``f(t, x)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    rhs, coords, sys = _as_rhs(system_or_field)
    x = np.array(x0, dtype=float)
    if coords and len(x) != len(coords):
        raise ValueError(f"initial state has {len(x)} entries, chart has {len(coords)}")
    n_steps = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    times = [t0]
    states = [x.copy()]
    diag = []
    field_ = sys.field if (diagnostics and sys is not None) else None

    def record_diag(t, state):
        if field_ is not None:
            diag.append(defining_residual(sys, state, t, field_.at(state, t)))

    def partial():
        return Trajectory(np.array(times), np.array(states), dt, method, tuple(coords),
                          np.array(diag) if field_ is not None else None, len(times) - 1)

    try:
        record_diag(t0, x)
        for k in range(n_steps):
            t = t0 + k * dt
            t_next = t1 if k == n_steps - 1 else t0 + (k + 1) * dt
            h = t_next - t
            if method == "rk4":
                k1 = rhs(t, x)
                k2 = rhs(t + h / 2, x + h / 2 * k1)
                k3 = rhs(t + h / 2, x + h / 2 * k2)
                k4 = rhs(t + h, x + h * k3)
                x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                x = x + h * rhs(t, x)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(t_next, partial())
            times.append(t_next)
            states.append(x.copy())
            record_diag(t_next, x)
    except (SingularAtPoint, DomainError) as exc:
        raise IntegrationAborted(exc, partial()) from exc
    except OverflowError as exc:
        raise NonFiniteState(times[-1], partial()) from exc
    traj = partial()
    return traj


def estimate_order(dts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    slope, _ = np.polyfit(np.log(np.asarray(dts)), np.log(np.asarray(errors)), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# coordinate form of the equations on cotangent charts


def hamilton_rhs_coordinates(sys: HamiltonianSystem, t: float, x: Sequence[float]):
    """Right-hand side in canonical coordinates and its gap to the intrinsic solve.

    ``q̇^i = ∂H/∂p_i`` and
    ``ṗ_i = -∂H/∂q^i + ∂H/∂p_k (θ_k p_i - p_k θ_i) + θ_i H``.
    Returns ``(rhs, discrepancy)`` with the max-norm discrepancy against
    :func:`hamiltonian_field`.
    """
    S = sys.structure
    if not S.is_cotangent:
        raise ValueError("coordinate Hamilton equations need a cotangent chart")
    n = S.base.dim
    env = {TIME: float(t), **{c: float(v) for c, v in zip(S.chart.coords, x)}}
    H = sys.hamiltonian
    theta = [c.evaluate(env) for c in S.theta.components()[:n]]
    q_names = S.chart.coords[:n]
    p_names = S.chart.coords[n:]
    p = [env[name] for name in p_names]
    Hq = [H.diff(name).evaluate(env) for name in q_names]
    Hp = [H.diff(name).evaluate(env) for name in p_names]
    Hv = H.evaluate(env)
    qdot = list(Hp)
    pdot = []
    for i in range(n):
        s = -Hq[i] + theta[i] * Hv
        for k in range(n):
            s += Hp[k] * (theta[k] * p[i] - p[k] * theta[i])
        pdot.append(s)
    rhs = np.array(qdot + pdot, dtype=float)
    intrinsic = sys.field.at(x, t)
    return rhs, float(np.max(np.abs(rhs - intrinsic)))
