"""Command-line driver: validate | integrate | hj | canonical | example.

Exit codes: 0 pass, 1 verification failure, 2 config or parse error,
3 runtime singularity or inversion failure.  Every option may also come
from a JSON config file (``--config``); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .canonical import CanonicalCandidate, CanonicalError, InversionFailure, MissingKF, check_canonical, verify_equivalences
from .contact import REPRESENTATIONS, LieSystemSpec, UnknownRepresentation, builtin_structure, lie_system_field
from .dynamics import HamiltonianSystem, IntegrationAborted, NonFiniteState, integrate
from .expr import DEFAULT_SEED, Chart, DomainError, ExprError, is_zero
from .exterior import DifferentialForm
from .hamjac import SectionError, TimeSection, check_theta_closed, gamma_relatedness, hj_residual
from .lcs import ClosednessViolation, DegeneracyDetected, LcsError, SingularAtPoint, cotangent_lcs, validate_lcs
from .report import jsonable

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
SEED_ENV = "LCSMECH_SEED"
DEFAULT_TOL = 1e-9

DEFAULTS = {
    "samples": 100,
    "tolerance": DEFAULT_TOL,
    "t0": 0.0,
    "t1": 1.0,
    "dt": 1e-3,
    "method": "rk4",
    "format": None,
    "diagnostics": False,
    "strict": False,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# descriptors


def _load_json_arg(value):
    """A JSON value given inline, as a file path, or already decoded."""
    if not isinstance(value, str):
        return value
    path = Path(value)
    if value.strip()[:1] not in "{[\"" and path.is_file():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{value}: invalid JSON ({exc})") from None
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON descriptor: {exc}") from None


def parse_form(chart: Chart, degree: int, spec) -> DifferentialForm:
    if spec is None:
        return DifferentialForm.zero(chart, degree)
    if isinstance(spec, dict) and "terms" in spec:
        return DifferentialForm.from_json(chart, spec)
    if isinstance(spec, dict):
        return DifferentialForm.parse(chart, degree, spec)
    raise ConfigError(f"cannot read a {degree}-form from {spec!r}")


def load_structure(desc, samples: int | None = None, seed: int | None = None):
    """Structure from a built-in id, a JSON file, inline JSON or a dict."""
    if isinstance(desc, str) and desc in REPRESENTATIONS:
        desc = {"builtin": desc}
    desc = _load_json_arg(desc)
    if isinstance(desc, str) and desc in REPRESENTATIONS:
        desc = {"builtin": desc}
    if not isinstance(desc, dict):
        raise ConfigError("structure descriptor must be an object")
    kw = {}
    if samples is not None:
        kw["sample_count"] = samples
    if seed is not None:
        kw["seed"] = seed
    if "builtin" in desc:
        return builtin_structure(desc["builtin"], **kw)
    if "cotangent" in desc:
        spec = desc["cotangent"]
        n = int(spec["base_dim"])
        base = Chart.cotangent_chart(n).base()
        vartheta = parse_form(base, 1, spec.get("vartheta"))
        return cotangent_lcs(n, vartheta, **kw)
    if "coordinates" in desc:
        chart = Chart(tuple(desc["coordinates"]))
        omega = parse_form(chart, 2, desc.get("omega"))
        theta = parse_form(chart, 1, desc.get("theta"))
        return validate_lcs(omega, theta, **kw)
    raise ConfigError("structure descriptor needs 'builtin', 'cotangent' or 'coordinates'")


def _as_list(value):
    if value is None:
        return None
    if isinstance(value, str):
        return [v.strip() for v in value.split(",")] if not value.strip().startswith("[") else json.loads(value)
    return list(value)


def _floats(value):
    items = _as_list(value)
    return None if items is None else [float(v) for v in items]


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg: dict) -> tuple[int, dict]:
    report = _base_report(cfg)
    report["structure"] = cfg.get("structure")
    try:
        S = load_structure(cfg.get("structure"), cfg["samples"], cfg["seed"])
    except ClosednessViolation as exc:
        report.update(ok=False, violation=exc.which, residual=exc.residual.to_json())
        return EXIT_FAIL, report
    except DegeneracyDetected as exc:
        report.update(ok=False, violation="degenerate", point=exc.point, det=exc.det)
        return EXIT_FAIL, report
    report.update(ok=True, closedness=S.report["closedness"], nondegeneracy=S.report["nondegeneracy"],
                  coordinates=list(S.chart.coords))
    return EXIT_OK, report


def _system_or_field(cfg: dict):
    lie = cfg.get("lie_system")
    if lie is not None:
        lie = _load_json_arg(lie) if isinstance(lie, str) and lie.strip().startswith("{") else lie
        if isinstance(lie, str):
            lie = {"representation": lie}
        coeffs = _as_list(lie.get("coefficients", cfg.get("coefficients"))) or ["1", "1", "1", "1"]
        spec = LieSystemSpec(lie["representation"], tuple(coeffs))
        return lie_system_field(spec), {"lie_system": lie["representation"], "coefficients": coeffs}
    if cfg.get("hamiltonian") is None:
        raise ConfigError("integrate needs a hamiltonian or a lie_system")
    S = load_structure(cfg.get("structure"), cfg["samples"], cfg["seed"])
    return HamiltonianSystem(S, cfg["hamiltonian"]), {"hamiltonian": cfg["hamiltonian"]}


def cmd_integrate(cfg: dict) -> tuple[int, dict]:
    report = _base_report(cfg)
    dt, t0, t1 = float(cfg["dt"]), float(cfg["t0"]), float(cfg["t1"])
    if not dt > 0:
        raise ConfigError("dt must be positive")
    if not t1 > t0:
        raise ConfigError("t1 must exceed t0")
    x0 = _floats(cfg.get("x0"))
    if x0 is None:
        raise ConfigError("integrate needs an initial state x0")
    target, what = _system_or_field(cfg)
    report.update(what)
    report.update(method=cfg["method"], dt=dt, t0=t0, t1=t1, x0=x0)
    code = EXIT_OK
    try:
        traj = integrate(target, x0, t0, t1, dt, method=cfg["method"],
                         diagnostics=bool(cfg["diagnostics"]) and isinstance(target, HamiltonianSystem))
    except (IntegrationAborted, NonFiniteState) as exc:
        traj = exc.partial
        code = EXIT_RUNTIME
        report.update(ok=False, aborted=str(exc))
    else:
        report["ok"] = True
    report.update(steps=traj.steps, final_time=float(traj.times[-1]), final=[float(v) for v in traj.final],
                  coordinates=list(traj.coords))
    if traj.diagnostics is not None and len(traj.diagnostics):
        report["max_defining_residual"] = float(np.max(traj.diagnostics))
    out = cfg.get("output")
    if out:
        fmt = cfg.get("format") or ("json" if str(out).endswith(".json") else "csv")
        Path(out).write_text(traj.to_json() if fmt == "json" else traj.to_csv())
        report["output"] = {"path": str(out), "format": fmt}
    return code, report


def cmd_hj(cfg: dict) -> tuple[int, dict]:
    report = _base_report(cfg)
    S = load_structure(cfg.get("structure"), cfg["samples"], cfg["seed"])
    if not S.is_cotangent:
        raise ConfigError("hj needs a cotangent structure")
    if cfg.get("hamiltonian") is None or cfg.get("section") is None:
        raise ConfigError("hj needs a hamiltonian and a section")
    section = cfg["section"]
    if isinstance(section, dict):
        section = section["components"]
    gamma = TimeSection.parse(S, _as_list(section))
    sys_ = HamiltonianSystem(S, cfg["hamiltonian"])
    closed = check_theta_closed(gamma, S, seed=cfg["seed"])
    report.update(hamiltonian=cfg["hamiltonian"], section=gamma.to_json(), theta_closed=closed.to_dict())
    if cfg["strict"] and not closed.ok:
        report["ok"] = False
        report["notice"] = "section is not theta-closed (strict mode)"
        return EXIT_FAIL, report
    residual = hj_residual(sys_, gamma)
    zero = [is_zero(r, samples=cfg["samples"], tol=cfg["tolerance"], seed=cfg["seed"]) for r in residual]
    rel = gamma_relatedness(sys_, gamma, samples=cfg["samples"], seed=cfg["seed"], tol=cfg["tolerance"])
    report["residual"] = [str(r) for r in residual]
    report["residual_zero"] = [v.to_dict() for v in zero]
    report["max_sampled_residual"] = rel.details["max_hj_residual"]
    report["related"] = rel.details["related"]
    report["max_mismatch"] = rel.details["max_mismatch"]
    report["consistent"] = rel.details["consistent"]
    ok = all(v.ok for v in zero) and rel.ok
    report["ok"] = ok
    return (EXIT_OK if ok else EXIT_FAIL), report


def _candidate(cfg: dict) -> CanonicalCandidate:
    S1 = load_structure(cfg.get("structure"), cfg["samples"], cfg["seed"])
    target = cfg.get("target")
    S2 = S1 if target is None else load_structure(target, cfg["samples"], cfg["seed"])
    comps = _as_list(cfg.get("map"))
    if comps is None:
        raise ConfigError("canonical needs a map")
    return CanonicalCandidate.from_strings(S1, S2, comps, K_F=cfg.get("kf"), inverse=_as_list(cfg.get("inverse")))


def cmd_canonical(cfg: dict) -> tuple[int, dict]:
    report = _base_report(cfg)
    c = _candidate(cfg)
    try:
        v = check_canonical(c, samples=cfg["samples"], seed=cfg["seed"], tol=cfg["tolerance"])
    except MissingKF as exc:
        raise ConfigError(str(exc)) from None
    report["map"] = [str(e) for e in c.F.components]
    report["candidate"] = v.to_dict()
    ok = v.ok
    if cfg.get("hamiltonian") is not None:
        potentials = None
        if cfg.get("potentials") is not None:
            pots = _load_json_arg(cfg["potentials"])
            potentials = (parse_form(c.S1.chart, 1, pots[0]), parse_form(c.S2.chart, 1, pots[1]))
        eq = verify_equivalences(c, cfg["hamiltonian"], samples=cfg["samples"], seed=cfg["seed"],
                                 tol=cfg["tolerance"], potentials=potentials)
        report["theorem"] = eq
        ok = ok and eq["ok"]
    report["ok"] = ok
    return (EXIT_OK if ok else EXIT_FAIL), report


# ---------------------------------------------------------------------------
# example gallery

EXAMPLES = {
    "g41-rep1": {"command": "validate", "structure": "g41-rep1"},
    "g41-rep2": {"command": "validate", "structure": "g41-rep2"},
    "g41-rep4": {"command": "validate", "structure": "g41-rep4"},
    "system1": {"command": "integrate", "lie_system": "g41-rep1", "coefficients": ["1", "1", "1", "1"],
                "x0": [0, 0, 0, 0], "t0": 0, "t1": 1, "dt": 1e-3},
    "free-particle": {"command": "integrate", "structure": {"cotangent": {"base_dim": 1}},
                      "hamiltonian": "p1^2/2", "x0": [0, 1], "t0": 0, "t1": 2, "dt": 0.01, "diagnostics": True},
    "lee-damped": {"command": "integrate", "structure": {"cotangent": {"base_dim": 1, "vartheta": {"q1": "1"}}},
                   "hamiltonian": "p1^2/2 + q1^2/2", "x0": [1, 0], "t0": 0, "t1": 1, "dt": 1e-3,
                   "diagnostics": True},
    "hj-free-particle": {"command": "hj", "structure": {"cotangent": {"base_dim": 1}},
                         "hamiltonian": "p1^2/2", "section": ["2"]},
    "hj-trial-section": {"command": "hj",
                          "structure": {"cotangent": {"base_dim": 1, "vartheta": {"q1": "1"}}},
                          "hamiltonian": "p1^2/2 + t*q1", "section": ["t*exp(q1)"]},
    "canonical-identity": {"command": "canonical", "structure": {"cotangent": {"base_dim": 1}},
                           "map": ["q1", "p1"], "kf": "0", "inverse": ["q1", "p1"], "hamiltonian": "p1^2/2"},
    "fiber-translation": {"command": "canonical", "structure": {"cotangent": {"base_dim": 1}},
                          "map": ["q1", "p1 + 2*t"], "kf": "2*q1", "inverse": ["q1", "p1 - 2*t"],
                          "hamiltonian": "p1^2/2", "potentials": [{"q1": "-p1"}, {"q1": "-p1"}]},
}


def cmd_example(cfg: dict) -> tuple[int, dict]:
    name = cfg.get("name")
    if name in (None, "list"):
        return EXIT_OK, {"examples": sorted(EXAMPLES)}
    if name not in EXAMPLES:
        raise ConfigError(f"unknown example {name!r}; try 'lcsmech example list'")
    sub = dict(EXAMPLES[name])
    for key in ("seed", "samples", "tolerance", "output", "format"):
        if cfg.get(key) is not None:
            sub[key] = cfg[key]
    sub = _finish_config(sub)
    code, report = COMMANDS[sub["command"]](sub)
    report["example"] = name
    return code, report


COMMANDS = {
    "validate": cmd_validate,
    "integrate": cmd_integrate,
    "hj": cmd_hj,
    "canonical": cmd_canonical,
    "example": cmd_example,
}


# ---------------------------------------------------------------------------
# argument handling


def _base_report(cfg: dict) -> dict:
    return {"command": cfg["command"], "seed": cfg["seed"], "samples": cfg["samples"], "tolerance": cfg["tolerance"],
            "version": __version__}


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _finish_config(cfg: dict) -> dict:
    out = {k: v for k, v in cfg.items() if v is not None}
    for k, v in DEFAULTS.items():
        out.setdefault(k, v)
    if "seed" not in out:
        out["seed"] = default_seed()
    out["seed"] = int(out["seed"])
    out["samples"] = int(out["samples"])
    out["tolerance"] = float(out["tolerance"])
    if out.get("command") not in COMMANDS:
        raise ConfigError(f"unknown command {out.get('command')!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with options (flags override it)")
    common.add_argument("--seed", type=int, help=f"sampling seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    common.add_argument("--samples", type=int, help="sample count for sampled checks")
    common.add_argument("--tolerance", type=float, help="tolerance for sampled checks")
    common.add_argument("--report", help="also write the JSON report to this file")

    p = argparse.ArgumentParser(prog="lcsmech", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lcsmech {__version__}")
    sub = p.add_subparsers(dest="command")

    v = sub.add_parser("validate", parents=[common], help="check closedness and nondegeneracy")
    v.add_argument("structure", nargs="?", help="built-in id, JSON file or inline JSON")

    i = sub.add_parser("integrate", parents=[common], help="integrate a Hamiltonian system or Lie system")
    i.add_argument("--structure")
    i.add_argument("--hamiltonian")
    i.add_argument("--lie-system", dest="lie_system", help="built-in representation id")
    i.add_argument("--coefficients", help="comma separated a1..a4 as functions of t")
    i.add_argument("--x0", help="comma separated initial state")
    i.add_argument("--t0", type=float)
    i.add_argument("--t1", type=float)
    i.add_argument("--dt", type=float)
    i.add_argument("--method", choices=["rk4", "euler"])
    i.add_argument("--output", help="trajectory file (.csv or .json)")
    i.add_argument("--format", choices=["csv", "json"])
    i.add_argument("--diagnostics", action="store_true", default=None,
                   help="record the defining-equation residual per sample")

    h = sub.add_parser("hj", parents=[common], help="Hamilton-Jacobi residual and relatedness")
    h.add_argument("--structure")
    h.add_argument("--hamiltonian")
    h.add_argument("--section", help="comma separated components gamma_i(t, q)")
    h.add_argument("--strict", action="store_true", default=None, help="fail when the section is not theta-closed")

    c = sub.add_parser("canonical", parents=[common], help="check a canonical transformation")
    c.add_argument("--structure")
    c.add_argument("--target", help="target structure (defaults to the source)")
    c.add_argument("--map", help="comma separated target coordinates as functions of (t, x)")
    c.add_argument("--kf", help="the function K_F")
    c.add_argument("--inverse", help="comma separated inverse map")
    c.add_argument("--hamiltonian", help="also check the equivalence theorem for this H")
    c.add_argument("--potentials", help="JSON pair of potential one-forms")

    e = sub.add_parser("example", parents=[common], help="run a built-in example ('list' to show them)")
    e.add_argument("name", nargs="?")
    e.add_argument("--output")
    e.add_argument("--format", choices=["csv", "json"])
    return p


def parse_config(argv) -> dict:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if v is not None}
    cfg = {}
    if flags.get("config"):
        loaded = _load_json_arg(flags["config"])
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(loaded)
    cfg.update({k: v for k, v in flags.items() if k != "config"})
    if cfg.get("command") is None:
        raise ConfigError("no command given")
    return _finish_config(cfg)


def run(argv=None) -> tuple[int, dict]:
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg["command"]](cfg)
    except DomainError as exc:
        return EXIT_RUNTIME, {"ok": False, "error": type(exc).__name__, "message": str(exc)}
    except (ConfigError, ExprError, SectionError, CanonicalError, UnknownRepresentation, KeyError, TypeError,
            ValueError) as exc:
        code = EXIT_FAIL if isinstance(exc, LcsError) and not isinstance(exc, ConfigError) else EXIT_CONFIG
        return code, {"ok": False, "error": type(exc).__name__, "message": str(exc)}
    except (SingularAtPoint, InversionFailure, ArithmeticError) as exc:
        return EXIT_RUNTIME, {"ok": False, "error": type(exc).__name__, "message": str(exc)}


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    code, report = run(argv)
    text = dumps(report)
    sys.stdout.write(text)
    if getattr(args, "report", None):
        Path(args.report).write_text(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
