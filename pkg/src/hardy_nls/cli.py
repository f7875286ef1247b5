"""Command-line entry point: ``hardy-nls <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input (bad flags, parameters,
files or configs) and 2 when a numerical procedure fails.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .errors import (
    BracketInvalid, GridTooCoarse, HardyNLSError, InvalidParams, MalformedCsv, MassMismatch,
    NoConvergence, NonDecrease, NonMonotoneGrid, ParamsMismatch, SolverDiverged, StepFailure,
)
from .io import ConfigError, fmt, format_summary, load_config, parse_profile_csv, write_csv
from .params import ModelParams, parse_coupling, parse_exponent

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (StepFailure, BracketInvalid, NoConvergence, NonDecrease, GridTooCoarse, SolverDiverged)
INVALID_ERRORS = (InvalidParams, MalformedCsv, NonMonotoneGrid, ParamsMismatch, MassMismatch, ConfigError,
                  OSError, ValueError)

log = logging.getLogger("hardy_nls")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, required=True, help="spatial dimension (>= 3)")
    p.add_argument("--p", required=True, help="nonlinearity exponent, e.g. 4 or 10/3")
    p.add_argument("--c", default="critical", help="Hardy coupling or 'critical' (default)")


def _params(ns) -> ModelParams:
    return ModelParams(ns.d, parse_exponent(ns.p), parse_coupling(ns.c, ns.d))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardy-nls", description="Ground states and dynamics of the NLS with an inverse-square potential.")
    parser.add_argument("--version", action="version", version=f"hardy_nls {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("ground-state", help="shoot for the ground state and write its profile")
    _add_model(g)
    g.add_argument("--tol", type=float, default=1e-12)
    g.add_argument("--rmax", type=float, default=30.0)
    g.add_argument("--out", help="CSV file for columns r, v, Q")
    g.add_argument("--summary", help="write the key: value summary here instead of stdout")

    c = sub.add_parser("constant", help="sharp Hardy-Gagliardo-Nirenberg constant")
    _add_model(c)
    c.add_argument("--tol", type=float, default=1e-12)

    e = sub.add_parser("evolve", help="time evolution driven by a key = value config file")
    e.add_argument("--config", required=True)

    k = sub.add_parser("classify", help="global existence / blow-up verdict for a profile")
    _add_model(k)
    k.add_argument("--profile", required=True, help="CSV with columns r,re[,im]")
    k.add_argument("--finite-variance", action="store_true")

    v = sub.add_parser("verify", help="check identities along the ground state")
    _add_model(v)
    v.add_argument("--pohozaev", action="store_true", help="check dJ/dr = G v^2")
    v.add_argument("--identities", action="store_true", help="Nehari and Derrick identities")
    v.add_argument("--variant", choices=["printed", "consistent", "both"], default="both")
    v.add_argument("--out", help="CSV prefix for the Pohozaev reports")
    v.add_argument("--tol", type=float, default=1e-5)
    return parser


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_ground_state(ns) -> int:
    from .ground_state import shoot

    params = _params(ns)
    gs = shoot(params, tol=ns.tol, r_max=ns.rmax)
    extra = {"tol": ns.tol, "rmax": ns.rmax}
    if ns.out:
        write_csv(ns.out, ["r", "v", "Q"], zip(gs.r, gs.v, gs.q), params, extra)
    _emit(format_summary(gs.summary(), params, extra), ns.summary)
    return EXIT_OK


def cmd_constant(ns) -> int:
    from .ground_state import shoot, sharp_constant_mass_critical

    params = _params(ns)
    gs = shoot(params, tol=ns.tol)
    out = {"c_hgn": gs.c_hgn, "mass": gs.mass, "theta": params.theta}
    if params.mass_critical:
        special = sharp_constant_mass_critical(gs.mass, params.d)
        out["c_hgn_mass_critical_form"] = special
        out["relative_difference"] = abs(special - gs.c_hgn) / gs.c_hgn
    sys.stdout.write(format_summary(out, params, {"tol": ns.tol}))
    return EXIT_OK


def cmd_verify(ns) -> int:
    from .ground_state import shoot
    from .pohozaev import Variant, verify_ground_state

    params = _params(ns)
    if not (ns.pohozaev or ns.identities):
        raise UsageError("verify needs --pohozaev and/or --identities")
    gs = shoot(params)
    out: Dict[str, object] = {}
    if ns.identities:
        out["nehari_defect"] = gs.nehari_defect()
        out["derrick_defect"] = gs.derrick_defect()
        out["identities"] = "Pass" if max(abs(gs.nehari_defect()), abs(gs.derrick_defect())) <= 1e-6 else "Fail"
    if ns.pohozaev:
        variants = [Variant.CONSISTENT, Variant.PRINTED] if ns.variant == "both" else [Variant.parse(ns.variant)]
        for var in variants:
            rep = verify_ground_state(gs, var, tol=ns.tol)
            key = var.value
            out[f"{key}_max_relative_residual"] = rep.max_relative_residual
            out[f"{key}_result"] = "Pass" if rep.passed else "Fail"
            out[f"{key}_J_positive"] = rep.j_positive()
            out[f"{key}_J_decreasing"] = rep.j_decreasing()
            if ns.out:
                write_csv(f"{ns.out}_{key}.csv", ["r", "J", "Gv2", "residual"], rep.to_rows(), params,
                          {"variant": key, "tol": ns.tol})
    sys.stdout.write(format_summary(out, params, {"tol": ns.tol}))
    return EXIT_OK


def cmd_classify(ns) -> int:
    from .classify import classify
    from .ground_state import shoot

    params = _params(ns)
    prof = parse_profile_csv(ns.profile, params.d)
    gs = shoot(params)
    res = classify(prof, params, gs, has_finite_variance=ns.finite_variance)
    sys.stdout.write(format_summary(res.summary(), params, {"finite_variance": ns.finite_variance}))
    return EXIT_OK


_EVOLVE_KEYS = {
    "d", "p", "c", "r_max", "dr", "dt", "t_end", "log_every", "initial", "snapshots", "diagnostics",
    "snapshot_prefix", "sponge", "blowup_factor", "sweeps",
}


def _evolve_setup(cfg: Dict[str, str], base: Path):
    from .dynamics import EvolutionGrid, EvolutionState, ExactBlowupParams, discrete_ground_state, exact_blowup_v
    from .ground_state import shoot

    unknown = set(cfg) - _EVOLVE_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("d", "p", "dt", "t_end"):
        if key not in cfg:
            raise ConfigError(f"config is missing {key!r}")
    params = ModelParams(int(cfg["d"]), parse_exponent(cfg["p"]), parse_coupling(cfg.get("c"), int(cfg["d"])))
    grid = EvolutionGrid.with_spacing(params, float(cfg.get("r_max", 25.0)), float(cfg.get("dr", 1e-3)))
    initial = cfg.get("initial", "ground").strip()
    kind, _, arg = initial.partition(":")
    kind = kind.strip().lower()
    if kind in ("ground", "ground-continuum"):
        gs = shoot(params)
        v = gs.v_at(grid.r)
        if kind == "ground":
            v = discrete_ground_state(grid, v)
        v = v.astype(complex)
    elif kind == "exact-blowup":
        parts = [float(x) for x in arg.split(",")] if arg.strip() else []
        if len(parts) not in (0, 3):
            raise ConfigError("exact-blowup takes T,lambda,gamma")
        ebp = ExactBlowupParams(*parts)
        gs = shoot(params)
        v = exact_blowup_v(params, ebp, 0.0, gs, grid.r)
    elif kind == "file":
        path = Path(arg.strip())
        if not path.is_absolute():
            path = base / path
        v = grid.from_profile(parse_profile_csv(path, params.d))
    else:
        raise ConfigError(f"unknown initial data {initial!r}")
    return params, grid, EvolutionState.from_values(grid, v)


def cmd_evolve(ns) -> int:
    from .dynamics import DiagnosticRow, evolve

    cfg_path = Path(ns.config)
    cfg = load_config(cfg_path)
    base = cfg_path.parent
    params, grid, state = _evolve_setup(cfg, base)
    dt = float(cfg["dt"])
    t_end = float(cfg["t_end"])
    snaps = [float(x) for x in cfg.get("snapshots", "").replace(",", " ").split()]
    state = evolve(
        state, t_end, dt, log_every=int(cfg.get("log_every", 1)),
        blowup_factor=float(cfg.get("blowup_factor", 1e6)), sponge_strength=float(cfg.get("sponge", 0.0)),
        snapshot_times=snaps, sweeps=int(cfg.get("sweeps", 2)),
    )
    extra = {k: cfg[k] for k in sorted(cfg) if k not in ("d", "p", "c")}
    diag = cfg.get("diagnostics")
    if diag:
        cols = ["t", "mass", "energy", "form_norm_sq", "gamma", "gamma_prime"]
        rows = ([row.t, row.mass, row.energy, row.form_norm_sq, row.gamma, row.gamma_prime] for row in state.log)
        write_csv(base / diag, cols, rows, params, extra)
    prefix = cfg.get("snapshot_prefix")
    if prefix:
        for ts, v in sorted(state.snapshots.items()):
            u = grid.r ** (-params.kappa) * v
            write_csv(base / f"{prefix}_t{fmt(ts)}.csv", ["r", "re", "im"], zip(grid.r, u.real, u.imag),
                      params, dict(extra, t=ts))
    first, last = state.log[0], state.log[-1]
    summary = {
        "t": state.t,
        "steps": state.steps,
        "blowup_detected": state.blowup_detected,
        "mass_drift": abs(last.mass - first.mass) / first.mass if first.mass else 0.0,
        "energy_initial": first.energy,
        "energy_final": last.energy,
        "form_norm_sq_final": last.form_norm_sq,
    }
    sys.stdout.write(format_summary(summary, params, extra))
    return EXIT_OK


COMMANDS = {
    "ground-state": cmd_ground_state,
    "constant": cmd_constant,
    "evolve": cmd_evolve,
    "classify": cmd_classify,
    "verify": cmd_verify,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"hardy-nls: {exc}\n")
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        sys.stderr.write(f"hardy-nls: {exc}\n")
        return EXIT_INVALID
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(f"hardy-nls: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except INVALID_ERRORS as exc:
        sys.stderr.write(f"hardy-nls: {exc}\n")
        return EXIT_INVALID
    except HardyNLSError as exc:
        sys.stderr.write(f"hardy-nls: {exc}\n")
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
