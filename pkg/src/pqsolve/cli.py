"""Batch front end: ``pqsolve <command> --config <path> [--seed N] [--out DIR]``.

The config is an INI-style file of flat ``key = value`` pairs grouped in
sections: ``[instance]`` (domain, mesh, exponents, nonlinearity),
``[solver]`` (tolerances) and one section per command.  Each run writes
``report.json`` and, where a field is computed, ``fields.csv``.

Exit codes: 0 success, 2 no positive solution, 1 any error or failed check.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amann import ProblemInstance, Status, existence_threshold, solve_extremal
from .errors import ConfigError, PQSolveError
from .fem import ExponentSet
from .inner import SolverConfig
from .mesh import Mesh, build_2d_mesh, build_interval_mesh
from .nonlinearity import NonlinearitySpec, validate_hypotheses
from .subsuper import solve_global_supersolution
from .verify import comparison_suite, radial_on_mesh, radial_shoot, scaling_sweep

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_NONEXISTENCE = 0, 1, 2
COMMANDS = ("solve", "sweep", "threshold", "verify", "oracle")
_DOMAIN_RE = re.compile(r"^\s*(interval|disk)\s*\(([^)]*)\)\s*$|^\s*(unit_square)\s*$")


@dataclass
class RunConfig:
    domain: str
    domain_args: tuple
    mesh_n: int | None
    h_target: float | None
    exp: ExponentSet
    nonlinearity: str
    solver: dict
    sections: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def build_mesh(self) -> Mesh:
        if self.domain == "interval":
            if self.mesh_n is None:
                raise ConfigError("[instance] mesh_n is required for an interval domain")
            return build_interval_mesh(*self.domain_args, self.mesh_n)
        if self.h_target is None:
            raise ConfigError("[instance] h_target is required for 2D domains")
        if self.domain == "disk":
            return build_2d_mesh("disk", self.h_target, R=self.domain_args[0])
        return build_2d_mesh("unit_square", self.h_target)

    def solver_config(self, mesh: Mesh) -> SolverConfig:
        return SolverConfig.for_mesh(mesh, **self.solver)


def _get(sec: configparser.SectionProxy, key: str, conv, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"[{sec.name}] missing required key '{key}'")
        return default
    raw = sec[key]
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r}: {exc}") from None


def _float_list(raw: str) -> list[float]:
    return [float(tok) for tok in re.split(r"[,\s]+", raw.strip()) if tok]


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if "instance" not in parser:
        raise ConfigError("config needs an [instance] section")
    inst = parser["instance"]

    dom = _get(inst, "domain", str, required=True)
    m = _DOMAIN_RE.match(dom)
    if not m:
        raise ConfigError(f"[instance] domain = {dom!r}: expected interval(a,b), unit_square or disk(R)")
    if m.group(3):
        domain, args = "unit_square", ()
    else:
        domain = m.group(1)
        try:
            args = tuple(float(t) for t in m.group(2).split(","))
        except ValueError:
            raise ConfigError(f"[instance] domain = {dom!r}: arguments must be numbers") from None
        if len(args) != (2 if domain == "interval" else 1):
            raise ConfigError(f"[instance] domain = {dom!r}: wrong number of arguments")

    try:
        exp = ExponentSet(
            p=_get(inst, "p", float, required=True),
            q=_get(inst, "q", float, required=True),
            beta=_get(inst, "beta", float, 0.5),
            sigma=_get(inst, "sigma", float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"[instance] invalid exponents: {exc}") from None

    solver = {}
    if "solver" in parser:
        sec = parser["solver"]
        for key in ("tol_inner", "tol_outer", "eps_reg"):
            if key in sec:
                solver[key] = _get(sec, key, float)
        for key in ("max_inner_iters", "max_outer_iters"):
            if key in sec:
                solver[key] = _get(sec, key, int)

    kind = _get(inst, "nonlinearity", str, "power_shifted")
    if kind != "power_shifted":
        raise ConfigError(f"[instance] nonlinearity = {kind!r}: only power_shifted is available from the CLI")

    sections = {name: dict(parser[name]) for name in parser.sections()}
    lam_list = sections.get("sweep", {}).get("lambda_list")
    if lam_list is not None:
        try:
            vals = _float_list(lam_list)
        except ValueError:
            raise ConfigError(f"[sweep] lambda_list = {lam_list!r}: not a list of numbers") from None
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("[sweep] lambda_list must be strictly increasing")

    return RunConfig(domain, args, _get(inst, "mesh_n", int), _get(inst, "h_target", float),
                     exp, kind, solver, sections)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def _section_float(cfg: RunConfig, section: str, key: str, default=None) -> float:
    raw = cfg.section(section).get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"[{section}] missing required key '{key}'")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r}: not a number") from None


# ---------------------------------------------------------------------------
# output

def write_fields(path: Path, mesh: Mesh, columns: dict[str, np.ndarray]) -> None:
    """Nodal CSV with 17 significant digits: node, coordinates, d, then ``columns``."""
    coord_names = ["x", "y", "z"][: mesh.dim]
    header = ["node", *coord_names, "d", *columns]
    fmt = lambda v: format(float(v), ".17g")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(mesh.n_nodes):
            row = [i, *map(fmt, mesh.nodes[i]), fmt(mesh.node_distance[i])]
            row += [fmt(col[i]) for col in columns.values()]
            w.writerow(row)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Status):
        return obj.value
    return obj


# ---------------------------------------------------------------------------
# commands

def _instance(cfg: RunConfig, lam: float) -> ProblemInstance:
    mesh = cfg.build_mesh()
    return ProblemInstance(mesh, NonlinearitySpec(cfg.exp), lam, cfg.solver_config(mesh))


def cmd_solve(cfg: RunConfig, out: Path, seed: int) -> tuple[int, dict]:
    lam = _section_float(cfg, "solve", "lambda")
    which = cfg.section("solve").get("which", "maximal")
    inst = _instance(cfg, lam)
    rep = solve_extremal(inst, which)
    report = {
        "status": rep.status.value,
        "lambda": lam,
        "which": which,
        "n_outer": rep.n_outer,
        "residual": rep.residual,
        "c_lower": rep.c_lower,
        "message": rep.message,
        "n_nodes": inst.mesh.n_nodes,
        "hypotheses": {k: v.passed for k, v in validate_hypotheses(inst.nonlinearity).items()},
        "checks": {k: v for k, v in rep.extra.items() if k not in ("upper", "psi")},
    }
    cols = {}
    if rep.final is not None:
        cols["u"] = rep.final.values
        report["sup"] = rep.final.sup()
    cols["psi"] = rep.extra["psi"].values
    cols["phi"] = rep.extra["upper"].values
    write_fields(out / "fields.csv", inst.mesh, cols)
    if rep.status is Status.CONVERGED:
        return EXIT_OK, report
    if rep.status is Status.NO_POSITIVE_SOLUTION:
        return EXIT_NONEXISTENCE, report
    return EXIT_ERROR, report


def cmd_sweep(cfg: RunConfig, out: Path, seed: int) -> tuple[int, dict]:
    raw = cfg.section("sweep").get("lambda_list")
    if raw is None:
        raise ConfigError("[sweep] missing required key 'lambda_list'")
    lambdas = _float_list(raw)
    mesh = cfg.build_mesh()
    rep = scaling_sweep(mesh, cfg.exp, lambdas, cfg.solver_config(mesh))
    report = {
        "status": "error" if rep.error else "pass",
        "lambdas": rep.lambdas,
        "sup_values": rep.sup_values,
        "slope_fit": rep.slope_fit,
        "expected_slope": rep.expected,
        "gamma_scales": rep.gamma_scales,
        "linf_rescaled": rep.linf_rescaled,
        "ratio_min": rep.ratio_min,
        "ratio_max": rep.ratio_max,
        "monotone_in_lambda": rep.monotone_in_lambda,
        "message": rep.error or "",
    }
    if rep.fields:
        write_fields(out / "fields.csv", mesh,
                     {f"phi_{lam:g}": f.values for lam, f in zip(rep.lambdas, rep.fields)})
    return (EXIT_ERROR if rep.error else EXIT_OK), report


def cmd_threshold(cfg: RunConfig, out: Path, seed: int) -> tuple[int, dict]:
    lo = _section_float(cfg, "threshold", "lambda_lo")
    hi = _section_float(cfg, "threshold", "lambda_hi")
    tol = _section_float(cfg, "threshold", "tol_lambda", 0.05)
    base = _instance(cfg, hi)
    res = existence_threshold(base.with_lambda, lo, hi, tol, base.cfg)
    report = {
        "status": "pass" if res.bracket else "no_bracket",
        "threshold_bracket": list(res.bracket) if res.bracket else None,
        "relative_width": res.relative_width,
        "monotone": res.monotone,
        "samples": [[lam, ok] for lam, ok in sorted(res.samples)],
        "message": res.message,
    }
    return (EXIT_OK if res.bracket else EXIT_ERROR), report


def cmd_verify(cfg: RunConfig, out: Path, seed: int) -> tuple[int, dict]:
    sec = cfg.section("verify")
    n_pairs = int(sec.get("n_pairs", 100))
    lambdas = _float_list(sec.get("lambdas", "1, 10, 100"))
    suite = comparison_suite(cfg.exp, seed, n_pairs, lambdas=lambdas)
    ok = suite["solver_order_ok"] and suite["picone_ok"] and suite["lindqvist_ok"] and all(
        v["passed"] for v in suite["comparison"].values())
    return (EXIT_OK if ok else EXIT_ERROR), {"status": "pass" if ok else "fail", "seed": seed, **suite}


def cmd_oracle(cfg: RunConfig, out: Path, seed: int) -> tuple[int, dict]:
    """FEM Phi_lam against the radial shooting profile on an interval or disk."""
    lam = _section_float(cfg, "oracle", "lambda")
    tol = _section_float(cfg, "oracle", "tolerance", 0.02)
    if cfg.domain == "unit_square":
        raise ConfigError("the radial oracle needs an interval or disk domain")
    mesh = cfg.build_mesh()
    if cfg.domain == "interval":
        a, b = cfg.domain_args
        R, N = 0.5 * (b - a), 1
    else:
        R, N = cfg.domain_args[0], 2
    G = solve_global_supersolution(mesh, cfg.exp, lam, cfg.solver_config(mesh))
    sigma = cfg.exp.sigma
    prof = radial_shoot(cfg.exp, 1.0, lambda u: lam * u**sigma, R, N)
    rel = abs(G.field.sup() - prof.u0) / prof.u0
    radial = radial_on_mesh(prof, mesh)
    write_fields(out / "fields.csv", mesh, {"phi": G.field.values, "radial": radial})
    ok = rel <= tol
    return (EXIT_OK if ok else EXIT_ERROR), {
        "status": "pass" if ok else "fail",
        "lambda": lam,
        "fem_sup": G.field.sup(),
        "shooting_sup": prof.u0,
        "relative_sup_difference": rel,
        "nodal_max_difference": float(np.abs(radial - G.field.values).max()),
        "tolerance": tol,
    }


HANDLERS = {"solve": cmd_solve, "sweep": cmd_sweep, "threshold": cmd_threshold,
            "verify": cmd_verify, "oracle": cmd_oracle}


def run(command: str, config_path, seed: int = 0, out=".") -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        cfg = load_config(config_path)
        code, report = HANDLERS[command](cfg, out, seed)
    except (PQSolveError, ValueError) as exc:
        print(f"pqsolve: error: {exc}", file=sys.stderr)
        code, report = EXIT_ERROR, {"status": "error", "message": str(exc)}
    report = {"command": command, "config": str(config_path), "seed": seed, **report,
              "runtime_s": time.perf_counter() - t0}
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2) + "\n", encoding="utf-8")
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pqsolve", description="(p,q)-Laplacian semipositone solver")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI-style config file")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return run(args.command, args.config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
