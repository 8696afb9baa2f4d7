"""Command-line entry point ``vectorgas``.

Exit codes: 0 success, 1 usage error, 2 domain/validation error,
3 numerical non-convergence. Every run writes a JSON manifest with the
resolved configuration and the library version.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConvergenceError, DomainError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _grid_spec(text):
    try:
        lo, hi, count = text.split(":")
        return float(lo), float(hi), int(count)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected LO:HI:COUNT") from exc


def build_parser():
    parser = _Parser(prog="vectorgas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat JSON object overriding flags")
        p.add_argument("--outdir", default=".", help="directory for the manifest when --out is absent")
        return p

    p = command("zeros", "tabulate positive zeros of J_alpha")
    p.add_argument("--alpha", type=float)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out")

    p = command("nikishin", "check the lattice-sum form of w_{alpha+1}/w_alpha")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--terms", type=int, help="number of lattice terms (adaptive when omitted)")
    p.add_argument("--grid", type=_grid_spec, default=(0.01, 10.0, 100), help="LO:HI:COUNT, log-spaced")

    p = command("wishart", "sample non-centered Wishart spectra")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--alpha", type=int, default=0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = command("gas", "sample the two-type Coulomb gas")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--burnin", type=int, default=1_000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--lattice", type=int, help="lattice table size")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = command("oracle", "ratio of the two exact small-N densities")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--n", type=int, choices=(2, 4), default=2)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--terms", type=int, default=4096)
    p.add_argument("--seed", type=int)

    p = command("equilibrium", "solve the constrained equilibrium problem")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--grid-mu", type=int, default=400)
    p.add_argument("--grid-nu", type=int, default=400)
    p.add_argument("--R", type=float)
    p.add_argument("--S", type=float)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--out")

    p = command("rate", "evaluate the rate functional")
    p.add_argument("--mu")
    p.add_argument("--nu")
    p.add_argument("--a", type=float)
    p.add_argument("--sphere", action="store_true")

    p = command("compare", "bounded-Lipschitz distance on the circle")
    p.add_argument("--empirical")
    p.add_argument("--reference")
    p.add_argument("--bins", type=int, default=512)
    return parser


REQUIRED = {
    "zeros": ["alpha"],
    "wishart": ["seed", "out"],
    "gas": ["seed", "out"],
    "oracle": ["seed"],
    "equilibrium": ["out"],
    "rate": ["mu", "nu", "a"],
    "compare": ["empirical", "reference"],
}


def _resolve(parser, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage())
    cfg = vars(args)
    if cfg.get("config"):
        try:
            overrides = json.loads(Path(cfg["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if not isinstance(overrides, dict):
            raise UsageError("config must be a flat JSON object")
        for key, value in overrides.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in cfg or dest in ("command", "config"):
                raise UsageError(f"unknown config key {key!r}")
            if isinstance(value, (dict, list)) and dest != "grid":
                raise UsageError(f"config key {key!r} must be a scalar")
            cfg[dest] = _grid_spec(value) if dest == "grid" and isinstance(value, str) else value
    missing = [k for k in REQUIRED.get(cfg["command"], []) if cfg.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"vectorgas {cfg['command']}: missing required {flags}")
    return cfg


def _manifest_path(cfg):
    out = cfg.get("out")
    if out:
        base = Path(out)
        if cfg["command"] == "equilibrium":
            return Path(f"{out}_manifest.json")
        return base.with_name(base.name + ".manifest.json")
    return Path(cfg.get("outdir") or ".") / f"vectorgas_{cfg['command']}_manifest.json"


def _write_manifest(cfg, extra=None):
    manifest = {"version": __version__, "config": {k: v for k, v in cfg.items()}}
    if extra:
        manifest.update(extra)
    path = _manifest_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (tuple, np.ndarray)):
        return list(v)
    return str(v)


def _emit(obj):
    print(json.dumps(obj, indent=2, default=_jsonable))


# ---------------------------------------------------------------- commands


def _cmd_zeros(cfg):
    from .io import write_rows
    from .special import zero_table

    zeros = zero_table(cfg["alpha"], cfg["count"]).zeros
    rows = [[k, repr(float(z))] for k, z in enumerate(zeros)]
    if cfg.get("out"):
        write_rows(cfg["out"], ["k", "j_alpha_k"], rows)
    else:
        print("k,j_alpha_k")
        for r in rows:
            print(f"{r[0]},{r[1]}")
    return {}


def _cmd_nikishin(cfg):
    from .fields import ModelParams
    from .mop_oracle import nikishin_check

    lo, hi, count = cfg["grid"]
    if not (0 < lo < hi) or count < 2:
        raise DomainError("grid needs 0 < LO < HI and COUNT >= 2")
    x = np.geomspace(lo, hi, count)
    err, terms = nikishin_check(ModelParams(cfg["a"], cfg["alpha"], cfg["n"]), x, cfg.get("terms"))
    result = {"max_rel_err": float(err.max()), "terms": int(terms), "points": count}
    _emit(result)
    return result


def _cmd_wishart(cfg):
    from .fields import ModelParams
    from .io import write_rows
    from .matrix_model import sample_spectra

    p = ModelParams(cfg["a"], cfg["alpha"], cfg["n"])
    ev, seeds = sample_spectra(p, cfg["samples"], cfg["seed"])
    rows = [[i, repr(float(v))] for i in range(ev.shape[0]) for v in ev[i]]
    write_rows(cfg["out"], ["sample_index", "eigenvalue"], rows)
    return {"sample_seeds": seeds}


def _cmd_gas(cfg):
    from .coulomb_gas import default_init, run_chains, split_rhat
    from .fields import ModelParams
    from .io import write_rows

    p = ModelParams(cfg["a"], cfg["alpha"], cfg["n"]).require_even()
    init = default_init(p, cfg.get("lattice"))
    results = run_chains(init, cfg["chains"], cfg["steps"], cfg["burnin"], cfg["seed"], cfg["thin"])
    rows = []
    thin = cfg["thin"]
    for c, res in enumerate(results):
        for s in range(res.x.shape[0]):
            step = (s + 1) * thin
            rows.extend([c, step, "x", repr(float(v))] for v in res.x[s])
            rows.extend([c, step, "u", repr(float(v))] for v in res.u[s])
    write_rows(cfg["out"], ["chain", "step", "kind", "value"], rows)
    stats = [
        {
            "seed": r.stats.seed,
            "acceptance_x": r.stats.acceptance_x,
            "acceptance_u": r.stats.acceptance_u,
            "width": r.stats.width,
            "max_drift": r.stats.max_drift,
            "tail_visits": r.stats.tail_visits,
        }
        for r in results
    ]
    summary = {"chains": stats, "lattice_size": init.lattice.count}
    if len(results) > 1 and results[0].x.shape[0] >= 4:
        summary["split_rhat_mean_x"] = split_rhat([r.x.mean(axis=1) for r in results])
    _emit(summary)
    return summary


def _cmd_oracle(cfg):
    from .fields import ModelParams
    from .mop_oracle import ratio_table

    p = ModelParams(cfg["a"], cfg["alpha"], cfg["n"])
    xs, ratios, cv = ratio_table(p, cfg["points"], cfg["terms"], cfg["seed"])
    result = {"cv": cv, "mean_ratio": float(ratios.mean()), "x": xs.tolist(), "ratio": ratios.tolist()}
    _emit(result)
    return {"cv": cv}


def _cmd_equilibrium(cfg):
    from .equilibrium import build_problem, solve
    from .io import write_measure

    prob = build_problem(cfg["a"], cfg["grid_mu"], cfg["grid_nu"], cfg.get("R"), cfg.get("S"))
    sol = solve(prob, tol=cfg["tol"], max_iter=cfg["max_iter"])
    prefix = cfg["out"]
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    write_measure(f"{prefix}_mu.csv", sol.mu_star, "R+")
    write_measure(f"{prefix}_nu.csv", sol.nu_star, "R-")
    report = sol.report()
    Path(f"{prefix}_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _emit(report)
    if not sol.converged:
        raise ConvergenceError("equilibrium solver did not converge", {"pg_norm": sol.pg_norm})
    return {"objective": sol.objective}


def _cmd_rate(cfg):
    from .energy import rate_line, rate_sphere
    from .io import read_measure, to_sphere

    mu, nu = read_measure(cfg["mu"]), read_measure(cfg["nu"])
    if cfg["sphere"]:
        rep = rate_sphere(to_sphere(mu), to_sphere(nu), cfg["a"])
    else:
        rep = rate_line(mu, nu, cfg["a"])
    out = {k: (v if math.isfinite(v) else str(v)) for k, v in rep.as_dict().items()}
    _emit(out)
    return out


def _cmd_compare(cfg):
    from .io import read_measure, to_sphere
    from .measures import bl_distance

    m1, m2 = read_measure(cfg["empirical"]), read_measure(cfg["reference"])
    d = bl_distance(to_sphere(m1), to_sphere(m2), cfg["bins"])
    result = {"bl_distance": d}
    _emit(result)
    return result


COMMANDS = {
    "zeros": _cmd_zeros,
    "nikishin": _cmd_nikishin,
    "wishart": _cmd_wishart,
    "gas": _cmd_gas,
    "oracle": _cmd_oracle,
    "equilibrium": _cmd_equilibrium,
    "rate": _cmd_rate,
    "compare": _cmd_compare,
}


def run_command(argv=None):
    """Run one CLI invocation and return its exit code."""
    parser = build_parser()
    try:
        cfg = _resolve(parser, argv)
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        return EXIT_USAGE
    try:
        extra = COMMANDS[cfg["command"]](cfg)
        _write_manifest(cfg, {"result": extra, "status": "ok"})
        return EXIT_OK
    except DomainError as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        sys.stderr.write(f"numerical error: {exc} {json.dumps(exc.diagnostics, default=_jsonable)}\n")
        _write_manifest(cfg, {"status": "not converged", "diagnostics": exc.diagnostics})
        return EXIT_NUMERIC


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
