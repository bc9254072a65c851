"""Command-line front end: ``equilibrium``, ``sample``, ``scan`` and ``verify``.

Settings come from flags, then an optional ``--config`` file of
``key = value`` lines, then built-in defaults. The effective settings
are written to ``config.txt`` in every output directory.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .ensembles import (EnsembleSpec, JackParams, WellposednessError, cauchy_ensemble, jack_ensemble,
                        mcmc_run, wellposedness_check, write_samples)
from .equilibrium import (EquilibriumProblem, jack_support, reference_equilibrium, solve)
from .ldp import free_energy_scan, jack_equilibrium_energy, ks_compare
from .potentials import GrowthCert, cauchy_potential, jack_limit_potential, load_table, table_potential
from .svg import Series, plot

MODELS = ("jack", "cauchy", "custom-table")
DEFAULTS = {
    "model": None,
    "theta": 1.0,
    "t": None,
    "N": None,
    "window": None,
    "grid_cells": 2000,
    "tol": 1e-3,
    "steps": 1_000_000,
    "burn_in": 100_000,
    "seed": 0,
    "thin": None,
    "out": "out",
    "table": None,
    "theta_prime": None,
    "floor": None,
}
ORDER = list(DEFAULTS)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


def read_config_file(path) -> dict:
    out = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line without '=': {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in ("grid", "M"):
            key = "grid_cells"
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        out[key] = val
    return out


def _coerce(key, val):
    if val is None or not isinstance(val, str):
        return val
    if val.lower() in ("", "none"):
        return None
    if key in ("theta", "t", "tol", "theta_prime", "floor"):
        return float(val)
    if key in ("grid_cells", "steps", "burn_in", "seed", "thin"):
        return int(float(val))
    if key == "window":
        parts = val.replace(",", " ").split()
        if len(parts) != 2:
            raise UsageError("window needs two numbers")
        return (float(parts[0]), float(parts[1]))
    return val


def effective_settings(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        for k, v in read_config_file(args.config).items():
            cfg[k] = _coerce(k, v)
    for k in ORDER:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = tuple(v) if k == "window" else v
    return cfg


def _n_list(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    items = [s for s in str(value).replace(",", " ").split() if s]
    return [int(s) for s in items]


def settings_text(cfg: dict) -> str:
    lines = []
    for k in ORDER:
        v = cfg.get(k)
        if v is None:
            s = "none"
        elif k == "window":
            s = f"{float(v[0])!r} {float(v[1])!r}"
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        lines.append(f"{k} = {s}")
    return "\n".join(lines) + "\n"


def _check(cfg, need_n=False):
    if cfg["model"] not in MODELS:
        raise UsageError(f"--model must be one of {', '.join(MODELS)}")
    if not cfg["theta"] > 0:
        raise UsageError("--theta must be positive")
    if cfg["model"] == "jack":
        if cfg["t"] is None:
            raise UsageError("the jack model needs --t")
        if not cfg["t"] > 0:
            raise UsageError("--t must be positive")
    if cfg["model"] == "custom-table":
        if not cfg["table"]:
            raise UsageError("custom-table needs --table FILE")
        if cfg["theta_prime"] is None:
            raise UsageError("custom-table needs a growth certificate (--theta-prime, optional --floor)")
    if cfg["grid_cells"] < 2:
        raise UsageError("--grid-cells must be at least 2")
    if not cfg["tol"] > 0:
        raise UsageError("--tol must be positive")
    if cfg["steps"] < 0 or cfg["burn_in"] < 0:
        raise UsageError("--steps and --burn-in must be non-negative")
    if cfg["window"] is not None and not cfg["window"][0] < cfg["window"][1]:
        raise UsageError("--window needs LO < HI")
    if need_n:
        ns = _n_list(cfg["N"])
        if not ns or any(n < 1 for n in ns):
            raise UsageError("--N needs positive integers")


def _limit_potential(cfg):
    th = cfg["theta"]
    if cfg["model"] == "jack":
        return jack_limit_potential(th, cfg["t"])
    if cfg["model"] == "cauchy":
        return cauchy_potential(th)
    xs, ys = load_table(cfg["table"])
    return table_potential(xs, ys, GrowthCert(cfg["theta_prime"], cfg["floor"]), name="table")


def _problem(cfg):
    th = cfg["theta"]
    v = _limit_potential(cfg)
    if cfg["model"] == "jack":
        _, b = jack_support(th, cfg["t"])
        window = cfg["window"] or (0.0, b + 2.0 * th)
        domain = (0.0, math.inf)
    else:
        window = cfg["window"] or (-8.0, 8.0)
        domain = (-math.inf, math.inf)
    return EquilibriumProblem(th, v, tuple(window), domain, cfg["grid_cells"])


def _spec(cfg, n):
    th = cfg["theta"]
    if cfg["model"] == "jack":
        return jack_ensemble(JackParams(th, cfg["t"]), n)
    if cfg["model"] == "cauchy":
        return cauchy_ensemble(th, n)
    return EnsembleSpec(th, n, _limit_potential(cfg), model="custom-table")


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(settings_text(cfg), encoding="utf-8", newline="\n")
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")


def _sidecar(out: Path, name: str, started: float):
    # wall-clock data lives only here so the other outputs stay byte-identical
    _write(out / "run.log", f"command = {name}\nstarted = {time.strftime('%Y-%m-%dT%H:%M:%S', time.localtime(started))}\n"
                            f"elapsed_s = {time.time() - started:.3f}\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_equilibrium(cfg) -> int:
    _check(cfg)
    started = time.time()
    prob = _problem(cfg)
    out = _outdir(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve(prob, tol=cfg["tol"])
    _write(out / "equilibrium.csv", sol.measure.to_csv())
    summary = sol.summary()
    for w in caught:
        summary += f"warning = {w.message}\n"
    _write(out / "summary.txt", summary)
    x = sol.measure.midpoints
    series = [Series(x, sol.measure.density, "solver")]
    ref = reference_equilibrium(cfg["model"], cfg["theta"], cfg["t"])
    if ref is not None:
        series.append(Series(x, ref[0](x), "closed form"))
    _write(out / "density.svg", plot(series, f"equilibrium density ({cfg['model']}, theta={cfg['theta']:g})",
                                     "x", "density"))
    _sidecar(out, "equilibrium", started)
    print(summary, end="")
    if not sol.converged:
        print("solver did not reach the requested tolerance; outputs are partial", file=sys.stderr)
        return 1
    return 0


def _histogram(pos: np.ndarray, n: int):
    lo, hi = float(pos.min()), float(pos.max())
    width = 1.0 / n
    # lattice-aligned bins, coarsened to at most ~80 bins
    k = max(1, math.ceil((hi - lo) / width / 80))
    width *= k
    start = lo - 0.5 / n
    nb = int(math.floor((hi - start) / width)) + 1
    edges = start + width * np.arange(nb + 1)
    counts, _ = np.histogram(pos, bins=edges)
    return edges, counts


def cmd_sample(cfg) -> int:
    _check(cfg)
    ns = _n_list(cfg["N"]) or [200]
    if len(ns) != 1 or ns[0] < 1:
        raise UsageError("sample needs a single --N")
    n = ns[0]
    started = time.time()
    spec = _spec(cfg, n)
    try:
        wellposedness_check(spec)
    except WellposednessError as exc:
        print(f"refused: ensemble is not well-posed: {exc}", file=sys.stderr)
        return 1
    thin = cfg["thin"] or max(1, cfg["steps"] // 1000)
    cfg = dict(cfg, N=str(n), thin=thin)
    out = _outdir(cfg)
    states, acc = mcmc_run(spec, cfg["steps"], cfg["burn_in"], cfg["seed"], thin)
    with open(out / "samples.txt", "w", encoding="utf-8", newline="\n") as fh:
        write_samples(fh, spec, states, cfg["seed"], thin)
    pos = ((states + spec.shifts) / n).ravel()
    edges, counts = _histogram(pos, n)
    total = int(counts.sum())
    lines = ["left,right,count,probability,density"]
    for a, b, c in zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()):
        lines.append(f"{a!r},{b!r},{c},{c / total!r},{c / total / (b - a)!r}")
    _write(out / "hist.csv", "\n".join(lines) + "\n")
    ref = reference_equilibrium(cfg["model"], cfg["theta"], cfg["t"])
    ks_lines = [f"samples = {len(states)}", f"acceptance = {acc!r}"]
    if ref is not None and len(states):
        ks_lines.insert(0, f"ks = {ks_compare(pos, ref[1])!r}")
    else:
        ks_lines.insert(0, "ks = none")
    _write(out / "ks.txt", "\n".join(ks_lines) + "\n")
    _sidecar(out, "sample", started)
    print("\n".join(ks_lines))
    return 0


def cmd_scan(cfg) -> int:
    _check(cfg, need_n=True)
    ns = _n_list(cfg["N"])
    started = time.time()
    out = _outdir(cfg)
    th = cfg["theta"]
    if cfg["model"] == "jack":
        ref = jack_equilibrium_energy(th, cfg["t"])
        method = "closed"
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = solve(_problem(cfg), tol=cfg["tol"]).f_value
        method = "exact"
    res = free_energy_scan(lambda n: _spec(cfg, n), ns, ref, method)
    _write(out / "scan.csv", res.to_csv())
    rows = np.array([r[:2] for r in res.rows], dtype=float)
    svg = plot([Series(rows[:, 0], rows[:, 1], "N^-2 log Z'_N", "points"),
                Series([0.0], [-th * ref], "-theta F", "hline")],
               f"free energy ({cfg['model']}, theta={th:g})", "N", "value")
    _write(out / "free_energy.svg", svg)
    _sidecar(out, "scan", started)
    print(res.to_csv(), end="")
    for n, msg in res.meta["errors"].items():
        print(f"row N={n} failed: {msg}", file=sys.stderr)
    return 0


def cmd_verify(suite: str) -> int:
    return 0 if verify_mod.run(suite) else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="file of key = value lines")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--theta", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--N", help="particle count (scan: comma list)")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--grid-cells", "-M", dest="grid_cells", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--table", help="CSV of x,V samples for custom-table")
    p.add_argument("--theta-prime", dest="theta_prime", type=float)
    p.add_argument("--floor", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discrete-beta", description="Discrete beta-ensemble toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("equilibrium", "solve for the equilibrium measure"),
                       ("sample", "run the Metropolis sampler"),
                       ("scan", "free-energy scan over N")):
        _add_common(sub.add_parser(name, help=text))
    pv = sub.add_parser("verify", help="run property suites")
    pv.add_argument("suite", nargs="?", default="all", choices=[*verify_mod.SUITES, "all"],
                    help="property suite to run (default: all)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.suite)
    try:
        cfg = effective_settings(args)
        cmd = {"equilibrium": cmd_equilibrium, "sample": cmd_sample, "scan": cmd_scan}[args.command]
        return cmd(cfg)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, UsageError) or "could not convert" in str(exc) or "invalid literal" in str(exc):
            parser.print_usage(sys.stderr)
            print(f"{parser.prog}: error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
