"""``sublim`` command line.

Exit codes: 0 ok, 1 a property check found a violation, 2 config error,
3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from sublim import clt, measures, pde
from sublim.config import COMMANDS, RunConfig, load_config
from sublim.errors import (
    ConfigError,
    DomainError,
    EvaluationError,
    ExprError,
    NumericError,
    ParameterError,
    StateSpaceError,
)
from sublim.expr import evaluate, infer_bounds

log = logging.getLogger("sublim")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def thread_cap() -> int:
    raw = os.environ.get("SUBLIM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SUBLIM_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("SUBLIM_THREADS must be nonnegative")
    return n


def _step_family(cfg: RunConfig):
    P = cfg.measures()
    if P.dim == 1:
        return clt.StepFamily(P)
    if P.dim == 2:
        return clt.DriftStepFamily(P)
    raise ConfigError("CLT and PDE commands need a family on R^1 or R^2 (drift)", "family")


def _grid_radius(F, params) -> float:
    return params.radius or 6 * math.sqrt(F.sigma_max_sq) + F.max_abs_atom


def _bounded_function(cfg: RunConfig, L: float) -> clt.TestFunction:
    e = cfg.expression()
    b = infer_bounds(e, L)
    if b.growing:
        raise ConfigError("function grows at the edge of the sampling window; bounded mode needs clamp()", "function")
    return clt.TestFunction(lambda x: evaluate(e, x), b.bound, b.lipschitz, cfg.function_source())


def _raw_function(cfg: RunConfig):
    e = cfg.expression()
    return lambda x: evaluate(e, x)


def _pde_config(G: pde.GParams1D, params, T: float | None = None) -> pde.PdeConfig:
    p = params.pde
    T = p.T if T is None else T
    half_width = p.half_width
    if half_width is None:
        spread = 8 * math.sqrt(G.sigma_max_sq * T) + max(abs(G.mu_min), abs(G.mu_max)) * T + 4
        half_width = math.ceil(spread / p.dx) * p.dx
    return pde.PdeConfig(half_width, p.dx, T, p.gamma, tuple(t for t in p.snapshot_times if t <= T))


def cmd_expect(cfg: RunConfig, out, outdir):
    P = cfg.measures()
    f = _raw_function(cfg)
    X = f if P.dim == 1 else (lambda x: f(float(x[0])))
    values = measures.linear_expectations(P, X)
    k = int(np.argmax(values))
    report = {
        "upper_expectation": float(values[k]),
        "argmax_index": k,
        "expectations": [float(v) for v in values],
        "function": cfg.function_source(),
        "dim": P.dim,
        "events": [],
    }
    for spec, event in zip(cfg.params.events, cfg.events()):
        c = measures.capacity(P, event)
        report["events"].append({"event": spec, "capacity": c, "polar": c == 0.0})
    t = measures.tightness_radius(P, min(cfg.params.eps, 1.0), cfg.params.l)
    report["tightness"] = {"eps": cfg.params.eps, "l": cfg.params.l, "radius": t.radius, "verified": t.verified}
    out.write(_dump(report))
    return EXIT_OK


def cmd_clt(cfg: RunConfig, out, outdir):
    F = _step_family(cfg)
    p = cfg.params
    grid = clt.GridConfig(p.dx, p.radius)
    if p.mode == "exact":
        phi = _raw_function(cfg)
        values = [clt.clt_value_exact(F, phi, n) for n in p.n_list]
    else:
        phi = _bounded_function(cfg, _grid_radius(F, p))
        run = clt.clt_value_dp if isinstance(F, clt.StepFamily) else clt.generalized_clt_value_dp
        values = [run(F, phi, n, grid) for n in p.n_list]
    rows = [clt.Row(n, v, 0.0 if i == 0 else abs(v - values[i - 1])) for i, (n, v) in enumerate(zip(p.n_list, values))]
    text = clt.ConvergenceTable(rows).to_csv()
    out.write(text)
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "clt.csv").write_text(text)
    return EXIT_OK


def cmd_pde(cfg: RunConfig, out, outdir):
    F = _step_family(cfg)
    G = pde.g_from_family(F)
    config = _pde_config(G, cfg.params)
    phi = _bounded_function(cfg, config.half_width / 2)
    if G.has_drift:
        sol, solver = pde.solve_ghjb(G, phi, config), "ghjb"
    else:
        sol, solver = pde.solve_gheat(G, phi, config), "gheat"
    outdir = outdir or Path("sublim_out")
    outdir.mkdir(parents=True, exist_ok=True)
    snaps = []
    for k, (t, _) in enumerate(sol.snapshots):
        name = f"snapshot_{k:03d}.tsv"
        (outdir / name).write_text(sol.snapshot_tsv(k))
        snaps.append({"time": t, "file": name})
    manifest = {
        "solver": solver,
        "function": cfg.function_source(),
        "bounds": {"M": phi.bound, "lipschitz": phi.lipschitz, "sampled": True},
        "G": {"sigma_min_sq": G.sigma_min_sq, "sigma_max_sq": G.sigma_max_sq, "mu_min": G.mu_min, "mu_max": G.mu_max},
        "config": {
            "half_width": config.half_width,
            "dx": config.dx,
            "T": config.T,
            "gamma": config.gamma,
            "snapshot_times": list(config.snapshot_times),
        },
        "dt": sol.dt,
        "steps": sol.steps,
        "snapshots": snaps,
    }
    text = _dump(manifest)
    (outdir / "manifest.json").write_text(text)
    out.write(text)
    return EXIT_OK


def compare_rows(F: clt.StepFamily, phi: clt.TestFunction, n_list, grid: clt.GridConfig, config: pde.PdeConfig):
    """DP values against the G-normal reference: list of (n, dp, pde, abs_err)."""
    ref = pde.gnormal_value(pde.g_from_family(F), phi, config)
    rows = []
    for n in n_list:
        v = clt.clt_value_dp(F, phi, n, grid)
        rows.append((n, v, ref, abs(v - ref)))
    return rows


def cmd_compare(cfg: RunConfig, out, outdir):
    F = _step_family(cfg)
    if not isinstance(F, clt.StepFamily):
        raise ConfigError("compare needs a family on R^1", "family")
    p = cfg.params
    G = pde.g_from_family(F)
    config = _pde_config(G, p, T=1.0)
    phi = _bounded_function(cfg, _grid_radius(F, p))
    rows = compare_rows(F, phi, p.n_list, clt.GridConfig(p.dx, p.radius), config)
    text = "n,dp,pde,abs_err\n" + "".join(f"{n},{_fmt(a)},{_fmt(b)},{_fmt(c)}\n" for n, a, b, c in rows)
    out.write(text)
    outdir = outdir or Path("sublim_out")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "compare.csv").write_text(text)
    plot = "".join(f"{_fmt(math.log(n))}\t{_fmt(math.log(err) if err > 0 else -math.inf)}\n" for n, _, _, err in rows)
    (outdir / "compare_loglog.tsv").write_text(plot)
    return EXIT_OK


def _random_variable(rng):
    a, b, c = rng.uniform(-3, 3, size=3)
    k = rng.uniform(0.1, 2.0)
    return lambda x: a * math.cos(k * float(np.atleast_1d(x)[0])) + b * float(np.atleast_1d(x)[0]) + c


def run_checks(cfg: RunConfig) -> dict:
    """Property suites on the configured family; returns name -> list of violations."""
    P = cfg.measures()
    p = cfg.params
    rng = np.random.default_rng(p.seed)
    found = {"sublinearity": [], "capacity": [], "borel_cantelli": []}
    for i in range(p.instances):
        X, Y = _random_variable(rng), _random_variable(rng)
        lam, c = rng.uniform(0, 5), rng.uniform(-5, 5)
        rep = measures.verify_sublinearity(P, X, Y, lam, c)
        if not rep.ok:
            found["sublinearity"].append({"instance": i, **rep.witnesses})
        pts = [tuple(r) for r in P.support.tolist()]
        events = []
        for _ in range(rng.integers(1, 5)):
            chosen = [q for q in pts if rng.random() < 0.5]
            events.append(measures.Event.points(chosen))
        crep = measures.capacity_properties_check(P, events)
        if not crep.ok:
            found["capacity"].append({"instance": i, "violations": crep.violations})
        tails = measures.borel_cantelli_tail(P, events)
        caps = crep.capacities
        for n in range(len(tails)):
            if tails[n] > sum(caps[n:]) + 1e-10 or (n and tails[n] > tails[n - 1] + 1e-10):
                found["borel_cantelli"].append({"instance": i, "n": n})
    if P.dim == 1:
        F = clt.StepFamily(P)
        G = pde.g_from_family(F)
        config = _pde_config(G, p, T=1.0)
        phi = _bounded_function(cfg, config.half_width / 2)
        found["semigroup"] = []
        for t, s in ((0.5, 0.5), (0.36, 0.64)):
            r = pde.semigroup_check(G, phi, t, s, config)
            if r > 5e-3:
                found["semigroup"].append({"t": t, "s": s, "residual": r})
        found["holder"] = []
        for s in (0.01, 0.04, 0.25):
            h = pde.time_holder_check(G, phi, 0.5, s, config)
            if not h.passed:
                found["holder"].append({"s": s, "lhs": h.lhs, "bound": h.bound})
        L = p.dictionary_radius or 6 * math.sqrt(F.sigma_max_sq)
        dictionary = clt.dictionary_default(L, p.dictionary_size)
        pairs = [(a, b) for a in dictionary for b in dictionary]
        dom = clt.domination_check(F, pairs, [1, 2, 4, 8], clt.GridConfig(p.dx, p.radius))
        found["domination"] = dom.violations
    return found


def cmd_check(cfg: RunConfig, out, outdir):
    found = run_checks(cfg)
    report = {name: {"violations": len(v), "details": v[:10]} for name, v in found.items()}
    out.write(_dump(report))
    return EXIT_VIOLATION if any(found.values()) else EXIT_OK


HANDLERS = {
    "expect": cmd_expect,
    "clt": cmd_clt,
    "pde": cmd_pde,
    "compare": cmd_compare,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sublim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", type=Path)
        sp.add_argument("-o", "--out", type=Path, default=None, help="directory for files (default: sublim_out)")
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        thread_cap()
        cfg = load_config(args.config)
        if cfg.command is not None and cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}", "command")
        return HANDLERS[args.command](cfg, out, args.out)
    except (ConfigError, ExprError, ParameterError, DomainError) as exc:
        print(f"sublim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, EvaluationError, StateSpaceError, FloatingPointError) as exc:
        print(f"sublim: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
