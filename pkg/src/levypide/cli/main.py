"""Command line: experiment orchestration and result emission.

Subcommands::

    levypide solve <config.yaml>           run the configured solve
    levypide oracle <config.yaml>          run the matching deterministic oracle
    levypide probe-gradient <config.yaml>  short-time gradient-decay exponent
    levypide flow-test <config.yaml>       flow / Markov property statistics
    levypide accept [--filter S] [--out F] acceptance suite, pass/fail JSON

Every run writes its artifacts (field CSV + JSON header, report JSON, text
summary) into the configured output directory; (config, seed) determine the
CSV/JSON payloads byte-for-byte, with wall-clock data quarantined in
run_meta.json.  Exit codes: 0 success, 2 bad config, 3 non-contraction,
4 blow-up detected on a run whose intent was a global solve, 5 mode error,
6 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .. import levy, oracle
from ..field import TimeGrid
from ..pide import (
    ModeError,
    NonContractionError,
    PideProblem,
    SolveMode,
    gradient_decay_probe,
    smoothed_step,
    solve,
)
from ..pide.probes import MCNoiseError
from ..sfde import BudgetExceededError, CouplingMode, flow_test_gaussian, simulate_path
from .config import ConfigError, load_config, output_directory
from .problems import build_problem, build_solver_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NON_CONTRACTION = 3
EXIT_BLOWUP = 4
EXIT_MODE = 5
EXIT_BUDGET = 6


def _write(path: str, payload: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(payload)


def _emit_meta(outdir: str, wall: float, note: str = ""):
    meta = {
        "wall_time_seconds": wall,
        "written_at_unix": time.time(),
        "note": note or "timestamps live here so the data files stay "
                        "byte-deterministic",
    }
    _write(os.path.join(outdir, "run_meta.json"),
           json.dumps(meta, indent=2) + "\n")


def _summary_text(report) -> str:
    # backward time t <= 0; the forward-time view is t_fwd = -t
    lines = ["t (fwd=-t)   sup|u|        Lipschitz     sigma"]
    for t, s, l, g in zip(report.times, report.sup_norms, report.lip_norms,
                          report.sigma_per_time):
        lines.append(f"{t:+.5f}     {s:12.6g}  {l:12.6g}  {g:10.3g}")
    lines.append("")
    for w in report.windows:
        lines.append(
            f"window [{w.t_start:+.5f}, {w.t_end:+.5f}]  iterations={w.iterations}"
            f"  converged={w.converged}  residuals="
            + " ".join(f"{r:.3e}" for r in w.residuals)
        )
    lines.append("")
    if report.blow_up:
        lines.append(f"BLOW-UP detected, maximal time t_max={report.t_max:+.5f}")
    else:
        lines.append("no blow-up detected on the horizon")
    if report.apriori_violations:
        lines.append("A-PRIORI BOUND VIOLATIONS:")
        lines.extend("  " + v for v in report.apriori_violations)
    else:
        lines.append("a-priori sup bound held for every accepted iterate")
    for w in report.warnings:
        lines.append(f"note: {w}")
    return "\n".join(lines) + "\n"


def _dump_paths(problem: PideProblem, field, cfg, outdir: str):
    """A few frozen-coefficient trajectories: CSV (s, X^1..X^d, jump flag)."""
    n = int((cfg.get("outputs", {}) or {}).get("n_dump_paths", 8))
    tg = TimeGrid(field.time_grid.horizon, field.time_grid.dt)
    seed = int(cfg["solver"]["seed"]) ^ 0xDEAD
    x0 = 0.5 * (np.asarray(field.space_grid.lower) + np.asarray(field.space_grid.upper))

    def drift(s, xs):
        return problem.G(s, xs, field.eval(s, xs))

    rows = ["path,s," + ",".join(f"x{i}" for i in range(field.space_grid.dim))
            + ",jump"]
    for p in range(n):
        path = simulate_path(CouplingMode.DRIFT_ONLY, drift, problem.triple,
                             (tg.horizon, x0), tg, levy.NoiseStream(seed, p))
        jumps = {round(t / tg.dt) for t, _ in path.jumps}
        for i, s in enumerate(path.times):
            flag = 1 if round(s / tg.dt) in jumps else 0
            coords = ",".join(f"{v:.17g}" for v in path.states[i])
            rows.append(f"{p},{s:.17g},{coords},{flag}")
    _write(os.path.join(outdir, "paths.csv"), "\n".join(rows) + "\n")


def run_experiment(config_path: str, out_override=None) -> int:
    """Execute the configured solve; returns the process exit status."""
    t0 = time.perf_counter()
    cfg = None
    try:
        cfg = load_config(config_path)
        problem = build_problem(cfg["problem"])
        solver_cfg = build_solver_config(cfg)
    except (ConfigError, ModeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if cfg is not None:
            # every run emits a report, even one that never reached the solver
            outdir = output_directory(cfg, out_override)
            _write(os.path.join(outdir, "report.json"),
                   json.dumps({"error": str(exc)}, indent=2) + "\n")
            _emit_meta(outdir, time.perf_counter() - t0, "rejected")
        return EXIT_MODE if isinstance(exc, ModeError) else EXIT_CONFIG

    outdir = output_directory(cfg, out_override)
    os.makedirs(outdir, exist_ok=True)
    intent = (cfg["solver"].get("intent") or "solve")
    formats = (cfg.get("outputs", {}) or {}).get("formats", ["csv", "json"])

    try:
        field, report = solve(problem, solver_cfg)
    except NonContractionError as exc:
        if exc.report is not None:
            _write(os.path.join(outdir, "report.json"),
                   json.dumps(exc.report.to_dict(), indent=2, sort_keys=True) + "\n")
            _emit_meta(outdir, time.perf_counter() - t0, "non-contraction")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NON_CONTRACTION
    except ModeError as exc:
        _write(os.path.join(outdir, "report.json"),
               json.dumps({"error": str(exc)}, indent=2) + "\n")
        _emit_meta(outdir, time.perf_counter() - t0, "mode error")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODE
    except BudgetExceededError as exc:
        _write(os.path.join(outdir, "report.json"),
               json.dumps({"error": str(exc)}, indent=2) + "\n")
        _emit_meta(outdir, time.perf_counter() - t0, "budget exceeded")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET

    if "csv" in formats:
        _write(os.path.join(outdir, "field.csv"), field.to_csv())
        _write(os.path.join(outdir, "field_header.json"),
               field.header_json() + "\n")
    if "json" in formats:
        _write(os.path.join(outdir, "report.json"),
               json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    _write(os.path.join(outdir, "summary.txt"), _summary_text(report))
    if (cfg.get("outputs", {}) or {}).get("dump_paths") and \
            problem.mode is SolveMode.SEMILINEAR:
        _dump_paths(problem, field, cfg, outdir)
    _emit_meta(outdir, time.perf_counter() - t0)
    print(f"wrote artifacts to {outdir}")
    if report.blow_up and intent == "solve":
        print(f"blow-up detected at t_max={report.t_max}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


def run_oracle(config_path: str, out_override=None) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = output_directory(cfg, out_override)
    os.makedirs(outdir, exist_ok=True)
    ocfg = cfg.get("oracle", {}) or {}
    modes = int(ocfg.get("modes", 256))
    dt = float(ocfg.get("dt", cfg["grids"]["time"]["dt"]))
    horizon = float(cfg["grids"]["time"]["horizon"])
    params = cfg["problem"].get("params", {}) or {}
    nu = float(params.get("nu", 0.5))
    alpha = float(params.get("alpha", 2.0))
    lo = float(cfg["grids"]["space"]["lower"][0])
    hi = float(cfg["grids"]["space"]["upper"][0])
    grid = oracle.PeriodicSpectralGrid(
        modes=modes, length=(hi - lo) / (2.0 * np.pi)
    )
    from .problems import build_phi

    phi = build_phi(params.get("phi", {"name": "sin"}))
    phi1 = lambda x: np.asarray(phi(np.atleast_1d(x)[:, None]), float)[:, 0]
    kind = ocfg.get("kind", "spectral")
    t1 = time.perf_counter()
    try:
        if kind == "spectral":
            builtin = cfg["problem"]["builtin"]
            if builtin == "burgers1d":
                flux = "burgers"
            elif "g_table" in params:
                # conservation form: the advective term is d_x g(u)
                us = np.asarray(params["g_table"]["u"], float)
                gs = np.asarray(params["g_table"]["value"], float)
                flux = lambda u: np.interp(u, us, gs)
            else:
                flux = None
            field = oracle.spectral_fractal_solve(
                phi1, nu, alpha, grid, horizon, dt, flux=flux
            )
            _write(os.path.join(outdir, "oracle_field.csv"), field.to_csv())
            _write(os.path.join(outdir, "oracle_header.json"),
                   field.header_json() + "\n")
        elif kind == "cole_hopf":
            xs = grid.nodes
            vals = oracle.cole_hopf_burgers(phi1, nu, horizon, xs)
            rows = ["x,u"] + [f"{x:.17g},{v:.17g}" for x, v in zip(xs, vals)]
            _write(os.path.join(outdir, "oracle_slice.csv"), "\n".join(rows) + "\n")
        else:
            from .problems import build_triple

            triple = build_triple(cfg["problem"].get("triple"))
            vals = oracle.linear_convolution_solve(
                triple, phi1(grid.nodes), grid, horizon
            )
            rows = ["x,u"] + [f"{x:.17g},{v:.17g}"
                              for x, v in zip(grid.nodes, vals)]
            _write(os.path.join(outdir, "oracle_slice.csv"), "\n".join(rows) + "\n")
    except oracle.BlowupSuspectedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _emit_meta(outdir, time.perf_counter() - t1, "oracle blow-up suspected")
        return EXIT_BLOWUP
    _emit_meta(outdir, time.perf_counter() - t1)
    print(f"wrote oracle artifacts to {outdir}")
    return EXIT_OK


def run_probe_gradient(config_path: str, out_override=None) -> int:
    try:
        cfg = load_config(config_path)
        from .problems import build_triple

        triple = build_triple(cfg["problem"].get("triple"))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = output_directory(cfg, out_override)
    pcfg = cfg.get("probe", {}) or {}
    deltas = pcfg.get("deltas", [2.0**-k for k in range(8, 3, -1)])
    n = int(pcfg.get("particles", 200_000))
    width = float(pcfg.get("step_width", 0.005))
    fd = float(pcfg.get("fd_step", width))
    seed = int(cfg["solver"]["seed"])
    try:
        res = gradient_decay_probe(triple, smoothed_step(width), deltas, n,
                                   seed, fd_step=fd)
    except MCNoiseError as exc:
        print(f"error: {exc} (suggested particles: "
              f"{exc.suggested_particles})", file=sys.stderr)
        return EXIT_BUDGET
    payload = {
        "slope": res.slope,
        "slope_stderr": res.slope_stderr,
        "deltas": list(map(float, res.deltas)),
        "grad_norms": list(map(float, res.grad_norms)),
        "max_rel_noise": res.max_rel_noise,
    }
    _write(os.path.join(outdir, "gradient_probe.json"),
           json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def run_flow_test(config_path: str, out_override=None) -> int:
    try:
        cfg = load_config(config_path)
        problem = build_problem(cfg["problem"])
        solver_cfg = build_solver_config(cfg)
    except (ConfigError, ModeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODE if isinstance(exc, ModeError) else EXIT_CONFIG
    outdir = output_directory(cfg, out_override)
    fcfg = cfg.get("flow", {}) or {}
    tg = solver_cfg.time_grid
    t1 = float(fcfg.get("t1", tg.horizon))
    t2 = float(fcfg.get("t2", tg.horizon / 2))
    t3 = float(fcfg.get("t3", 0.0))
    if t3 >= 0.0:
        t3 = 0.0
    x = np.asarray(fcfg.get("x", [0.0]), float)
    n = int(fcfg.get("paths", 10_000))

    def drift(s, xs):
        # freeze the coupling at the terminal datum: an x-dependent drift
        return problem.G(s, xs, np.asarray(problem.phi(xs), float))

    t3_eff = t3 if t3 < 0 else -tg.dt  # flow test needs t3 <= 0 strictly after t2
    if not (t1 < t2 < t3_eff):
        t1, t2, t3_eff = tg.horizon, tg.horizon / 2, -tg.dt
    res = flow_test_gaussian(CouplingMode.DRIFT_ONLY, drift, problem.triple,
                             t1, t2, t3_eff, x, n, tg,
                             seed=int(cfg["solver"]["seed"]))
    payload = {
        "t1": t1, "t2": t2, "t3": t3_eff,
        "pathwise_gap": res.pathwise_gap,
        "ks_statistic": res.ks_statistic,
        "ks_critical_1pct": res.ks_critical_1pct,
        "distributional_ok": bool(res.distributional_ok),
        "paths": res.n_paths,
    }
    _write(os.path.join(outdir, "flow_test.json"),
           json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def run_accept(filter_str=None, out_path=None) -> int:
    from .. import accept

    results = accept.run_suite(filter_str)
    payload = accept.results_to_json(results)
    if out_path:
        _write(out_path, payload)
    print(payload)
    ok = all(r.passed for r in results)
    return EXIT_OK if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levypide",
        description="Monte Carlo solver for Levy-driven PIDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "oracle", "probe-gradient", "flow-test"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="override output directory")
    pa = sub.add_parser("accept")
    pa.add_argument("--filter", default=None)
    pa.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    if args.command == "solve":
        return run_experiment(args.config, args.out)
    if args.command == "oracle":
        return run_oracle(args.config, args.out)
    if args.command == "probe-gradient":
        return run_probe_gradient(args.config, args.out)
    if args.command == "flow-test":
        return run_flow_test(args.config, args.out)
    return run_accept(args.filter, args.out)


if __name__ == "__main__":
    sys.exit(main())
