"""Batch experiment driver.

Subcommands: coercivity, norms, resolvent, linear-evolve, nonlinear-evolve,
validate, sweep. Every artifact embeds the resolved configuration and its
content hash; outputs are bit-identical for identical config and seed.
Exit codes: 0 success, 1 malformed config, 2 validation failure,
3 numerical-guard failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import coercivity, config, evolution, nonlinear, polyops, resolvent, validation
from . import grid as gridmod
from .errors import ConfigError, GuardError, PicardError, ThinFilmError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_GUARD = 3


def _interval_text(intervals):
    if not intervals:
        return "empty"
    return " u ".join(f"({lo:.9f}, {hi:.9f})" for lo, hi in intervals)


def _write_json(path, payload, cfg=None):
    if cfg is not None:
        payload = {"config": cfg.resolved(), "config_sha256": cfg.content_hash(),
                   "results": payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_header(cfg):
    if cfg is None:
        return []
    lines = [f"# config {key} = {val}" for key, val in cfg.resolved().items()]
    lines.append(f"# config_sha256 = {cfg.content_hash()}")
    return lines


def _write_csv(path, header_cols, rows, cfg=None):
    with open(path, "w") as fh:
        for line in _csv_header(cfg):
            fh.write(line + "\n")
        fh.write(",".join(header_cols) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def cmd_coercivity(args):
    names = ["p0", "q0", "p1", "q1", "p2", "q2"]
    pairs = [polyops.symbol_pair(c) for c in (0, 1, 2)]
    polys = [p for pair in pairs for p in pair]
    rows = []
    for name, poly in zip(names, polys):
        closed = coercivity.range_closed_form(poly)
        lo = min((iv[0] for iv in closed), default=0.0) - 1.0
        hi = max((iv[1] for iv in closed), default=1.0) + 1.0
        lo = max(lo, min(poly.roots) - 1.0)
        numeric = coercivity.range_numeric(poly, lo, hi, n_scan=2000)
        disc = 0.0
        if closed and len(closed) == len(numeric):
            disc = max(max(abs(a[0] - b[0]), abs(a[1] - b[1]))
                       for a, b in zip(closed, numeric))
        elif closed or numeric:
            disc = float("nan")
        rows.append((name, poly.mean(), poly.sigma(), closed, numeric, disc))
    widths = "{:<5} {:>8} {:>9}  {:<36} {:<36} {:>12}"
    print(widths.format("name", "mean", "sigma", "closed-form", "numeric scan", "max diff"))
    for name, m, s, closed, numeric, disc in rows:
        print(widths.format(name, f"{m:.4f}", f"{s:.5f}",
                            _interval_text(closed), _interval_text(numeric),
                            f"{disc:.2e}"))
    comp_names = {0: "A0 (operator)", 1: "A1 (once commuted)", 2: "A2 (twice commuted)"}
    for c in (0, 1, 2):
        print(f"{comp_names[c]:<22} joint weight window: "
              f"{_interval_text(coercivity.composite_range(c))}")
    return EXIT_OK


def cmd_norms(args):
    data = np.loadtxt(args.csv, delimiter=",", skiprows=1, ndmin=2)
    s = data[:, 0]
    n = s.size
    grid = gridmod.LogGrid(float(s[0]), float(s[-1]), n)
    if not np.allclose(grid.s, s):
        print("error: CSV s-column is not uniform", file=sys.stderr)
        return EXIT_CONFIG
    w = gridmod.GridFunction(grid, data[:, 1])
    out = {}
    for spec_text in args.spec:
        try:
            k_s, a_s, sub_s = spec_text.split(":")
            spec = gridmod.NormSpec(int(k_s), float(a_s), int(sub_s))
        except (ValueError, ThinFilmError) as exc:
            print(f"error: bad norm spec '{spec_text}': {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out[spec_text] = gridmod.weighted_norm(w, spec)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_resolvent(args):
    cfg = config.load(args.config) if args.config else config.ExperimentConfig()
    g = cfg["grid"]
    grid = gridmod.LogGrid(g["s_min"], g["s_max"], g["n"])
    data = np.loadtxt(args.g, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.n or not np.allclose(data[:, 0], grid.s):
        print("error: right-hand side samples do not match the grid", file=sys.stderr)
        return EXIT_CONFIG
    rhs = gridmod.GridFunction(grid, data[:, 1])
    op = resolvent.assemble(grid)
    sol = resolvent.solve(op, args.lam, rhs)
    out_dir = args.out or cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "resolvent_solution.csv"), ["s", "u"],
               list(zip(grid.s.tolist(), sol.solution.values.tolist())), cfg)
    coeffs = gridmod.extract_coefficients(sol.solution, 3)
    _write_json(os.path.join(out_dir, "resolvent_report.json"), {
        "lambda": sol.lam,
        "interior_residual": sol.residual_norm,
        "decay_rate_fit": None if np.isnan(sol.decay_rate_fit) else sol.decay_rate_fit,
        "coefficients": list(coeffs),
    }, cfg)
    print(f"resolvent solve done: residual {sol.residual_norm:.3e}")
    return EXIT_OK


def _load_cfg_and_grid(args):
    cfg = config.load(args.config) if args.config else config.ExperimentConfig()
    g = cfg["grid"]
    return cfg, gridmod.LogGrid(g["s_min"], g["s_max"], g["n"])


def cmd_linear_evolve(args):
    cfg, grid = _load_cfg_and_grid(args)
    u0 = config.initial_profile(cfg, grid)
    op = resolvent.assemble(grid)
    s = cfg["solver"]
    state = evolution.run(op, u0, None, s["dt"], s["T"], alpha=cfg["norms"]["alpha"],
                          k=cfg["norms"]["k"], store_every=s["store_every"])
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i, (t, _) in enumerate(state.steps):
        e = state.energy_log[i]
        c = state.coefficient_tracks[i]
        rows.append((t, e["tilde_sq"], e["tilde_dk_sq"], c[0], c[1], c[2]))
    _write_csv(os.path.join(out_dir, "linear_trajectory.csv"),
               ["t", "tilde_sq", "tilde_dk_sq", "u1", "u2", "u3"], rows, cfg)
    if cfg["output"]["snapshots"]:
        for t_req in cfg["output"]["snapshots"]:
            idx = int(np.argmin(np.abs(state.times - t_req)))
            t, u = state.steps[idx]
            _write_csv(os.path.join(out_dir, f"snapshot_t{t:g}.csv"), ["s", "u"],
                       list(zip(grid.s.tolist(), u.values.tolist())), cfg)
    if state.flags:
        print(f"completed with {len(state.flags)} energy flags", file=sys.stderr)
    print(f"linear evolution done: {len(state.steps)} stored steps")
    return EXIT_OK


def cmd_nonlinear_evolve(args):
    cfg, grid = _load_cfg_and_grid(args)
    u0 = config.initial_profile(cfg, grid)
    s, nl, nm = cfg["solver"], cfg["nonlinear"], cfg["norms"]
    state = nonlinear.run_nonlinear(
        u0, s["dt"], s["T"], picard_tol=nl["picard_tol"], picard_max=nl["picard_max"],
        threshold=nl["lipschitz_threshold"], alpha=nm["alpha"],
        norm_N=nm["N"], norm_k=nm["k"], delta=nm["delta"],
        store_every=s["store_every"])
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    n_steps = len(state.picard_counts)
    for i, (t, _) in enumerate(state.steps):
        c = state.coefficient_tracks[i]
        count = 0 if i == 0 else state.picard_counts[min(i * s["store_every"], n_steps) - 1]
        rows.append((t, state.init_norm_track[i], c[0], c[1],
                     state.lipschitz_track[i], state.contact_line_track[i], count))
    _write_csv(os.path.join(out_dir, "nonlinear_trajectory.csv"),
               ["t", "init_norm", "u1", "u2", "sup_vx", "Y0", "picard_iterations"],
               rows, cfg)
    for t_req in cfg["output"]["snapshots"]:
        idx = int(np.argmin(np.abs(state.times - t_req)))
        t, u = state.steps[idx]
        film = nonlinear.reconstruct(u, t, np.linspace(6 * t - 0.5, 6 * t + 4.0, 600))
        _write_csv(os.path.join(out_dir, f"film_t{t:g}.csv"), ["y", "h"],
                   list(zip(film.y.tolist(), film.h.tolist())), cfg)
    print(f"nonlinear evolution done: {len(state.steps)} stored steps, "
          f"max Picard count {max(state.picard_counts)}")
    return EXIT_OK


def cmd_validate(args):
    checks = {}

    def residual_orders(h, t_span, y_span, base_dt, base_dy):
        reports = [validation.tfe_residual(h, t_span, y_span, base_dt / r, base_dy / r)
                   for r in (1, 2, 4)]
        orders = [float(np.log2(reports[i].max_residual / reports[i + 1].max_residual))
                  for i in range(2)]
        return reports, orders

    _, tw_orders = residual_orders(validation.traveling_wave, (0.0, 0.8), (1.0, 6.0), 0.05, 0.1)
    checks["traveling_wave_order"] = {"orders": tw_orders,
                                      "pass": all(o >= 1.8 for o in tw_orders)}
    eq_reports = [validation.tfe_residual(validation.equilibrium, (0.0, 0.8), (0.5, 4.0),
                                          0.05 / r, 0.1 / r) for r in (1, 2)]
    # the profile is exactly stationary, so the residual is pure rounding
    checks["equilibrium_residual"] = {
        "max": [r.max_residual for r in eq_reports],
        "pass": all(r.max_residual < 1e-6 for r in eq_reports)}
    _, sh_orders = residual_orders(validation.smyth_hill, (0.0, 0.8), (-0.6, 0.6), 0.02, 0.02)
    checks["smyth_hill_order"] = {"orders": sh_orders,
                                  "pass": all(o >= 1.8 for o in sh_orders)}
    x = np.linspace(0.0, 3.0, 301)
    err = validation.tw_ode_check(6.0, 1.0, x)
    checks["wave_profile_ode"] = {"max_error": err, "pass": err < 1e-7}

    ok = all(c["pass"] for c in checks.values())
    payload = {"checks": checks, "pass": ok}
    if args.out:
        _write_json(args.out, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_sweep(args):
    cfg, grid = _load_cfg_and_grid(args)
    if args.param != "dt":
        print("error: only --param dt sweeps are supported", file=sys.stderr)
        return EXIT_CONFIG
    values = [float(v) for v in args.values.split(",")]
    if len(values) < 3:
        print("error: need at least three values for a Richardson summary", file=sys.stderr)
        return EXIT_CONFIG
    workers = int(os.environ.get("THINFILM_WORKERS", "1"))
    u0 = config.initial_profile(cfg, grid)
    op = resolvent.assemble(grid)
    T = cfg["solver"]["T"]

    def one(dt):
        return evolution.run(op, u0, None, dt, T).final().values

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            finals = list(pool.map(one, values))
    else:
        finals = [one(dt) for dt in values]
    diffs = [float(np.max(np.abs(finals[i] - finals[i + 1])))
             for i in range(len(finals) - 1)]
    orders = [float(np.log2(diffs[i] / diffs[i + 1])) if diffs[i + 1] > 0 else float("nan")
              for i in range(len(diffs) - 1)]
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    payload = {"param": "dt", "values": values, "final_state_diffs": diffs,
               "richardson_orders": orders}
    _write_json(os.path.join(out_dir, "sweep_summary.json"), payload, cfg)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="thinfilm",
                                     description="Receding-wave stability laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("coercivity", help="weight windows of the quartic symbols")

    p = sub.add_parser("norms", help="weighted norms of a sampled function")
    p.add_argument("--csv", required=True, help="CSV with columns s,value")
    p.add_argument("--spec", action="append", required=True,
                   help="norm request k:alpha:sub (repeatable)")

    p = sub.add_parser("resolvent", help="single resolvent solve")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--g", required=True, help="CSV right-hand side (columns s,value)")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("linear-evolve", help="implicit-Euler linear evolution")
    p.add_argument("--config", default=None)

    p = sub.add_parser("nonlinear-evolve", help="semi-implicit nonlinear evolution")
    p.add_argument("--config", default=None)

    p = sub.add_parser("validate", help="physical-equation residual oracles")
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="parameter sweep with Richardson summary")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--config", default=None)
    return parser


_COMMANDS = {
    "coercivity": cmd_coercivity,
    "norms": cmd_norms,
    "resolvent": cmd_resolvent,
    "linear-evolve": cmd_linear_evolve,
    "nonlinear-evolve": cmd_nonlinear_evolve,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GuardError, PicardError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ThinFilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
