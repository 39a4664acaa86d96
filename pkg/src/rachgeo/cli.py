"""Command-line front end: analytic sweeps, back-off optimisation, simulation and validation.

Every subcommand writes UTF-8 CSV with the column set in :data:`COLUMNS`.
Exit codes: 0 success, 1 configuration error, 2 too many non-converged
fixed points, 3 analytic-vs-simulation validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from rachgeo.analytic import baseline_failure
from rachgeo.config import ConfigError, ExperimentConfig, load_config
from rachgeo.core import AnalyticResult, Backoff, Baseline, PowerRamping, RachError, ValidationError
from rachgeo.dtmc import solve_backoff, solve_ramping
from rachgeo.optimizer import BackoffSearchSpace, optimize_backoff
from rachgeo.simulator import simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_VALIDATION = 3

COLUMNS = (
    "scheme",
    "u_tilde",
    "lambda",
    "eta",
    "theta_db",
    "rho_dbm",
    "sigma2_dbm",
    "N",
    "q",
    "p",
    "t_prob",
    "delay",
    "x_vector",
    "source",
    "ci_halfwidth",
    "status",
)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _join(values):
    return ";".join(repr(float(v)) for v in values)


def _base_row(cfg: ExperimentConfig, scheme, u, theta_db):
    rho = _join(cfg.ladder_dbm) if scheme == "ramping" else float(cfg.rho_dbm)
    return {
        "scheme": scheme,
        "u_tilde": float(u),
        "lambda": float(cfg.lam),
        "eta": float(cfg.eta),
        "theta_db": float(theta_db),
        "rho_dbm": rho,
        "sigma2_dbm": float(cfg.sigma2_dbm),
    }


def _space(cfg):
    return BackoffSearchSpace.with_step(cfg.n_max, cfg.q_step)


def _analytic_point(cfg: ExperimentConfig, scheme, u, theta_db):
    """One analytic row; back-off uses the per-theta optimum unless fixed in the config."""
    params = cfg.network(u, theta_db)
    row = _base_row(cfg, scheme, u, theta_db)
    row["source"] = "analytic"
    status = "ok"
    if scheme == "baseline":
        res = AnalyticResult.from_failure(baseline_failure(params))
        row.update(p=res.p, t_prob=res.t_prob, delay=res.delay, x_vector="1.0")
    elif scheme == "ramping":
        rep = solve_ramping(params, cfg.ladder_dbm, epsilon=cfg.epsilon, max_iter=cfg.max_iter)
        row.update(p=rep.failure, t_prob=rep.t_prob, delay=rep.delay, x_vector=_join(rep.x))
        status = "ok" if rep.converged else "not_converged"
    else:
        fixed = cfg.fixed_backoff()
        if fixed is None:
            opt = optimize_backoff(params, _space(cfg), epsilon=cfg.epsilon, max_iter=cfg.max_iter, keep_surface=False)
            n, q = opt.n_star, opt.q_star
        else:
            n, q = fixed.n_slots, fixed.q
        rep = solve_backoff(params, n, q, epsilon=cfg.epsilon, max_iter=cfg.max_iter)
        row.update(N=n, q=float(q), p=rep.failure, t_prob=rep.t_prob, delay=rep.delay, x_vector=_join(rep.x))
        status = "ok" if rep.converged else "not_converged"
    row["status"] = status
    return row


def _scheme_object(cfg, scheme, analytic_row):
    if scheme == "ramping":
        return PowerRamping(cfg.ladder_dbm)
    if scheme == "backoff":
        return Backoff(int(analytic_row["N"]), float(analytic_row["q"]))
    return Baseline()


def _sim_point(cfg: ExperimentConfig, scheme, u, theta_db, seed, analytic_row=None):
    if analytic_row is None:
        analytic_row = _analytic_point(cfg, scheme, u, theta_db)
    sim = cfg.simulation
    row = _base_row(cfg, scheme, u, theta_db)
    try:
        stats = simulate(
            cfg.network(u, theta_db),
            _scheme_object(cfg, scheme, analytic_row),
            slots=sim.slots,
            realizations=sim.realizations,
            seed=seed,
            region_side=sim.region_side,
            measurement_radius=sim.measurement_radius,
            warmup=sim.warmup,
            mode=sim.mode,
            typical_device=sim.use_typical(u),
        )
    except RachError as exc:
        row.update(N=analytic_row.get("N"), q=analytic_row.get("q"), p=math.nan, source="sim",
                   status=f"error:{type(exc).__name__}")
        return row
    row.update(
        N=analytic_row.get("N"),
        q=analytic_row.get("q"),
        p=stats.empirical_p,
        t_prob=stats.attempts / stats.device_slots,
        delay=stats.empirical_delay,
        x_vector=_join(stats.state_occupancy),
        source="sim",
        ci_halfwidth=stats.ci_halfwidth,
        status="ok",
    )
    return row


def _validate_point(cfg, scheme, u, theta_db, seed):
    a = _analytic_point(cfg, scheme, u, theta_db)
    s = _sim_point(cfg, scheme, u, theta_db, seed, analytic_row=a)
    if s["status"].startswith("error"):
        return [a, s]
    allowed = max(cfg.tolerance, cfg.ci_multiplier * s["ci_halfwidth"])
    passed = abs(s["p"] - a["p"]) <= allowed
    s["status"] = "pass" if passed else "fail"
    return [a, s]


def _table_point(cfg, u, theta_db, surface=False):
    params = cfg.network(u, theta_db)
    space = _space(cfg)
    opt = optimize_backoff(params, space, epsilon=cfg.epsilon, max_iter=cfg.max_iter, keep_surface=surface)
    row = _base_row(cfg, "backoff", u, theta_db)
    row.update(
        N=opt.n_star,
        q=float(opt.q_star),
        p=opt.failure_at_opt,
        t_prob=opt.t_prob_at_opt,
        delay=opt.delay_star,
        x_vector=_join(opt.x_at_opt),
        source="analytic",
        status="optimum",
    )
    rows = [row]
    if surface:
        for n in range(opt.surface.shape[0]):
            for j, q in enumerate(space.q_grid):
                d = float(opt.surface[n, j])
                grid = _base_row(cfg, "backoff", u, theta_db)
                grid.update(N=n, q=float(q), delay=d, source="analytic",
                            status="grid" if math.isfinite(d) else "not_converged")
                rows.append(grid)
    return rows


def _call(job):
    fn, args = job
    return fn(*args)


def _run_jobs(jobs, n_workers):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(_call, jobs))
    return [_call(job) for job in jobs]


def _flatten(results):
    rows = []
    for r in results:
        rows.extend(r if isinstance(r, list) else [r])
    return rows


def write_csv(rows, stream):
    writer = csv.DictWriter(stream, fieldnames=COLUMNS, lineterminator="\n", extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in COLUMNS})


def _grid(cfg):
    return [(s, u, t) for s in cfg.schemes for u in cfg.u_tilde for t in cfg.thetas_db()]


def cmd_analytic(cfg, jobs=1):
    return _flatten(_run_jobs([(_analytic_point, (cfg, s, u, t)) for s, u, t in _grid(cfg)], jobs))


def cmd_table1(cfg, jobs=1):
    points = [(u, t) for u in cfg.table1_u_tilde for t in cfg.table1_theta_db]
    return _flatten(_run_jobs([(_table_point, (cfg, u, t)) for u, t in points], jobs))


def cmd_optimize(cfg, jobs=1, surface=False):
    points = [(u, t) for u in cfg.u_tilde for t in cfg.thetas_db()]
    return _flatten(_run_jobs([(_table_point, (cfg, u, t, surface)) for u, t in points], jobs))


def _point_seeds(cfg, n):
    # one independent seed per sweep point, derived from the configured seed
    return [cfg.simulation.seed * 1_000_003 + k for k in range(n)]


def cmd_simulate(cfg, jobs=1):
    grid = _grid(cfg)
    seeds = _point_seeds(cfg, len(grid))
    return _flatten(_run_jobs([(_sim_point, (cfg, s, u, t, sd)) for (s, u, t), sd in zip(grid, seeds)], jobs))


def cmd_validate(cfg, jobs=1):
    grid = _grid(cfg)
    seeds = _point_seeds(cfg, len(grid))
    return _flatten(_run_jobs([(_validate_point, (cfg, s, u, t, sd)) for (s, u, t), sd in zip(grid, seeds)], jobs))


def validation_summary(rows, cfg):
    sims = [r for r in rows if r["source"] == "sim"]
    failed = [r for r in sims if r["status"] != "pass"]
    analytic = {(r["scheme"], r["u_tilde"], r["theta_db"]): r["p"] for r in rows if r["source"] == "analytic"}
    diffs = [abs(r["p"] - analytic[(r["scheme"], r["u_tilde"], r["theta_db"])]) for r in sims if not r["status"].startswith("error")]
    diffs = [d for d in diffs if not math.isnan(d)]
    frac = len(failed) / len(sims) if sims else 0.0
    lines = [
        f"points: {len(sims)}",
        f"passed: {len(sims) - len(failed)}",
        f"failed: {len(failed)} ({frac:.1%}, limit {cfg.max_fail_fraction:.0%})",
        f"max |p_sim - p_analytic|: {max(diffs) if diffs else float('nan'):.4f}",
    ]
    for r in failed:
        lines.append(f"  {r['status'].upper()} {r['scheme']} u_tilde={r['u_tilde']} theta_db={r['theta_db']} p_sim={r['p']:.4f}")
    return "\n".join(lines) + "\n", frac > cfg.max_fail_fraction


def _nonconverged_fraction(rows):
    solved = [r for r in rows if r["source"] == "analytic" and r["status"] != "grid"]
    if not solved:
        return 0.0
    return sum(r["status"] == "not_converged" for r in solved) / len(solved)


def build_parser():
    parser = argparse.ArgumentParser(prog="rachgeo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analytic", "closed-form p, T and D over the theta sweep"),
        ("table1", "optimal back-off (N, q) on the reference table grid"),
        ("simulate", "Monte Carlo p, T and D over the theta sweep"),
        ("validate", "compare analytic and simulated failure probabilities"),
        ("optimize", "optimal back-off (N, q) over the theta sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI config file (defaults are used when omitted)")
        p.add_argument("--seed", type=int, help="override the simulation seed")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name in ("analytic", "simulate", "validate"):
            p.add_argument("--backoff-n", type=int, help="fixed back-off N instead of optimising")
            p.add_argument("--backoff-q", type=float, help="fixed back-off q instead of optimising")
        if name == "optimize":
            p.add_argument("--surface", action="store_true", help="also write every grid point")
        if name == "validate":
            p.add_argument("--summary", help="write the text summary here as well as to stderr")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.simulation = replace(cfg.simulation, seed=args.seed)
        if getattr(args, "backoff_n", None) is not None or getattr(args, "backoff_q", None) is not None:
            cfg = replace(cfg, backoff_n=args.backoff_n, backoff_q=args.backoff_q)
        cfg.check()
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    jobs = max(1, args.jobs)
    try:
        if args.command == "analytic":
            rows = cmd_analytic(cfg, jobs)
        elif args.command == "table1":
            rows = cmd_table1(cfg, jobs)
        elif args.command == "optimize":
            rows = cmd_optimize(cfg, jobs, surface=args.surface)
        elif args.command == "simulate":
            rows = cmd_simulate(cfg, jobs)
        else:
            rows = cmd_validate(cfg, jobs)
    except RachError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED

    out = args.out or cfg.output
    buf = io.StringIO()
    write_csv(rows, buf)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())

    if args.command == "validate":
        text, failed = validation_summary(rows, cfg)
        sys.stderr.write(text)
        if args.summary:
            with open(args.summary, "w", encoding="utf-8") as fh:
                fh.write(text)
        if failed:
            return EXIT_VALIDATION
    if _nonconverged_fraction(rows) > cfg.max_nonconverged_fraction:
        print("error: fixed-point iteration did not converge at some sweep points", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
