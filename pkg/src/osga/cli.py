"""Benchmark runner: ``osga solve|grid|verify <config-file>``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, apply_overrides, parse_config, parse_grid
from .diagnostics import MinorantSampler, MonitorReport, fit_rate, run_monitors
from .oracle import Objective, OracleError
from .prox import Preconditioner, QuadraticProx, default_q0
from .solver import SUCCESS_REASONS, RunResult, solve

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4
EXIT_MONITOR = 5

TABLE_HEADER = ["index", "family", "n", "seed", "eps", "mu", "status", "iterations",
                "n_f", "n_g", "f_best", "eta", "gap", "bound_ok", "K_bound", "monitors", "error"]


@dataclass
class RunOutcome:
    config: RunConfig
    exit_code: int
    result: RunResult | None = None
    monitors: MonitorReport | None = None
    report: str = ""
    error: str = ""
    row: dict = field(default_factory=dict)


def _jacobi_diag(oracle: Objective) -> np.ndarray:
    if hasattr(oracle, "d"):
        return np.array(oracle.d)
    if oracle.smooth and hasattr(oracle, "A"):
        d = (oracle.A ** 2).sum(axis=0)
        if np.all(d > 0):
            return d
    raise ConfigError("jacobi preconditioner needs a smooth problem with a positive Hessian diagonal")


def setup(cfg: RunConfig) -> tuple[Objective, QuadraticProx, np.ndarray, float]:
    """Instantiate the problem, prox function, start point and mu for a config."""
    oracle = cfg.problem.build()
    n = oracle.dim
    if cfg.start == "zeros":
        x0 = np.zeros(n)
    elif cfg.start == "ones":
        x0 = np.ones(n)
    else:
        x0 = np.random.Generator(np.random.PCG64(cfg.problem.seed + 1)).standard_normal(n)
    z0 = x0.copy() if cfg.prox.z0 == "start" else np.zeros(n)
    if cfg.prox.preconditioner == "jacobi":
        B = Preconditioner(n, _jacobi_diag(oracle))
    else:
        B = Preconditioner.identity(n)
    q0 = cfg.prox.q0 if cfg.prox.q0 is not None else default_q0(x0, z0, B)
    prox = QuadraticProx(z0, q0, B)
    if cfg.mu_policy == "zero":
        mu = 0.0
    else:
        mu = oracle.strong_convexity(None if B.is_identity else B.diag)
    return oracle, prox, x0, mu


def _exit_for(status: str) -> int:
    return EXIT_OK if status in SUCCESS_REASONS else EXIT_BUDGET


def _g(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def execute(cfg: RunConfig, index: int = 0, force_diagnostics: bool = False) -> RunOutcome:
    """Run one config in memory; hard errors are captured, not raised."""
    try:
        oracle, prox, x0, mu = setup(cfg)
    except ConfigError as exc:
        return RunOutcome(cfg, EXIT_CONFIG, error=f"config error: {exc}",
                          row=_row(index, cfg, None, None, None, f"config error: {exc}"))
    diagnostics = cfg.diagnostics or force_diagnostics
    sampler = MinorantSampler(oracle, prox, mu) if diagnostics else None
    try:
        result = solve(oracle, prox, x0, cfg.tuning, cfg.stop, mu=mu,
                       skip_x_prime=cfg.skip_x_prime, observer=sampler)
    except (OracleError, ArithmeticError, ValueError) as exc:
        msg = f"solver error: {type(exc).__name__}: {exc}"
        return RunOutcome(cfg, EXIT_SOLVER, error=msg,
                          row=_row(index, cfg, None, None, None, msg))
    monitors = run_monitors(result, oracle, prox, cfg.tuning, cfg.stop.eps,
                            skip_x_prime=cfg.skip_x_prime)
    if sampler is not None:
        monitors.results.append(sampler.result())
    report = format_report(cfg, oracle, prox, result, monitors, diagnostics)
    return RunOutcome(cfg, _exit_for(result.status), result, monitors, report,
                      row=_row(index, cfg, oracle, prox, result, "", monitors, diagnostics))


def _bound_check(oracle, prox, result) -> tuple[float, float, bool] | None:
    if oracle.known_optimum is None:
        return None
    x_hat, f_hat = oracle.known_optimum
    gap = result.f_b - f_hat
    bound = result.eta * prox.value(x_hat)
    tol = 1e-9 * (1 + abs(f_hat))
    return gap, bound, -tol <= gap <= bound + tol


def _row(index, cfg, oracle, prox, result, error, monitors=None, diagnostics=False) -> dict:
    row = dict.fromkeys(TABLE_HEADER, "")
    row.update(index=index, family=cfg.problem.family, n=cfg.problem.n,
               seed=cfg.problem.seed, eps=_g(cfg.stop.eps), error=error)
    if result is None:
        row["status"] = "error"
        return row
    bc = _bound_check(oracle, prox, result)
    k_bound = min((c.K_bound for c in monitors.certificates), default=None)
    row.update(mu=_g(result.mu), status=result.status, iterations=result.iterations,
               n_f=result.counter.n_f, n_g=result.counter.n_g, f_best=_g(result.f_b),
               eta=_g(result.eta), gap="" if bc is None else _g(bc[0]),
               bound_ok="" if bc is None else int(bc[2]), K_bound=_g(k_bound),
               monitors=("pass" if monitors.passed else "fail") if diagnostics else "")
    return row


def format_report(cfg: RunConfig, oracle: Objective, prox: QuadraticProx,
                  result: RunResult, monitors: MonitorReport, diagnostics: bool) -> str:
    p = cfg.problem
    lines = [
        f"problem: {p.family} n={oracle.dim} seed={p.seed}",
        f"mu: {result.mu:.6g} ({cfg.mu_policy})   Q0: {prox.q0:.6g}",
        f"termination: {result.status}",
        f"iterations: {result.iterations}",
        f"oracle calls: n_f={result.counter.n_f} n_g={result.counter.n_g}",
        f"f_best: {result.f_b:.17g}",
        f"eta: {result.eta:.6e}",
    ]
    bc = _bound_check(oracle, prox, result)
    if bc is not None:
        gap, bound, ok = bc
        lines.append(f"error bound: f_best - f_hat = {gap:.6e} <= eta*Q(x_hat) = {bound:.6e}"
                     f" [{'ok' if ok else 'VIOLATED'}]")
        model = "linear" if result.mu > 0 else "sublinear_poly"
        try:
            value, r2 = fit_rate(result.history, oracle.known_optimum[1], model)
            what = "log contraction per iteration" if model == "linear" else "exponent in k"
            lines.append(f"rate fit ({model}): {what} = {value:.4g}, r^2 = {r2:.4f}")
        except ValueError as exc:
            lines.append(f"rate fit: n/a ({exc})")
    for cert in monitors.certificates:
        lines.append(f"certificate ({cert.regime}): K = {cert.K_bound:.6g}"
                     f" vs actual iterations {result.iterations}")
    if diagnostics:
        lines.append("monitors: " + ("all passed" if monitors.passed else "FAILED"))
        lines.extend("  " + line for line in monitors.lines())
    return "\n".join(lines) + "\n"


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def run(cfg: RunConfig, verify: bool = False, out=None) -> int:
    """Execute one config, write its history CSV and report; return the exit status."""
    out = sys.stdout if out is None else out
    outcome = execute(cfg, force_diagnostics=verify)
    if outcome.result is None:
        print(outcome.error, file=sys.stderr)
        return outcome.exit_code
    try:
        if cfg.history_out:
            outcome.result.history.write_csv(cfg.history_out)
        if cfg.report_out:
            _write(cfg.report_out, outcome.report)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out.write(outcome.report)
    if verify and not outcome.monitors.passed:
        return EXIT_MONITOR
    return outcome.exit_code


def _history_path(template: str, index: int) -> str:
    if "{index" in template:
        return template.format(index=index)
    p = Path(template)
    return str(p.with_name(f"{p.stem}_{index:03d}{p.suffix}"))


def _grid_task(args) -> tuple[int, dict, str | None, int]:
    index, cfg = args
    outcome = execute(cfg, index)
    csv_text = outcome.result.history.to_csv() if outcome.result is not None else None
    return index, outcome.row, csv_text, outcome.exit_code


def run_grid(configs: list[RunConfig], parallelism: int = 1) -> list[dict]:
    """Run all configs (up to ``parallelism`` at once); rows come back in config order.

    Per-run history CSVs are written when ``output.history`` is set; a
    ``{index}`` placeholder, or else a ``_NNN`` suffix, keeps paths distinct.
    """
    tasks = list(enumerate(configs))
    if parallelism <= 1:
        done = [_grid_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            done = list(pool.map(_grid_task, tasks))
    rows = []
    for index, row, csv_text, _ in sorted(done, key=lambda t: t[0]):
        cfg = configs[index]
        if csv_text is not None and cfg.history_out:
            try:
                _write(_history_path(cfg.history_out, index), csv_text)
            except OSError as exc:
                row["error"] = f"I/O error: {exc}"
        rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _grid_exit(rows: list[dict]) -> int:
    codes = [EXIT_SOLVER if r["status"] == "error" else _exit_for(r["status"]) for r in rows]
    return max(codes, default=EXIT_OK)


def _overrides(args) -> dict:
    ov = {}
    if args.eps is not None:
        ov["stop.eps"] = args.eps
    if args.mu_policy is not None:
        ov["mu_policy"] = args.mu_policy
    if args.max_iters is not None:
        ov["stop.max_iterations"] = args.max_iters
    if args.seed is not None:
        ov["problem.seed"] = args.seed
    if args.history_out is not None:
        ov["output.history"] = args.history_out
    if args.report_out is not None:
        ov["output.report"] = args.report_out
    return ov


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osga", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("solve", "run one config"),
                        ("grid", "run every combination of grid.* values"),
                        ("verify", "run with all diagnostics monitors on")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--eps", type=float)
        p.add_argument("--mu-policy", choices=["declared", "zero"])
        p.add_argument("--max-iters", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--history-out")
        p.add_argument("--report-out")
        if name == "grid":
            p.add_argument("--parallel", type=int, default=1, metavar="N")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read config {args.config}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ov = _overrides(args)
        if args.command == "grid":
            configs = [apply_overrides(c, ov) for c in parse_grid(text)]
        else:
            configs = [apply_overrides(parse_config(text), ov)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command != "grid":
        return run(configs[0], verify=args.command == "verify")

    rows = run_grid(configs, args.parallel)
    table = format_table(rows)
    report_out = configs[0].report_out
    if report_out:
        try:
            _write(report_out, table)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    sys.stdout.write(table)
    return _grid_exit(rows)


if __name__ == "__main__":
    sys.exit(main())
