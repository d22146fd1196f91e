"""Command-line interface.

Every subcommand accepts ``--config FILE`` holding flat ``key = value`` lines;
keys are the long option names and explicit flags take precedence. Each run
writes ``manifest.json`` with the fully resolved options next to its outputs.

Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import MODEL_IDS, BacktestConfig, rolling_forecast
from .core import PARAM_NAMES, THETA_ALT, THETA_NULL, ModelParams, NumericalError, ValidationError, validate_params
from .estimate import LikelihoodSpec, OptimizerConfig, fit
from .inference import DEFAULT_R, attach_covariance, wald_test
from .io import (
    read_config,
    read_daily,
    read_json,
    read_state_column,
    read_ticks,
    write_daily,
    write_json,
    write_rows,
    write_ticks,
)
from .mcstudy import ALPHAS, DESK_GRID, FULL_GRID, StudyConfig, mse_table, qq_data, rejection_table, run_study
from .model import integrated_params
from .realized import RvConfig, build_daily_series
from .simulate import SimConfig, parse_state_rule, simulate_path
from .states import read_market_csv, build_all

logger = logging.getLogger("sgito")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _grid(text: str) -> tuple[tuple[int, int], ...]:
    try:
        cells = []
        for cell in text.split(","):
            n, m = cell.lower().split("x")
            cells.append((int(n), int(m)))
        return tuple(cells)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid cells look like 250x390, got {text!r}") from exc


def _bool(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _theta(args) -> ModelParams:
    if args.theta:
        theta = ModelParams.from_array(args.theta)
    else:
        theta = THETA_NULL if args.hypothesis == "null" else THETA_ALT
    report = validate_params(theta)
    if not report.valid:
        raise ValidationError("invalid parameters:\n  " + "\n  ".join(report.violations))
    return theta


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, out: Path, **extra) -> None:
    options = {k: v for k, v in vars(args).items() if k not in ("func",)}
    write_json(out / "manifest.json", {"command": args.command, "version": __version__, "options": options, **extra})


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) in (None, "")]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def cmd_simulate(args) -> int:
    theta = _theta(args)
    out = _outdir(args)
    cfg = SimConfig(
        theta,
        args.n_days,
        args.m_obs,
        x0=args.x0,
        mu=args.mu,
        sigma_eps=args.sigma_eps,
        seed=args.seed,
        state_rule=parse_state_rule(args.state_rule),
        substeps=args.substeps,
    )
    files = []
    for rep in range(args.replicates):
        sim = simulate_path(cfg, rep, keep_ticks=not args.no_ticks, rv_cfg=RvConfig(k_scale=args.k_scale))
        daily_path = out / f"daily_r{rep:04d}.csv"
        write_daily(daily_path, sim.daily())
        files.append(daily_path.name)
        if not args.no_ticks:
            tick_path = out / f"ticks_r{rep:04d}.csv"
            write_ticks(tick_path, sim.ticks)
            files.append(tick_path.name)
        write_rows(out / f"truth_r{rep:04d}.csv", ({"day_index": i + 1, "iv": v} for i, v in enumerate(sim.true_iv)))
    _manifest(args, out, theta=theta.as_dict(), files=files)
    logger.info("wrote %d replicate(s) to %s", args.replicates, out)
    return EXIT_OK


def cmd_rv(args) -> int:
    _need(args, "ticks")
    ticks = read_ticks(args.ticks)
    states = read_state_column(args.states) if args.states else None
    daily = build_daily_series(ticks, states, RvConfig(k_scale=args.k_scale))
    out = _outdir(args)
    write_daily(out / "daily.csv", daily)
    _manifest(args, out, days=len(daily), floored=int(daily.floored.sum()))
    return EXIT_OK


def _load_daily(args):
    daily = read_daily(args.daily)
    if args.states:
        daily = daily.with_state(read_state_column(args.states))
    return daily


def cmd_fit(args) -> int:
    _need(args, "daily")
    daily = _load_daily(args)
    spec = LikelihoodSpec(mode=args.mode)
    opt = OptimizerConfig(algorithm=args.algorithm, multistart=args.multistart, seed=args.seed)
    res = attach_covariance(fit(daily, spec=spec, opt=opt), daily)
    out = _outdir(args)
    write_rows(out / "fit.csv", ({"param": n, "estimate": v, "std_error": s} for n, v, s in res.summary_rows()))
    ip = integrated_params(res.theta_hat)
    write_rows(
        out / "integrated.csv",
        (
            {"branch": f"{i + 1}{j + 1}", "omega_h": ip.omega_h[i, j], "gamma_h": ip.gamma_h[i, j], "beta_h": ip.beta_h[i, j]}
            for i in range(2)
            for j in range(2)
        ),
    )
    write_rows(out / "fitted.csv", ({"day_index": d, "rv": r, "h": h} for d, r, h in zip(daily.day_index, daily.rv, res.h_series)))
    write_json(
        out / "fit.json",
        {
            "theta_hat": res.theta_hat.as_dict(),
            "loglik": res.loglik,
            "n_obs": res.n_obs,
            "mode": res.mode,
            "h1": res.h1,
            "converged": res.converged,
            "unidentified": list(res.unidentified),
            "V_hat": res.V_hat,
            "W_hat": res.W_hat,
            "std_errors": res.std_errors,
        },
    )
    if args.plot:
        from .plots import fit_figure

        fit_figure(daily.day_index, daily.rv, res.h_series, out / "fit.png")
    _manifest(args, out, converged=res.converged, unidentified=list(res.unidentified))
    for name, value, se in res.summary_rows():
        print(f"{name:8s} {value: .6f} ({se:.6f})")
    print(f"loglik {res.loglik:.6f}")
    return EXIT_OK


def _load_restriction(path):
    """CSV rows of ``R`` (6 columns) followed by the matching ``r`` value."""
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2, comments="#"))
    if data.shape[1] != 7:
        raise ValidationError("restriction file rows need 6 coefficients and one right-hand side")
    return data[:, :6], data[:, 6]


def cmd_test(args) -> int:
    _need(args, "fit")
    from .core import FitResult

    art = read_json(args.fit)
    if art.get("V_hat") is None or art.get("W_hat") is None:
        raise ValidationError("fit artifact lacks V_hat/W_hat")
    res = FitResult(
        theta_hat=ModelParams(**art["theta_hat"]),
        loglik=art["loglik"],
        h_series=np.empty(0),
        converged=art["converged"],
        iterations=0,
        n_obs=art["n_obs"],
        V_hat=np.array(art["V_hat"]),
        W_hat=np.array(art["W_hat"]),
    )
    R, r = _load_restriction(args.restriction) if args.restriction else (DEFAULT_R, np.zeros(3))
    test = wald_test(res, R=R, r=r)
    out = _outdir(args)
    rows = [{"statistic": test.statistic, "dof": test.dof, "p_value": test.p_value}]
    rows[0].update({f"reject_{a:g}": int(test.rejects(a)) for a in args.alpha})
    write_rows(out / "wald.csv", rows)
    _manifest(args, out)
    print(f"T = {test.statistic:.4f}, dof = {test.dof}, p = {test.p_value:.4g}")
    return EXIT_OK


def cmd_mc_study(args) -> int:
    grid = FULL_GRID if args.full else (args.grid or DESK_GRID)
    replicates = 1000 if args.full and args.replicates is None else (args.replicates or 200)
    cfg = StudyConfig(
        grid=grid,
        replicates=replicates,
        hypotheses=tuple(args.hypotheses.split(",")),
        seed=args.seed,
        workers=args.workers,
        mode=args.mode,
        sigma_eps=args.sigma_eps,
    )
    records = run_study(cfg)
    out = _outdir(args)
    write_rows(
        out / "replicates.csv",
        (
            {
                "hypothesis": r.hypothesis,
                "N": r.n_days,
                "M": r.m_obs,
                "replicate": r.replicate,
                **dict(zip(PARAM_NAMES, r.theta_hat or [np.nan] * 6)),
                "statistic": r.statistic,
                "p_value": r.p_value,
                "converged": int(r.converged),
                "error": r.error,
            }
            for r in records
        ),
    )
    rej = rejection_table(records, cfg.alphas)
    mse = mse_table(records)
    write_rows(out / "rejection.csv", rej)
    write_rows(out / "mse.csv", mse)
    qq = {}
    for hyp, n, m in {(r.hypothesis, r.n_days, r.m_obs) for r in records}:
        stats_ = [r.statistic for r in records if (r.hypothesis, r.n_days, r.m_obs) == (hyp, n, m) and r.ok]
        if hyp == "null" and stats_:
            qq[f"N={n} M={m}"] = data = qq_data(stats_)
            write_rows(out / f"qq_{n}_{m}.csv", ({"chi2_quantile": a, "statistic": b} for a, b in data))
    if args.plot:
        from .plots import mse_figure, qq_figure

        if qq:
            qq_figure(qq, out / "qq.png")
        mse_figure(mse, out / "mse.png")
    _manifest(args, out, grid=grid, replicates=replicates, failed=sum(not r.ok for r in records))
    for row in rej:
        rates = " ".join(f"{row[f'alpha_{a:g}']:.3f}" for a in cfg.alphas)
        print(f"{row['hypothesis']:4s} N={row['N']:<5d} M={row['M']:<6d} {rates}  (ok {row['n_ok']})")
    return EXIT_OK


def cmd_backtest(args) -> int:
    _need(args, "daily")
    daily = _load_daily(args)
    pred = args.pred_window or len(daily) - args.est_window
    cfg = BacktestConfig(
        est_window=args.est_window,
        pred_window=pred,
        refit_every=args.refit_every,
        models=tuple(args.models.split(",")),
        latent_state=frozenset(filter(None, args.latent.split(","))),
        optimizer=OptimizerConfig(multistart=args.multistart, seed=args.seed),
    )
    res = rolling_forecast(daily, cfg=cfg)
    out = _outdir(args)
    scores = res.metrics()
    write_rows(out / "scores.csv", scores)
    write_rows(
        out / "forecasts.csv",
        ({"day_index": d, "rv": r, **{m: res.forecasts[m][k] for m in cfg.models}} for k, (d, r) in enumerate(zip(res.day_index, res.rv))),
    )
    if args.plot:
        from .plots import forecast_figure

        forecast_figure(res.day_index, res.rv, res.forecasts, out / "forecasts.png")
    _manifest(args, out, skipped=res.skipped, flags=res.flags)
    for row in scores:
        print(f"{row['model']:10s} MSPE {row['mspe']:.6g}  MAPE {row['mape']:.3f}")
    return EXIT_OK


def cmd_states(args) -> int:
    _need(args, "market")
    market = read_market_csv(args.market)
    paths = build_all(market)
    out = _outdir(args)
    dates = [d.isoformat() for d in market.dates]
    rows = []
    for k, date in enumerate(dates):
        row = {"date": date}
        for name, path in paths.items():
            idx = k - path.offset
            row[name] = int(path.s[idx]) if 0 <= idx < len(path) else ""
        rows.append(row)
    write_rows(out / "states.csv", rows)
    _manifest(args, out, dropped={name: p.offset for name, p in paths.items()})
    for name, path in paths.items():
        print(f"{name:13s} {int(path.s.sum()):5d} of {len(path)} flagged (first {path.offset} dropped)")
    return EXIT_OK


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="sgito", description="State-heterogeneous GARCH-Ito toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key = value file supplying defaults")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=2024)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("simulate", cmd_simulate, "simulate tick data from the SG-Ito process")
    p.add_argument("--hypothesis", choices=("null", "alt"), default="null")
    p.add_argument("--theta", type=_floats, help="omega1,omega2,gamma1,gamma2,beta1,beta2")
    p.add_argument("--n-days", type=int, default=250)
    p.add_argument("--m-obs", type=int, default=390)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--state-rule", default="leverage")
    p.add_argument("--sigma-eps", type=float, default=0.01)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--x0", type=float, default=10.0)
    p.add_argument("--substeps", type=int, default=1)
    p.add_argument("--k-scale", type=int, default=1)
    p.add_argument("--no-ticks", action="store_true", help="skip the (large) tick files")

    p = add("rv", cmd_rv, "pre-averaged realized volatility from a tick CSV")
    p.add_argument("--ticks")
    p.add_argument("--states", help="CSV with a state column, one row per tick day or per output day")
    p.add_argument("--k-scale", type=int, default=1)

    for name, func, help_ in (("fit", cmd_fit, "quasi-maximum-likelihood fit"), ("backtest", cmd_backtest, "rolling forecast evaluation")):
        p = add(name, func, help_)
        p.add_argument("--daily")
        p.add_argument("--states", help="CSV whose state column replaces the daily file's")
        p.add_argument("--multistart", type=int, default=5)
        p.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    subs["fit"].add_argument("--mode", choices=("high_frequency", "low_frequency"), default="high_frequency")
    subs["fit"].add_argument("--algorithm", choices=("quasi-newton", "simplex"), default="quasi-newton")
    subs["backtest"].add_argument("--est-window", type=int, default=750)
    subs["backtest"].add_argument("--pred-window", type=int, default=None)
    subs["backtest"].add_argument("--refit-every", type=int, default=1)
    subs["backtest"].add_argument("--models", default=",".join(MODEL_IDS))
    subs["backtest"].add_argument("--latent", default="", help="state models forecasting with the transition mixture")

    p = add("test", cmd_test, "Wald test of state homogeneity from a fit artifact")
    p.add_argument("--fit", help="fit.json written by the fit command")
    p.add_argument("--restriction", help="CSV rows: 6 coefficients of R then r")
    p.add_argument("--alpha", type=_floats, default=list(ALPHAS))

    p = add("mc-study", cmd_mc_study, "Monte Carlo size, power and MSE study")
    p.add_argument("--grid", type=_grid, help="cells like 250x390,500x2340")
    p.add_argument("--replicates", type=int)
    p.add_argument("--hypotheses", default="null,alt")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mode", choices=("high_frequency", "low_frequency"), default="high_frequency")
    p.add_argument("--sigma-eps", type=float, default=0.01)
    p.add_argument("--full", action="store_true", help="full 4x4 grid with 1000 replicates (hours)")
    p.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")

    p = add("states", cmd_states, "build exogenous state variables from a market CSV")
    p.add_argument("--market")
    return parser, subs


def _convert(action: argparse.Action, text: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        return _bool(text)
    value = action.type(text) if action.type else text
    if action.choices is not None and value not in action.choices:
        raise ValidationError(f"config value {text!r} not in {list(action.choices)} for {action.dest}")
    return value


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sp = subs[args.command]
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, text in read_config(args.config).items():
            if key not in actions or key in ("config", "help"):
                raise ValidationError(f"unknown config key {key!r} for {args.command}")
            try:
                defaults[key] = _convert(actions[key], text)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ValidationError(f"config key {key}: {exc}") from exc
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
