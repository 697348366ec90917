"""Command-line entry point: ``cuspfactor {simulate,fit,summarize,prior-check}``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
failures during computation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import cusp_prior as cp
from .diagnostics import (
    correlation_draws,
    credible_interval,
    mean_sq_dev_from_sample_corr,
    posterior_mean_h_star,
)
from .errors import CuspError, NumericalError
from .gibbs_cusp import run_chain
from .gibbs_mgp import run_chain_mgp
from .dataio import PreprocessSpec, RunConfig, load_csv, parse_index_list, sample_correlation
from .prob_core import make_rng
from .sim_harness import METRICS, ScenarioSpec, run_scenario
from .store import read_draws, unflatten, write_draws

logger = logging.getLogger("cuspfactor")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_model_flags(sp):
    g = sp.add_argument_group("model and sampler settings (override --config)")
    g.add_argument("--config", help="JSON file with RunConfig keys")
    g.add_argument("--method", choices=("cusp", "mgp"))
    g.add_argument("--seed", type=int)
    for flag, typ in (("alpha", float), ("a-theta", float), ("b-theta", float), ("theta-inf", float),
                      ("a-sigma", float), ("b-sigma", float), ("a1", float), ("a2", float), ("nu", float),
                      ("eps-threshold", float), ("iterations", int), ("burn-in", int), ("thin", int),
                      ("t-bar", int), ("alpha0", float), ("alpha1", float)):
        g.add_argument(f"--{flag}", type=typ)
    g.add_argument("--allow-heavy-slab", action="store_true", default=None,
                   help="accept a_theta <= 1 (slab with infinite mean)")


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    return cfg.updated({
        "method": args.method, "seed": args.seed, "alpha": args.alpha, "a_theta": args.a_theta,
        "b_theta": args.b_theta, "theta_inf": args.theta_inf, "a_sigma": args.a_sigma,
        "b_sigma": args.b_sigma, "a1": args.a1, "a2": args.a2, "nu": args.nu,
        "eps_threshold": args.eps_threshold, "n_iterations": args.iterations,
        "burn_in": args.burn_in, "thin": args.thin, "t_bar": args.t_bar,
        "alpha0": args.alpha0, "alpha1": args.alpha1, "allow_heavy_slab": args.allow_heavy_slab,
    })


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cuspfactor", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run replicated synthetic-data scenarios")
    sim.add_argument("--p", type=int, default=20)
    sim.add_argument("--h0", type=int, default=5)
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--replicates", type=int, default=5)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", required=True)
    sim.add_argument("--timing", action="store_true", help="also write wall-clock runtimes")
    _add_model_flags(sim)

    fit = sub.add_parser("fit", help="fit one dataset and store posterior draws")
    fit.add_argument("--data", required=True, help="CSV with a header row")
    fit.add_argument("--out", required=True)
    fit.add_argument("--center", action="store_true")
    fit.add_argument("--negate", default="", help="1-based columns to negate, e.g. 1,9,10")
    fit.add_argument("--level", type=float, default=0.95)
    _add_model_flags(fit)

    summ = sub.add_parser("summarize", help="summarize stored draws")
    summ.add_argument("--draws", required=True)
    summ.add_argument("--level", type=float, default=0.95)
    summ.add_argument("--data", help="CSV to compute the sample correlation from, if the draws lack it")
    summ.add_argument("--out", help="directory for summary files (default: the draws directory)")

    pc = sub.add_parser("prior-check", help="tabulate closed-form CUSP prior quantities")
    pc.add_argument("--alpha", type=float, default=5.0)
    pc.add_argument("--a-theta", type=float, default=2.0)
    pc.add_argument("--b-theta", type=float, default=2.0)
    pc.add_argument("--theta-inf", type=float, default=0.05)
    pc.add_argument("--eps", type=float, default=0.1)
    pc.add_argument("--h-max", type=int, default=10)
    return parser


def _print(text: str = "") -> None:
    sys.stdout.write(text + "\n")


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    _, settings = cfg.build()
    spec = ScenarioSpec(p=args.p, h0=args.h0, n=args.n, replicates=args.replicates, method=cfg.method,
                        hyper=cfg.hyper_overrides(), settings=settings, workers=args.workers)
    result = run_scenario(spec)
    result.write(args.out, include_runtime=args.timing)
    _print(f"({spec.p},{spec.h0}) {spec.method}, {spec.replicates} replicates")
    for metric in METRICS:
        if metric == "runtime" and not args.timing:
            continue
        s = result.summary.get(metric)
        if s:
            _print(f"  {metric:8s} median {s['median']:.4f}  iqr {s['iqr']:.4f}")
    failed = sum(r["status"] != "ok" for r in result.rows)
    if failed:
        _print(f"  {failed} replicate(s) failed; see replicates.csv")
        return 2
    return 0


def _write_matrix(path: Path, matrix: np.ndarray) -> None:
    np.savetxt(path, matrix, fmt="%.17g", delimiter=",")


def _summary_lines(store, level: float, sample_corr) -> tuple[list[str], dict]:
    hs = store.h_star.astype(float)
    lo, hi = credible_interval(hs, level)
    info = {"n_draws": len(store), "h_star_mean": posterior_mean_h_star(store),
            "h_star_interval": [lo, hi], "level": level}
    lines = [f"draws: {len(store)}",
             f"posterior mean H*: {info['h_star_mean']:.4f}",
             f"{level:.0%} credible interval for H*: ({lo:g}, {hi:g})"]
    if sample_corr is not None:
        dev = mean_sq_dev_from_sample_corr(store, sample_corr)
        info["mean_sq_dev_sample_corr"] = dev
        lines.append(f"mean squared deviation from sample correlation: {dev:.6f}")
    return lines, info


def _write_correlation_summaries(store, level: float, out: Path) -> None:
    _write_matrix(out / "omega_mean.csv", unflatten(store.omega.mean(axis=0), store.p))
    corr = correlation_draws(store)
    tail = 0.5 * (1.0 - level)
    q_lo, q_hi = np.quantile(corr, [tail, 1.0 - tail], axis=0)
    _write_matrix(out / "corr_mean.csv", unflatten(corr.mean(axis=0), store.p))
    _write_matrix(out / "corr_lower.csv", unflatten(q_lo, store.p))
    _write_matrix(out / "corr_upper.csv", unflatten(q_hi, store.p))


def cmd_fit(args) -> int:
    cfg = _config_from_args(args)
    hyper, settings = cfg.build()
    data = load_csv(args.data, PreprocessSpec(center=args.center, negate_columns=parse_index_list(args.negate)))
    runner = run_chain if cfg.method == "cusp" else run_chain_mgp
    store = runner(data, hyper, settings, rng=make_rng(settings.seed))
    out = Path(args.out)
    write_draws(store, out)
    corr = sample_correlation(data.y)
    _write_matrix(out / "sample_corr.csv", corr)
    lines, _ = _summary_lines(store, args.level, corr)
    for line in lines:
        _print(line)
    return 0


def cmd_summarize(args) -> int:
    store = read_draws(args.draws)
    out = Path(args.out or args.draws)
    out.mkdir(parents=True, exist_ok=True)
    corr = None
    if args.data:
        corr = sample_correlation(load_csv(args.data, PreprocessSpec()).y)
    elif (Path(args.draws) / "sample_corr.csv").exists():
        corr = np.loadtxt(Path(args.draws) / "sample_corr.csv", delimiter=",", ndmin=2)
    lines, info = _summary_lines(store, args.level, corr)
    _write_correlation_summaries(store, args.level, out)
    (out / "summary.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for line in lines:
        _print(line)
    return 0


def cmd_prior_check(args) -> int:
    hyper = cp.CuspHyper(alpha=args.alpha, a_theta=args.a_theta, b_theta=args.b_theta,
                         theta_inf=args.theta_inf)
    if args.h_max < 1:
        raise CuspError("--h-max must be at least 1")
    a = hyper.alpha
    _print(f"alpha={a:g} a_theta={hyper.a_theta:g} b_theta={hyper.b_theta:g} theta_inf={hyper.theta_inf:g}")
    _print(f"E(H*) = {cp.expected_active(a):g}")
    mass_center = cp.slab_outside_mass(hyper.a_theta, hyper.b_theta, hyper.theta_inf, args.eps)
    _print(f"slab mass outside |theta - theta_inf| <= {args.eps:g}: {mass_center:.6f}")
    theta0 = hyper.slab_mean
    header = "h,E(v_h),E(omega_h),E(pi_h),E(theta_h),pr(|theta_h-theta_inf|>eps)"
    _print(header)
    for h in range(1, args.h_max + 1):
        e_theta = cp.expected_theta(a, h, theta0, hyper.theta_inf) if np.isfinite(theta0) else float("inf")
        _print(f"{h},{1 / (1 + a):.6f},{cp.expected_omega(a, h):.6f},{cp.expected_pi(a, h):.6f},"
               f"{e_theta:.6f},{cp.tail_prob(a, h, mass_center):.6f}")
    eps0 = max(args.eps, abs(hyper.theta_inf))
    mass_zero = cp.slab_outside_mass(hyper.a_theta, hyper.b_theta, 0.0, eps0)
    _print(f"truncation bound on pr(sup_(h>H) |theta_h| > {eps0:g})")
    _print("H,bound")
    for H in range(0, args.h_max + 1):
        _print(f"{H},{cp.truncation_bound(a, H, mass_zero):.6e}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize,
            "prior-check": cmd_prior_check}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (CuspError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:
        logger.exception("unexpected failure")
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
