"""Command-line front end.

Every subcommand requires --seed (there is no hidden nondeterminism) and
writes plot-ready CSV.  Exit codes: 0 success, 1 usage error, 2 runtime
failure.  Flags override config-file values.  Worker count comes from
--threads, falling back to the VASSO_OPT_THREADS environment variable, and
never changes results.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from functools import partial

import numpy as np

from .analysis import (delta_stability, ema_slope_sampler, landscape_slice,
                       lanczos_spectrum, mse_suppression, noisy_grad_sampler,
                       snr_adversary_spread)
from .core import STREAM_DIRECTION, STREAM_INIT, STREAM_USER, make_rng
from .errors import VassoOptError
from .harness import (TRADEOFF_HEADER, build_objective, fmt, init_x,
                      load_config, paired_compare, parse_config, run_experiment,
                      run_seed, tradeoff_sweep)
from .objectives import NoisyQuadratic
from .optimizers import sam_adversary, sfw_solve

_WIDTH = partial(argparse.HelpFormatter, width=78)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty number list")
    return vals


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("VASSO_OPT_THREADS", "1"))


def _write_csv(path: str, header: str, lines) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vasso-opt", formatter_class=_WIDTH,
                     description="Sharpness-aware optimizer experiments: "
                                 "training runs, paired comparisons, and "
                                 "adversary diagnostics.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add(name, help_, seeds="list"):
        p = sub.add_parser(name, help=help_, formatter_class=_WIDTH)
        if seeds == "list":
            p.add_argument("--seed", required=True, type=_seed_list,
                           help="comma-separated seed list; overrides the config")
        else:
            p.add_argument("--seed", required=True, type=int, help="RNG seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker cap (default: $VASSO_OPT_THREADS or 1); "
                            "never changes results")
        return p

    p = add("train", "run a training experiment from a JSON config")
    p.add_argument("--config", required=True, help="experiment config path")
    p.add_argument("--out", help="metrics CSV path (overrides config output_path)")
    p.add_argument("--T", type=int, help="override horizon")
    p.add_argument("--metrics-every", type=int, help="override metrics cadence")
    p.add_argument("--rho", type=float, help="override perturbation radius")
    p.add_argument("--theta", type=float, help="override EMA weight")
    p.add_argument("--p", type=float, help="override gate probability")
    p.add_argument("--record-wallclock", action="store_true",
                   help="fill the wallclock_ms column (not reproducible)")

    p = add("tradeoff", "loss/computation sweep over gate probabilities")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="table CSV path")
    p.add_argument("--p-values", type=_float_list,
                   default=[0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
                   help="comma-separated gate probabilities (default 0.2..0.8)")
    p.add_argument("--no-esam", action="store_true",
                   help="skip the gated-SAM analog rows")
    p.add_argument("--record-wallclock", action="store_true",
                   help="fill the wallclock column (not reproducible)")

    p = add("compare", "paired-seed sign test between two optimizer configs")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--metric", choices=["final_loss", "mean_drift"],
                   default="final_loss")
    p.add_argument("--out", help="optional per-seed CSV path")

    p = add("stability", "adversary drift trace for one run", seeds="one")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="drift CSV path (t,drift)")

    p = add("mse", "EMA slope error vs raw gradient error at a fixed point",
            seeds="one")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--sigma", type=float, default=1.0,
                   help="per-coordinate gradient noise std")
    p.add_argument("--thetas", type=_float_list, default=[0.2, 0.4, 0.9],
                   help="comma-separated EMA weights")
    p.add_argument("--steps", type=int, default=100000)
    p.add_argument("--out", required=True)

    p = add("delta", "linearized-sharpness stability of SAM vs EMA slopes",
            seeds="one")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.05)
    p.add_argument("--theta", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--out", required=True)

    p = add("snr", "adversary spread vs gradient signal-to-noise", seeds="one")
    p.add_argument("--grad", required=True, type=_float_list,
                   help="true gradient, comma-separated")
    p.add_argument("--scales", required=True, type=_float_list,
                   help="per-coordinate noise stds, comma-separated")
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = add("spectrum", "top Hessian eigenvalues via Lanczos", seeds="one")
    p.add_argument("--config", required=True, help="config supplying the objective")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--iters", type=int, default=60)
    p.add_argument("--train-steps", type=int, default=0,
                   help="train this many steps first (0: spectrum at init)")
    p.add_argument("--out", required=True)

    p = add("slice", "loss values on a slice through parameter space", seeds="one")
    p.add_argument("--config", required=True, help="config supplying the objective")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--two-d", action="store_true", help="use two directions")
    p.add_argument("--train-steps", type=int, default=0,
                   help="train this many steps first (0: slice at init)")
    p.add_argument("--out", required=True)

    p = add("sfw-check", "one-step Frank-Wolfe vs the closed-form adversary",
            seeds="one")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", help="optional per-trial CSV path")

    return parser


# ---------------------------------------------------------------------------
# subcommand bodies


def _override_config(args, seeds: list[int]):
    cfg = load_config(args.config)
    d = cfg.to_dict()
    d["seeds"] = seeds
    if getattr(args, "out", None):
        d["output_path"] = args.out
    if getattr(args, "T", None) is not None:
        d["T"] = args.T
    if getattr(args, "metrics_every", None) is not None:
        d["metrics_every"] = args.metrics_every
    for key in ("rho", "theta", "p"):
        if getattr(args, key, None) is not None:
            d["optimizer"][key] = getattr(args, key)
    return parse_config(d)


def cmd_train(args) -> int:
    cfg = _override_config(args, args.seed)
    if cfg.output_path is None:
        raise VassoOptError("no metrics path: give --out or set output_path in the config")
    result = run_experiment(cfg, max_workers=_threads(args),
                            record_wallclock=args.record_wallclock)
    if result.aggregate["n_aborted"] == len(cfg.seeds):
        raise VassoOptError("every seed aborted on non-finite loss; see " +
                            str(result.summary_path))
    print(f"wrote {result.metrics_path} and {result.summary_path}")
    return 0


def cmd_tradeoff(args) -> int:
    cfg = load_config(args.config)
    rows = tradeoff_sweep(cfg, args.p_values, args.seed,
                          include_esam_analog=not args.no_esam,
                          record_wallclock=args.record_wallclock,
                          max_workers=_threads(args))
    _write_csv(args.out, TRADEOFF_HEADER, (r.to_csv() for r in rows))
    print(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    cfg_a = load_config(args.config_a)
    cfg_b = load_config(args.config_b)
    da, db = cfg_a.to_dict(), cfg_b.to_dict()
    da["seeds"] = db["seeds"] = args.seed
    result = paired_compare(parse_config(da), parse_config(db), args.seed,
                            metric=args.metric, max_workers=_threads(args))
    if args.out:
        lines = (",".join(fmt(v) for v in row) for row in
                 zip(result.seeds, result.values_a, result.values_b, result.diffs))
        _write_csv(args.out, f"seed,{args.metric}_a,{args.metric}_b,diff", lines)
    print(f"metric={result.metric} wins_a={result.wins_a} wins_b={result.wins_b} "
          f"ties={result.ties} p_value={fmt(result.p_value)}")
    return 0


def cmd_stability(args) -> int:
    cfg = _override_config(args, [args.seed])
    rows, _ = run_seed(cfg, args.seed)
    lines = (f"{r.t},{fmt(r.eps_drift)}" for r in rows if r.eps_drift is not None)
    _write_csv(args.out, "t,drift", lines)
    print(f"wrote {args.out}")
    return 0


def cmd_mse(args) -> int:
    obj = NoisyQuadratic(np.ones(args.dim), sigma=args.sigma)
    x = make_rng(args.seed, STREAM_INIT).standard_normal(args.dim)
    lines = []
    for i, theta in enumerate(args.thetas):
        rng = make_rng(args.seed, STREAM_USER + i)
        mse_d, mse_g = mse_suppression(obj, x, theta, args.steps, rng)
        ratio = mse_d / mse_g if mse_g else float("nan")
        lines.append(",".join(fmt(v) for v in (theta, mse_d, mse_g, ratio)))
    _write_csv(args.out, "theta,mse_d,mse_g,ratio", lines)
    print(f"wrote {args.out}")
    return 0


def cmd_delta(args) -> int:
    obj = NoisyQuadratic(np.ones(args.dim), sigma=args.sigma)
    x = make_rng(args.seed, STREAM_INIT).standard_normal(args.dim)
    d_sam = delta_stability(obj, x, noisy_grad_sampler(obj, x), args.rho,
                            args.samples, make_rng(args.seed, STREAM_USER))
    d_vasso = delta_stability(obj, x, ema_slope_sampler(obj, x, args.theta),
                              args.rho, args.samples,
                              make_rng(args.seed, STREAM_USER + 1))
    _write_csv(args.out, "slope,delta_hat",
               [f"sam,{fmt(d_sam)}", f"vasso,{fmt(d_vasso)}"])
    ratio = d_vasso / d_sam if d_sam else float("nan")
    print(f"delta_vasso/delta_sam={fmt(ratio)}")
    return 0


def cmd_snr(args) -> int:
    grad = np.asarray(args.grad, dtype=np.float64)
    stats = snr_adversary_spread(grad, args.scales, args.draws, args.rho,
                                 make_rng(args.seed, STREAM_USER))
    lines = (",".join(fmt(v) for v in (s.noise_scale, s.mean_cos, s.std_cos))
             for s in stats)
    _write_csv(args.out, "noise_scale,mean_cos,std_cos", lines)
    print(f"wrote {args.out}")
    return 0


def _objective_point(args):
    """Objective plus evaluation point, optionally after a short training run."""
    cfg = load_config(args.config)
    obj = build_objective(cfg.objective, args.seed)
    if args.train_steps > 0:
        d = cfg.to_dict()
        d["seeds"] = [args.seed]
        d["T"] = args.train_steps
        d.pop("output_path", None)
        _, summary = run_seed(parse_config(d), args.seed, keep_final_x=True)
        if summary["aborted"]:
            raise VassoOptError("training diverged before the evaluation point")
        return obj, summary["final_x"]
    return obj, init_x(obj, cfg.objective, args.seed)


def cmd_spectrum(args) -> int:
    obj, x = _objective_point(args)
    est = lanczos_spectrum(obj, x, args.k, args.iters,
                           make_rng(args.seed, STREAM_DIRECTION))
    if est.breakdown:
        logging.getLogger("vasso_opt").info(
            "lanczos breakdown after %d iterations (subspace converged)",
            est.lanczos_iters)
    lines = (",".join(fmt(v) for v in (i, ev, res)) for i, (ev, res) in
             enumerate(zip(est.top_eigenvalues, est.residuals)))
    _write_csv(args.out, "index,ritz_value,residual", lines)
    print(f"wrote {args.out}")
    return 0


def cmd_slice(args) -> int:
    obj, x = _objective_point(args)
    rng = make_rng(args.seed, STREAM_DIRECTION)
    alphas = np.linspace(-args.radius, args.radius, args.points)
    if args.two_d:
        dirs = [rng.standard_normal(obj.dim), rng.standard_normal(obj.dim)]
        grid = landscape_slice(obj, x, dirs, alphas, betas=alphas)
        lines = (f"{fmt(float(a))},{fmt(float(b))},{fmt(float(grid[i, j]))}"
                 for i, a in enumerate(alphas) for j, b in enumerate(alphas))
        _write_csv(args.out, "alpha,beta,loss", lines)
    else:
        vals = landscape_slice(obj, x, [rng.standard_normal(obj.dim)], alphas)
        lines = (f"{fmt(float(a))},{fmt(float(v))}" for a, v in zip(alphas, vals))
        _write_csv(args.out, "alpha,loss", lines)
    print(f"wrote {args.out}")
    return 0


def cmd_sfw_check(args) -> int:
    rng = make_rng(args.seed, STREAM_USER)
    max_comp = 0.0
    max_val = 0.0
    lines = []
    for trial in range(args.trials):
        g = rng.standard_normal(args.dim)
        eps_sfw = sfw_solve(lambda bs, r: g, args.rho, 1, [1], [1.0], rng)
        eps_sam = sam_adversary(g, args.rho)
        comp = float(np.max(np.abs(eps_sfw - eps_sam)))
        val = abs(float(g @ eps_sfw) - float(g @ eps_sam))
        max_comp = max(max_comp, comp)
        max_val = max(max_val, val)
        lines.append(",".join(fmt(v) for v in (trial, comp, val)))
    if args.out:
        _write_csv(args.out, "trial,component_gap,value_gap", lines)
    print(f"max_component_gap={fmt(max_comp)} max_value_gap={fmt(max_val)}")
    return 0


_DISPATCH = {
    "train": cmd_train,
    "tradeoff": cmd_tradeoff,
    "compare": cmd_compare,
    "stability": cmd_stability,
    "mse": cmd_mse,
    "delta": cmd_delta,
    "snr": cmd_snr,
    "spectrum": cmd_spectrum,
    "slice": cmd_slice,
    "sfw-check": cmd_sfw_check,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(message)s", force=True)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.cmd](args)
    except (VassoOptError, OSError, ValueError) as e:
        print(f"vasso-opt: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
