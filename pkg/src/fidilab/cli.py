"""Command-line interface.

Verbs: gen-data, train, eval, grad-check, loss-curve, sweep. Common
flags: --config <path>, --out <path>, --seed <u64> (overrides the
relevant seed in the config). Exit codes: 0 success, 1 config error,
2 runtime/numeric error, 3 failed checks.

Plots are never rendered; every command emits plot-ready CSV or
key=value text so any external tool can draw them.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .data import generate_synthetic, load_sampleset, save_sampleset
from .errors import ConfigError, FidilabError
from .geometry import ProbMap, prob_of_distance
from .gradcheck import run_all_checks
from .losses import fidi_pair_loss
from .model import load_model, save_model
from .pipeline import (
    dataset,
    evaluate_model,
    run_experiment,
    train_test_split,
    with_alpha,
    with_beta,
    with_seed,
)
from .evaluation import save_report
from .train import save_history, train


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; usage errors are config errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fidilab", description=__doc__)
    p.add_argument("--version", action="version", version=f"fidilab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True, help="dataset CSV path")
    g.add_argument("--seed", type=int, default=None)

    t = sub.add_parser("train", help="train a model; writes checkpoint + history CSV")
    t.add_argument("--config", required=True)
    t.add_argument("--out", default=None, help="output directory")
    t.add_argument("--seed", type=int, default=None)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True, help="dataset CSV to evaluate on")
    e.add_argument("--out", default=None, help="output directory")

    c = sub.add_parser("grad-check", help="finite-difference checks of all gradients")
    c.add_argument("--batches", type=int, default=20)
    c.add_argument("--seed", type=int, default=2024)
    c.add_argument("--tolerance", type=float, default=1e-5)
    c.add_argument("--corrupt", action="store_true",
                   help="negative control: corrupt one gradient and expect failure")

    lc = sub.add_parser("loss-curve", help="tabulate per-pair losses over a distance grid")
    lc.add_argument("--alpha", type=float, default=1.05)
    lc.add_argument("--beta", type=float, default=0.5)
    lc.add_argument("--margin", type=float, default=0.3)
    lc.add_argument("--d-max", type=float, default=20.0)
    lc.add_argument("--steps", type=int, default=400)
    lc.add_argument("--out", required=True, help="output CSV path")

    s = sub.add_parser("sweep", help="hyperparameter / data-fraction sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None, help="output directory")
    s.add_argument("--seed", type=int, default=None,
                   help="replaces the sweep seed list with this single seed")
    return p


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config, require_data=True)
    if cfg.synth is None:
        raise ConfigError("gen-data needs synthetic keys in [data], not a path")
    synth = cfg.synth if args.seed is None else replace(cfg.synth, seed=args.seed)
    data = generate_synthetic(synth)
    save_sampleset(data, args.out)
    print(f"wrote {args.out}: N={data.num_samples} C={data.num_identities} "
          f"F={data.feature_dim}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, require_data=True)
    train_cfg = cfg.train if args.seed is None else with_seed(cfg.train, args.seed)
    data = dataset(cfg)
    model, history = train(data, train_cfg)
    out_dir = Path(args.out or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, out_dir / "checkpoint.txt")
    save_history(history, out_dir / "history.csv")
    print(f"trained {train_cfg.loss_kind} for {train_cfg.iterations} iterations")
    print(f"final: metric_loss={history.metric_loss[-1]:.6f} "
          f"cls_loss={history.cls_loss[-1]:.6f} total={history.total[-1]:.6f}")
    print(f"wrote {out_dir / 'checkpoint.txt'} and {out_dir / 'history.csv'}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    model = load_model(args.checkpoint)
    data = load_sampleset(args.data)
    report = evaluate_model(model, data, cfg.protocol, bins=cfg.histogram_bins)
    out_dir = Path(args.out or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_report(report, out_dir / "report.txt", out_dir / "cmc.csv")
    print(f"mAP={report.map:.4f} " +
          " ".join(f"cmc_{r}={v:.4f}" for r, v in sorted(report.cmc.items())))
    print(f"error_I={report.error_i:.4f} error_II={report.error_ii:.4f}")
    print(f"wrote {out_dir / 'report.txt'} and {out_dir / 'cmc.csv'}")
    return 0


def cmd_grad_check(args) -> int:
    results = run_all_checks(num_batches=args.batches, base_seed=args.seed,
                             tolerance=args.tolerance, corrupt=args.corrupt)
    print(f"{'check':8s} {'max_rel_err':>12s} {'tolerance':>10s} status")
    ok = True
    for r in results:
        status = "ok" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{r.name:8s} {r.max_rel_err:12.3e} {r.tolerance:10.1e} {status}")
    print("overall:", "PASS" if ok else "FAIL")
    return 0 if ok else 3


def cmd_loss_curve(args) -> int:
    if args.steps < 2:
        raise ConfigError("steps must be >= 2")
    if args.alpha <= 1.0:
        raise ConfigError(f"alpha must be > 1, got {args.alpha}")
    exp_map = ProbMap("exponential", args.beta)
    sig_map = ProbMap("sigmoid", args.beta)
    grid = np.linspace(0.0, args.d_max, args.steps)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("d,fidi_k0,fidi_k1,triplet_equivalent,"
                 "sigmoid_variant_k0,sigmoid_variant_k1\n")
        for d in grid:
            ue, _ = prob_of_distance(float(d), exp_map)
            us, _ = prob_of_distance(float(d), sig_map)
            # anchor-positive at distance d with the nearest negative at 0
            trip = max(float(d) + args.margin, 0.0)
            fh.write(",".join(repr(float(v)) for v in (
                d,
                fidi_pair_loss(ue, 0.0, args.alpha),
                fidi_pair_loss(ue, 1.0, args.alpha),
                trip,
                fidi_pair_loss(us, 0.0, args.alpha),
                fidi_pair_loss(us, 1.0, args.alpha),
            )) + "\n")
    print(f"wrote {args.out}: {args.steps} rows over d in [0, {args.d_max}]")
    return 0


def _sweep_grid(cfg: ExperimentConfig):
    grid = [("alpha", v) for v in cfg.sweep_alphas]
    grid += [("beta", v) for v in cfg.sweep_betas]
    grid += [("keep_fraction", v) for v in cfg.sweep_keep_fractions]
    if not grid:
        raise ConfigError("[sweep] grid is empty: set alphas, betas, or keep_fractions")
    return grid


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, require_data=True)
    grid = _sweep_grid(cfg)
    seeds = (args.seed,) if args.seed is not None else cfg.sweep_seeds
    data = dataset(cfg)
    train_set, test_set = train_test_split(data, cfg.train_fraction, cfg.split_seed)

    out_dir = Path(args.out or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs_path = out_dir / "sweep_runs.csv"
    summary_path = out_dir / "sweep_summary.csv"

    rows = []
    for param, value in grid:
        for seed in seeds:
            tc = with_seed(cfg.train, seed)
            keep = 1.0
            if param == "alpha":
                tc = with_alpha(tc, value)
            elif param == "beta":
                tc = with_beta(tc, value)
            else:
                keep = value
            try:
                result = run_experiment(train_set, test_set, tc, cfg.protocol,
                                        keep_fraction=keep, keep_seed=seed)
                row = (param, value, seed, result.report.map,
                       result.report.cmc.get(1, float("nan")), "ok")
            except FidilabError as exc:
                print(f"run failed ({param}={value}, seed={seed}): {exc}",
                      file=sys.stderr)
                row = (param, value, seed, float("nan"), float("nan"), "failed")
            rows.append(row)
            print(f"{param}={value} seed={seed}: "
                  + (f"mAP={row[3]:.4f} cmc_1={row[4]:.4f}" if row[5] == "ok"
                     else "failed"))

    with open(runs_path, "w", encoding="utf-8") as fh:
        fh.write("parameter,value,seed,map,cmc_1,status\n")
        for r in rows:
            fh.write(f"{r[0]},{float(r[1])!r},{r[2]},{float(r[3])!r},"
                     f"{float(r[4])!r},{r[5]}\n")

    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("parameter,value,runs_ok,map_mean,map_std,cmc1_mean,cmc1_std\n")
        for param, value in grid:
            got = [r for r in rows if r[0] == param and r[1] == value and r[5] == "ok"]
            maps = np.asarray([r[3] for r in got])
            cmcs = np.asarray([r[4] for r in got])
            if len(got):
                mstd = float(maps.std(ddof=1)) if len(got) > 1 else 0.0
                cstd = float(cmcs.std(ddof=1)) if len(got) > 1 else 0.0
                fh.write(f"{param},{float(value)!r},{len(got)},"
                         f"{float(maps.mean())!r},{mstd!r},"
                         f"{float(cmcs.mean())!r},{cstd!r}\n")
            else:
                fh.write(f"{param},{float(value)!r},0,nan,nan,nan,nan\n")
    print(f"wrote {runs_path} and {summary_path}")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "grad-check": cmd_grad_check,
    "loss-curve": cmd_loss_curve,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FidilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
