"""Command-line front end.

Subcommands: train, eval, baseline, contour, inspect, synth, bench.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
import argparse
import json
import sys
import time

import numpy as np

from . import bench, stack as stk
from .data import (
    load_dense,
    load_sparse,
    make_gaussians,
    make_two_spirals,
    save_dense,
    save_sparse,
    standardize,
    train_test_split,
)
from .errors import DimensionError, PbdnError
from .gibbs import GibbsConfig
from .map_engine import MapConfig, run_map
from .model import IshmHyperparams, extract_subtypes, polytope_margin, prob_one
from .rng import RngStream


class UsageError(Exception):
    pass


def _bool(text):
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _load(path, fmt, dim_hint=None):
    if fmt == "sparse":
        return load_sparse(path, dim_hint=dim_hint)
    return load_dense(path)


def _prepared(data, stack):
    """Apply the model's stored standardization to raw data."""
    if data.dim - 1 != stack.input_covariates:
        raise DimensionError(
            f"data has {data.dim - 1} covariates, model expects {stack.input_covariates}"
        )
    if stack.standardization is not None:
        data = standardize(data, stack.standardization)
    return data


def evaluate(prob, labels):
    """Error at threshold 0.5 (ties predict 0) and mean log-likelihood of the true label."""
    prob = np.asarray(prob, dtype=np.float64)
    labels = np.asarray(labels)
    pred = (prob > 0.5).astype(np.int64)
    p_true = np.where(labels == 1, prob, 1.0 - prob)
    with np.errstate(divide="ignore"):
        ll = np.log(np.maximum(p_true, np.finfo(np.float64).tiny))
    return float(np.mean(pred != labels)), float(np.mean(ll))


def _eval_report(stack, data, depth=None):
    t0 = time.perf_counter()
    depth = depth or stack.selected_depth
    prob = stk.predict_proba(stack, data.covariates, depth)
    err, mll = evaluate(prob, data.labels)
    return {
        "error_rate": err,
        "accuracy": 1.0 - err,
        "mean_log_likelihood": mll,
        "complexity": stk.complexity(stack, depth),
        "depth": depth,
        "layer_widths": list(stack.layer_widths[: depth + 1]),
        "n": data.n,
        "wall_time_s": time.perf_counter() - t0,
    }


def _table(report):
    rows = []
    for key, value in report.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        elif isinstance(value, list) and len(value) > 12:
            value = f"[{len(value)} entries]"
        rows.append(f"  {key:<22}{value}")
    return "\n".join(rows)


def _emit(report, as_json, path=None):
    text = json.dumps(report, indent=1, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text if as_json else _table(report))


# commands


def cmd_train(args):
    data = _load(args.data, args.format)
    if args.standardize:
        data = standardize(data)
    engine = "gibbs" if args.inference == "gibbs" else "map"
    hp = IshmHyperparams(k_max=args.kmax) if engine == "gibbs" else IshmHyperparams.for_map(args.kmax)
    if engine == "gibbs":
        iters = args.iters or 5000
        config = GibbsConfig(
            iterations=iters, prune_every=min(200, iters), k_max=args.kmax, seed=args.seed, threads=args.threads
        )
    else:
        config = MapConfig(
            minibatch_size=args.batch_size, num_batches=args.batches or 4000, k_max=args.kmax, seed=args.seed
        )
    criterion = "aic" if args.criterion == "aic" else "aic_eps"
    t0 = time.perf_counter()
    stack = stk.grow(
        data,
        hp,
        engine=engine,
        criterion=criterion,
        epsilon=args.epsilon,
        max_layers=args.max_layers,
        rng=RngStream(args.seed),
        config=config,
    )
    wall = time.perf_counter() - t0
    stk.save(stack, args.out)
    report = _eval_report(stack, data)
    report.update(
        {
            "inference": args.inference,
            "criterion": args.criterion,
            "criterion_trace": [v for _, v in stack.criterion_trace],
            "trained_widths": list(stack.layer_widths),
            "model": args.out,
            "wall_time_s": wall,
        }
    )
    _emit(report, args.json, args.report)
    return 0


def cmd_eval(args):
    stack = stk.load(args.model)
    data = _prepared(_load(args.data, args.format, stack.input_covariates), stack)
    _emit(_eval_report(stack, data, args.depth), args.json, args.report)
    return 0


def cmd_baseline(args):
    """L2-regularized logistic regression: one hyperplane with its weight frozen at 1."""
    train = _load(args.data, args.format)
    test = _load(args.test, args.format, train.dim - 1) if args.test else train
    if args.standardize:
        train = standardize(train)
        test = standardize(test, train.standardization)
    if test.dim != train.dim:
        raise DimensionError("train and test dimensions differ")
    t0 = time.perf_counter()
    hp = IshmHyperparams.for_map(k_max=1)
    cfg = MapConfig(minibatch_size=args.batch_size, num_batches=args.batches, k_max=1, seed=args.seed)
    model = run_map(train, hp, cfg, RngStream(args.seed), frozen_r=1.0, l2=args.l2)
    prob = prob_one(model, test.features)
    err, mll = evaluate(prob, test.labels)
    report = {
        "error_rate": err,
        "accuracy": 1.0 - err,
        "mean_log_likelihood": mll,
        "complexity": 1.0,
        "depth": 1,
        "layer_widths": [train.dim - 1, 1],
        "n": test.n,
        "coefficients": model.beta[:, 0].tolist(),
        "wall_time_s": time.perf_counter() - t0,
    }
    _emit(report, args.json, args.report)
    return 0


def cmd_contour(args):
    stack = stk.load(args.model)
    if stack.input_covariates != 2:
        raise DimensionError("contour export needs a model with two input covariates")
    x1lo, x1hi, x2lo, x2hi = args.bounds
    n = args.grid_n
    g1, g2 = np.meshgrid(np.linspace(x1lo, x1hi, n), np.linspace(x2lo, x2hi, n), indexing="ij")
    raw = np.column_stack([g1.ravel(), g2.ravel()])
    Z = raw
    if stack.standardization is not None:
        Z = stack.standardization.apply(np.hstack([np.ones((raw.shape[0], 1)), raw]))[:, 1:]
    depth = args.depth or stack.selected_depth
    X = stk.layer_inputs(stack, Z, depth)
    pair = stack.pairs[depth - 1]
    p_pos = np.atleast_1d(prob_one(pair.model_pos, X))
    p_neg = np.atleast_1d(prob_one(pair.model_neg, X))
    v_pos = np.atleast_1d(polytope_margin(pair.model_pos, X, args.p0))
    v_neg = np.atleast_1d(polytope_margin(pair.model_neg, X, args.p0))
    pair_p = (p_pos + 1.0 - p_neg) / 2.0
    with open(args.out, "w") as fh:
        fh.write("x1,x2,prob_one_pos,prob_one_neg,pair_prob,violated_count_pos,violated_count_neg\n")
        for i in range(raw.shape[0]):
            fh.write(
                ",".join(repr(float(v)) for v in (raw[i, 0], raw[i, 1], p_pos[i], p_neg[i], pair_p[i]))
                + f",{int(v_pos[i])},{int(v_neg[i])}\n"
            )
    print(f"wrote {raw.shape[0]} grid points to {args.out}")
    return 0


def cmd_inspect(args):
    stack = stk.load(args.model)
    layers = []
    for pair in stack.pairs:
        entry = {"layer": pair.layer_index, "width": pair.width}
        for side, model in (("pos", pair.model_pos), ("neg", pair.model_neg)):
            entry[f"{side}_active"] = model.n_active
            entry[f"{side}_weights"] = sorted(model.r.tolist(), reverse=True)
        layers.append(entry)
    report = {
        "layer_widths": list(stack.layer_widths),
        "selected_depth": stack.selected_depth,
        "criterion": stack.criterion,
        "criterion_trace": [v for _, v in stack.criterion_trace],
        "layers": layers,
    }
    if args.data:
        data = _prepared(_load(args.data, args.format, stack.input_covariates), stack)
        first = stack.pairs[0]
        subtypes = {}
        for side, model, d in (("pos", first.model_pos, data), ("neg", first.model_neg, data.flipped())):
            found = extract_subtypes(model, d)
            subtypes[side] = [
                {
                    "hyperplane": s.hyperplane_index,
                    "weight": float(model.r[s.hyperplane_index]),
                    "mass": s.mass,
                    "prototype": (
                        stack.standardization.invert(s.prototype)
                        if stack.standardization is not None
                        else s.prototype
                    ).tolist(),
                }
                for s in found
            ]
        report["subtypes"] = subtypes
    if args.json:
        print(json.dumps(report, indent=1, sort_keys=True))
        return 0
    print(f"layer widths {report['layer_widths']}, selected depth {stack.selected_depth}")
    for entry in layers:
        print(f"layer {entry['layer']}: {entry['pos_active']} + {entry['neg_active']} active")
        for side in ("pos", "neg"):
            ws = " ".join(f"{w:.4g}" for w in entry[f"{side}_weights"])
            print(f"  {side} weights: {ws}")
    for side, rows in report.get("subtypes", {}).items():
        print(f"subtypes ({side} model, layer 1):")
        for s in rows:
            proto = ", ".join(f"{v:.4g}" for v in s["prototype"])
            print(f"  k={s['hyperplane']} r={s['weight']:.4g} mass={s['mass']:.4g} [{proto}]")
    return 0


def cmd_synth(args):
    rng = RngStream(args.seed)
    if args.kind == "spirals":
        data = make_two_spirals(args.n_per_class, args.noise, args.turns, rng)
    else:
        data = make_gaussians(args.n_per_class, args.separation, args.sd, args.dim, rng)
    parts = [(data, args.out)]
    if args.test_out:
        train, test = train_test_split(data, args.test_fraction, rng.split(1))
        parts = [(train, args.out), (test, args.test_out)]
    for d, path in parts:
        (save_sparse if args.format == "sparse" else save_dense)(d, path)
    print(" ".join(f"{path}: {d.n} rows" for d, path in parts))
    return 0


def cmd_bench(args):
    rows = bench.run(args.n, args.k, args.repeats, args.seed)
    print(json.dumps(rows, indent=1) if args.json else bench.format_rows(rows))
    return 0


# parser


def _common_data(p, required=True):
    p.add_argument("--data", required=required)
    p.add_argument("--format", choices=("dense", "sparse"), default="dense")


def _output(p):
    p.add_argument("--json", action="store_true", help="print the JSON report instead of a table")
    p.add_argument("--report", help="also write the JSON report to this path")


def build_parser():
    ap = argparse.ArgumentParser(prog="pbdn", description="Parsimonious Bayesian deep networks")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="grow a network and save it")
    _common_data(p)
    p.add_argument("--inference", choices=("gibbs", "sgd"), default="sgd")
    p.add_argument("--criterion", choices=("aic", "aic-eps"), default="aic")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--kmax", type=int, default=20)
    p.add_argument("--max-layers", type=int, default=10)
    p.add_argument("--iters", type=int, help="Gibbs sweeps per model (default 5000)")
    p.add_argument("--batches", type=int, help="SGD minibatches per model (default 4000)")
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", type=_bool, default=True, metavar="BOOL")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    _output(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="error rate and log-likelihood of a saved model")
    p.add_argument("--model", required=True)
    _common_data(p)
    p.add_argument("--depth", type=int)
    _output(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="L2-regularized logistic regression")
    _common_data(p)
    p.add_argument("--test")
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--batches", type=int, default=4000)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", type=_bool, default=True, metavar="BOOL")
    _output(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("contour", help="export a decision-surface grid as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--bounds", type=float, nargs=4, default=(-1.2, 1.2, -1.2, 1.2),
                   metavar=("X1MIN", "X1MAX", "X2MIN", "X2MAX"))
    p.add_argument("--grid-n", type=int, default=100)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--depth", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("inspect", help="active hyperplanes, weights and subtypes")
    p.add_argument("--model", required=True)
    _common_data(p, required=False)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("spirals", "gaussians"), default="spirals")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--turns", type=float, default=1.5)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("dense", "sparse"), default="dense")
    p.add_argument("--out", required=True)
    p.add_argument("--test-out")
    p.add_argument("--test-fraction", type=float, default=1 / 3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time the compiled kernels against the numpy fallback")
    p.add_argument("--n", type=int, default=200_000)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return ap


def _check(args):
    positive = ("kmax", "max_layers", "iters", "batches", "batch_size", "threads", "grid_n", "n_per_class")
    for name in positive:
        value = getattr(args, name, None)
        if value is not None and value < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    eps = getattr(args, "epsilon", None)
    if eps is not None and not 0 < eps < 1:
        raise UsageError("--epsilon must lie in (0, 1)")
    p0 = getattr(args, "p0", None)
    if p0 is not None and not 0 < p0 < 1:
        raise UsageError("--p0 must lie in (0, 1)")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check(args)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        return args.func(args)
    except (PbdnError, ValueError, ArithmeticError, OSError) as exc:
        print(f"pbdn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
