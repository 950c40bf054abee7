"""Command-line interface: eval, approx, gradcheck, train, sweep, stats.

Exit codes: 0 success, 1 verification failure, 2 usage/parse/data error.
All numeric CSV output carries 17 significant digits so values round-trip.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from zorro import analysis, data, experiments, nn
from zorro.activations import SpecError, derivative, evaluate, parse_spec

ENV_DATA_DIR = "ZORRO_DATA_DIR"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as f:
            yield f


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# dataset resolution shared by train and sweep
# ---------------------------------------------------------------------------


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=("mnist", "blobs"), default="mnist")
    p.add_argument("--data-dir", default=None,
                   help=f"directory with the four MNIST IDX files "
                        f"(default: ${ENV_DATA_DIR} or ./data/mnist)")
    p.add_argument("--images", default=None,
                   help="explicit IDX images path (overrides --data-dir)")
    p.add_argument("--labels", default=None,
                   help="explicit IDX labels path (required with --images)")
    p.add_argument("--subset", type=int, default=None,
                   help="train on a deterministic subset of this size")
    p.add_argument("--val-subset", type=int, default=2000,
                   help="validation size when --subset is used")
    p.add_argument("--split-seed", type=int, default=42)
    p.add_argument("--blobs-per-class", type=int, default=500)
    p.add_argument("--blobs-classes", type=int, default=2)
    p.add_argument("--blobs-spread", type=float, default=0.05)


def _resolve_datasets(args):
    if args.dataset == "blobs":
        ds = data.synth_blobs(args.blobs_per_class, args.blobs_classes,
                              args.blobs_spread, seed=args.split_seed)
        return data.split(ds, 0.8, seed=args.split_seed)
    if (args.images is None) != (args.labels is None):
        raise SpecError("--images and --labels must be given together")
    if args.images is not None:
        images, labels = args.images, args.labels
    else:
        data_dir = args.data_dir or os.environ.get(ENV_DATA_DIR) or Path("data") / "mnist"
        images, labels = data.resolve_mnist(data_dir, "train")
    ds = data.load_idx(images, labels)
    if args.subset is not None:
        return data.subset_split(ds, args.subset, args.val_subset, seed=args.split_seed)
    return data.split(ds, 0.9, seed=args.split_seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_eval(args) -> int:
    spec = parse_spec(args.spec)
    xs = analysis.sample_grid(args.lo, args.hi, args.step)
    values = evaluate(spec, xs)
    derivs = derivative(spec, xs)
    with _open_out(args.out) as f:
        f.write("x,value,derivative\n")
        for x, v, d in zip(xs, values, derivs):
            f.write(f"{_fmt(x)},{_fmt(v)},{_fmt(d)}\n")
    return 0


def cmd_approx(args) -> int:
    if args.dump_tables:
        print(json.dumps(_builtin_tables_dump(), indent=2))
        return 0
    rows = list(analysis.BUILTIN_APPROX_TABLE)
    if args.row is not None:
        rows = [r for r in rows if r.target.family == args.row]
        if not rows:
            names = sorted({r.target.family for r in analysis.BUILTIN_APPROX_TABLE})
            raise SpecError(f"no table row for {args.row!r}; choose from {names}")
    results = analysis.verify_approx_table(rows, eps_tol=args.eps_tol)
    with _open_out(args.out) as f:
        f.write(analysis.results_to_csv(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        _log(f"FAIL {r.row.target.family}: measured {r.eps_measured:.6f} "
             f"vs published {r.row.eps_paper}")
    return 1 if failed else 0


def _builtin_tables_dump() -> dict:
    rows = []
    for row in analysis.BUILTIN_APPROX_TABLE:
        p = row.zorro.param_dict()
        rows.append({
            "target": row.target.family,
            "interval": [row.interval.lo, row.interval.hi],
            "m": p["m"], "a_i": p["a_i"], "a_s": p["a_s"], "b": p["b"],
            "eps": row.eps_paper,
            "centered": row.centered,
        })
    grids = {
        name: {axis[0]: list(axis[1:]) for axis in gs.axes}
        for name, gs in experiments.BUILTIN_GRIDS.items()
    }
    return {"approximation_rows": rows, "parameter_grids": grids}


def cmd_gradcheck(args) -> int:
    spec = parse_spec(args.spec)
    report = analysis.grad_check(spec, analysis.Interval(args.lo, args.hi, args.step),
                                 h_scale=args.h_scale)
    passed = report.max_rel_err <= args.threshold
    payload = {
        "spec": str(spec),
        "points_checked": report.points_checked,
        "max_rel_err": report.max_rel_err,
        "worst_point": report.worst_point,
        "excluded_zones": [list(z) for z in report.excluded_zones],
        "threshold": args.threshold,
        "pass": passed,
    }
    with _open_out(args.out) as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return 0 if passed else 1


def cmd_train(args) -> int:
    spec = parse_spec(args.spec)
    train_set, val_set = _resolve_datasets(args)
    dims = ([train_set.features.shape[1]]
            + [args.units] * args.layers
            + [train_set.class_count])
    config = nn.TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                            batch_size=args.batch_size, seed=args.seed)
    net = nn.init_net(dims, spec, seed=args.seed)
    _log(f"training {spec} dims={dims} on {len(train_set)}/{len(val_set)} samples")
    net, history = nn.train(net, train_set, val_set, config)
    for i, (tl, ta, va) in enumerate(zip(history.train_loss, history.train_acc,
                                         history.val_acc), start=1):
        _log(f"epoch {i:3d}  loss {tl:.6f}  train_acc {ta:.4f}  val_acc {va:.4f}")
    with _open_out(args.history_out) as f:
        f.write("epoch,train_loss,train_acc,val_acc\n")
        for i in range(len(history.val_acc)):
            f.write(f"{i + 1},{_fmt(history.train_loss[i])},"
                    f"{_fmt(history.train_acc[i])},{_fmt(history.val_acc[i])}\n")
    if args.checkpoint_out:
        nn.save_checkpoint(net, args.checkpoint_out)
        _log(f"checkpoint written to {args.checkpoint_out}")
    return 0


def _parse_depths(text: str):
    if ".." in text:
        lo, _, hi = text.partition("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",")]


def _load_grid_file(path) -> experiments.GridSpec:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    axes = tuple((name, float(lo), float(hi), float(step))
                 for name, (lo, hi, step) in payload["axes"].items())
    return experiments.GridSpec(payload["variant"], axes)


def cmd_sweep(args) -> int:
    if args.dump_tables:
        print(json.dumps(_builtin_tables_dump(), indent=2))
        return 0
    if args.grid_file:
        grid = _load_grid_file(args.grid_file)
    elif args.variant in experiments.BUILTIN_GRIDS:
        grid = experiments.BUILTIN_GRIDS[args.variant]
    else:
        raise SpecError(f"no built-in grid for {args.variant!r}; "
                        f"choose from {sorted(experiments.BUILTIN_GRIDS)}")
    specs = experiments.expand_grid(grid, dedupe=not args.keep_duplicates)
    depths = _parse_depths(args.depths)
    train_set, val_set = _resolve_datasets(args)
    config = nn.TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                            batch_size=args.batch_size, seed=args.seed)
    total = len(depths) * len(specs) * args.runs
    _log(f"sweep {grid.variant}: {len(specs)} parameter sets x "
         f"{len(depths)} depths x {args.runs} runs = {total} cells")

    def progress(di, si, run, acc):
        _log(f"depth {depths[di]:3d}  set {si + 1:4d}/{len(specs)}  "
             f"run {run + 1}/{args.runs}  best_val {acc:.4f}")

    sr = experiments.run_sweep(specs, depths, train_set, val_set, config,
                               runs=args.runs, hidden_units=args.units,
                               jobs=args.jobs, progress=progress)
    with _open_out(args.out) as f:
        f.write(experiments.sweep_to_csv(sr))
    summary = experiments.sweep_summary(sr)
    summary["variant"] = grid.variant
    text = json.dumps(summary, indent=2)
    if args.summary:
        Path(args.summary).write_text(text + "\n", encoding="utf-8")
    else:
        _log(text)
    return 0


def _read_sample(path):
    values = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                values.append(float(line))
    return values


def cmd_stats(args) -> int:
    a = _read_sample(args.file_a)
    b = _read_sample(args.file_b)
    result = experiments.welch_ttest(a, b)
    with _open_out(args.out) as f:
        json.dump({"t": result.t, "df": result.df, "p": result.p}, f, indent=2)
        f.write("\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zorro",
        description="Zorro activation family: evaluation, verification, "
                    "training, sweeps, and statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="tabulate a function and its derivative")
    p.add_argument("spec", help='activation, e.g. "zorro_sym(a=2,b=0.5)"')
    p.add_argument("lo", type=float)
    p.add_argument("hi", type=float)
    p.add_argument("step", type=float)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("approx", help="verify the published approximation table")
    p.add_argument("--row", default=None, help="restrict to one target family")
    p.add_argument("--eps-tol", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.add_argument("--dump-tables", action="store_true",
                   help="print the built-in tables as JSON and exit")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("gradcheck", help="compare analytic derivative with FD")
    p.add_argument("spec")
    p.add_argument("--lo", type=float, default=-10.0)
    p.add_argument("--hi", type=float, default=10.0)
    p.add_argument("--step", type=float, default=5e-3)
    p.add_argument("--h-scale", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="train one dense feedforward network")
    p.add_argument("spec")
    p.add_argument("--layers", type=int, default=1, help="hidden layer count")
    p.add_argument("--units", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history-out", default=None)
    p.add_argument("--checkpoint-out", default=None)
    _add_data_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid search across depths")
    p.add_argument("variant", help="zorro variant with a built-in grid")
    p.add_argument("--depths", default="1..3", help='e.g. "1..5" or "1,3,9"')
    p.add_argument("--runs", type=int, default=4)
    p.add_argument("--units", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-file", default=None,
                   help="JSON grid override: {variant, axes: {name: [lo,hi,step]}}")
    p.add_argument("--keep-duplicates", action="store_true",
                   help="keep specs duplicated by inert grid axes")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", default=None, help="summary JSON path")
    p.add_argument("--dump-tables", action="store_true")
    _add_data_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="Welch's t-test on two sample files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return 2
    except nn.TrainingDiverged as exc:
        _log(f"training diverged: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
