"""Command-line interface.

Subcommands: gen, corrupt, train, estimate, sweep, deltas, train-corrected,
plot.  Every option can also come from a JSON config file (--config) whose
keys mirror the flag names with underscores; explicit flags win over the
config file, which wins over built-in defaults.

Exit codes: 0 success, 1 usage error, 2 numerical failure.  The env var
NOISYT_JOBS overrides --jobs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from types import SimpleNamespace

from .core import (
    NonFiniteLoss,
    SingularMatrix,
    TransitionMatrix,
    load_dataset_csv,
    save_dataset_csv,
)
from .corrections import train_corrected
from .deltas import audit_error_bounds
from .estimators import ESTIMATORS
from .harness import (
    SweepConfig,
    emit_csv,
    emit_plot,
    mix_seed,
    prepare_cell,
    read_cells_csv,
    run_sweep,
)
from .models import (
    model_from_json_dict,
    model_to_json_dict,
    split_train_val,
    train_classifier,
)
from .noise import corrupt, noise_matrix
from .synth import GaussianSpec, generate


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; remap to this package's 1.
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


_REQUIRED = object()


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _int_tuple(value) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v]
    return tuple(int(v) for v in value)


def _str_tuple(value) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v]
    return tuple(str(v) for v in value)


_MODEL_FLAG_DEFAULTS = {
    "hidden_sizes": "25,25",
    "epochs": 100,
    "lr_initial": 0.01,
    "lr_decay_factor": 10.0,
    "lr_decay_epoch": 50,
    "batch_size": 128,
}


def _model_params(opts) -> dict:
    return {
        "hidden_sizes": _int_tuple(opts.hidden_sizes),
        "epochs": opts.epochs,
        "lr_initial": opts.lr_initial,
        "lr_decay_factor": opts.lr_decay_factor,
        "lr_decay_epoch": opts.lr_decay_epoch,
        "batch_size": opts.batch_size,
    }


def _add_model_flags(sp):
    sp.add_argument("--hidden-sizes", dest="hidden_sizes", default=argparse.SUPPRESS)
    sp.add_argument("--epochs", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--lr-initial", dest="lr_initial", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--lr-decay-factor", dest="lr_decay_factor", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--lr-decay-epoch", dest="lr_decay_epoch", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--batch-size", dest="batch_size", type=int, default=argparse.SUPPRESS)


def _merge(args, defaults) -> SimpleNamespace:
    given = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "_defaults", "command")
    }
    merged = dict(defaults)
    config_path = given.pop("config", None)
    if config_path is not None:
        with open(config_path) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    merged.update(given)
    missing = [k for k, v in merged.items() if v is _REQUIRED]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in sorted(missing))
        raise UsageError(f"missing required options: {flags}")
    return SimpleNamespace(**merged)


def _ground_truth(opts, num_classes):
    if opts.noise is None:
        return None
    if opts.eps is None:
        raise UsageError("--noise requires --eps")
    return noise_matrix(opts.noise, num_classes, opts.eps)


def cmd_gen(opts) -> int:
    spec = GaussianSpec(
        dim=opts.dim, mean0=opts.mean0, mean1=opts.mean1,
        variance=opts.variance, prior1=opts.prior1,
    )
    data = generate(spec, opts.n, opts.seed)
    save_dataset_csv(data, opts.out)
    print(f"wrote {opts.out}: {data.n_samples} rows, {data.n_features} features")
    return 0


def cmd_corrupt(opts) -> int:
    data = load_dataset_csv(opts.data, num_classes=opts.num_classes)
    truth = noise_matrix(opts.noise, data.num_classes, opts.eps)
    noisy = corrupt(data, truth, opts.seed)
    save_dataset_csv(noisy, opts.out)
    flipped = float((noisy.noisy_labels != noisy.clean_labels).mean())
    print(f"wrote {opts.out}: flipped fraction {flipped:.4f}")
    return 0


def cmd_train(opts) -> int:
    data = load_dataset_csv(opts.data, num_classes=opts.num_classes)
    train, val = split_train_val(data, opts.val_fraction, opts.seed)
    clf = train_classifier(train, val, seed=opts.seed, **_model_params(opts))
    _write_json(model_to_json_dict(clf), opts.out)
    print(
        f"wrote {opts.out}: best val accuracy {clf.best_val_accuracy_:.4f} "
        f"at epoch {clf.best_epoch_}"
    )
    return 0


def cmd_estimate(opts) -> int:
    data = load_dataset_csv(opts.data, num_classes=opts.num_classes)
    with open(opts.model) as fh:
        model = model_from_json_dict(json.load(fh))
    if opts.estimator not in ESTIMATORS:
        raise UsageError(f"--estimator must be one of {sorted(ESTIMATORS)}")
    truth = _ground_truth(opts, data.num_classes)
    report = ESTIMATORS[opts.estimator](model, data, ground_truth=truth, seed=opts.seed)
    report.save(opts.out)
    msg = f"wrote {opts.out}"
    if report.l1_error is not None:
        msg += f": l1 error {report.l1_error:.6f}"
    print(msg)
    return 0


def cmd_sweep(opts) -> int:
    cfg = SweepConfig(
        noise_kind=opts.noise,
        eps=opts.eps,
        sample_sizes=_int_tuple(opts.sizes),
        repeats=opts.repeats,
        base_seed=opts.seed,
        estimators=_str_tuple(opts.estimators),
        test_size=opts.test_size,
        val_fraction=opts.val_fraction,
        model_params=_model_params(opts),
    )
    result = run_sweep(cfg, jobs=opts.jobs)
    cells_path, agg_path = emit_csv(result, opts.out)
    print(f"wrote {cells_path} and {agg_path} ({len(result.records)} records)")
    if opts.plot is not None:
        emit_plot(result, opts.plot)
        print(f"wrote {opts.plot}")
    return 0


def cmd_deltas(opts) -> int:
    out_dir = Path(opts.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = SweepConfig(
        noise_kind=opts.noise,
        eps=opts.eps,
        sample_sizes=_int_tuple(opts.sizes),
        repeats=opts.repeats,
        base_seed=opts.seed,
        val_fraction=opts.val_fraction,
        model_params=_model_params(opts),
    )
    cfg.validate()
    rows = []
    for n in cfg.sample_sizes:
        for repeat in range(cfg.repeats):
            cell_seed, truth, train, _, model = prepare_cell(cfg, n, repeat)
            report = audit_error_bounds(
                model, cfg.gaussian, truth, train,
                mc_samples=opts.mc_multiplier * train.n_samples,
                seed=cell_seed, bound_slack=opts.bound_slack,
            )
            name = f"deltas_{cfg.noise_kind}{cfg.eps:g}_n{n}_r{repeat}.json"
            _write_json(report.to_json_dict(), out_dir / name)
            rows.append((cfg.noise_kind, cfg.eps, n, repeat, report))
    summary = out_dir / "deltas_summary.csv"
    with open(summary, "w") as fh:
        fh.write(
            "noise,eps,n,repeat,seed,delta1_mean,delta2_mean,delta3_mean,"
            "eps_t,eps_dualt,assumption1_fraction,bound_satisfied,dual_wins\n"
        )
        for noise, eps, n, repeat, r in rows:
            fh.write(
                f"{noise},{eps:.17g},{n},{repeat},{r.seed},"
                f"{r.delta1_mean:.17g},{r.delta2_mean:.17g},{r.delta3_mean:.17g},"
                f"{r.eps_t:.17g},{r.eps_dualt:.17g},{r.assumption1_fraction:.17g},"
                f"{int(r.bound_satisfied)},{int(r.dual_wins)}\n"
            )
    print(f"wrote {len(rows)} delta reports and {summary}")
    return 0


def _resolve_matrix(opts, train, val):
    """Resolve --matrix {true,t,dualt,FILE.json} into a TransitionMatrix."""
    source = opts.matrix
    if source == "true":
        if opts.noise is None or opts.eps is None:
            raise UsageError("--matrix true requires --noise and --eps")
        return noise_matrix(opts.noise, train.num_classes, opts.eps)
    if source in ESTIMATORS:
        base = train_classifier(train, val, seed=opts.seed, **_model_params(opts))
        return ESTIMATORS[source](base, train, seed=opts.seed).estimated
    return TransitionMatrix.load(source)


def cmd_train_corrected(opts) -> int:
    data = load_dataset_csv(opts.data, num_classes=opts.num_classes)
    train, val = split_train_val(data, opts.val_fraction, opts.seed)
    if opts.correction == "none":
        clf = train_classifier(train, val, seed=opts.seed, **_model_params(opts))
        matrix_used = None
    else:
        matrix_used = _resolve_matrix(opts, train, val)
        clf = train_corrected(
            train, val, matrix_used, opts.correction, seed=opts.seed, **_model_params(opts)
        )
    _write_json(model_to_json_dict(clf), opts.out)
    print(
        f"wrote {opts.out}: best val accuracy {clf.best_val_accuracy_:.4f} "
        f"at epoch {clf.best_epoch_}"
    )
    if opts.test is not None:
        test = load_dataset_csv(opts.test, num_classes=data.num_classes)
        if test.clean_labels is None:
            raise UsageError("--test data needs a clean 'label' column")
        acc = float((clf.predict(test.features) == test.clean_labels).mean())
        print(f"clean test accuracy {acc:.4f}")
        if opts.report is not None:
            _write_json(
                {
                    "correction": opts.correction,
                    "matrix_source": opts.matrix,
                    "clean_test_accuracy": acc,
                    "best_val_accuracy": clf.best_val_accuracy_,
                    "best_epoch": clf.best_epoch_,
                },
                opts.report,
            )
            print(f"wrote {opts.report}")
    return 0


def cmd_plot(opts) -> int:
    records = read_cells_csv(opts.cells)
    emit_plot(records, opts.out)
    print(f"wrote {opts.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="noisyt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def new_command(name, func, defaults, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=argparse.SUPPRESS,
                        help="JSON file whose keys mirror the flag names")
        sp.set_defaults(func=func, _defaults=defaults)
        return sp

    sp = new_command("gen", cmd_gen, {
        "n": _REQUIRED, "seed": 0, "dim": 10, "mean0": 0.0, "mean1": 2.0,
        "variance": 1.0, "prior1": 0.5, "out": _REQUIRED,
    }, "generate the synthetic two-Gaussian dataset as CSV")
    sp.add_argument("--n", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--dim", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--mean0", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--mean1", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--variance", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--prior1", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)

    sp = new_command("corrupt", cmd_corrupt, {
        "data": _REQUIRED, "noise": _REQUIRED, "eps": _REQUIRED,
        "seed": 0, "num_classes": None, "out": _REQUIRED,
    }, "sample noisy labels from a transition matrix")
    sp.add_argument("--data", default=argparse.SUPPRESS)
    sp.add_argument("--noise", choices=["sym", "pair"], default=argparse.SUPPRESS)
    sp.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--num-classes", dest="num_classes", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)

    sp = new_command("train", cmd_train, {
        "data": _REQUIRED, "out": _REQUIRED, "seed": 0, "val_fraction": 0.2,
        "num_classes": None, **_MODEL_FLAG_DEFAULTS,
    }, "train the noisy-posterior network and save it as JSON")
    sp.add_argument("--data", default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--val-fraction", dest="val_fraction", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--num-classes", dest="num_classes", type=int, default=argparse.SUPPRESS)
    _add_model_flags(sp)

    sp = new_command("estimate", cmd_estimate, {
        "data": _REQUIRED, "model": _REQUIRED, "estimator": _REQUIRED,
        "out": _REQUIRED, "noise": None, "eps": None, "seed": 0, "num_classes": None,
    }, "estimate the transition matrix with a trained model")
    sp.add_argument("--data", default=argparse.SUPPRESS)
    sp.add_argument("--model", default=argparse.SUPPRESS)
    sp.add_argument("--estimator", choices=sorted(ESTIMATORS), default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)
    sp.add_argument("--noise", choices=["sym", "pair"], default=argparse.SUPPRESS)
    sp.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--num-classes", dest="num_classes", type=int, default=argparse.SUPPRESS)

    sp = new_command("sweep", cmd_sweep, {
        "noise": _REQUIRED, "eps": _REQUIRED, "sizes": "2000,5000,10000,20000,40000",
        "repeats": 5, "seed": 0, "estimators": "t,dualt", "test_size": 1000,
        "val_fraction": 0.2, "out": _REQUIRED, "plot": None, "jobs": 1,
        **_MODEL_FLAG_DEFAULTS,
    }, "run a sample-size sweep and emit per-cell plus aggregate CSV")
    sp.add_argument("--noise", choices=["sym", "pair"], default=argparse.SUPPRESS)
    sp.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--sizes", default=argparse.SUPPRESS)
    sp.add_argument("--repeats", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--estimators", default=argparse.SUPPRESS)
    sp.add_argument("--test-size", dest="test_size", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--val-fraction", dest="val_fraction", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)
    sp.add_argument("--plot", default=argparse.SUPPRESS)
    sp.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    _add_model_flags(sp)

    sp = new_command("deltas", cmd_deltas, {
        "noise": _REQUIRED, "eps": _REQUIRED, "sizes": "2000,10000,40000",
        "repeats": 5, "seed": 0, "val_fraction": 0.2, "mc_multiplier": 10,
        "bound_slack": 0.05, "out_dir": _REQUIRED, **_MODEL_FLAG_DEFAULTS,
    }, "measure the error decomposition per cell and audit the bounds")
    sp.add_argument("--noise", choices=["sym", "pair"], default=argparse.SUPPRESS)
    sp.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--sizes", default=argparse.SUPPRESS)
    sp.add_argument("--repeats", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--val-fraction", dest="val_fraction", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--mc-multiplier", dest="mc_multiplier", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--bound-slack", dest="bound_slack", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--out-dir", dest="out_dir", default=argparse.SUPPRESS)
    _add_model_flags(sp)

    sp = new_command("train-corrected", cmd_train_corrected, {
        "data": _REQUIRED, "out": _REQUIRED, "correction": _REQUIRED,
        "matrix": _REQUIRED, "noise": None, "eps": None, "seed": 0,
        "val_fraction": 0.2, "num_classes": None, "test": None, "report": None,
        **_MODEL_FLAG_DEFAULTS,
    }, "train with a loss correction fed by an estimated or given matrix")
    sp.add_argument("--data", default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)
    sp.add_argument("--correction", choices=["none", "forward", "reweight"],
                    default=argparse.SUPPRESS)
    sp.add_argument("--matrix", default=argparse.SUPPRESS,
                    help="'true', 't', 'dualt', or a transition-matrix JSON path")
    sp.add_argument("--noise", choices=["sym", "pair"], default=argparse.SUPPRESS)
    sp.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--val-fraction", dest="val_fraction", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--num-classes", dest="num_classes", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--test", default=argparse.SUPPRESS)
    sp.add_argument("--report", default=argparse.SUPPRESS)
    _add_model_flags(sp)

    sp = new_command("plot", cmd_plot, {
        "cells": _REQUIRED, "out": _REQUIRED,
    }, "render an SVG error curve from a sweep cells CSV")
    sp.add_argument("--cells", default=argparse.SUPPRESS)
    sp.add_argument("--out", default=argparse.SUPPRESS)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _merge(args, args._defaults)
        return args.func(opts)
    except SystemExit as exc:  # argparse --help exits 0
        code = exc.code
        return 0 if code in (0, None) else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NonFiniteLoss, SingularMatrix) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
