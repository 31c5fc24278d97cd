"""Command-line interface.

Subcommands:

* ``datasets``   write the bundled benchmark CSVs and a manifest
* ``train``      fit one model on a full CSV and save it as JSON
* ``predict``    score a feature CSV with a saved model
* ``experiment`` the repeated hold-out protocol for one configuration
* ``sweep``      experiments over the (p, epsilon) robustness grid
* ``report``     re-emit markdown from a previously written report CSV

Grid defaults can be overridden with ``--config FILE`` holding flat
``key = value`` lines (e.g. ``runs = 10``, ``alphas = 0.5 1 2``,
``kernel.family = gaussian``); command-line flags win over the file.
Exits 0 on success, 1 with a diagnostic on stderr otherwise.
"""
from __future__ import annotations

import argparse
import math
import sys

from . import bench, datasets
from .data import load_csv, scale_unit_interval
from .errors import TpmsvmError
from .kernels import KernelSpec
from .predict import batch_predict_csv
from .trainer import (
    Dataset,
    Hyperparams,
    UncertaintySpec,
    load_model_with_scaling,
    save_model,
    train_multiclass,
)


def _parse_p(text: str) -> float:
    if text in ("inf", "infinity", "oo"):
        return math.inf
    p = float(text)
    if p not in (1.0, 2.0):
        raise argparse.ArgumentTypeError("p must be 1, 2 or inf")
    return p


def _add_grid_overrides(cfg_kwargs: dict, overrides: dict[str, str]) -> None:
    def floats(text: str) -> tuple[float, ...]:
        return tuple(float(v) for v in text.replace(",", " ").split())

    if "alphas" in overrides:
        cfg_kwargs["alphas"] = floats(overrides["alphas"])
    if "nu_fractions" in overrides:
        cfg_kwargs["nu_fractions"] = floats(overrides["nu_fractions"])
    if "kernel_params" in overrides:
        cfg_kwargs["kernel_params"] = floats(overrides["kernel_params"])
    if "epsilons" in overrides:
        cfg_kwargs["epsilons"] = floats(overrides["epsilons"])
    if "runs" in overrides:
        cfg_kwargs["runs"] = int(overrides["runs"])
    if "base_seed" in overrides:
        cfg_kwargs["base_seed"] = int(overrides["base_seed"])
    if "train_fraction" in overrides:
        cfg_kwargs["train_fraction"] = float(overrides["train_fraction"])
    if "scaling" in overrides:
        cfg_kwargs["scaling"] = overrides["scaling"]


def _resolve_table(args) -> object:
    manifest = None
    if args.manifest:
        manifest = datasets.load_manifest(args.manifest)
    return datasets.resolve_table(args.dataset, manifest, args.label_column)


def _experiment_config(args, overrides: dict[str, str]) -> bench.ExperimentConfig:
    kwargs: dict = {
        "dataset": args.dataset,
        "classifier": args.classifier,
        "rule": args.rule,
        "runs": args.runs,
        "base_seed": args.seed,
    }
    _add_grid_overrides(kwargs, overrides)
    if getattr(args, "p", None) is not None:
        kwargs["p"] = args.p
    return bench.ExperimentConfig(**kwargs)


def _kernel_spec_from(args, overrides: dict[str, str]) -> KernelSpec | None:
    if "kernel.family" in overrides:
        return KernelSpec.from_config_fragment(overrides)
    if args.kernel == "linear":
        return None
    factories = bench.CLASSIFIERS
    factory = factories[args.kernel]
    return None if factory is None else factory(args.kernel_param)


def cmd_datasets(args) -> int:
    manifest = datasets.materialize(args.out)
    print(manifest)
    return 0


def cmd_train(args) -> int:
    overrides = datasets.parse_keyvalue(args.config) if args.config else {}
    table = load_csv(args.dataset, args.label_column)
    scaling = None
    if args.scale:
        table, scaling = scale_unit_interval(table)
    data = Dataset(table.features, table.labels)
    h = Hyperparams(args.nu, args.alpha)
    spec = _kernel_spec_from(args, overrides)
    unc = None
    if args.p is not None:
        unc = UncertaintySpec(args.p, args.epsilon, eps_feature=args.epsilon_feature)
    model = train_multiclass(data, h, spec, unc, args.rule)
    save_model(model, args.out, scaling=scaling)
    print(args.out)
    return 0


def cmd_predict(args) -> int:
    train_features = None
    if args.train_data:
        table = load_csv(args.train_data, args.label_column)
        if args.scale:
            table, _ = scale_unit_interval(table)
        train_features = table.features
    model, scaling = load_model_with_scaling(args.model, train_features)
    n = batch_predict_csv(model, args.dataset, args.out, scaling=scaling)
    print(f"{args.out}: {n} rows")
    return 0


def cmd_experiment(args) -> int:
    overrides = datasets.parse_keyvalue(args.config) if args.config else {}
    table = _resolve_table(args)
    cfg = _experiment_config(args, overrides)
    eps = args.epsilon if cfg.p is not None else None
    summary = bench.run_repeated_experiment(table, cfg, epsilon=eps)
    paths = bench.emit_report([summary], args.out, stem="experiment")
    print(f"{summary.mean_accuracy:.2f} +/- {summary.std_accuracy:.2f}")
    for path in paths:
        print(path)
    return 0


def cmd_sweep(args) -> int:
    overrides = datasets.parse_keyvalue(args.config) if args.config else {}
    table = _resolve_table(args)
    cfg = _experiment_config(args, overrides)
    norms = tuple(args.p) if args.p else (1.0, 2.0, math.inf)
    summaries = bench.robust_sweep(table, cfg, norms=norms,
                                   include_zero=not args.no_zero)
    paths = bench.emit_report(summaries, args.out, stem="sweep")
    for path in paths:
        print(path)
    return 0


def cmd_report(args) -> int:
    rows = bench.read_report_csv(args.csv)
    summaries = [
        bench.Summary(r["dataset"], r["classifier"], r["rule"], r["p"], r["epsilon"],
                      r["runs"], r["mean_accuracy"], r["std_accuracy"],
                      r["mean_train_time_s"])
        for r in rows
    ]
    paths = bench.emit_report(summaries, args.out, stem=args.stem,
                              formats=tuple(args.formats))
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpmsvm", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ds = sub.add_parser("datasets", help="materialize benchmark CSVs")
    p_ds.add_argument("--out", default="data")
    p_ds.set_defaults(func=cmd_datasets)

    common_kernel = dict(choices=sorted(bench.CLASSIFIERS), default="linear")

    p_tr = sub.add_parser("train", help="train on a full CSV, save model JSON")
    p_tr.add_argument("--data", dest="dataset", required=True)
    p_tr.add_argument("--label-column", default="target")
    p_tr.add_argument("--kernel", **common_kernel)
    p_tr.add_argument("--kernel-param", type=float, default=1.0)
    p_tr.add_argument("--nu", type=float, default=0.5)
    p_tr.add_argument("--alpha", type=float, default=1.0)
    p_tr.add_argument("--rule", choices=("argmin", "argmax"), default="argmin")
    p_tr.add_argument("--p", type=_parse_p, default=None)
    p_tr.add_argument("--epsilon", type=float, default=0.0)
    p_tr.add_argument("--epsilon-feature", type=float, default=None,
                      help="explicit feature-space radius (kernel robust)")
    p_tr.add_argument("--no-scale", dest="scale", action="store_false")
    p_tr.add_argument("--config", default=None)
    p_tr.add_argument("--out", required=True)
    p_tr.set_defaults(func=cmd_train)

    p_pr = sub.add_parser("predict", help="batch-predict a feature CSV")
    p_pr.add_argument("--model", required=True)
    p_pr.add_argument("--data", dest="dataset", required=True)
    p_pr.add_argument("--train-data", default=None,
                      help="training CSV (kernel models only)")
    p_pr.add_argument("--label-column", default="target")
    p_pr.add_argument("--no-scale", dest="scale", action="store_false")
    p_pr.add_argument("--out", required=True)
    p_pr.set_defaults(func=cmd_predict)

    def add_experiment_args(p, with_p: bool):
        p.add_argument("--dataset", required=True,
                       help="manifest name or CSV path")
        p.add_argument("--manifest", default=None)
        p.add_argument("--label-column", default=None)
        p.add_argument("--classifier", **common_kernel)
        p.add_argument("--rule", choices=("argmin", "argmax"), default="argmin")
        p.add_argument("--runs", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default="reports")
        if with_p:
            p.add_argument("--p", type=_parse_p, default=None)
            p.add_argument("--epsilon", type=float, default=0.0)

    p_ex = sub.add_parser("experiment", help="repeated hold-out protocol")
    add_experiment_args(p_ex, with_p=True)
    p_ex.set_defaults(func=cmd_experiment)

    p_sw = sub.add_parser("sweep", help="robustness sweep over (p, epsilon)")
    add_experiment_args(p_sw, with_p=False)
    p_sw.add_argument("--p", type=_parse_p, action="append", default=None,
                      help="norm orders (repeatable); default 1 2 inf")
    p_sw.add_argument("--no-zero", action="store_true",
                      help="skip the epsilon = 0 reference column")
    p_sw.set_defaults(func=cmd_sweep)

    p_re = sub.add_parser("report", help="markdown from a report CSV")
    p_re.add_argument("--csv", required=True)
    p_re.add_argument("--out", default="reports")
    p_re.add_argument("--stem", default="report")
    p_re.add_argument("--formats", nargs="+", default=("csv", "markdown"))
    p_re.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TpmsvmError as exc:
        print(f"tpmsvm: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"tpmsvm: i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
