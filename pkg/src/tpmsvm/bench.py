"""Benchmark harness: grid search, repeated hold-outs, robustness sweeps.

The experimental protocol is fixed and fully seeded:

1. scale the whole table onto [0, 1] (default) or fit the scaler on each
   training split;
2. per run ``r`` (seed = base seed + r): a 75/25 stratified split;
3. exhaustive grid search over ``alpha in 2^-6..2^6``,
   ``nu/alpha in {0.1, 0.3, 0.5, 0.7, 0.9}`` and, for parameterized kernels,
   ``gamma or sigma in 2^-4..2^4``, selecting the point with the highest
   accuracy on the training split (ties: smaller alpha, then smaller
   nu/alpha, then smaller kernel parameter);
4. retrain at the winner and score the held-out split.

Summaries report the mean and sample (n-1) standard deviation of the test
accuracies over the runs, plus the mean wall-clock time of one final
training.  Identical configs and base seeds give byte-identical reports.
"""
from __future__ import annotations

import csv
import math
import os
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import RawTable, scale_unit_interval, stratified_split
from .errors import HarnessError, InvalidInput, IoError, TpmsvmError
from .kernels import KernelSpec
from .predict import accuracy
from .trainer import ARGMIN, Dataset, Hyperparams, MulticlassModel, UncertaintySpec, train_multiclass

DEFAULT_ALPHAS = tuple(2.0**j for j in range(-6, 7))
DEFAULT_NU_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_KERNEL_PARAMS = tuple(2.0**j for j in range(-4, 5))
DEFAULT_EPSILONS = (1e-3, 1e-2, 1e-1)

#: classifier kinds accepted by the harness; each maps to a kernel-spec
#: factory taking the grid parameter (None when the family has none).
CLASSIFIERS: dict[str, object] = {
    "linear": None,
    "hom-quadratic": lambda p: KernelSpec("homogeneous-polynomial", d=2),
    "hom-cubic": lambda p: KernelSpec("homogeneous-polynomial", d=3),
    "inhom-linear": lambda p: KernelSpec("inhomogeneous-polynomial", d=1, gamma=p),
    "inhom-quadratic": lambda p: KernelSpec("inhomogeneous-polynomial", d=2, gamma=p),
    "inhom-cubic": lambda p: KernelSpec("inhomogeneous-polynomial", d=3, gamma=p),
    "gaussian": lambda p: KernelSpec("gaussian", sigma=p),
}

_PARAMETERIZED = ("inhom-linear", "inhom-quadratic", "inhom-cubic", "gaussian")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    classifier: str = "linear"
    rule: str = ARGMIN
    p: float | None = None
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    nu_fractions: tuple[float, ...] = DEFAULT_NU_FRACTIONS
    kernel_params: tuple[float, ...] = DEFAULT_KERNEL_PARAMS
    runs: int = 50
    base_seed: int = 0
    train_fraction: float = 0.75
    scaling: str = "whole-dataset"
    eps_is_feature_radius: bool = False

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise InvalidInput(f"unknown classifier {self.classifier!r}; "
                               f"choose from {sorted(CLASSIFIERS)}")
        if self.runs < 1:
            raise InvalidInput("runs must be >= 1")

    def kernel_grid(self) -> tuple[float | None, ...]:
        if self.classifier in _PARAMETERIZED:
            return self.kernel_params
        return (None,)

    def make_spec(self, param: float | None) -> KernelSpec | None:
        factory = CLASSIFIERS[self.classifier]
        if factory is None:
            return None
        return factory(param)


@dataclass(frozen=True)
class GridPoint:
    alpha: float
    nu_fraction: float
    kernel_param: float | None

    @property
    def hyperparams(self) -> Hyperparams:
        return Hyperparams(self.nu_fraction * self.alpha, self.alpha)


@dataclass
class RunRecord:
    seed: int
    point: GridPoint
    train_accuracy: float
    test_accuracy: float
    train_time_s: float


@dataclass
class Summary:
    dataset: str
    classifier: str
    rule: str
    p: float | None
    epsilon: float | None
    runs: int
    mean_accuracy: float
    std_accuracy: float
    mean_train_time_s: float
    records: list[RunRecord] = field(default_factory=list)

    def key(self) -> tuple:
        return (self.dataset, self.classifier, self.rule, self.p, self.epsilon)


def _uncertainty(config: ExperimentConfig, epsilon: float) -> UncertaintySpec | None:
    if config.p is None:
        return None
    if config.eps_is_feature_radius and config.classifier != "linear":
        return UncertaintySpec(config.p, epsilon, eps_feature=epsilon)
    return UncertaintySpec(config.p, epsilon)


def _train_point(train: Dataset, config: ExperimentConfig, point: GridPoint,
                 epsilon: float | None) -> MulticlassModel:
    spec = config.make_spec(point.kernel_param)
    unc = None if epsilon is None else _uncertainty(config, epsilon)
    return train_multiclass(train, point.hyperparams, spec, unc, config.rule)


def grid_search(train: Dataset, config: ExperimentConfig,
                epsilon: float | None = None
                ) -> tuple[GridPoint, MulticlassModel, float, list[str]]:
    """Exhaustively score the grid on training accuracy.

    Returns the winning point, its trained model, its training accuracy and
    any per-point failure diagnostics.  Ties keep the earlier point in the
    iteration order (alpha, then nu/alpha, then kernel parameter, all
    ascending).

    Raises
    ------
    HarnessError
        If every grid point fails to train.
    """
    best: tuple[GridPoint, MulticlassModel, float] | None = None
    failures: list[str] = []
    X, y = train.features, train.labels
    for alpha in config.alphas:
        for frac in config.nu_fractions:
            for kparam in config.kernel_grid():
                point = GridPoint(alpha, frac, kparam)
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        model = _train_point(train, config, point, epsilon)
                except TpmsvmError as exc:
                    failures.append(f"{point}: {type(exc).__name__}: {exc}")
                    continue
                acc = accuracy(model, X, y)
                if best is None or acc > best[2]:
                    best = (point, model, acc)
    if best is None:
        raise HarnessError("every grid point failed to train", diagnostics=failures)
    return best[0], best[1], best[2], failures


def run_repeated_experiment(table: RawTable, config: ExperimentConfig,
                            epsilon: float | None = None) -> Summary:
    """The full protocol: repeated split / grid search / test scoring."""
    if config.scaling == "whole-dataset":
        scaled, _ = scale_unit_interval(table, "whole-dataset")
    records: list[RunRecord] = []
    for run_idx in range(config.runs):
        seed = config.base_seed + run_idx
        plan = stratified_split(table, config.train_fraction, seed)
        tr_idx = plan.train_indices
        te_idx = plan.test_indices(table.m)
        if config.scaling == "fit-on-train":
            scaled, _ = scale_unit_interval(table, "fit-on-train", train_indices=tr_idx)
        X = scaled.features
        train = Dataset(X[tr_idx], table.labels[tr_idx])
        point, model, train_acc, _ = grid_search(train, config, epsilon)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            final = _train_point(train, config, point, epsilon)
        train_time = time.perf_counter() - t0
        test_acc = accuracy(final, X[te_idx], table.labels[te_idx])
        records.append(RunRecord(seed, point, train_acc, test_acc, train_time))

    accs = np.array([r.test_accuracy for r in records])
    mean = float(accs.mean())
    std = float(accs.std(ddof=1)) if len(records) > 1 else 0.0
    times = float(np.mean([r.train_time_s for r in records]))
    return Summary(config.dataset, config.classifier, config.rule, config.p,
                   epsilon, config.runs, mean, std, times, records)


def robust_sweep(table: RawTable, config: ExperimentConfig,
                 norms: tuple[float, ...] = (1.0, 2.0, math.inf),
                 include_zero: bool = True) -> list[Summary]:
    """One repeated experiment per (p, epsilon) cell.

    ``epsilon = 0`` cells are prepended when ``include_zero`` so reports can
    show the deterministic limit of the robust model alongside.
    """
    epsilons = ((0.0,) if include_zero else ()) + tuple(config.epsilons)
    out = []
    for p in norms:
        cfg = replace(config, p=p)
        for eps in epsilons:
            out.append(run_repeated_experiment(table, cfg, epsilon=eps))
    return out


# ---------------------------------------------------------------------------
# report emission


_CSV_COLUMNS = ["dataset", "classifier", "rule", "p", "epsilon", "runs",
                "mean_accuracy", "std_accuracy", "mean_train_time_s", "best_in_row"]


def _fmt_p(p: float | None) -> str:
    if p is None:
        return ""
    return "inf" if math.isinf(p) else repr(float(p))


def emit_report(summaries: list[Summary], out_dir, stem: str = "report",
                formats: tuple[str, ...] = ("csv", "markdown")) -> list[str]:
    """Write summaries as CSV (source of truth) and a mirroring markdown table.

    Rows group by dataset (and norm order for sweeps); the best mean accuracy
    within each row group is flagged.  Returns the written paths.
    """
    if not summaries:
        raise InvalidInput("no summaries to report")
    rows = sorted(summaries, key=lambda s: (s.dataset, _fmt_p(s.p),
                                            s.epsilon if s.epsilon is not None else -1.0,
                                            s.classifier, s.rule))
    groups: dict[tuple, list[Summary]] = {}
    for s in rows:
        groups.setdefault((s.dataset, s.rule, _fmt_p(s.p)), []).append(s)
    best_keys = set()
    for group in groups.values():
        best = max(group, key=lambda s: s.mean_accuracy)
        best_keys.add(best.key())

    written = []
    os.makedirs(out_dir, exist_ok=True)
    try:
        if "csv" in formats:
            path = os.path.join(out_dir, f"{stem}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(_CSV_COLUMNS)
                for s in rows:
                    writer.writerow([
                        s.dataset, s.classifier, s.rule, _fmt_p(s.p),
                        "" if s.epsilon is None else repr(float(s.epsilon)),
                        s.runs, repr(s.mean_accuracy), repr(s.std_accuracy),
                        repr(s.mean_train_time_s),
                        "1" if s.key() in best_keys else "0",
                    ])
            written.append(path)
        if "markdown" in formats:
            path = os.path.join(out_dir, f"{stem}.md")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(_markdown_pivot(rows, best_keys))
            written.append(path)
    except OSError as exc:
        raise IoError(f"cannot write report under {out_dir}: {exc}") from exc
    return written


def _cell(s: Summary, best_keys: set) -> str:
    text = f"{s.mean_accuracy:.2f} +/- {s.std_accuracy:.2f}"
    return f"**{text}**" if s.key() in best_keys else text


def _markdown_pivot(rows: list[Summary], best_keys: set) -> str:
    """Pivot deterministic results as dataset x classifier and sweeps as
    dataset x (p, epsilon), mirroring the CSV contents."""
    det = [s for s in rows if s.p is None]
    rob = [s for s in rows if s.p is not None]
    lines: list[str] = []
    if det:
        classifiers = sorted({s.classifier for s in det})
        lines.append("| dataset | rule | " + " | ".join(classifiers) + " |")
        lines.append("|---" * (2 + len(classifiers)) + "|")
        by_row: dict[tuple, dict[str, Summary]] = {}
        for s in det:
            by_row.setdefault((s.dataset, s.rule), {})[s.classifier] = s
        for (dataset, rule), cells in sorted(by_row.items()):
            row = [dataset, rule]
            row += [_cell(cells[c], best_keys) if c in cells else ""
                    for c in classifiers]
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    if rob:
        cols = sorted({(_fmt_p(s.p), s.epsilon) for s in rob})
        header = [f"p={p}, eps={eps:g}" for p, eps in cols]
        lines.append("| dataset | classifier | rule | " + " | ".join(header) + " |")
        lines.append("|---" * (3 + len(cols)) + "|")
        by_row = {}
        for s in rob:
            by_row.setdefault((s.dataset, s.classifier, s.rule), {})[
                (_fmt_p(s.p), s.epsilon)] = s
        for (dataset, classifier, rule), cells in sorted(by_row.items()):
            row = [dataset, classifier, rule]
            row += [_cell(cells[c], best_keys) if c in cells else "" for c in cols]
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    return "\n".join(lines)


def read_report_csv(path) -> list[dict]:
    """Parse a CSV written by :func:`emit_report` back into dict rows."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            parsed = dict(row)
            for key in ("mean_accuracy", "std_accuracy", "mean_train_time_s"):
                parsed[key] = float(row[key])
            parsed["runs"] = int(row["runs"])
            parsed["epsilon"] = float(row["epsilon"]) if row["epsilon"] else None
            parsed["p"] = float(row["p"]) if row["p"] else None
            parsed["best_in_row"] = row["best_in_row"] == "1"
            out.append(parsed)
    return out
