"""Benchmark dataset materialization and the dataset manifest format.

The manifest is a flat key-value file mapping dataset names to CSV paths and
label columns::

    iris.path = data/iris.csv
    iris.label = species

``materialize`` writes the two UCI benchmark tables (iris, wine) as CSVs
using scikit-learn's bundled copies; scikit-learn is an optional dependency
used only here.  Any user-prepared CSV can be registered in the manifest
instead (e.g. a fuel-consumption table with 374 rows, 7 features, 3 classes).
"""
from __future__ import annotations

import csv
import os

from .data import RawTable, load_csv
from .errors import InvalidInput


def parse_keyvalue(path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInput(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def load_manifest(path) -> dict[str, tuple[str, str]]:
    """Returns name -> (csv path, label column); paths resolve relative to
    the manifest location."""
    pairs = parse_keyvalue(path)
    base = os.path.dirname(os.path.abspath(path))
    names = {k.split(".", 1)[0] for k in pairs}
    out = {}
    for name in sorted(names):
        try:
            rel = pairs[f"{name}.path"]
            label = pairs[f"{name}.label"]
        except KeyError as exc:
            raise InvalidInput(f"{path}: dataset {name!r} needs .path and .label") from exc
        csv_path = rel if os.path.isabs(rel) else os.path.join(base, rel)
        out[name] = (csv_path, label)
    return out


def resolve_table(name_or_path: str, manifest: dict[str, tuple[str, str]] | None = None,
                  label_column: str | None = None) -> RawTable:
    """Load a dataset by manifest name or by direct CSV path."""
    if manifest and name_or_path in manifest:
        path, label = manifest[name_or_path]
        return load_csv(path, label)
    if os.path.exists(name_or_path):
        if label_column is None:
            raise InvalidInput(f"loading {name_or_path!r} directly needs --label-column")
        return load_csv(name_or_path, label_column)
    raise InvalidInput(f"unknown dataset {name_or_path!r} (not in manifest, not a file)")


def _write_csv(path, header, rows, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header) + ["target"])
        for row, lab in zip(rows, labels):
            writer.writerow([repr(float(v)) for v in row] + [str(lab)])


def materialize(out_dir, names: tuple[str, ...] = ("iris", "wine")) -> str:
    """Write benchmark CSVs plus a manifest under ``out_dir``.

    Returns the manifest path.  Needs scikit-learn.
    """
    try:
        from sklearn import datasets as skd
    except ImportError as exc:
        raise InvalidInput(
            "materializing benchmark datasets needs scikit-learn "
            "(pip install tpmsvm[datasets])") from exc
    loaders = {"iris": skd.load_iris, "wine": skd.load_wine}
    os.makedirs(out_dir, exist_ok=True)
    manifest_lines = []
    for name in names:
        if name not in loaders:
            raise InvalidInput(f"no bundled loader for {name!r} (have {sorted(loaders)})")
        bunch = loaders[name]()
        header = [c.replace(" ", "_").replace("(", "").replace(")", "").replace("/", "_")
                  for c in bunch.feature_names]
        labels = [bunch.target_names[t] for t in bunch.target]
        path = os.path.join(out_dir, f"{name}.csv")
        _write_csv(path, header, bunch.data, labels)
        manifest_lines.append(f"{name}.path = {name}.csv")
        manifest_lines.append(f"{name}.label = target")
    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest_lines) + "\n")
    return manifest_path
