"""Loading the benchmark datasets as clustering instances.

A dataset spec is a small JSON document (see ``dataset_specs/``) naming the
file, the feature columns, the column holding the sensitive attribute and
how raw attribute values map onto group labels. Every loaded point is both
a client and a candidate facility.
"""
from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .instance import Group, Instance, euclidean_distances

DEFAULT_SUBSAMPLE = 500
DATA_ENV = "FAIRCLUST_DATA"


class DatasetError(ValueError):
    pass


@dataclass
class DatasetSpec:
    name: str
    path: str
    feature_columns: list[str]
    group_column: str
    group_mapping: dict[str, str]
    group_order: list[str] = field(default_factory=list)
    exclude_values: list[str] = field(default_factory=list)
    delimiter: str = ","
    header: bool = True
    columns: Optional[list[str]] = None
    subsample: Optional[int] = DEFAULT_SUBSAMPLE
    standardize: bool = True
    note: str = ""

    def __post_init__(self):
        if not self.header and not self.columns:
            raise DatasetError(f"{self.name}: headerless files need 'columns'")
        if not self.group_order:
            self.group_order = sorted(set(self.group_mapping.values()))
        unknown = set(self.group_mapping.values()) - set(self.group_order)
        if unknown:
            raise DatasetError(f"{self.name}: labels {sorted(unknown)} missing from group_order")

    @classmethod
    def from_json(cls, doc: dict) -> "DatasetSpec":
        return cls(**doc)

    @classmethod
    def read(cls, path) -> "DatasetSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class LoadedDataset:
    spec: DatasetSpec
    features: np.ndarray       # (N, d) after standardization
    labels: list[str]          # group label per row
    row_numbers: list[int]     # 1-based line numbers in the source file
    dropped_columns: list[str]


def builtin_specs() -> list[str]:
    pkg = resources.files("fairclust") / "dataset_specs"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def builtin_spec(name: str) -> DatasetSpec:
    res = resources.files("fairclust") / "dataset_specs" / f"{name}.json"
    if not res.is_file():
        raise DatasetError(f"unknown dataset {name!r}; known: {builtin_specs()}")
    return DatasetSpec.from_json(json.loads(res.read_text()))


def data_dir(override=None) -> Path:
    if override is not None:
        return Path(override)
    if os.environ.get(DATA_ENV):
        return Path(os.environ[DATA_ENV])
    return Path.cwd() / "data"


def read_rows(spec: DatasetSpec, root=None) -> LoadedDataset:
    path = Path(spec.path)
    if not path.is_absolute():
        path = data_dir(root) / path
    if not path.is_file():
        raise DatasetError(f"{spec.name}: data file not found: {path}")

    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=spec.delimiter, skipinitialspace=True)
        if spec.header:
            header = next(reader)
            first_line = 2
        else:
            header = list(spec.columns)
            first_line = 1
        # first occurrence wins for duplicated header names
        index = {}
        for pos, name in enumerate(header):
            index.setdefault(name.strip(), pos)
        missing = [c for c in spec.feature_columns + [spec.group_column] if c not in index]
        if missing:
            raise DatasetError(f"{spec.name}: columns not found: {missing}")
        fcols = [index[c] for c in spec.feature_columns]
        gcol = index[spec.group_column]

        feats, labels, lines = [], [], []
        for lineno, row in enumerate(reader, start=first_line):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{spec.name}: malformed row {lineno}: expected {len(header)} fields, got {len(row)}")
            raw = row[gcol].strip()
            if raw in spec.exclude_values:
                continue
            if raw not in spec.group_mapping:
                raise DatasetError(f"{spec.name}: row {lineno}: unmapped group value {raw!r}")
            try:
                values = [float(row[c]) for c in fcols]
            except ValueError:
                raise DatasetError(f"{spec.name}: row {lineno}: non-numeric feature") from None
            feats.append(values)
            labels.append(spec.group_mapping[raw])
            lines.append(lineno)
            if spec.subsample is not None and len(feats) >= spec.subsample:
                break

    if not feats:
        raise DatasetError(f"{spec.name}: no rows loaded")
    X = np.array(feats, dtype=float)
    dropped = []
    if spec.standardize:
        std = X.std(axis=0)
        keep = std > 0
        if not keep.all():
            dropped = [c for c, k in zip(spec.feature_columns, keep) if not k]
            warnings.warn(f"{spec.name}: dropping constant columns {dropped}")
        X = (X[:, keep] - X[:, keep].mean(axis=0)) / std[keep]
    return LoadedDataset(spec, X, labels, lines, dropped)


def load(spec: DatasetSpec, k: int = 5, p: float = 1.0, root=None) -> Instance:
    """Instance over the (sub-sampled) rows: clients = facilities = all points.

    Groups follow ``spec.group_order`` and carry weights 1/|A_s|.
    """
    data = read_rows(spec, root)
    d = euclidean_distances(data.features)
    ids = list(range(len(data.labels)))
    groups = []
    for label in spec.group_order:
        members = [i for i in ids if data.labels[i] == label]
        if not members:
            raise DatasetError(f"{spec.name}: group {label!r} has no members in the sample")
        groups.append(Group.uniform(members))
    return Instance(d, ids, ids, groups, k, p, check_metric=False)


def load_dataset(name: str, k: int = 5, p: float = 1.0, root=None, **overrides) -> Instance:
    spec = builtin_spec(name)
    for key, val in overrides.items():
        setattr(spec, key, val)
    return load(spec, k=k, p=p, root=root)
