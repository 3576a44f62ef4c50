"""
Labeled assay datasets: CSV ingest with zero replacement, CSV output in the
same schema, and the seeded train/test split.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ClassTooSmall, InvalidParameter, IoError, MissingColumn, ParseError, ZeroHandlingError
from .metrics import GROUPS, GroupMap
from .simplex import PART_NAMES

logger = logging.getLogger(__name__)

LABEL_COLUMNS = ("geozone", "group")
DEFAULT_ZERO_REPLACEMENT = 1e-6


@dataclass(frozen=True)
class LabeledDataset:
    """Closed compositions (one per row) with their geozone and group labels."""

    compositions: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    part_names: tuple = PART_NAMES
    zero_replacements: int = 0

    def __len__(self) -> int:
        return self.labels.size

    @property
    def n_parts(self) -> int:
        return self.compositions.shape[1]

    @property
    def class_ids(self) -> np.ndarray:
        return np.unique(self.labels)

    def group_map(self) -> GroupMap:
        return GroupMap(dict(zip(self.labels.tolist(), self.groups.tolist())))

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(
            compositions=self.compositions[rows],
            labels=self.labels[rows],
            groups=self.groups[rows],
            part_names=self.part_names,
        )

    def to_frame(self, scale: float = 100.0) -> pd.DataFrame:
        df = pd.DataFrame(self.compositions * scale, columns=list(self.part_names))
        df["geozone"] = self.labels
        df["group"] = self.groups
        return df


def _parse_values(df: pd.DataFrame, part_names) -> np.ndarray:
    values = np.empty((len(df), len(part_names)))
    for j, col in enumerate(part_names):
        parsed = pd.to_numeric(df[col].str.strip(), errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(parsed) | (parsed < 0))
        if bad.size:
            i = int(bad[0])
            # file line: header is line 1
            raise ParseError(
                f"line {i + 2}, column {col!r}: expected a non-negative number, got {df[col].iloc[i]!r}",
                row=i + 2,
                column=col,
            )
        values[:, j] = parsed
    return values


def replace_zeros(values: np.ndarray, replacement: float = DEFAULT_ZERO_REPLACEMENT):
    """
    Close each row, set below-detection (zero) parts to ``replacement`` and
    close again. Returns the compositions and the number of replaced cells.
    """
    totals = values.sum(axis=1)
    empty = np.flatnonzero(totals <= 0)
    if empty.size:
        raise ZeroHandlingError(f"{empty.size} rows have no positive analyte (first at data row {int(empty[0]) + 1})")
    closed = values / totals[:, None]
    zeros = closed <= 0
    closed[zeros] = replacement
    return closed / closed.sum(axis=1, keepdims=True), int(zeros.sum())


def load_assays(path, part_names=PART_NAMES, zero_replacement: float = DEFAULT_ZERO_REPLACEMENT) -> LabeledDataset:
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise IoError(f"assay file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path} is empty", row=1) from e
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise ParseError(f"could not read {path}: {e}") from e

    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in (*part_names, *LABEL_COLUMNS) if c not in df.columns]
    if missing:
        raise MissingColumn(f"{path} lacks columns {missing}")
    if df.empty:
        raise ParseError(f"{path} has a header but no assay rows", row=2)

    values = _parse_values(df, part_names)
    compositions, n_replaced = replace_zeros(values, zero_replacement)
    if n_replaced:
        logger.warning("%s: replaced %d zero analyte values with %g before closure", path, n_replaced, zero_replacement)

    labels = df["geozone"].str.strip().to_numpy()
    groups = df["group"].str.strip().to_numpy()
    bad = np.flatnonzero(~np.isin(groups, GROUPS))
    if bad.size:
        i = int(bad[0])
        raise ParseError(f"line {i + 2}, column 'group': expected one of {GROUPS}, got {groups[i]!r}", row=i + 2, column="group")
    per_zone = pd.Series(groups).groupby(labels).nunique()
    mixed = per_zone.index[per_zone > 1].tolist()
    if mixed:
        raise ParseError(f"geozones assigned to more than one group: {mixed}", column="group")

    logger.info("loaded %d assays over %d geozones from %s", len(df), per_zone.size, path)
    return LabeledDataset(
        compositions=compositions,
        labels=labels,
        groups=groups,
        part_names=tuple(part_names),
        zero_replacements=n_replaced,
    )


def write_assays(dataset: LabeledDataset, path) -> Path:
    """Write in the ingest schema, analytes in weight percent."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        dataset.to_frame().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    except OSError as e:
        raise IoError(f"could not write {path}: {e}") from e
    logger.info("wrote %d assays to %s", len(dataset), path)
    return path


def split(dataset: LabeledDataset, fraction: float = 0.6, stratified: bool = True, seed: int = 0):
    """
    Seeded train/test partition. Stratified splits put round(fraction * n_c)
    rows of each class in train, clipped so both sides keep one row.
    """
    if not 0 < fraction < 1:
        raise InvalidParameter(f"split fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if not stratified:
        order = rng.permutation(n)
        n_train = int(round(fraction * n))
        train, test = order[:n_train], order[n_train:]
    else:
        classes, codes = np.unique(dataset.labels, return_inverse=True)
        counts = np.bincount(codes)
        small = classes[counts < 2]
        if small.size:
            raise ClassTooSmall(f"stratified split needs >= 2 samples per class; too few for {small.tolist()}")
        train_parts, test_parts = [], []
        for c in range(classes.size):
            rows = rng.permutation(np.flatnonzero(codes == c))
            n_train = min(max(int(round(fraction * rows.size)), 1), rows.size - 1)
            train_parts.append(rows[:n_train])
            test_parts.append(rows[n_train:])
        train, test = np.concatenate(train_parts), np.concatenate(test_parts)
    train.sort()
    test.sort()
    return dataset.subset(train), dataset.subset(test)
