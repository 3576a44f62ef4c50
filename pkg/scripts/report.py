"""
Writes a ReportSet to disk and reads it back.

results.csv holds one row per grid cell with the fixed column order below.
Per-transform tables and the grouped-bar plot data are derived from it, so
``load_results`` followed by ``emit_report`` reproduces every file.
"""
import logging
from pathlib import Path

import markdownify
import pandas as pd

from .errors import IoError
from .experiment import CellFailure, ReportSet, assemble
from .metrics import MetricsReport

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
RESULT_COLUMNS = [
    "transform",
    "classifier",
    "status",
    "error_kind",
    "error_message",
    "baseline",
    "brier",
    "precision",
    "recall",
    "f1",
    "delta_brier",
    "delta_f1",
    "top_1",
    "top_2",
    "top_4",
    "top_8",
    "binary_brier",
    "binary_precision",
    "binary_recall",
    "binary_f1",
    "seed",
    "version",
    "config",
]
METRIC_COLUMNS = RESULT_COLUMNS[6:20]
TOP_COLUMNS = ["top_1", "top_2", "top_4", "top_8"]
# column -> (heading, format)
TABLE_COLUMNS = {
    "classifier": ("Classifier", None),
    "brier": ("Brier", "{:.4f}"),
    "precision": ("Precision", "{:.2f}"),
    "recall": ("Recall", "{:.2f}"),
    "f1": ("F1", "{:.2f}"),
    "delta_brier": ("ΔBrier", "{:+.4f}"),
    "delta_f1": ("ΔF1", "{:+.2f}"),
    "top_1": ("n=1", "{:.2f}"),
    "top_2": ("n=2", "{:.2f}"),
    "top_4": ("n=4", "{:.2f}"),
    "top_8": ("n=8", "{:.2f}"),
    "binary_brier": ("(M∨H) vs U Brier", "{:.4f}"),
    "binary_f1": ("(M∨H) vs U F1", "{:.2f}"),
}
FORMATS = ("csv", "markdown")
GEOMETRIC_MEAN_ROW = "geometric mean"


def results_frame(reports: ReportSet) -> pd.DataFrame:
    rows = []
    for t, c in reports.keys():
        row = dict.fromkeys(RESULT_COLUMNS)
        row.update(transform=t, classifier=c, baseline=reports.baselines.get(t), seed=reports.seed, version=reports.version, config=reports.config_json)
        report = reports.cells.get((t, c))
        if report is not None:
            row["status"] = "ok"
            row.update(report.as_record())
            if (t, c) in reports.deltas:
                row["delta_brier"], row["delta_f1"] = reports.deltas[(t, c)]
        else:
            failure = reports.failures.get((t, c), CellFailure("Missing", "cell was not run"))
            row.update(status="failed", error_kind=failure.error_kind, error_message=failure.message)
        rows.append(row)
    df = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    for col in METRIC_COLUMNS:
        df[col] = df[col].astype(float)
    return df


def transform_table(frame: pd.DataFrame, transform: str) -> pd.DataFrame:
    """Display table for one transform: one row per classifier in the published column order."""
    part = frame[frame["transform"] == transform]
    out = {}
    for col, (heading, fmt) in TABLE_COLUMNS.items():
        if fmt is None:
            out[heading] = part[col].tolist()
            continue
        cells = []
        for value, status, kind in zip(part[col], part["status"], part["error_kind"]):
            if status != "ok":
                cells.append(f"failed ({kind})" if col == "brier" else "")
            elif value is None or pd.isna(value):
                cells.append("")
            else:
                cells.append(fmt.format(float(value)))
        out[heading] = cells
    return pd.DataFrame(out)


def to_markdown(table: pd.DataFrame) -> str:
    return markdownify.markdownify(table.to_html(index=False), heading_style=markdownify.ATX).strip() + "\n"


def plot_frames(reports: ReportSet, frame: pd.DataFrame):
    """F1 by transform and by classifier, plus the spread of each classifier across transforms."""
    ok = frame[frame["status"] == "ok"]
    by_transform = ok[["transform", "classifier", "f1", "delta_f1", "brier"]].reset_index(drop=True)
    gm = pd.Series(reports.geometric_mean_f1, dtype=float)
    by_transform["geometric_mean_f1"] = by_transform["transform"].map(gm)
    by_classifier = by_transform.sort_values(["classifier", "transform"], kind="stable")[["classifier", "transform", "f1", "delta_f1", "brier"]]
    by_classifier = by_classifier.reset_index(drop=True)

    spread = []
    for c in reports.classifier_order:
        scores = ok.loc[ok["classifier"] == c, "f1"].astype(float)
        if scores.empty:
            continue
        spread.append({"classifier": c, "f1_min": scores.min(), "f1_max": scores.max(), "f1_range": scores.max() - scores.min(), "n_transforms": scores.size})
    robustness = pd.DataFrame(spread, columns=["classifier", "f1_min", "f1_max", "f1_range", "n_transforms"])
    return by_transform, by_classifier, robustness


def _write_csv(df: pd.DataFrame, path: Path):
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def emit_report(reports: ReportSet, out_dir, fmt: str = "markdown") -> list:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if not reports.transform_order or not reports.classifier_order:
        raise ValueError("nothing to report: the grid is empty")
    out_dir = Path(out_dir)
    frame = results_frame(reports)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / RESULTS_FILE
        _write_csv(frame, path)
        written.append(path)

        tables_dir = out_dir / "tables"
        tables_dir.mkdir(exist_ok=True)
        for t in reports.transform_order:
            table = transform_table(frame, t)
            gm = reports.geometric_mean_f1.get(t)
            if fmt == "csv":
                path = tables_dir / f"{t}.csv"
                if gm is not None:
                    summary = dict.fromkeys(table.columns, "")
                    summary.update({"Classifier": GEOMETRIC_MEAN_ROW, "F1": f"{gm:.2f}"})
                    table = pd.concat([table, pd.DataFrame([summary])], ignore_index=True)
                table.to_csv(path, index=False, lineterminator="\n")
            else:
                path = tables_dir / f"{t}.md"
                title = f"# {t}"
                if reports.baselines.get(t) and reports.baselines[t] != t:
                    title += f" (Δ rel. {reports.baselines[t]})"
                footer = f"\nGeometric mean F1: {gm:.2f}\n" if gm is not None else ""
                path.write_text(f"{title}\n\n{to_markdown(table)}{footer}", encoding="utf-8")
            written.append(path)

        for name, df in zip(("plot_by_transform", "plot_by_classifier", "classifier_robustness"), plot_frames(reports, frame)):
            path = out_dir / f"{name}.csv"
            _write_csv(df, path)
            written.append(path)
    except OSError as e:
        raise IoError(f"could not write report to {out_dir}: {e}") from e

    for path in written:
        logger.info("wrote %s", path)
    return written


def _optional(value: str):
    return None if value == "" else float(value)


def load_results(path) -> ReportSet:
    """Rebuild a ReportSet from a results.csv written by emit_report."""
    path = Path(path)
    if path.is_dir():
        path = path / RESULTS_FILE
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise IoError(f"results file not found: {path}") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IoError(f"could not read {path}: {e}") from e
    missing = [c for c in RESULT_COLUMNS if c not in df.columns]
    if missing or df.empty:
        raise IoError(f"{path} is not a results file (missing columns {missing})")

    cells, failures, baselines = {}, {}, {}
    for row in df.to_dict("records"):
        key = (row["transform"], row["classifier"])
        if row["baseline"]:
            baselines[row["transform"]] = row["baseline"]
        if row["status"] == "ok":
            cells[key] = MetricsReport(
                brier=float(row["brier"]),
                precision=float(row["precision"]),
                recall=float(row["recall"]),
                f1=float(row["f1"]),
                top_n={int(c.split("_")[1]): float(row[c]) for c in TOP_COLUMNS if _optional(row[c]) is not None},
                binary_brier=float(row["binary_brier"]),
                binary_precision=float(row["binary_precision"]),
                binary_recall=float(row["binary_recall"]),
                binary_f1=float(row["binary_f1"]),
            )
        else:
            failures[key] = CellFailure(row["error_kind"], row["error_message"])

    first = df.iloc[0]
    logger.info("loaded %d cells (%d failed) from %s", len(df), len(failures), path)
    return assemble(
        cells,
        failures,
        list(dict.fromkeys(df["transform"])),
        list(dict.fromkeys(df["classifier"])),
        lambda t: baselines.get(t, t),
        first["config"],
        int(first["seed"]),
        first["version"],
    )
