"""Checkpoint metric series on disk and their aggregation across seeds."""

from __future__ import annotations

import csv
import json
import statistics
from pathlib import Path
from typing import Iterable, Optional

from .metrics import METRIC_FIELDS, MetricsReport

SERIES_COLUMNS = ("step",) + METRIC_FIELDS + ("communities",)


class AlignmentError(ValueError):
    def __init__(self, path, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = str(path)


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def write_series(rows: Iterable[MetricsReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for r in rows:
            d = r.to_dict()
            w.writerow([_fmt(d[c]) for c in SERIES_COLUMNS])


def read_series(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row = {"step": int(rec["step"])}
            for c in METRIC_FIELDS:
                row[c] = float(rec[c]) if rec.get(c) not in (None, "") else None
            rows.append(row)
    return rows


def aggregate(paths: list, extras: Optional[dict] = None) -> dict:
    """Mean and sample std (ddof=1) per metric per checkpoint across series.

    A single series yields std 0 and ``single_sample: true``. A metric that
    is undefined in any series is reported as null at that checkpoint.
    """
    if not paths:
        raise ValueError("no series files given")
    series = {str(p): read_series(p) for p in paths}
    first = str(paths[0])
    steps = [r["step"] for r in series[first]]
    for p, rows in series.items():
        if [r["step"] for r in rows] != steps:
            raise AlignmentError(p, f"checkpoints {[r['step'] for r in rows]} != {steps}")
    single = len(paths) == 1
    checkpoints = []
    for idx, step in enumerate(steps):
        entry = {"step": step}
        for m in METRIC_FIELDS:
            vals = [rows[idx][m] for rows in series.values()]
            if any(v is None for v in vals):
                entry[m] = {"mean": None, "std": None, "n": len(vals)}
                continue
            mean = statistics.fmean(vals)
            std = 0.0 if single else statistics.stdev(vals)
            entry[m] = {"mean": mean, "std": std, "n": len(vals)}
        checkpoints.append(entry)
    report = {"n_series": len(paths), "single_sample": single, "files": list(series),
              "checkpoints": checkpoints, "per_seed": series}
    report.update(extras or {})
    return report


def write_report(report: dict, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out / "report.json", out / "report.csv"
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + [f"{m}_{s}" for m in METRIC_FIELDS for s in ("mean", "std")]
                   + ["n", "single_sample"])
        for cp in report["checkpoints"]:
            row = [cp["step"]]
            for m in METRIC_FIELDS:
                row += [_fmt(cp[m]["mean"]), _fmt(cp[m]["std"])]
            row += [report["n_series"], str(report["single_sample"]).lower()]
            w.writerow(row)
    return jpath, cpath


