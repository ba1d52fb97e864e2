"""Result emission: per-seed results CSV, aggregate CSV, epoch histories.

Per-seed and aggregate files keep full float precision (shortest
round-trip repr) so reruns are byte-comparable; the human-readable report
is where AUCs become percentages truncated (not rounded) to two decimals.
"""

from __future__ import annotations

import csv
from collections import defaultdict

from .errors import DataError
from .evaluation import ExperimentSpec, SeedResult, SweepRow, aggregate
from .metrics import mean_std, truncate

RESULTS_HEADER = ["method", "dataset", "k_modes", "seed", "best_epoch", "val_auc", "test_auc"]
AGGREGATE_HEADER = ["method", "axis_value", "mean_auc", "std_auc", "n_seeds", "gap_mean", "gap_std"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(path, entries: list[tuple[ExperimentSpec, list[SeedResult]]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for spec, results in entries:
            for r in results:
                writer.writerow(
                    [
                        spec.method,
                        spec.source,
                        spec.k_modes,
                        r.seed,
                        r.best_epoch,
                        _fmt(r.val_auc),
                        _fmt(r.test_auc),
                    ]
                )


def write_aggregate_csv(path, rows: list[tuple[str, str, float, float, int, float | None, float | None]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for method, axis_value, mean, std, n, gap_mean, gap_std in rows:
            writer.writerow(
                [
                    method,
                    axis_value,
                    _fmt(mean),
                    _fmt(std),
                    n,
                    "" if gap_mean is None else _fmt(gap_mean),
                    "" if gap_std is None else _fmt(gap_std),
                ]
            )


def aggregate_rows_for_methods(
    entries: list[tuple[ExperimentSpec, list[SeedResult]]]
) -> list[tuple]:
    rows = []
    for spec, results in entries:
        mean, std = aggregate(results)
        rows.append((spec.method, "-", mean, std, len(results), None, None))
    return rows


def aggregate_rows_for_sweep(method: str, sweep_rows: list[SweepRow]) -> list[tuple]:
    return [
        (method, row.value, row.mean_auc, row.std_auc, row.n_seeds, row.gap_mean, row.gap_std)
        for row in sweep_rows
    ]


def write_history_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_auc"])
        for record in history:
            writer.writerow([record.epoch, _fmt(record.train_loss), _fmt(record.val_auc)])


def render_report(results_path) -> str:
    """Aggregate a results CSV into the truncated-percentage table."""
    by_method: dict[tuple[str, str, str], list[float]] = defaultdict(list)
    try:
        fh = open(results_path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read results {results_path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise DataError(f"unexpected results header in {results_path}")
        for row in reader:
            if not row:
                continue
            method, dataset, k_modes = row[0], row[1], row[2]
            by_method[(method, dataset, k_modes)].append(float(row[6]))
    if not by_method:
        raise DataError(f"no result rows in {results_path}")
    lines = [f"{'method':<16} {'dataset':<24} {'modes':>5} {'seeds':>5} {'test AUC':>16}"]
    for (method, dataset, k_modes), aucs in sorted(by_method.items()):
        mean, std = mean_std(aucs)
        lines.append(
            f"{method:<16} {dataset:<24} {k_modes:>5} {len(aucs):>5} "
            f"{truncate(100.0 * mean):>8.2f} ± {truncate(100.0 * std):.2f}"
        )
    return "\n".join(lines)
