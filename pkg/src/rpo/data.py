"""Dataset synthesis, ingestion, splitting, and training-set manipulation.

A dataset is a frozen bundle of a feature matrix with per-row class id,
ground-truth label (normal/anomaly), split tag, and a semi-supervision
flag. The ground-truth label is never rewritten: contamination moves
anomaly rows into the train split while keeping their label for audit,
and training code simply treats every train row as nominal unless its
``sad_flag`` is set.

The benchmark pipeline is: build (generate or load) -> split -> standardize
-> optional contaminate/inject_sad_labels -> train -> optional affine
perturbation of the held-out rows. Standardization is a separate step
rather than part of loading because it must use train-only statistics,
which exist only after splitting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .seeding import sub_rng

TRAIN, VAL, TEST = "train", "val", "test"
NORMAL, ANOMALY = 0, 1

_BLOB_SIGMA = 1.0
_MEAN_SEPARATION = 6.0  # pairwise blob-mean distance, units of sigma
_ANOMALY_MARGIN = 3.0  # min distance from any anomaly to every blob mean


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable rows: features, class id, label, split tag, SAD flag."""

    X: np.ndarray  # (n, d) float64
    class_id: np.ndarray  # (n,) int64
    label: np.ndarray  # (n,) int8, NORMAL or ANOMALY
    split: np.ndarray  # (n,) str, TRAIN / VAL / TEST
    sad_flag: np.ndarray  # (n,) bool
    provenance: str = ""

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features contain NaN or infinite entries")
        for name in ("class_id", "label", "split", "sad_flag"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
        if not np.all(np.isin(self.label, (NORMAL, ANOMALY))):
            raise ValueError("labels must be 0 (normal) or 1 (anomaly)")
        if not np.all(np.isin(self.split, (TRAIN, VAL, TEST))):
            raise ValueError("split tags must be train, val, or test")
        for arr in (self.X, self.class_id, self.label, self.split, self.sad_flag):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def mask(self, split: str) -> np.ndarray:
        return self.split == split

    def count(self, split: str, label: int | None = None) -> int:
        m = self.mask(split)
        if label is not None:
            m = m & (self.label == label)
        return int(np.count_nonzero(m))


@dataclass(frozen=True)
class AffineSpec:
    """Post-training perturbation of held-out features.

    ``constant`` multiplies every component by ``alpha``; ``uniform_range``
    and ``standard_normal`` multiply by a random diagonal drawn once from
    the given seed.
    """

    mode: str = "constant"
    alpha: float = 1.0
    low: float = 0.9
    high: float = 1.1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("constant", "uniform_range", "standard_normal"):
            raise ValueError(f"unknown affine mode {self.mode!r}")
        if self.mode == "constant" and self.alpha == 0.0:
            raise ValueError("constant affine alpha must be nonzero")
        if self.low > self.high:
            raise ValueError(f"affine range [{self.low}, {self.high}] is empty")


def _dataset(X, class_id, label, split, sad_flag, provenance) -> Dataset:
    return Dataset(
        X=np.ascontiguousarray(X, dtype=np.float64),
        class_id=np.ascontiguousarray(class_id, dtype=np.int64),
        label=np.ascontiguousarray(label, dtype=np.int8),
        split=np.asarray(split, dtype="U5"),
        sad_flag=np.ascontiguousarray(sad_flag, dtype=bool),
        provenance=provenance,
    )


def _place_blob_means(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    half_width = max(10.0, 4.0 * k)
    means: list[np.ndarray] = []
    for _ in range(10_000 * k):
        candidate = rng.uniform(-half_width, half_width, size=d)
        if all(np.linalg.norm(candidate - mu) >= _MEAN_SEPARATION for mu in means):
            means.append(candidate)
            if len(means) == k:
                return np.vstack(means)
    raise DataError(f"could not place {k} blob means {_MEAN_SEPARATION} sigma apart in d={d}")


def generate_multimodal(
    k_modes: int,
    d: int,
    n_per_mode: int,
    anomaly_n: int,
    seed: int,
    test_fraction: float = 0.25,
) -> Dataset:
    """Gaussian-blob normality plus box anomalies kept clear of every blob.

    Normal rows get class ids 0..k-1 and are pre-partitioned into train and
    test; anomalies get class id k and start in the test split. Every
    anomaly is verified to lie at least 3 sigma from every blob mean.
    """
    if k_modes < 1 or d < 1 or n_per_mode < 1 or anomaly_n < 0:
        raise ValueError(
            f"invalid counts: k_modes={k_modes}, d={d}, "
            f"n_per_mode={n_per_mode}, anomaly_n={anomaly_n}"
        )
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    rng = sub_rng(seed, "datagen")
    means = _place_blob_means(k_modes, d, rng)

    X_parts, class_parts, split_parts = [], [], []
    for c in range(k_modes):
        rows = means[c] + _BLOB_SIGMA * rng.standard_normal((n_per_mode, d))
        X_parts.append(rows)
        class_parts.append(np.full(n_per_mode, c))
        tags = np.full(n_per_mode, TRAIN, dtype="U5")
        n_test = int(round(test_fraction * n_per_mode))
        if n_test:
            tags[rng.permutation(n_per_mode)[:n_test]] = TEST
        split_parts.append(tags)

    lo = means.min(axis=0) - 2.0 * _MEAN_SEPARATION
    hi = means.max(axis=0) + 2.0 * _MEAN_SEPARATION
    anomalies = np.empty((anomaly_n, d))
    accepted = 0
    for _ in range(1000 * max(anomaly_n, 1)):
        if accepted == anomaly_n:
            break
        candidate = rng.uniform(lo, hi, size=d)
        if np.min(np.linalg.norm(means - candidate, axis=1)) >= _ANOMALY_MARGIN:
            anomalies[accepted] = candidate
            accepted += 1
    if accepted < anomaly_n:
        raise DataError("could not sample anomalies outside every blob core")
    if anomaly_n:
        assert np.all(
            np.linalg.norm(anomalies[:, None, :] - means[None, :, :], axis=2).min(axis=1)
            >= _ANOMALY_MARGIN
        )
        X_parts.append(anomalies)
        class_parts.append(np.full(anomaly_n, k_modes))
        split_parts.append(np.full(anomaly_n, TEST, dtype="U5"))

    X = np.vstack(X_parts)
    class_id = np.concatenate(class_parts)
    label = np.where(class_id < k_modes, NORMAL, ANOMALY)
    split = np.concatenate(split_parts)
    return _dataset(
        X, class_id, label, split, np.zeros(len(X), dtype=bool),
        provenance=f"synthetic(k={k_modes},d={d},seed={seed})",
    )


def load_csv(path, label_column: str = "class", normal_class_ids=(0,)) -> Dataset:
    """Read a feature CSV with an integer class column; features stay raw.

    Rows whose class id belongs to ``normal_class_ids`` are labeled normal
    and start in train; every other row is an anomaly and starts in test.
    Standardize after splitting, not here.
    """
    normal_ids = set(int(c) for c in normal_class_ids)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"empty dataset file {path}")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} missing from {path}")
        label_idx = header.index(label_column)
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        rows, classes = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(row[i]) for i in feature_idx])
                classes.append(int(float(row[label_idx])))
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        raise DataError(f"no data rows in {path}")
    class_id = np.asarray(classes, dtype=np.int64)
    present = set(int(c) for c in np.unique(class_id))
    missing = normal_ids - present
    if missing:
        raise DataError(f"unknown class id(s) {sorted(missing)} not present in {path}")
    X = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DataError(f"non-finite feature values in {path}")
    label = np.where(np.isin(class_id, sorted(normal_ids)), NORMAL, ANOMALY)
    split = np.where(label == NORMAL, TRAIN, TEST).astype("U5")
    return _dataset(
        X, class_id, label, split, np.zeros(len(X), dtype=bool),
        provenance=str(path),
    )


def relabel_by_normal_classes(data: Dataset, picked_class_ids) -> Dataset:
    """Redefine normality as the picked classes and reset splits/flags."""
    picked = np.asarray(sorted(int(c) for c in picked_class_ids), dtype=np.int64)
    if picked.size == 0:
        raise ValueError("picked_class_ids must be nonempty")
    label = np.where(np.isin(data.class_id, picked), NORMAL, ANOMALY).astype(np.int8)
    if not np.any(label == NORMAL):
        raise DataError(f"no rows belong to picked classes {picked.tolist()}")
    split = np.where(label == NORMAL, TRAIN, TEST).astype("U5")
    return replace(
        data,
        label=label,
        split=split,
        sad_flag=np.zeros(data.n, dtype=bool),
    )


def split(
    data: Dataset,
    val_fraction: float,
    seed: int,
    test_fraction: float = 0.0,
) -> Dataset:
    """Carve a validation split out of the training normals.

    Moves ``val_fraction`` of the train normals to validation and matches
    them one-for-one with anomalies drawn out of the test anomaly pool, so
    validation and test anomaly pools stay disjoint. ``test_fraction`` > 0
    first moves that share of train normals to test, for sources that ship
    without a canonical test partition.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    if data.count(VAL) > 0:
        raise ValueError("dataset already has a validation split")
    rng = sub_rng(seed, "split")
    new_split = data.split.copy()

    train_normals = np.flatnonzero((data.split == TRAIN) & (data.label == NORMAL))
    if test_fraction > 0.0:
        n_test = int(round(test_fraction * train_normals.size))
        moved = rng.permutation(train_normals)[:n_test]
        new_split[moved] = TEST
        train_normals = np.setdiff1d(train_normals, moved)

    n_val = int(round(val_fraction * train_normals.size))
    if n_val < 1:
        raise ValueError("val_fraction leaves an empty validation split")
    val_normals = rng.permutation(train_normals)[:n_val]
    new_split[val_normals] = VAL

    anomaly_pool = np.flatnonzero((new_split == TEST) & (data.label == ANOMALY))
    if anomaly_pool.size < n_val + 1:
        raise DataError("insufficient anomalies for disjoint val/test pools")
    val_anomalies = rng.permutation(anomaly_pool)[:n_val]
    new_split[val_anomalies] = VAL

    return replace(data, split=new_split)


def standardize(data: Dataset) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Z-score all rows using train-only statistics; returns (data, mean, std).

    Columns with ~zero spread on the train split pass through unscaled.
    """
    train_rows = data.X[data.split == TRAIN]
    if train_rows.shape[0] == 0:
        raise ValueError("cannot standardize without train rows")
    mean = train_rows.mean(axis=0)
    std = train_rows.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return replace(data, X=(data.X - mean) / std), mean, std


def apply_standardization(data: Dataset, mean: np.ndarray, std: np.ndarray) -> Dataset:
    return replace(data, X=(data.X - mean) / std)


def _injection_count(ratio: float, n_train: int) -> int:
    # x rows added to an n-row train split make up ratio of it: x = ratio*n/(1-ratio)
    return int(round(ratio * n_train / (1.0 - ratio)))


def contaminate(data: Dataset, ratio: float, seed: int) -> Dataset:
    """Pollute the train split with anomalies drawn from the test pool.

    Moved rows keep their anomaly label for audit; training code treats all
    train rows as nominal, which is the point of the exercise.
    """
    if not 0.0 <= ratio < 0.5:
        raise ValueError(f"contamination ratio must lie in [0, 0.5), got {ratio}")
    if ratio == 0.0:
        return data
    n_inject = _injection_count(ratio, data.count(TRAIN))
    if n_inject == 0:
        return data
    pool = np.flatnonzero((data.split == TEST) & (data.label == ANOMALY))
    if pool.size < n_inject + 1:
        raise DataError("insufficient anomaly pool for contamination")
    rng = sub_rng(seed, "contaminate")
    moved = rng.permutation(pool)[:n_inject]
    new_split = data.split.copy()
    new_split[moved] = TRAIN
    return replace(data, split=new_split)


def inject_sad_labels(
    data: Dataset, sad_ratio: float, n_anomalous_classes: int, seed: int
) -> Dataset:
    """Add labeled anomalies from a few anomaly classes to the train split.

    Flagged rows make up ``sad_ratio`` of the resulting train split and are
    drawn from at most ``n_anomalous_classes`` randomly picked anomalous
    class ids.
    """
    if not 0.0 <= sad_ratio < 0.5:
        raise ValueError(f"sad_ratio must lie in [0, 0.5), got {sad_ratio}")
    if n_anomalous_classes < 1:
        raise ValueError("n_anomalous_classes must be >= 1")
    if sad_ratio == 0.0:
        return data
    n_inject = _injection_count(sad_ratio, data.count(TRAIN))
    if n_inject == 0:
        return data
    rng = sub_rng(seed, "sad")
    pool_mask = (data.split == TEST) & (data.label == ANOMALY)
    classes = np.unique(data.class_id[pool_mask])
    if classes.size == 0:
        raise DataError("insufficient pool for SAD labeling")
    n_pick = min(n_anomalous_classes, classes.size)
    picked = rng.choice(classes, size=n_pick, replace=False)
    pool = np.flatnonzero(pool_mask & np.isin(data.class_id, picked))
    if pool.size < n_inject + 1:
        raise DataError("insufficient pool for SAD labeling")
    moved = rng.permutation(pool)[:n_inject]
    new_split = data.split.copy()
    new_split[moved] = TRAIN
    new_sad = data.sad_flag.copy()
    new_sad[moved] = True
    return replace(data, split=new_split, sad_flag=new_sad)


def affine_transform(data: Dataset, spec: AffineSpec) -> Dataset:
    """Scale held-out (val/test) features by a diagonal map; train untouched."""
    X = data.X.copy()
    held_out = data.split != TRAIN
    if spec.mode == "constant":
        X[held_out] *= spec.alpha
    else:
        rng = sub_rng(spec.seed, "affine")
        if spec.mode == "uniform_range":
            diag = rng.uniform(spec.low, spec.high, size=data.dim)
        else:
            diag = rng.standard_normal(data.dim)
        X[held_out] = X[held_out] * diag
    return replace(data, X=X)


def save_csv(data: Dataset, path) -> None:
    """Feature columns f0..f{d-1} then the integer ``class`` column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(data.dim)] + ["class"])
        for row, cid in zip(data.X, data.class_id):
            writer.writerow([repr(float(v)) for v in row] + [int(cid)])


def save_manifest(data: Dataset, path) -> None:
    """Split manifest: row_index, split, sad_flag."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row_index", "split", "sad_flag"])
        for i in range(data.n):
            writer.writerow([i, data.split[i], int(data.sad_flag[i])])


def apply_manifest(data: Dataset, path) -> Dataset:
    """Restore split tags and SAD flags written by :func:`save_manifest`."""
    split_arr = data.split.copy()
    sad = data.sad_flag.copy()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["row_index", "split", "sad_flag"]:
            raise DataError(f"bad manifest header in {path}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                idx = int(row[0])
                split_arr[idx] = row[1]
                sad[idx] = bool(int(row[2]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from exc
    return replace(data, split=split_arr, sad_flag=sad)
