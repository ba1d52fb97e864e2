"""Scoring-model checkpoints: everything needed to score new rows offline.

A checkpoint bundles the standardizer fitted on the train split, the frozen
projection set and its fitted statistics (projection methods), the encoder
weights (deep methods), and the hypersphere center (deep-svdd). Arrays are
stored raw, so save/load round-trips bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .encoder import CHECKPOINT_VERSION, Encoder
from .errors import DataError
from .projections import ProjectionSet, project
from .scoring import RpoStats, projected_distances, reduce_distances


def save_model_checkpoint(
    path,
    method: str,
    scaler_mean: np.ndarray,
    scaler_std: np.ndarray,
    encoder: Encoder | None = None,
    center: np.ndarray | None = None,
    projections: ProjectionSet | None = None,
    stats: RpoStats | None = None,
) -> None:
    payload: dict[str, np.ndarray] = {
        "version": np.int64(CHECKPOINT_VERSION),
        "method": np.str_(method),
        "scaler_mean": scaler_mean,
        "scaler_std": scaler_std,
    }
    if encoder is not None:
        payload["layer_dims"] = np.asarray(encoder.layer_dims, dtype=np.int64)
        payload["slope"] = np.float64(encoder.slope)
        for l, W in enumerate(encoder.weights):
            payload[f"W{l}"] = W
    if center is not None:
        payload["center"] = center
    if projections is not None:
        payload["proj_entries"] = projections.entries
        payload["proj_seed"] = np.int64(projections.seed)
    if stats is not None:
        payload["stats_med"] = stats.med
        payload["eps_floor"] = np.float64(stats.eps_floor)
        if stats.mad is not None:
            payload["stats_mad"] = stats.mad
        else:
            payload["stats_inv_cov"] = stats.inv_cov
    np.savez(path, **payload)


class ScoringModel:
    """Loaded checkpoint, ready to score raw feature rows."""

    def __init__(self, method, scaler_mean, scaler_std, encoder, center, projections, stats):
        self.method = method
        self.scaler_mean = scaler_mean
        self.scaler_std = scaler_std
        self.encoder = encoder
        self.center = center
        self.projections = projections
        self.stats = stats

    @property
    def input_dim(self) -> int:
        return self.scaler_mean.shape[0]

    @property
    def estimator(self) -> str:
        return "max" if self.method.endswith("max") else "mean"

    def score_rows(self, X: np.ndarray) -> np.ndarray:
        """Outlyingness per raw input row (standardization applied here)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DataError(
                f"expected {self.input_dim} feature columns, got "
                f"{X.shape[1] if X.ndim == 2 else 'non-2D input'}"
            )
        if X.shape[0] == 0:
            return np.zeros(0)
        Z = (X - self.scaler_mean) / self.scaler_std
        if self.encoder is not None:
            Z, _ = self.encoder.forward(Z)
        if self.method == "deep-svdd":
            return np.sum((Z - self.center) ** 2, axis=1)
        D = projected_distances(project(Z, self.projections), self.stats)
        return reduce_distances(D, self.estimator)


def load_model_checkpoint(path) -> ScoringModel:
    try:
        archive = np.load(path)
    except OSError as exc:
        raise DataError(f"cannot open checkpoint {path}: {exc}") from exc
    with archive as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        method = str(data["method"])
        scaler_mean = data["scaler_mean"]
        scaler_std = data["scaler_std"]
        encoder = None
        if "layer_dims" in data:
            dims = data["layer_dims"].tolist()
            weights = [data[f"W{l}"] for l in range(len(dims) - 1)]
            encoder = Encoder(weights, slope=float(data["slope"]))
        center = data["center"] if "center" in data else None
        projections = None
        if "proj_entries" in data:
            projections = ProjectionSet(
                entries=data["proj_entries"], seed=int(data["proj_seed"])
            )
        stats = None
        if "stats_med" in data:
            stats = RpoStats(
                med=data["stats_med"],
                mad=data["stats_mad"] if "stats_mad" in data else None,
                inv_cov=data["stats_inv_cov"] if "stats_inv_cov" in data else None,
                eps_floor=float(data["eps_floor"]),
            )
    return ScoringModel(method, scaler_mean, scaler_std, encoder, center, projections, stats)
