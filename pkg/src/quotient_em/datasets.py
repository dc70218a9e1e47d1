"""Finite-support distributions: the one container for samples and populations.

A WeightedDataset is a list of points in R^d with nonnegative weights summing
to one.  It plays both roles at desk scale: the empirical measure of a sample
(equal weights) and the exactly-computable stand-in for the population.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, DimensionError

__all__ = ["WeightedDataset"]

WEIGHT_SUM_TOL = 1e-12
LOADER_WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class WeightedDataset:
    points: np.ndarray   # (n, d)
    weights: np.ndarray  # (n,), nonnegative, sums to 1
    weight_correction: float = field(default=0.0, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise DimensionError(
                f"{pts.shape[0]} points but {w.shape[0]} weights"
            )
        if not np.all(np.isfinite(pts)):
            raise DomainError("dataset points must be finite")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        if abs(float(np.sum(w)) - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL:g}; got {float(np.sum(w)):.17g}"
            )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    @classmethod
    def from_points(cls, points) -> "WeightedDataset":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[0]
        return cls(points=pts, weights=np.full(n, 1.0 / n))

    def subset(self, idx) -> "WeightedDataset":
        """Rows idx, reweighted to total mass 1."""
        idx = np.asarray(idx, dtype=int)
        w = self.weights[idx]
        total = float(np.sum(w))
        if total <= 0:
            raise DomainError("subset carries zero weight")
        return WeightedDataset(points=self.points[idx], weights=w / total)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def second_moment(self) -> np.ndarray:
        return (self.points * self.weights[:, None]).T @ self.points

    @classmethod
    def from_csv(cls, path) -> "WeightedDataset":
        """Read `w,x1,...,xd` rows; weights must sum to 1 within 1e-9.

        Sums inside the tolerance are renormalized and the correction size is
        recorded on the returned dataset.
        """
        path = Path(path)
        with path.open("r", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if not header or header[0] != "w" or any(
                h != f"x{i + 1}" for i, h in enumerate(header[1:])
            ):
                raise DomainError(
                    f"expected header w,x1,...,xd; got {','.join(header)}"
                )
            rows = [[float(v) for v in row] for row in reader if row]
        if not rows:
            raise DomainError(f"dataset file {path} has no data rows")
        arr = np.asarray(rows, dtype=float)
        w = arr[:, 0]
        total = float(np.sum(w))
        correction = abs(total - 1.0)
        if correction > LOADER_WEIGHT_SUM_TOL:
            raise DomainError(
                f"weight column sums to {total:.12g}; "
                f"outside the {LOADER_WEIGHT_SUM_TOL:g} load tolerance"
            )
        ds = cls(points=arr[:, 1:], weights=w / total)
        object.__setattr__(ds, "weight_correction", correction)
        return ds

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["w"] + [f"x{i + 1}" for i in range(self.d)])
            for w, x in zip(self.weights, self.points):
                writer.writerow([f"{w:.17g}"] + [f"{v:.17g}" for v in x])
