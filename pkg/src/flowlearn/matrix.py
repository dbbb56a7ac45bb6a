"""Records to standardized 121-column matrices.

flatten() expands the metadata block of each record into one row per the
schema manifest (array features become name_0 ... name_k columns); ports and
histogram counts are treated as plain numeric columns. Standardization is a
fit-on-train Scaler with population standard deviation.

Matrix container layout (documented contract):
    bytes 0..7    magic "FLOWMTX1"
    bytes 8..11   uint32 LE header length H
    bytes 12..12+H-1   UTF-8 JSON header: rows, cols, column_names, labels
                  (per-level string lists, null for unlabeled rows), label
                  vocabularies, optional scaler {mean, std, fitted_on}
    then rows*cols float64 LE values in column-major order
    then rows int64 LE row ids
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .features import schema
from .validation import check_matrix

MAGIC = b"FLOWMTX1"


class SchemaMismatch(ValueError):
    """Record schema version or layout differs from the manifest."""


@dataclass
class FeatureMatrix:
    data: np.ndarray
    column_names: list
    row_ids: list
    labels: dict = field(default_factory=dict)  # level -> list (None = n/a)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def label_vector(self, level: str, vocab: list) -> np.ndarray:
        """Class indices for rows labeled at the level (all rows must be)."""
        index = {name: i for i, name in enumerate(vocab)}
        values = self.labels.get(level)
        if values is None:
            raise KeyError(f"matrix carries no labels at level {level!r}")
        missing = [i for i, v in enumerate(values) if v is None]
        if missing:
            raise ValueError(f"{len(missing)} rows lack a {level} label")
        return np.array([index[v] for v in values], dtype=np.int64)

    def vocabulary(self, level: str) -> list:
        values = self.labels.get(level) or []
        return sorted({v for v in values if v is not None})


def flatten(records) -> FeatureMatrix:
    """Expand record metadata into an n x 121 float64 matrix."""
    names = schema.column_names()
    rows = []
    row_ids = []
    labels = {level: [] for level in ("top", "mid", "fine")}
    for rec in records:
        if rec.schema_version != schema.SCHEMA_VERSION:
            raise SchemaMismatch(
                f"record {rec.id} has schema {rec.schema_version!r}, "
                f"expected {schema.SCHEMA_VERSION!r}")
        meta = rec.metadata
        row = []
        try:
            for name in schema.SCALAR_FEATURES:
                row.append(meta[name])
            for name, length in schema.ARRAY_FEATURES:
                values = meta[name]
                if len(values) != length:
                    raise SchemaMismatch(
                        f"record {rec.id}: {name} has {len(values)} entries, "
                        f"expected {length}")
                row.extend(values)
        except KeyError as exc:
            raise SchemaMismatch(
                f"record {rec.id} lacks feature {exc}") from None
        rows.append(row)
        row_ids.append(rec.id)
        rec_labels = rec.labels or {}
        for level in labels:
            labels[level].append(rec_labels.get(level))
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    labels = {level: vals for level, vals in labels.items()
              if any(v is not None for v in vals)}
    return FeatureMatrix(data, names, row_ids, labels)


class Scaler(BaseEstimator, TransformerMixin):
    """Per-column z-scoring with population statistics.

    Columns whose standard deviation falls below ``epsilon`` are treated as
    constant: their scale is pinned to 1 so they transform to exactly 0.
    """

    def __init__(self, epsilon=1e-12):
        self.epsilon = epsilon

    def fit(self, X, y=None, fitted_on="train"):
        X = check_matrix(X)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)  # population (ddof=0)
        self.constant_ = std < self.epsilon
        std = np.where(self.constant_, 1.0, std)
        self.scale_ = std
        self.fitted_on_ = fitted_on
        return self

    def transform(self, X):
        X = check_matrix(X, n_features=self.mean_.shape[0])
        out = (X - self.mean_) / self.scale_
        out[:, self.constant_] = 0.0
        return out

    def inverse_transform(self, X):
        X = check_matrix(X, n_features=self.mean_.shape[0])
        return X * self.scale_ + self.mean_

    def to_dict(self) -> dict:
        return {"mean": self.mean_.tolist(), "std": self.scale_.tolist(),
                "constant": self.constant_.tolist(),
                "fitted_on": self.fitted_on_}

    @classmethod
    def from_dict(cls, obj) -> "Scaler":
        scaler = cls()
        scaler.mean_ = np.array(obj["mean"], dtype=np.float64)
        scaler.scale_ = np.array(obj["std"], dtype=np.float64)
        scaler.constant_ = np.array(obj["constant"], dtype=bool)
        scaler.fitted_on_ = obj.get("fitted_on", "")
        return scaler


def save_matrix(path, fm: FeatureMatrix, scaler: Scaler | None = None):
    header = {
        "rows": fm.rows,
        "cols": fm.data.shape[1],
        "column_names": fm.column_names,
        "labels": fm.labels,
        "vocab": {level: fm.vocabulary(level) for level in fm.labels},
        "scaler": scaler.to_dict() if scaler is not None else None,
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(np.asfortranarray(fm.data).astype("<f8").tobytes(order="F"))
        f.write(np.array(fm.row_ids, dtype="<i8").tobytes())


def load_matrix(path):
    """Returns (FeatureMatrix, Scaler or None)."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise ValueError(f"not a matrix container: magic {magic!r}")
        header_len, = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(header_len).decode("utf-8"))
        rows, cols = header["rows"], header["cols"]
        data = np.frombuffer(f.read(rows * cols * 8), dtype="<f8")
        data = data.reshape((rows, cols), order="F").copy()
        row_ids = np.frombuffer(f.read(rows * 8), dtype="<i8").tolist()
    fm = FeatureMatrix(data, header["column_names"], row_ids,
                       header.get("labels") or {})
    scaler = None
    if header.get("scaler"):
        scaler = Scaler.from_dict(header["scaler"])
    return fm, scaler
