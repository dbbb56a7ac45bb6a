"""Exact brute-force k-nearest-neighbor classifier.

Majority vote over the k nearest training rows by Euclidean distance on
standardized features. Ties break by smallest mean distance among the tied
classes, then by lowest class index; neighbor ordering itself is a stable
sort, so equal distances resolve to the earliest training row.
"""

import numpy as np
from sklearn.base import BaseEstimator

from ..validation import check_labels, check_matrix


class KTooLarge(ValueError):
    pass


class KnnClassifier(BaseEstimator):
    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_labels(y, X.shape[0])
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > X.shape[0]:
            raise KTooLarge(f"k={self.k} exceeds {X.shape[0]} training rows")
        self.X_ = X
        self.y_ = y
        self.n_classes_ = int(y.max()) + 1 if y.size else 0
        return self

    def predict(self, X, chunk_size=256):
        X = check_matrix(X, n_features=self.X_.shape[1])
        train_sq = (self.X_ ** 2).sum(axis=1)
        out = np.empty(X.shape[0], dtype=np.int64)
        for start in range(0, X.shape[0], chunk_size):
            chunk = X[start:start + chunk_size]
            d2 = ((chunk ** 2).sum(axis=1)[:, None] + train_sq
                  - 2.0 * chunk @ self.X_.T)
            np.maximum(d2, 0.0, out=d2)
            for i in range(chunk.shape[0]):
                out[start + i] = self._vote(d2[i])
        return out

    def _vote(self, distances):
        order = np.argsort(distances, kind="stable")[:self.k]
        labels = self.y_[order]
        counts = np.bincount(labels, minlength=self.n_classes_)
        best = counts.max()
        tied = np.flatnonzero(counts == best)
        if tied.size == 1:
            return int(tied[0])
        neighbor_d = np.sqrt(distances[order])
        means = [neighbor_d[labels == cls].mean() for cls in tied]
        # lowest class index wins remaining exact ties (argmin is first-hit)
        return int(tied[int(np.argmin(means))])
