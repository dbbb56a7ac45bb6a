"""Plain fully connected baseline trained with the same Adam/cross-entropy
machinery as the hierarchical model; one label level per fitted instance."""

import numpy as np
from sklearn.base import BaseEstimator

from ..nn.layers import Dense, ReLU, Sequential, softmax_xent
from ..nn.optim import Adam
from ..validation import check_labels, check_matrix
from .common import NonFiniteLoss, minibatches, task_macro_f1


class MlpClassifier(BaseEstimator):
    def __init__(self, hidden=(128, 64), batch_size=200, epochs=100,
                 lr=0.001, seed=0):
        self.hidden = hidden
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr = lr
        self.seed = seed

    def _build(self, n_features, n_classes):
        rng = np.random.default_rng([self.seed, 0])
        widths = [n_features, *self.hidden]
        layers = []
        for w_in, w_out in zip(widths, widths[1:]):
            layers += [Dense(w_in, w_out, rng=rng), ReLU()]
        layers.append(Dense(widths[-1], n_classes, rng=rng))
        return Sequential(layers)

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_matrix(X).astype(np.float32)
        y = check_labels(y, X.shape[0])
        n_classes = max(int(y.max()) + 1, 2)
        if y_val is not None:
            n_classes = max(n_classes, int(np.max(y_val)) + 1)
        self.n_classes_ = n_classes
        self.network_ = self._build(X.shape[1], n_classes)
        optimizer = Adam(self.network_.params(), lr=self.lr)
        rng = np.random.default_rng([self.seed, 1])
        self.history_ = []
        for epoch in range(self.epochs):
            loss_sum, rows = 0.0, 0
            for batch_index, batch in enumerate(
                    minibatches(X.shape[0], self.batch_size, rng)):
                logits = self.network_.forward(X[batch], train=True)
                loss, dlogits = softmax_xent(logits, y[batch])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"non-finite loss at epoch {epoch}, "
                                        f"batch {batch_index}")
                self.network_.backward(dlogits)
                optimizer.step(self.network_.grads())
                loss_sum += loss * batch.size
                rows += batch.size
            entry = {"epoch": epoch, "train_loss": loss_sum / max(rows, 1)}
            entry["train_f1"] = task_macro_f1(y, self.predict(X), n_classes)
            if X_val is not None and y_val is not None and len(X_val):
                y_val_checked = check_labels(np.asarray(y_val),
                                             len(X_val), "y_val")
                val_pred = self.predict(X_val)
                entry["val_f1"] = task_macro_f1(y_val_checked, val_pred,
                                                n_classes)
            self.history_.append(entry)
        return self

    def predict(self, X, batch_size=4096):
        X = check_matrix(X)
        out = []
        for start in range(0, X.shape[0], batch_size):
            logits = self.network_.forward(
                X[start:start + batch_size].astype(np.float32), train=False)
            out.append(logits.argmax(axis=1))
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)
