"""Dual-head residual 1-D CNN with a mid-to-top hierarchical connection.

Architecture (channels double and length halves inside the residual block):

    input 121 -> [reshape 121x1]
    input block:  BN -> conv(k3,s2,p1, 1->16) -> ReLU -> BN      -> 61x16
    residual p1:  conv(k3,s1,p1, 16->16) -> ReLU -> BN, + x      -> 61x16
    residual p2:  conv(k3,s2,p2, 16->32) -> ReLU -> BN,
                  + conv(k1,s2,p1, 16->32) shortcut              -> 32x32
    residual p3:  conv(k3,s1,p1, 32->32) -> ReLU -> BN, + x      -> 32x32
    two branches: conv(k3,s2,p1, 32->64) -> ReLU -> BN -> flat   -> 16x64
    mid head:     dense 1024 -> n_mid
    top head:     dense (1024 + n_mid) -> n_top over
                  [top-branch features || mid output]

The hierarchical connection feeds raw mid logits into the top head by
default; set hierarchy_input="probs" to feed softmax probabilities instead.
Joint loss is CE_mid + top_loss_weight * CE_top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..nn.layers import (BatchNorm1d, Conv1d, Dense, Flatten, ReLU,
                         Sequential, softmax, softmax_xent)
from ..nn.optim import Adam
from ..validation import check_labels, check_matrix
from .common import MissingLabel, NonFiniteLoss, TrainConfig, minibatches, \
    task_macro_f1

# Expected (length, channels) after: input block, residual parts 1-3, branch
DEFAULT_SHAPE_TRACE = [(61, 16), (61, 16), (32, 32), (32, 32), (16, 64)]


class ShapeTraceViolation(ValueError):
    pass


@dataclass
class MthlConfig:
    n_mid: int = 2
    n_top: int = 2
    input_width: int = 121
    input_channels: int = 16
    residual_blocks: int = 1
    branch_channel_factor: int = 2
    top_loss_weight: float = 1.0
    hierarchy_input: str = "logits"  # or "probs"

    def __post_init__(self):
        if self.n_mid < 2 or self.n_top < 2:
            raise ValueError("both heads need at least 2 classes")
        if self.hierarchy_input not in ("logits", "probs"):
            raise ValueError(f"unknown hierarchy_input "
                             f"{self.hierarchy_input!r}")


class _ResidualPart:
    """conv -> ReLU -> BN on the main path, plus an additive skip that is
    either identity (shape preserved) or a 1x1 strided convolution."""

    def __init__(self, in_ch, out_ch, stride, pad, rng, dtype):
        self.main = Sequential([
            Conv1d(in_ch, out_ch, kernel=3, stride=stride, pad=pad,
                   rng=rng, dtype=dtype),
            ReLU(),
            BatchNorm1d(out_ch, dtype=dtype),
        ])
        if stride == 1 and in_ch == out_ch:
            self.skip = None
        else:
            self.skip = Conv1d(in_ch, out_ch, kernel=1, stride=stride,
                               pad=1, rng=rng, dtype=dtype)

    def params(self):
        out = self.main.params()
        if self.skip is not None:
            out += self.skip.params()
        return out

    def grads(self):
        out = self.main.grads()
        if self.skip is not None:
            out += self.skip.grads()
        return out

    def forward(self, x, train=False):
        y = self.main.forward(x, train=train)
        shortcut = x if self.skip is None else self.skip.forward(x, train)
        return y + shortcut

    def backward(self, dy):
        dx = self.main.backward(dy)
        if self.skip is None:
            return dx + dy
        return dx + self.skip.backward(dy)


class MthlNetwork:
    def __init__(self, config: MthlConfig, seed: int = 0,
                 dtype=np.float32):
        self.config = config
        rng = np.random.default_rng([seed, 0])
        ch = config.input_channels
        self.input_block = Sequential([
            BatchNorm1d(1, dtype=dtype),
            Conv1d(1, ch, kernel=3, stride=2, pad=1, rng=rng, dtype=dtype),
            ReLU(),
            BatchNorm1d(ch, dtype=dtype),
        ])
        self.res_parts = []
        for _ in range(config.residual_blocks):
            self.res_parts.append(_ResidualPart(ch, ch, 1, 1, rng, dtype))
            self.res_parts.append(_ResidualPart(ch, 2 * ch, 2, 2, rng, dtype))
            ch *= 2
            self.res_parts.append(_ResidualPart(ch, ch, 1, 1, rng, dtype))
        branch_ch = ch * config.branch_channel_factor
        self.mid_branch = self._branch(ch, branch_ch, rng, dtype)
        self.top_branch = self._branch(ch, branch_ch, rng, dtype)
        flat = self._trace_shapes()[-1]
        flat = flat[0] * flat[1]
        self.mid_head = Dense(flat, config.n_mid, rng=rng, dtype=dtype)
        self.top_head = Dense(flat + config.n_mid, config.n_top, rng=rng,
                              dtype=dtype)
        self._check_shape_trace()

    @staticmethod
    def _branch(in_ch, out_ch, rng, dtype):
        return Sequential([
            Conv1d(in_ch, out_ch, kernel=3, stride=2, pad=1, rng=rng,
                   dtype=dtype),
            ReLU(),
            BatchNorm1d(out_ch, dtype=dtype),
            Flatten(),
        ])

    def _trace_shapes(self):
        """(length, channels) after the input block, each residual part,
        and the branch convolution."""
        trace = []
        length = self.input_block.layers[1].out_length(self.config.input_width)
        ch = self.config.input_channels
        trace.append((length, ch))
        for part in self.res_parts:
            conv = part.main.layers[0]
            length = conv.out_length(length)
            ch = conv.out_channels
            trace.append((length, ch))
        branch_conv = self.mid_branch.layers[0]
        trace.append((branch_conv.out_length(length),
                      branch_conv.out_channels))
        return trace

    def _check_shape_trace(self):
        trace = self._trace_shapes()
        if any(length < 1 for length, _ in trace):
            raise ShapeTraceViolation(f"degenerate tensor trace {trace}")
        default = (self.config.input_width == 121
                   and self.config.input_channels == 16
                   and self.config.residual_blocks == 1
                   and self.config.branch_channel_factor == 2)
        if default and trace != DEFAULT_SHAPE_TRACE:
            raise ShapeTraceViolation(
                f"expected {DEFAULT_SHAPE_TRACE}, built {trace}")
        self.shape_trace = trace

    def params(self):
        groups = [self.input_block, *self.res_parts, self.mid_branch,
                  self.top_branch, self.mid_head, self.top_head]
        return [p for g in groups for p in g.params()]

    def grads(self):
        groups = [self.input_block, *self.res_parts, self.mid_branch,
                  self.top_branch, self.mid_head, self.top_head]
        return [g_ for g in groups for g_ in g.grads()]

    def _batchnorms(self):
        out = []

        def collect(layer):
            if isinstance(layer, BatchNorm1d):
                out.append(layer)
            elif isinstance(layer, Sequential):
                for sub in layer.layers:
                    collect(sub)
            elif isinstance(layer, _ResidualPart):
                collect(layer.main)

        for group in [self.input_block, *self.res_parts, self.mid_branch,
                      self.top_branch]:
            collect(group)
        return out

    def state(self):
        """Trainable parameters plus batchnorm running statistics."""
        arrays = list(self.params())
        for bn in self._batchnorms():
            arrays += [bn.running_mean, bn.running_var]
        return arrays

    def set_state(self, arrays):
        state = self.state()
        if len(arrays) != len(state):
            raise ValueError(f"{len(arrays)} arrays for {len(state)} slots")
        for dst, src in zip(state, arrays):
            if dst.shape != tuple(src.shape):
                raise ValueError(f"shape {src.shape} does not fit "
                                 f"{dst.shape}")
            dst[...] = src

    def forward(self, X, train=False):
        if X.ndim != 2 or X.shape[1] != self.config.input_width:
            raise ValueError(f"expected [batch, {self.config.input_width}], "
                             f"got {X.shape}")
        h = X[:, :, None]
        h = self.input_block.forward(h, train=train)
        for part in self.res_parts:
            h = part.forward(h, train=train)
        mid_feat = self.mid_branch.forward(h, train=train)
        top_feat = self.top_branch.forward(h, train=train)
        mid_logits = self.mid_head.forward(mid_feat, train=train)
        if self.config.hierarchy_input == "probs":
            link = softmax(mid_logits).astype(mid_logits.dtype)
        else:
            link = mid_logits
        top_in = np.concatenate([top_feat, link], axis=1)
        top_logits = self.top_head.forward(top_in, train=train)
        self._cache = (mid_logits, link)
        return mid_logits, top_logits

    def backward(self, d_mid_logits, d_top_logits):
        mid_logits, link = self._cache
        d_top_in = self.top_head.backward(d_top_logits)
        flat = d_top_in.shape[1] - self.config.n_mid
        d_top_feat = d_top_in[:, :flat]
        d_link = d_top_in[:, flat:]
        if self.config.hierarchy_input == "probs":
            # softmax Jacobian-vector product, rowwise
            d_from_top = link * (d_link
                                 - (d_link * link).sum(axis=1, keepdims=True))
        else:
            d_from_top = d_link
        d_mid_total = d_mid_logits + d_from_top
        d_mid_feat = self.mid_head.backward(d_mid_total)
        dh = (self.mid_branch.backward(d_mid_feat)
              + self.top_branch.backward(d_top_feat))
        for part in reversed(self.res_parts):
            dh = part.backward(dh)
        self.input_block.backward(dh)


def build_model(config: MthlConfig, seed: int = 0,
                dtype=np.float32) -> MthlNetwork:
    """Construct the network, failing loudly on any shape-trace deviation."""
    return MthlNetwork(config, seed=seed, dtype=dtype)


class MthlClassifier(BaseEstimator):
    """Joint two-task classifier over integer class indices.

    fit(X, y_mid, y_top) trains both heads with a summed cross-entropy;
    predict(X) returns (mid, top) argmax labels. Standardize X first; the
    training history carries per-epoch losses and macro-F1 per task.
    """

    def __init__(self, top_loss_weight=1.0, residual_blocks=1,
                 hierarchy_input="logits", batch_size=200, epochs=100,
                 lr=0.001, seed=0, early_stop_f1=None):
        self.top_loss_weight = top_loss_weight
        self.residual_blocks = residual_blocks
        self.hierarchy_input = hierarchy_input
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.early_stop_f1 = early_stop_f1

    def _make_config(self, n_mid, n_top, input_width):
        return MthlConfig(n_mid=n_mid, n_top=n_top, input_width=input_width,
                          residual_blocks=self.residual_blocks,
                          top_loss_weight=self.top_loss_weight,
                          hierarchy_input=self.hierarchy_input)

    def fit(self, X, y_mid, y_top, X_val=None, y_val_mid=None,
            y_val_top=None):
        X = check_matrix(X).astype(np.float32)
        if y_mid is None or y_top is None:
            raise MissingLabel("every row needs both a mid and a top label")
        y_mid = check_labels(y_mid, X.shape[0], "y_mid")
        y_top = check_labels(y_top, X.shape[0], "y_top")
        n_mid = int(y_mid.max()) + 1
        n_top = int(y_top.max()) + 1
        if y_val_mid is not None:
            n_mid = max(n_mid, int(np.max(y_val_mid)) + 1)
        if y_val_top is not None:
            n_top = max(n_top, int(np.max(y_val_top)) + 1)
        n_mid, n_top = max(n_mid, 2), max(n_top, 2)
        config = self._make_config(n_mid, n_top, X.shape[1])
        self.network_ = build_model(config, seed=self.seed)
        optimizer = Adam(self.network_.params(), lr=self.lr)
        rng = np.random.default_rng([self.seed, 1])
        self.history_ = []
        for epoch in range(self.epochs):
            loss_sum = 0.0
            rows = 0
            for batch_index, batch in enumerate(
                    minibatches(X.shape[0], self.batch_size, rng)):
                mid_logits, top_logits = self.network_.forward(X[batch],
                                                               train=True)
                loss_mid, d_mid = softmax_xent(mid_logits, y_mid[batch])
                loss_top, d_top = softmax_xent(top_logits, y_top[batch])
                joint = loss_mid + self.top_loss_weight * loss_top
                if not np.isfinite(joint):
                    raise NonFiniteLoss(f"non-finite loss at epoch {epoch}, "
                                        f"batch {batch_index}")
                self.network_.backward(
                    d_mid, (self.top_loss_weight * d_top).astype(d_top.dtype))
                optimizer.step(self.network_.grads())
                loss_sum += joint * batch.size
                rows += batch.size
            entry = {"epoch": epoch, "train_loss": loss_sum / max(rows, 1)}
            pred_mid, pred_top = self.predict(X)
            entry["train_f1_mid"] = task_macro_f1(y_mid, pred_mid, n_mid)
            entry["train_f1_top"] = task_macro_f1(y_top, pred_top, n_top)
            if X_val is not None and len(X_val):
                entry.update(self._validate(X_val, y_val_mid, y_val_top,
                                            n_mid, n_top))
            self.history_.append(entry)
            if (self.early_stop_f1 is not None
                    and entry["train_f1_mid"] >= self.early_stop_f1
                    and entry["train_f1_top"] >= self.early_stop_f1):
                break
        return self

    def _validate(self, X_val, y_val_mid, y_val_top, n_mid, n_top):
        X_val = check_matrix(X_val).astype(np.float32)
        mid_logits, top_logits = self._forward_eval(X_val)
        out = {}
        if y_val_mid is not None and y_val_top is not None:
            y_val_mid = check_labels(y_val_mid, X_val.shape[0], "y_val_mid")
            y_val_top = check_labels(y_val_top, X_val.shape[0], "y_val_top")
            loss_mid, _ = softmax_xent(mid_logits, y_val_mid)
            loss_top, _ = softmax_xent(top_logits, y_val_top)
            out["val_loss"] = loss_mid + self.top_loss_weight * loss_top
            out["val_f1_mid"] = task_macro_f1(
                y_val_mid, mid_logits.argmax(axis=1), n_mid)
            out["val_f1_top"] = task_macro_f1(
                y_val_top, top_logits.argmax(axis=1), n_top)
        return out

    def _forward_eval(self, X, batch_size=1024):
        mids, tops = [], []
        for start in range(0, X.shape[0], batch_size):
            mid, top = self.network_.forward(
                X[start:start + batch_size].astype(np.float32), train=False)
            mids.append(mid)
            tops.append(top)
        return np.concatenate(mids), np.concatenate(tops)

    def predict(self, X):
        X = check_matrix(X)
        mid_logits, top_logits = self._forward_eval(X)
        return mid_logits.argmax(axis=1), top_logits.argmax(axis=1)
