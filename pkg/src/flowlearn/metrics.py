"""Confusion matrices, macro-averaged F1, and per-scenario reports.

Macro-F1 policy: a class whose precision and recall are both zero
contributes F1 = 0 (never-predicted classes are penalized, which matters
with imbalanced data); classes with zero support and zero predictions are
left out of the average entirely. Every report states this policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MACRO_F1_POLICY = ("per-class F1 = 2PR/(P+R), 0 when P+R = 0; classes with "
                   "zero support and zero predictions excluded from the mean")


class UnknownLabel(ValueError):
    pass


class VocabularyMismatch(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class
    classes: list

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(y_true, y_pred, vocabulary) -> ConfusionMatrix:
    y_true, y_pred = list(y_true), list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f"{len(y_true)} true vs {len(y_pred)} predicted")
    index = {label: i for i, label in enumerate(vocabulary)}
    counts = np.zeros((len(vocabulary), len(vocabulary)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index:
            raise UnknownLabel(f"true label {t!r} not in vocabulary")
        if p not in index:
            raise UnknownLabel(f"predicted label {p!r} not in vocabulary")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts, list(vocabulary))


def per_class_metrics(cm: ConfusionMatrix) -> list:
    rows = []
    counts = cm.counts
    for i, name in enumerate(cm.classes):
        tp = int(counts[i, i])
        support = int(counts[i, :].sum())
        predicted = int(counts[:, i].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        rows.append({"class": name, "precision": precision, "recall": recall,
                     "f1": f1, "support": support, "predicted": predicted})
    return rows


def macro_f1(cm: ConfusionMatrix) -> float:
    scores = [row["f1"] for row in per_class_metrics(cm)
              if row["support"] or row["predicted"]]
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {"macro_f1_policy": MACRO_F1_POLICY, "scenarios": self.rows,
                   "notes": self.notes}
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        header = f"{'scenario':<28}{'model':<10}{'macro_f1':>10}{'rows':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for row in self.rows:
            scenario = f"{row['dataset']}-{row['level']}"
            lines.append(f"{scenario:<28}{row['model']:<10}"
                         f"{row['macro_f1']:>10.4f}{row['support']:>8}")
        for row in self.rows:
            lines.append("")
            lines.append(f"[{row['dataset']}-{row['level']} / {row['model']}]"
                         " per-class precision/recall/F1/support")
            for cls in row["per_class"]:
                lines.append(f"  {cls['class']:<24}{cls['precision']:>8.4f}"
                             f"{cls['recall']:>8.4f}{cls['f1']:>8.4f}"
                             f"{cls['support']:>8}")
        for note in self.notes:
            lines.append("")
            lines.append(f"note: {note}")
        lines.append("")
        lines.append(f"macro-F1 policy: {MACRO_F1_POLICY}")
        return "\n".join(lines) + "\n"


def scenario_report(entries) -> EvalReport:
    """One report row per (dataset, level, model) entry.

    Each entry is a dict with model, dataset, level, y_true, y_pred,
    vocabulary. Entries with no rows are dropped with a note.
    """
    report = EvalReport()
    for entry in entries:
        if not len(entry["y_true"]):
            report.notes.append(
                f"scenario {entry['dataset']}-{entry['level']} omitted: "
                "no rows in input")
            continue
        cm = confusion(entry["y_true"], entry["y_pred"],
                       entry["vocabulary"])
        report.rows.append({
            "model": entry["model"],
            "dataset": entry["dataset"],
            "level": entry["level"],
            "macro_f1": macro_f1(cm),
            "support": cm.total,
            "per_class": per_class_metrics(cm),
            "confusion": cm.counts.tolist(),
            "classes": list(cm.classes),
        })
    return report
