"""Anonymization, hierarchical labeling, and deterministic dataset splits.

The pipeline mirrors the preparation steps the records feed into: replace
addresses with keyed-hash tokens, attach top/mid(/fine) labels from a
trace-name manifest, then cut each mid-level stratum 8:1:1 into train,
test-std and test-challenge with a seeded shuffle. Test-set labels are
returned separately so they can be withheld.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import logging
import random
from dataclasses import dataclass

logger = logging.getLogger(__name__)

LEVELS = ("top", "mid", "fine")


class UnmatchedTrace(ValueError):
    """A record's source trace has no (or no unique) manifest entry."""


class NoLabelsAtLevel(ValueError):
    """No record carries a label at the requested level."""


def mask_addresses(records, salt: str):
    """Replace sa/da with keyed-hash tokens; same address, same token."""
    if not salt:
        raise ValueError("salt must be nonempty")
    key = salt.encode("utf-8")
    cache: dict[str, str] = {}

    def token(addr: str) -> str:
        tok = cache.get(addr)
        if tok is None:
            tok = hashlib.blake2b(addr.encode("utf-8"), key=key,
                                  digest_size=8).hexdigest()
            cache[addr] = tok
        return tok

    for rec in records:
        rec.sa = token(rec.sa)
        rec.da = token(rec.da)
    return records


@dataclass
class ManifestEntry:
    pattern: str
    top: str
    mid: str
    fine: str | None = None
    dataset: str = ""


class LabelManifest:
    """Ordered trace-name patterns, each carrying hierarchical labels."""

    def __init__(self, entries: list[ManifestEntry]):
        self.entries = entries

    @classmethod
    def from_json(cls, path) -> "LabelManifest":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        entries = [ManifestEntry(pattern=e["pattern"], top=e["top"],
                                 mid=e["mid"], fine=e.get("fine"),
                                 dataset=e.get("dataset", ""))
                   for e in raw["entries"]]
        return cls(entries)

    def match(self, trace: str) -> ManifestEntry:
        hits = [e for e in self.entries if fnmatch.fnmatch(trace, e.pattern)]
        if not hits:
            raise UnmatchedTrace(f"no manifest entry matches trace {trace!r}")
        if len(hits) > 1:
            patterns = ", ".join(e.pattern for e in hits)
            raise UnmatchedTrace(
                f"trace {trace!r} matches multiple entries: {patterns}")
        return hits[0]


def assign_labels(records, manifest: LabelManifest):
    """Attach labels (and dataset tags) per source trace; raises
    UnmatchedTrace listing every offending file before touching anything."""
    records = list(records)
    unmatched = []
    matches = []
    for rec in records:
        try:
            matches.append(manifest.match(rec.trace))
        except UnmatchedTrace as exc:
            matches.append(None)
            unmatched.append(str(exc))
    if unmatched:
        raise UnmatchedTrace("; ".join(sorted(set(unmatched))))
    for rec, entry in zip(records, matches):
        labels = {"top": entry.top, "mid": entry.mid}
        if entry.fine is not None:
            labels["fine"] = entry.fine
        rec.labels = labels
        rec.dataset = entry.dataset
    return records


@dataclass
class DatasetSplit:
    train: list
    test_std: list
    test_challenge: list

    def all_ids(self):
        return ([r.id for r in self.train] + [r.id for r in self.test_std]
                + [r.id for r in self.test_challenge])


def split_dataset(records, ratio=(8, 1, 1), seed: int = 0) -> DatasetSplit:
    """Stratified (by mid label) seeded shuffle and proportional cut.

    Strata smaller than sum(ratio) go entirely to train with a warning.
    Record ids are reassigned sequentially after the shuffle so they carry
    no temporal ordering.
    """
    if any(r <= 0 for r in ratio):
        raise ValueError("ratio parts must be positive")
    records = list(records)
    strata: dict[str, list] = {}
    for rec in records:
        if not rec.labels or "mid" not in rec.labels:
            raise NoLabelsAtLevel("records must carry mid-level labels")
        strata.setdefault(rec.labels["mid"], []).append(rec)

    total = sum(ratio)
    train, test_std, test_challenge = [], [], []
    for label in sorted(strata):
        group = strata[label]
        rng = random.Random(f"{seed}:{label}")
        rng.shuffle(group)
        n = len(group)
        if n < total:
            logger.warning("stratum %r has %d records (< %d); all to train",
                           label, n, total)
            train.extend(group)
            continue
        cut1 = n * ratio[0] // total
        cut2 = n * (ratio[0] + ratio[1]) // total
        train.extend(group[:cut1])
        test_std.extend(group[cut1:cut2])
        test_challenge.extend(group[cut2:])

    next_id = 0
    for part in (train, test_std, test_challenge):
        for rec in part:
            rec.id = next_id
            next_id += 1
    return DatasetSplit(train, test_std, test_challenge)


def withhold_labels(split: DatasetSplit) -> dict:
    """Strip labels off the test records, returning {id: labels}."""
    withheld = {}
    for rec in list(split.test_std) + list(split.test_challenge):
        withheld[rec.id] = rec.labels
        rec.labels = None
    return withheld


def class_stats(records, level: str):
    """(label, count) pairs at one level, labels in alphabetical order."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    counts: dict[str, int] = {}
    for rec in records:
        if rec.labels and level in rec.labels:
            label = rec.labels[level]
            counts[label] = counts.get(label, 0) + 1
    if not counts:
        raise NoLabelsAtLevel(f"no record is labeled at level {level!r}")
    return sorted(counts.items())
