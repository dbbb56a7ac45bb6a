import copy
import re

import pytest

from flowlearn.dataset import (LabelManifest, ManifestEntry, NoLabelsAtLevel,
                               UnmatchedTrace, assign_labels, class_stats,
                               mask_addresses, split_dataset,
                               withhold_labels)
from flowlearn.features.records import build_record, serialize_record
from flowlearn.pcap import PacketSpec

from conftest import make_flow

MANIFEST = LabelManifest([
    ManifestEntry("Adload*.pcap", top="Malware", mid="Adload",
                  dataset="lab-malware"),
    ManifestEntry("skype_audio*.pcap", top="Voip", mid="skype",
                  fine="skype_audio", dataset="lab-apps"),
    ManifestEntry("benign*.pcap", top="Benign", mid="Benign",
                  dataset="lab-malware"),
])


def record(i=0, trace="benign-01.pcap", sa="10.0.0.1", da="10.0.0.2"):
    flow = make_flow([PacketSpec(sa, da, 1000 + i, 80, proto=17,
                                 payload=b"x", timestamp=float(i))])
    rec = build_record(flow, record_id=i, trace=trace)
    rec.sa, rec.da = sa, da
    return rec


class TestMasking:
    def test_shared_address_same_token(self):
        recs = mask_addresses([record(0), record(1)], salt="s1")
        assert recs[0].sa == recs[1].sa
        assert recs[0].sa != recs[0].da

    def test_salt_changes_tokens(self):
        a = mask_addresses([record(0)], salt="s1")[0]
        b = mask_addresses([record(0)], salt="s2")[0]
        assert a.sa != b.sa

    def test_no_input_address_survives(self):
        recs = mask_addresses([record(i) for i in range(5)], salt="s")
        corpus = "\n".join(serialize_record(r) for r in recs)
        assert "10.0.0.1" not in corpus
        assert "10.0.0.2" not in corpus
        assert not re.search(r"\b\d{1,3}(\.\d{1,3}){3}\b", corpus)

    def test_empty_salt_rejected(self):
        with pytest.raises(ValueError):
            mask_addresses([record(0)], salt="")


class TestLabels:
    def test_malware_trace(self):
        recs = assign_labels([record(0, trace="Adload-3.pcap")], MANIFEST)
        assert recs[0].labels == {"top": "Malware", "mid": "Adload"}
        assert recs[0].dataset == "lab-malware"

    def test_fine_grained_trace(self):
        recs = assign_labels([record(0, trace="skype_audio1a.pcap")],
                             MANIFEST)
        assert recs[0].labels == {"top": "Voip", "mid": "skype",
                                  "fine": "skype_audio"}

    def test_empty_input(self):
        assert assign_labels([], MANIFEST) == []

    def test_unmatched_trace_lists_files(self):
        records = [record(0), record(1, trace="mystery.pcap")]
        with pytest.raises(UnmatchedTrace, match="mystery.pcap"):
            assign_labels(records, MANIFEST)


def labeled_records(per_class):
    recs = []
    i = 0
    for mid, count in per_class.items():
        for _ in range(count):
            rec = record(i)
            rec.labels = {"top": "T", "mid": mid}
            recs.append(rec)
            i += 1
    return recs


class TestSplit:
    def test_exact_proportions(self):
        split = split_dataset(labeled_records({"A": 100}), seed=3)
        assert (len(split.train), len(split.test_std),
                len(split.test_challenge)) == (80, 10, 10)

    def test_determinism(self):
        recs = labeled_records({"A": 40, "B": 60})

        def train_members(seed):
            split = split_dataset(copy.deepcopy(recs), seed=seed)
            return {r.metadata["src_prt"] for r in split.train}

        assert train_members(5) == train_members(5)
        assert train_members(5) != train_members(6)

    def test_per_stratum_cuts(self):
        recs = labeled_records({"A": 20, "B": 100})
        split = split_dataset(recs, seed=0)
        for part, a_want, b_want in ((split.train, 16, 80),
                                     (split.test_std, 2, 10),
                                     (split.test_challenge, 2, 10)):
            mids = [r.labels["mid"] for r in part]
            assert mids.count("A") == a_want
            assert mids.count("B") == b_want

    def test_partition(self):
        recs = labeled_records({"A": 33, "B": 45, "C": 17})
        split = split_dataset(recs, seed=9)
        ids = split.all_ids()
        assert len(ids) == len(set(ids)) == 95

    def test_tiny_stratum_goes_to_train(self, caplog):
        recs = labeled_records({"A": 7, "B": 50})
        with caplog.at_level("WARNING"):
            split = split_dataset(recs, seed=1)
        assert sum(r.labels["mid"] == "A" for r in split.train) == 7
        assert "stratum" in caplog.text

    def test_withhold_labels(self):
        recs = labeled_records({"A": 50})
        split = split_dataset(recs, seed=2)
        withheld = withhold_labels(split)
        assert len(withheld) == 10
        assert all(r.labels is None for r in split.test_std)
        assert all(r.labels is not None for r in split.train)
        assert all(v == {"top": "T", "mid": "A"} for v in withheld.values())


class TestClassStats:
    def test_counts_sorted_alphabetically(self):
        recs = labeled_records({"B": 1, "A": 2})
        assert class_stats(recs, "mid") == [("A", 2), ("B", 1)]

    def test_missing_level(self):
        recs = labeled_records({"A": 3})
        with pytest.raises(NoLabelsAtLevel):
            class_stats(recs, "fine")

    def test_stats_partition_consistency(self):
        recs = labeled_records({"A": 30, "B": 70})
        before = class_stats(recs, "mid")
        split = split_dataset(recs, seed=4)
        combined = split.train + split.test_std + split.test_challenge
        assert class_stats(combined, "mid") == before


class TestPreparedRecordShape:
    def test_no_time_start_or_end_anywhere(self):
        recs = assign_labels(
            mask_addresses([record(0, trace="benign.pcap")], salt="x"),
            MANIFEST)
        line = serialize_record(recs[0])
        assert "time_length" in line
        assert "time_start" not in line
        assert "time_end" not in line
