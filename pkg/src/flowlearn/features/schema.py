"""Canonical flow-record schema, version 1.

Fixes the exact per-flow feature set: 23 scalars plus 8 fixed-length count
arrays (31 features) that flatten to 121 numeric columns. The "in"/unprefixed
direction is initiator-to-responder; "rev" is the reply direction. Every
output file carries this schema version and is accompanied by the manifest
below so downstream consumers never have to guess bin edges or column order.

Histogram binning:
  - payload compact counts (pld_ccnt): 16 linear bins, 32 bytes wide,
    last bin open-ended at >= 480 bytes
  - header compact counts (hdr_ccnt): 12 linear bins, 4 bytes wide,
    last bin open-ended at >= 44 bytes
  - inter-arrival compact counts (intervals_ccnt): 16 geometric bins over
    same-direction gaps in milliseconds, edges 0,1,2,4,...,16384, last bin
    open-ended

Auxiliary scalar bins: pld_bin_128 counts payloads > 128 bytes, pld_bin_inf
counts payloads past the last payload-histogram edge, hdr_bin_40 counts
headers <= 40 bytes.
"""

SCHEMA_VERSION = "v1"

PLD_BIN_WIDTH = 32
PLD_BINS = 16
HDR_BIN_WIDTH = 4
HDR_BINS = 12
INTERVAL_BINS = 16
PLD_BIN_128_THRESHOLD = 128
HDR_BIN_40_THRESHOLD = 40

SCALAR_FEATURES = [
    "src_prt", "dst_prt", "bytes_in", "bytes_out", "num_pkts_in",
    "num_pkts_out", "time_length", "pld_max", "pld_mean", "pld_median",
    "pld_var", "pld_distinct", "pld_bin_128", "pld_bin_inf", "hdr_mean",
    "hdr_distinct", "hdr_bin_40", "rev_pld_max", "rev_pld_mean",
    "rev_pld_var", "rev_pld_distinct", "rev_hdr_mean", "rev_hdr_distinct",
]

ARRAY_FEATURES = [
    ("pld_ccnt", PLD_BINS),
    ("rev_pld_ccnt", PLD_BINS),
    ("hdr_ccnt", HDR_BINS),
    ("rev_hdr_ccnt", HDR_BINS),
    ("intervals_ccnt", INTERVAL_BINS),
    ("rev_intervals_ccnt", INTERVAL_BINS),
    ("ack_psh_rst_syn_fin_cnt", 5),
    ("rev_ack_psh_rst_syn_fin_cnt", 5),
]

FEATURE_COUNT = len(SCALAR_FEATURES) + len(ARRAY_FEATURES)
COLUMN_COUNT = len(SCALAR_FEATURES) + sum(n for _, n in ARRAY_FEATURES)

assert FEATURE_COUNT == 31
assert COLUMN_COUNT == 121


def pld_bin(payload_len: int) -> int:
    return min(payload_len // PLD_BIN_WIDTH, PLD_BINS - 1)


def hdr_bin(header_len: int) -> int:
    return min(header_len // HDR_BIN_WIDTH, HDR_BINS - 1)


def interval_bin(gap_seconds: float) -> int:
    ms = gap_seconds * 1e3
    if ms < 1.0:
        return 0
    bin_index = 1
    edge = 1.0
    while bin_index < INTERVAL_BINS - 1 and ms >= edge * 2:
        edge *= 2
        bin_index += 1
    return bin_index


def column_names() -> list:
    """The 121 matrix column names, scalars first, arrays expanded."""
    names = list(SCALAR_FEATURES)
    for name, length in ARRAY_FEATURES:
        names.extend(f"{name}_{i}" for i in range(length))
    return names


def schema_manifest() -> dict:
    """Machine-readable schema description shipped next to every output."""
    return {
        "schema_version": SCHEMA_VERSION,
        "scalar_features": list(SCALAR_FEATURES),
        "array_features": [[name, length] for name, length in ARRAY_FEATURES],
        "column_count": COLUMN_COUNT,
        "columns": column_names(),
        "bins": {
            "pld_ccnt": {"width_bytes": PLD_BIN_WIDTH, "count": PLD_BINS,
                         "last_open": True},
            "hdr_ccnt": {"width_bytes": HDR_BIN_WIDTH, "count": HDR_BINS,
                         "last_open": True},
            "intervals_ccnt": {"unit": "ms", "edges_ms":
                               [0, 1] + [2 ** i for i in range(1, 15)],
                               "count": INTERVAL_BINS, "last_open": True},
            "pld_bin_128": {"counts": "payload > 128 bytes"},
            "pld_bin_inf": {"counts": "payload >= 480 bytes"},
            "hdr_bin_40": {"counts": "header <= 40 bytes"},
        },
        "policies": {
            "per_direction_packet_cap": 48,
            "post_cap_packets": "advance time_end only; excluded from all "
                                "derived statistics",
            "absent_scalar": -1,
            "absent_string": "",
        },
    }
