"""Protocol-independent per-flow statistics (schema v1 metadata block)."""

from statistics import median

from . import schema


def _stats(values):
    """max / mean / median / population variance / distinct of a count list."""
    if not values:
        return 0, 0.0, 0.0, 0.0, 0
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return max(values), mean, float(median(values)), var, len(set(values))


def _histogram(values, bin_of, nbins):
    counts = [0] * nbins
    for v in values:
        counts[bin_of(v)] += 1
    return counts


def _gaps(packets):
    return [b.timestamp - a.timestamp for a, b in zip(packets, packets[1:])]


def _flag_counts(packets):
    # order: ACK, PSH, RST, SYN, FIN
    counts = [0] * 5
    for p in packets:
        for i, bit in enumerate((0x10, 0x08, 0x04, 0x02, 0x01)):
            if p.tcp_flags & bit:
                counts[i] += 1
    return counts


def extract_metadata(flow) -> dict:
    """Compute the 31 metadata features from a flow's stored packets.

    Keys come out in schema order; flows with an empty direction get
    zero-valued statistics and all-zero histograms on that side.
    """
    fwd, rev = flow.fwd_pkts, flow.rev_pkts
    fwd_pld = [p.payload_len for p in fwd]
    rev_pld = [p.payload_len for p in rev]
    fwd_hdr = [p.header_len for p in fwd]
    rev_hdr = [p.header_len for p in rev]

    pld_max, pld_mean, pld_median, pld_var, pld_distinct = _stats(fwd_pld)
    rev_pld_max, rev_pld_mean, _, rev_pld_var, rev_pld_distinct = \
        _stats(rev_pld)
    _, hdr_mean, _, _, hdr_distinct = _stats(fwd_hdr)
    _, rev_hdr_mean, _, _, rev_hdr_distinct = _stats(rev_hdr)

    meta = {
        "src_prt": flow.key.endpoint_a[1],
        "dst_prt": flow.key.endpoint_b[1],
        "bytes_in": sum(fwd_pld),
        "bytes_out": sum(rev_pld),
        "num_pkts_in": len(fwd),
        "num_pkts_out": len(rev),
        "time_length": flow.time_end - flow.time_start,
        "pld_max": pld_max,
        "pld_mean": pld_mean,
        "pld_median": pld_median,
        "pld_var": pld_var,
        "pld_distinct": pld_distinct,
        "pld_bin_128": sum(1 for v in fwd_pld
                           if v > schema.PLD_BIN_128_THRESHOLD),
        "pld_bin_inf": sum(1 for v in fwd_pld
                           if v >= schema.PLD_BIN_WIDTH * (schema.PLD_BINS - 1)),
        "hdr_mean": hdr_mean,
        "hdr_distinct": hdr_distinct,
        "hdr_bin_40": sum(1 for v in fwd_hdr
                          if v <= schema.HDR_BIN_40_THRESHOLD),
        "rev_pld_max": rev_pld_max,
        "rev_pld_mean": rev_pld_mean,
        "rev_pld_var": rev_pld_var,
        "rev_pld_distinct": rev_pld_distinct,
        "rev_hdr_mean": rev_hdr_mean,
        "rev_hdr_distinct": rev_hdr_distinct,
        "pld_ccnt": _histogram(fwd_pld, schema.pld_bin, schema.PLD_BINS),
        "rev_pld_ccnt": _histogram(rev_pld, schema.pld_bin, schema.PLD_BINS),
        "hdr_ccnt": _histogram(fwd_hdr, schema.hdr_bin, schema.HDR_BINS),
        "rev_hdr_ccnt": _histogram(rev_hdr, schema.hdr_bin, schema.HDR_BINS),
        "intervals_ccnt": _histogram(_gaps(fwd), schema.interval_bin,
                                     schema.INTERVAL_BINS),
        "rev_intervals_ccnt": _histogram(_gaps(rev), schema.interval_bin,
                                         schema.INTERVAL_BINS),
        "ack_psh_rst_syn_fin_cnt": _flag_counts(fwd),
        "rev_ack_psh_rst_syn_fin_cnt": _flag_counts(rev),
    }
    return meta
