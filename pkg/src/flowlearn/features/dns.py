"""DNS query/answer features over UDP port-53 payloads.

Question entries are counted from query messages (QR=0) and answer records
from responses (QR=1), aggregated across every packet of the flow. Name
decompression follows pointers with a visited-offset loop guard; a
decompression loop or truncated message stops parsing of that message while
keeping entries already parsed.
"""

import ipaddress
import struct

DNS_PORT = 53
TYPE_A = 1
TYPE_AAAA = 28
_MAX_NAME_LEN = 255


class _Truncated(Exception):
    pass


def _parse_name(msg, pos):
    labels = []
    visited = set()
    jumped_to = None
    while True:
        if pos >= len(msg):
            raise _Truncated
        length = msg[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(msg):
                raise _Truncated
            target = struct.unpack(">H", msg[pos:pos + 2])[0] & 0x3FFF
            if target in visited:
                raise _Truncated  # compression loop
            visited.add(target)
            if jumped_to is None:
                jumped_to = pos + 2
            pos = target
        elif length == 0:
            end = jumped_to if jumped_to is not None else pos + 1
            return ".".join(labels), end
        else:
            if pos + 1 + length > len(msg):
                raise _Truncated
            labels.append(msg[pos + 1:pos + 1 + length].decode("ascii",
                                                               "replace"))
            pos += 1 + length
            if sum(len(l) + 1 for l in labels) > _MAX_NAME_LEN:
                raise _Truncated


def _rdata_ip(rtype, rdata):
    if rtype == TYPE_A and len(rdata) == 4:
        return str(ipaddress.IPv4Address(rdata))
    if rtype == TYPE_AAAA and len(rdata) == 16:
        return str(ipaddress.IPv6Address(rdata))
    return ""


def _parse_message(msg, features):
    """Fold one message's entries into the feature dict; stops at the first
    truncation, keeping whatever was already appended."""
    if len(msg) < 12:
        return False
    _, flags, qdcount, ancount, _, _ = struct.unpack(">HHHHHH", msg[:12])
    is_response = bool(flags & 0x8000)
    pos = 12
    parsed_something = False
    try:
        for _ in range(qdcount):
            name, pos = _parse_name(msg, pos)
            if pos + 4 > len(msg):
                raise _Truncated
            qtype, qclass = struct.unpack(">HH", msg[pos:pos + 4])
            pos += 4
            if not is_response:
                features["dns_query_name"].append(name)
                features["dns_query_type"].append(qtype)
                features["dns_query_class"].append(qclass)
            parsed_something = True
        if is_response:
            for _ in range(ancount):
                name, pos = _parse_name(msg, pos)
                if pos + 10 > len(msg):
                    raise _Truncated
                rtype, _, ttl, rdlen = struct.unpack(">HHIH",
                                                     msg[pos:pos + 10])
                pos += 10
                if pos + rdlen > len(msg):
                    raise _Truncated
                rdata = msg[pos:pos + rdlen]
                pos += rdlen
                features["dns_answer_name"].append(name)
                features["dns_answer_ttl"].append(ttl)
                features["dns_answer_ip"].append(_rdata_ip(rtype, rdata))
                parsed_something = True
    except _Truncated:
        pass
    return parsed_something


def extract_dns(flow):
    """DNS feature block for the flow, or None when it carries no parseable
    UDP port-53 message."""
    if flow.key.proto != 17:
        return None
    if DNS_PORT not in (flow.key.endpoint_a[1], flow.key.endpoint_b[1]):
        return None
    features = {
        "dns_query_cnt": 0,
        "dns_answer_cnt": 0,
        "dns_query_name": [],
        "dns_query_type": [],
        "dns_query_class": [],
        "dns_answer_name": [],
        "dns_answer_ttl": [],
        "dns_answer_ip": [],
    }
    any_parsed = False
    for pkt in list(flow.fwd_pkts) + list(flow.rev_pkts):
        if pkt.payload:
            any_parsed |= _parse_message(pkt.payload, features)
    if not any_parsed:
        return None
    features["dns_query_cnt"] = len(features["dns_query_name"])
    features["dns_answer_cnt"] = len(features["dns_answer_ttl"])
    return features
