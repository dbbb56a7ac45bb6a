"""TLS handshake features: 7 client-side + 7 server-side per flow.

ClientHello is taken from the initiator direction, ServerHello/Certificate
from the reply direction, scanning per-packet TCP payloads (no stream
reassembly). Ciphersuite and extension codes are kept verbatim as 4-digit
hex strings, GREASE included. Key-exchange length is the key_share
extension payload length, 0 when the hello carries no key_share.

Absent markers: a side with no parsed hello gets -1 scalars, "" strings and
empty lists (counts stay equal to list lengths).
"""

import logging
import struct

logger = logging.getLogger(__name__)

RECORD_HANDSHAKE = 0x16
MSG_CLIENT_HELLO = 1
MSG_SERVER_HELLO = 2
MSG_CERTIFICATE = 11
EXT_KEY_SHARE = 0x0033
KNOWN_VERSIONS = {0x0300, 0x0301, 0x0302, 0x0303, 0x0304}

_ABSENT_CLIENT = {
    "tls_cs": [], "tls_cs_cnt": 0, "tls_ext": [], "tls_ext_cnt": 0,
    "tls_key_exchange_len": -1, "tls_version": -1, "tls_session_id_len": -1,
}
_ABSENT_SERVER = {
    "tls_svr_cs": "", "tls_svr_ext": [], "tls_svr_ext_cnt": 0,
    "tls_svr_key_exchange_len": -1, "tls_svr_version": -1,
    "tls_svr_session_id_len": -1, "tls_svr_cert_cnt": 0,
}


def _parse_extensions(data):
    """List of (hex type, payload length); None when layout is inconsistent."""
    if len(data) < 2:
        return None
    total, = struct.unpack(">H", data[:2])
    if total > len(data) - 2:
        return None
    out = []
    pos = 2
    end = 2 + total
    while pos + 4 <= end:
        ext_type, ext_len = struct.unpack(">HH", data[pos:pos + 4])
        if pos + 4 + ext_len > end:
            return None
        out.append((f"{ext_type:04x}", ext_len))
        pos += 4 + ext_len
    return out


def _key_share_len(extensions):
    for ext_type, ext_len in extensions:
        if int(ext_type, 16) == EXT_KEY_SHARE:
            return ext_len
    return 0


def _parse_client_hello(body):
    if len(body) < 35:
        return None
    version, = struct.unpack(">H", body[:2])
    if version not in KNOWN_VERSIONS:
        return None
    pos = 34  # version + random
    sid_len = body[pos]
    pos += 1 + sid_len
    if pos + 2 > len(body):
        return None
    cs_len, = struct.unpack(">H", body[pos:pos + 2])
    pos += 2
    if cs_len % 2 or pos + cs_len > len(body):
        return None
    suites = [f"{struct.unpack('>H', body[i:i + 2])[0]:04x}"
              for i in range(pos, pos + cs_len, 2)]
    pos += cs_len
    if pos >= len(body):
        return None
    comp_len = body[pos]
    pos += 1 + comp_len
    extensions = []
    if pos < len(body):
        extensions = _parse_extensions(body[pos:])
        if extensions is None:
            return None
    return {
        "tls_cs": suites,
        "tls_cs_cnt": len(suites),
        "tls_ext": [t for t, _ in extensions],
        "tls_ext_cnt": len(extensions),
        "tls_key_exchange_len": _key_share_len(extensions),
        "tls_version": version,
        "tls_session_id_len": sid_len,
    }


def _parse_server_hello(body):
    if len(body) < 35:
        return None
    version, = struct.unpack(">H", body[:2])
    if version not in KNOWN_VERSIONS:
        return None
    pos = 34
    sid_len = body[pos]
    pos += 1 + sid_len
    if pos + 3 > len(body):
        return None
    suite, = struct.unpack(">H", body[pos:pos + 2])
    pos += 3  # suite + compression method
    extensions = []
    if pos < len(body):
        extensions = _parse_extensions(body[pos:])
        if extensions is None:
            return None
    return {
        "tls_svr_cs": f"{suite:04x}",
        "tls_svr_ext": [t for t, _ in extensions],
        "tls_svr_ext_cnt": len(extensions),
        "tls_svr_key_exchange_len": _key_share_len(extensions),
        "tls_svr_version": version,
        "tls_svr_session_id_len": sid_len,
    }


def _count_certificates(body):
    """Count chain entries; tolerates truncation mid-chain."""
    if len(body) < 3:
        return 0
    chain_len = int.from_bytes(body[:3], "big")
    end = min(3 + chain_len, len(body))
    pos = 3
    count = 0
    while pos + 3 <= end:
        cert_len = int.from_bytes(body[pos:pos + 3], "big")
        count += 1
        pos += 3 + cert_len
    return count


def _iter_handshake_messages(payload):
    """Yield (msg_type, body) for handshake messages whose records start in
    this payload; stops quietly at truncation."""
    pos = 0
    while pos + 5 <= len(payload):
        content_type = payload[pos]
        version, rec_len = struct.unpack(">HH", payload[pos + 1:pos + 5])
        if (content_type != RECORD_HANDSHAKE or version not in KNOWN_VERSIONS
                or rec_len == 0 or rec_len > 18432):
            return
        record = payload[pos + 5:pos + 5 + rec_len]
        mpos = 0
        while mpos + 4 <= len(record):
            msg_type = record[mpos]
            msg_len = int.from_bytes(record[mpos + 1:mpos + 4], "big")
            body = record[mpos + 4:mpos + 4 + msg_len]
            yield msg_type, body, len(body) < msg_len
            mpos += 4 + msg_len
        pos += 5 + rec_len


def extract_tls(flow):
    """TLS feature block for the flow, or None when no handshake is found."""
    if flow.key.proto != 6:
        return None
    client = None
    server = None
    cert_cnt = 0
    for pkt in flow.fwd_pkts:
        if client is not None:
            break
        for msg_type, body, truncated in _iter_handshake_messages(pkt.payload):
            if msg_type == MSG_CLIENT_HELLO:
                if truncated:
                    logger.warning("truncated ClientHello, skipping")
                    continue
                client = _parse_client_hello(body)
                if client is None:
                    logger.warning("malformed ClientHello, skipping")
                else:
                    break
    for pkt in flow.rev_pkts:
        for msg_type, body, truncated in _iter_handshake_messages(pkt.payload):
            if msg_type == MSG_SERVER_HELLO and server is None:
                if truncated:
                    logger.warning("truncated ServerHello, skipping")
                    continue
                parsed = _parse_server_hello(body)
                if parsed is None:
                    logger.warning("malformed ServerHello, skipping")
                else:
                    server = parsed
            elif msg_type == MSG_CERTIFICATE:
                cert_cnt += _count_certificates(body)
    if client is None and server is None:
        return None
    features = dict(client if client is not None else _ABSENT_CLIENT)
    features.update(server if server is not None else _ABSENT_SERVER)
    features["tls_svr_cert_cnt"] = cert_cnt
    return features
