"""Plaintext HTTP/1.x features: six fields from the first request line,
request headers, and first response status line of a flow.

Methods map to a small integer enum (GET=1, POST=2, HEAD=3, PUT=4, DELETE=5,
anything else 0); absent numeric fields are -1 (0 for http_code), absent
strings are empty. Header sections beyond 16 KiB are parsed as far as they
fit.
"""

METHOD_CODES = {"GET": 1, "POST": 2, "HEAD": 3, "PUT": 4, "DELETE": 5}
_HEADER_LIMIT = 16 * 1024


def _decode_head(payload):
    head = payload[:_HEADER_LIMIT].split(b"\r\n\r\n", 1)[0]
    try:
        return head.decode("latin-1")
    except UnicodeDecodeError:  # latin-1 never fails, kept for symmetry
        return ""


def _header_value(lines, name):
    for line in lines[1:]:
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        if key.strip().lower() == name:
            return value.strip()
    return ""


def _parse_request(payload):
    head = _decode_head(payload)
    lines = head.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) != 3 or not parts[2].startswith("HTTP/1."):
        return None
    method, uri, _ = parts
    if not method.isupper() or not method.isalpha():
        return None
    return {
        "http_method": METHOD_CODES.get(method, 0),
        "http_uri": uri,
        "http_host": _header_value(lines, "host"),
    }


def _parse_response(payload):
    head = _decode_head(payload)
    lines = head.split("\r\n")
    parts = lines[0].split(" ", 2)
    if len(parts) < 2 or not parts[0].startswith("HTTP/1."):
        return None
    try:
        code = int(parts[1])
    except ValueError:
        return None
    if not 100 <= code <= 599:
        return None
    length = _header_value(lines, "content-length")
    try:
        content_len = int(length) if length else -1
    except ValueError:
        content_len = -1
    return {
        "http_code": code,
        "http_content_len": content_len,
        "http_content_type": _header_value(lines, "content-type"),
    }


def extract_http(flow):
    """HTTP feature block for the flow, or None when neither the first
    request nor the first response parses."""
    if flow.key.proto != 6:
        return None
    request = None
    response = None
    for pkt in flow.fwd_pkts:
        if pkt.payload:
            request = _parse_request(pkt.payload)
            break
    for pkt in flow.rev_pkts:
        if pkt.payload:
            response = _parse_response(pkt.payload)
            break
    if request is None and response is None:
        return None
    features = {
        "http_method": -1, "http_code": 0, "http_content_len": -1,
        "http_uri": "", "http_host": "", "http_content_type": "",
    }
    if request is not None:
        features.update(request)
    if response is not None:
        features.update(response)
    return features
