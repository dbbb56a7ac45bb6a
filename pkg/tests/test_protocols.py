import struct

from flowlearn.features.dns import extract_dns
from flowlearn.features.http import extract_http
from flowlearn.features.tls import extract_tls
from flowlearn.pcap import PacketSpec

from conftest import make_flow

CLIENT = dict(src_addr="10.0.1.1", dst_addr="10.0.1.2",
              src_port=33000, dst_port=443, proto=6, tcp_flags=0x18)
SERVER = dict(src_addr="10.0.1.2", dst_addr="10.0.1.1",
              src_port=443, dst_port=33000, proto=6, tcp_flags=0x18)


def tls_record(handshake, version=0x0301):
    return bytes([0x16]) + struct.pack(">HH", version, len(handshake)) \
        + handshake


def handshake_msg(msg_type, body):
    return bytes([msg_type]) + len(body).to_bytes(3, "big") + body


def client_hello(suites, extensions, session_id=b"", version=0x0303):
    body = struct.pack(">H", version) + bytes(32)
    body += bytes([len(session_id)]) + session_id
    body += struct.pack(">H", len(suites) * 2)
    body += b"".join(struct.pack(">H", s) for s in suites)
    body += bytes([1, 0])  # one compression method: null
    ext_blob = b"".join(struct.pack(">HH", t, len(p)) + p
                        for t, p in extensions)
    body += struct.pack(">H", len(ext_blob)) + ext_blob
    return tls_record(handshake_msg(1, body))


def server_hello(suite, extensions, session_id=b"", version=0x0303):
    body = struct.pack(">H", version) + bytes(32)
    body += bytes([len(session_id)]) + session_id
    body += struct.pack(">H", suite) + bytes([0])
    ext_blob = b"".join(struct.pack(">HH", t, len(p)) + p
                        for t, p in extensions)
    body += struct.pack(">H", len(ext_blob)) + ext_blob
    return tls_record(handshake_msg(2, body))


def certificate(cert_sizes):
    certs = b"".join(n.to_bytes(3, "big") + b"\xde" * n for n in cert_sizes)
    return tls_record(handshake_msg(11, len(certs).to_bytes(3, "big")
                                    + certs))


class TestTls:
    def test_client_hello_counts(self):
        payload = client_hello(
            suites=[0x1301, 0xC02F],
            extensions=[(0x0000, b"\x00\x0chost"), (0x002B, b"\x02\x03\x04"),
                        (0x0033, b"k" * 38)],
            session_id=b"s" * 16)
        flow = make_flow([PacketSpec(**CLIENT, payload=payload)])
        tls = extract_tls(flow)
        assert tls["tls_cs"] == ["1301", "c02f"]
        assert tls["tls_cs_cnt"] == 2
        assert tls["tls_ext"] == ["0000", "002b", "0033"]
        assert tls["tls_ext_cnt"] == 3
        assert tls["tls_key_exchange_len"] == 38
        assert tls["tls_version"] == 0x0303
        assert tls["tls_session_id_len"] == 16

    def test_one_sided_hello_absent_server_markers(self):
        payload = client_hello(suites=[0x002F], extensions=[])
        flow = make_flow([PacketSpec(**CLIENT, payload=payload)])
        tls = extract_tls(flow)
        assert tls["tls_cs_cnt"] == 1
        assert tls["tls_key_exchange_len"] == 0  # hello without key_share
        assert tls["tls_svr_cs"] == ""
        assert tls["tls_svr_ext"] == []
        assert tls["tls_svr_ext_cnt"] == 0
        assert tls["tls_svr_version"] == -1
        assert tls["tls_svr_session_id_len"] == -1
        assert tls["tls_svr_cert_cnt"] == 0

    def test_full_handshake(self):
        ch = client_hello(suites=[0x1301, 0x1302], extensions=[])
        sh = server_hello(0x1302, [(0x0033, b"k" * 32)])
        cert = certificate([100, 200])
        flow = make_flow([
            PacketSpec(**CLIENT, payload=ch, timestamp=0.0),
            PacketSpec(**SERVER, payload=sh + cert, timestamp=0.1),
        ])
        tls = extract_tls(flow)
        assert tls["tls_svr_cs"] == "1302"
        assert tls["tls_svr_ext_cnt"] == 1
        assert tls["tls_svr_key_exchange_len"] == 32
        assert tls["tls_svr_cert_cnt"] == 2
        assert len(tls) == 14

    def test_plain_http_flow_absent(self):
        flow = make_flow([PacketSpec(**CLIENT,
                                     payload=b"GET / HTTP/1.1\r\n\r\n")])
        assert extract_tls(flow) is None

    def test_garbage_never_raises(self):
        payload = bytes([0x16, 0x03, 0x01, 0x00, 0x08]) + b"\x01\xff\xff\xff"
        flow = make_flow([PacketSpec(**CLIENT, payload=payload)])
        assert extract_tls(flow) is None

    def test_udp_flow_absent(self):
        flow = make_flow([PacketSpec("10.0.1.1", "10.0.1.2", 1, 2, proto=17,
                                     payload=b"\x16\x03\x01")])
        assert extract_tls(flow) is None


def dns_query(qname=b"\x07example\x03com\x00", qtype=1):
    header = struct.pack(">HHHHHH", 0x1234, 0x0100, 1, 0, 0, 0)
    return header + qname + struct.pack(">HH", qtype, 1)


def dns_response(answers, qname=b"\x07example\x03com\x00", qtype=1):
    header = struct.pack(">HHHHHH", 0x1234, 0x8180, 1, len(answers), 0, 0)
    msg = header + qname + struct.pack(">HH", qtype, 1)
    for ttl, ip in answers:
        msg += b"\xc0\x0c"  # name pointer to the question at offset 12
        msg += struct.pack(">HHIH", 1, 1, ttl, 4)
        msg += bytes(int(o) for o in ip.split("."))
    return msg


QUERY_SIDE = dict(src_addr="10.0.2.1", dst_addr="10.0.2.53",
                  src_port=5555, dst_port=53, proto=17)
ANSWER_SIDE = dict(src_addr="10.0.2.53", dst_addr="10.0.2.1",
                   src_port=53, dst_port=5555, proto=17)


class TestDns:
    def test_single_query(self):
        flow = make_flow([PacketSpec(**QUERY_SIDE, payload=dns_query())])
        dns = extract_dns(flow)
        assert dns["dns_query_cnt"] == 1
        assert dns["dns_query_name"] == ["example.com"]
        assert dns["dns_query_type"] == [1]
        assert dns["dns_query_class"] == [1]
        assert dns["dns_answer_cnt"] == 0

    def test_response_with_two_answers(self):
        payload = dns_response([(300, "93.184.216.34"), (600, "1.2.3.4")])
        flow = make_flow([PacketSpec(**ANSWER_SIDE, payload=payload)])
        dns = extract_dns(flow)
        assert dns["dns_answer_cnt"] == 2
        assert dns["dns_answer_ttl"] == [300, 600]
        assert dns["dns_answer_ip"] == ["93.184.216.34", "1.2.3.4"]
        assert dns["dns_answer_name"] == ["example.com", "example.com"]

    def test_query_response_pair_counts_once(self):
        flow = make_flow([
            PacketSpec(**QUERY_SIDE, payload=dns_query(), timestamp=0.0),
            PacketSpec(**ANSWER_SIDE, payload=dns_response([(60, "1.1.1.1")]),
                       timestamp=0.05),
        ])
        dns = extract_dns(flow)
        assert dns["dns_query_cnt"] == 1  # repeated question not re-counted
        assert dns["dns_answer_cnt"] == 1

    def test_port_5353_is_absent(self):
        flow = make_flow([PacketSpec("10.0.2.1", "10.0.2.2", 5353, 5353,
                                     proto=17, payload=dns_query())])
        assert extract_dns(flow) is None

    def test_compression_loop_keeps_parsed_entries(self):
        header = struct.pack(">HHHHHH", 1, 0x0100, 2, 0, 0, 0)
        good = b"\x02ok\x00" + struct.pack(">HH", 1, 1)
        looped = b"\xc0\x10"  # points at itself (offset 16)
        payload = header + good + looped
        flow = make_flow([PacketSpec(**QUERY_SIDE, payload=payload)])
        dns = extract_dns(flow)
        assert dns["dns_query_name"] == ["ok"]
        assert dns["dns_query_cnt"] == 1

    def test_truncated_message(self):
        payload = dns_query()[:-3]
        flow = make_flow([PacketSpec(**QUERY_SIDE, payload=payload)])
        assert extract_dns(flow) is None


WEB_CLIENT = dict(src_addr="10.0.3.1", dst_addr="10.0.3.2",
                  src_port=40000, dst_port=80, proto=6, tcp_flags=0x18)
WEB_SERVER = dict(src_addr="10.0.3.2", dst_addr="10.0.3.1",
                  src_port=80, dst_port=40000, proto=6, tcp_flags=0x18)


class TestHttp:
    def test_request_response(self):
        flow = make_flow([
            PacketSpec(**WEB_CLIENT, timestamp=0.0,
                       payload=b"GET /a HTTP/1.1\r\nHost: x.com\r\n\r\n"),
            PacketSpec(**WEB_SERVER, timestamp=0.1,
                       payload=b"HTTP/1.1 200 OK\r\nContent-Length: 5\r\n"
                               b"Content-Type: text/plain\r\n\r\nhello"),
        ])
        http = extract_http(flow)
        assert http == {
            "http_method": 1, "http_code": 200, "http_content_len": 5,
            "http_uri": "/a", "http_host": "x.com",
            "http_content_type": "text/plain",
        }

    def test_tls_flow_absent(self):
        payload = client_hello(suites=[0x1301], extensions=[])
        flow = make_flow([PacketSpec(**WEB_CLIENT, payload=payload)])
        assert extract_http(flow) is None

    def test_unknown_verb_maps_to_other(self):
        flow = make_flow([PacketSpec(**WEB_CLIENT,
                                     payload=b"BREW /pot HTTP/1.1\r\n\r\n")])
        assert extract_http(flow)["http_method"] == 0

    def test_request_only_markers(self):
        flow = make_flow([PacketSpec(**WEB_CLIENT,
                                     payload=b"POST /u HTTP/1.1\r\n\r\n")])
        http = extract_http(flow)
        assert http["http_method"] == 2
        assert http["http_code"] == 0
        assert http["http_content_len"] == -1
        assert http["http_content_type"] == ""
