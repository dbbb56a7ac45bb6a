import io
import random
import struct

import pytest

from flowlearn import pcap
from flowlearn.pcap import (LINKTYPE_ETHERNET, LINKTYPE_RAW, DecodedPacket,
                            InvalidSpec, PacketSpec, Skip, TruncatedRecord,
                            UnknownMagic, craft_packet, decode_packet,
                            parse_capture, write_capture)


def capture_bytes(packets, **kwargs):
    buf = io.BytesIO()
    write_capture(buf, packets, **kwargs)
    return buf.getvalue()


class TestParseCapture:
    def test_header_only_file_yields_nothing(self):
        reader = parse_capture(capture_bytes([]))
        assert list(reader) == []
        assert reader.link_type == LINKTYPE_ETHERNET

    def test_unknown_magic(self):
        with pytest.raises(UnknownMagic):
            parse_capture(b"\x00" * 24)

    def test_short_file(self):
        with pytest.raises(UnknownMagic):
            parse_capture(b"\xa1\xb2")

    def test_nanosecond_magic_scales_fraction(self):
        spec = PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=17,
                          timestamp=5.25)
        raw = craft_packet(spec)
        data = capture_bytes([raw], nanosecond=True)
        # independent re-read of the record header straight off the layout
        magic, = struct.unpack("<I", data[:4])
        assert magic == 0xA1B23C4D
        ts_sec, ts_frac = struct.unpack("<II", data[24:32])
        assert (ts_sec, ts_frac) == (5, 250_000_000)
        pkt = next(iter(parse_capture(data)))
        assert pkt.ts_resolution == 1e-9
        assert pkt.timestamp == pytest.approx(5.25, abs=1e-12)

    def test_big_endian_round_trip(self):
        spec = PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=17)
        data = capture_bytes([craft_packet(spec)], byte_order=">")
        pkts = list(parse_capture(data))
        assert len(pkts) == 1
        assert isinstance(decode_packet(pkts[0], LINKTYPE_ETHERNET),
                          DecodedPacket)

    def test_truncated_record_aborts_with_offset(self):
        header = capture_bytes([])
        record = struct.pack("<IIII", 0, 0, 10 ** 6, 10 ** 6) + b"\x00" * 176
        with pytest.raises(TruncatedRecord, match="offset 24"):
            list(parse_capture(header + record))

    def test_timestamps_preserve_order(self):
        specs = [PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=17,
                            timestamp=t)
                 for t in (0.0, 0.000001, 0.5, 1.0, 1.000001)]
        pkts = list(parse_capture(capture_bytes(
            [craft_packet(s) for s in specs])))
        stamps = [p.timestamp for p in pkts]
        assert stamps == sorted(stamps)


class TestDecode:
    def test_hand_built_ipv4_tcp_syn(self):
        # Ethernet + IPv4 + TCP laid out field by field
        eth = b"\x02" + b"\x00" * 5 + b"\x02" + b"\x00" * 5 + b"\x08\x00"
        ip = bytes([0x45, 0]) + struct.pack(">H", 40) + b"\x00" * 4 \
            + bytes([64, 6]) + b"\x00\x00" \
            + bytes([10, 0, 0, 1]) + bytes([10, 0, 0, 2])
        tcp = struct.pack(">HHIIBBHHH", 1234, 80, 0, 0, 5 << 4, 0x02,
                          65535, 0, 0)
        frame = eth + ip + tcp
        raw = pcap.RawPacket(7, 500000, len(frame), len(frame), frame)
        out = decode_packet(raw, LINKTYPE_ETHERNET)
        assert out.tuple == pcap.FiveTuple("10.0.0.1", "10.0.0.2", 1234, 80, 6)
        assert out.tcp_flags == 0x02
        assert out.payload_len == 0
        assert out.ip_header_len == 20
        assert out.transport_header_len == 20
        assert out.timestamp == 7.5

    def test_arp_frame_skipped(self):
        frame = b"\x00" * 12 + b"\x08\x06" + b"\x00" * 28
        raw = pcap.RawPacket(0, 0, len(frame), len(frame), frame)
        assert decode_packet(raw, LINKTYPE_ETHERNET) == Skip("non-ip")

    def test_udp_payload_length(self):
        spec = PacketSpec("10.0.0.1", "10.0.0.2", 5353, 53, proto=17,
                          payload=b"q" * 30)
        out = decode_packet(craft_packet(spec), LINKTYPE_ETHERNET)
        assert out.tuple.proto == 17
        assert out.payload_len == 30
        assert out.payload == b"q" * 30
        assert out.tcp_flags == 0
        assert out.transport_header_len == 8

    def test_vlan_tag_hopped(self):
        raw = craft_packet(PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=17))
        frame = raw.frame
        tagged = frame[:12] + b"\x81\x00\x00\x05" + frame[12:]
        raw2 = pcap.RawPacket(0, 0, len(tagged), len(tagged), tagged)
        out = decode_packet(raw2, LINKTYPE_ETHERNET)
        assert isinstance(out, DecodedPacket)
        assert out.tuple.src_addr == "10.0.0.1"

    def test_raw_ip_link_type(self):
        raw = craft_packet(PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=17))
        inner = pcap.RawPacket(0, 0, len(raw.frame) - 14,
                               len(raw.frame) - 14, raw.frame[14:])
        out = decode_packet(inner, LINKTYPE_RAW)
        assert isinstance(out, DecodedPacket)

    def test_ipv6_round_trip(self):
        spec = PacketSpec("2001:db8::1", "2001:db8::2", 443, 40000,
                          proto=6, tcp_flags=0x10, payload=b"abc")
        out = decode_packet(craft_packet(spec), LINKTYPE_ETHERNET)
        assert out.tuple.src_addr == "2001:db8::1"
        assert out.payload == b"abc"
        assert out.ip_header_len == 40

    def test_fragment_skipped(self):
        raw = craft_packet(PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=17))
        frame = bytearray(raw.frame)
        frame[20:22] = struct.pack(">H", 0x2000 | 100)  # MF + offset 100
        raw2 = pcap.RawPacket(0, 0, len(frame), len(frame), bytes(frame))
        assert decode_packet(raw2, LINKTYPE_ETHERNET) == Skip("fragment")

    def test_ethernet_padding_trimmed(self):
        spec = PacketSpec("10.0.0.1", "10.0.0.2", 5, 6, proto=17,
                          payload=b"z")
        raw = craft_packet(spec)
        padded = raw.frame + b"\x00" * 17
        raw2 = pcap.RawPacket(0, 0, len(padded), len(padded), padded)
        out = decode_packet(raw2, LINKTYPE_ETHERNET)
        assert out.payload == b"z"
        assert out.payload_len == 1

    def test_never_raises_on_noise(self):
        rng = random.Random(1234)
        for link in (LINKTYPE_ETHERNET, LINKTYPE_RAW):
            for _ in range(500):
                n = rng.randrange(0, 120)
                frame = bytes(rng.randrange(256) for _ in range(n))
                raw = pcap.RawPacket(0, 0, n, n, frame)
                out = decode_packet(raw, link)
                assert isinstance(out, (DecodedPacket, Skip))

    def test_mutated_real_frames_never_raise(self):
        rng = random.Random(99)
        base = craft_packet(PacketSpec("10.0.0.1", "10.0.0.2", 1, 443,
                                       proto=6, tcp_flags=0x18,
                                       payload=b"hello")).frame
        for _ in range(500):
            frame = bytearray(base)
            for _ in range(rng.randrange(1, 6)):
                frame[rng.randrange(len(frame))] = rng.randrange(256)
            frame = bytes(frame[:rng.randrange(1, len(frame) + 1)])
            raw = pcap.RawPacket(0, 0, len(frame), len(frame), frame)
            out = decode_packet(raw, LINKTYPE_ETHERNET)
            assert isinstance(out, (DecodedPacket, Skip))


class TestCraft:
    def test_empty_payload(self):
        spec = PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=6)
        out = decode_packet(craft_packet(spec), LINKTYPE_ETHERNET)
        assert out.payload_len == 0

    def test_round_trip_identity(self):
        rng = random.Random(7)
        for _ in range(50):
            proto = rng.choice((6, 17))
            spec = PacketSpec(
                src_addr=f"10.{rng.randrange(256)}.{rng.randrange(256)}.1",
                dst_addr=f"192.168.{rng.randrange(256)}.{rng.randrange(256)}",
                src_port=rng.randrange(65536),
                dst_port=rng.randrange(65536),
                proto=proto,
                tcp_flags=rng.randrange(256) if proto == 6 else 0,
                payload=bytes(rng.randrange(256)
                              for _ in range(rng.randrange(200))),
                timestamp=rng.randrange(1_700_000_000) + rng.random(),
            )
            out = decode_packet(craft_packet(spec), LINKTYPE_ETHERNET)
            assert isinstance(out, DecodedPacket)
            assert out.tuple == pcap.FiveTuple(spec.src_addr, spec.dst_addr,
                                               spec.src_port, spec.dst_port,
                                               spec.proto)
            assert out.tcp_flags == spec.tcp_flags
            assert out.payload == spec.payload
            assert out.payload_len == len(spec.payload)
            assert out.timestamp == (craft_packet(spec).ts_seconds
                                     + craft_packet(spec).ts_fraction * 1e-6)

    def test_large_payload_original_len(self):
        spec = PacketSpec("10.0.0.1", "10.0.0.2", 1, 2, proto=6,
                          payload=b"p" * 1500)
        raw = craft_packet(spec)
        assert raw.original_len == 14 + 20 + 20 + 1500

    @pytest.mark.parametrize("kwargs", [
        dict(src_port=-1, dst_port=2),
        dict(src_port=1, dst_port=70000),
        dict(src_port=1, dst_port=2, proto=1),
        dict(src_port=1, dst_port=2, proto=17, tcp_flags=1),
        dict(src_port=1, dst_port=2, src_addr_override="2001:db8::1"),
    ])
    def test_invalid_specs_rejected(self, kwargs):
        src = kwargs.pop("src_addr_override", "10.0.0.1")
        with pytest.raises(InvalidSpec):
            PacketSpec(src_addr=src, dst_addr="10.0.0.2", **kwargs)
