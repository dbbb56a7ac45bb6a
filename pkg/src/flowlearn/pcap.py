"""Classic packet-capture file reader and link/network/transport decoder.

Supports the classic capture format only (both byte orders, microsecond and
nanosecond magics). Frames are decoded down to TCP/UDP over IPv4/IPv6 on
Ethernet (one VLAN tag tolerated) or raw-IP link types; everything else is
skipped with a categorical reason, never an exception.
"""

from __future__ import annotations

import io
import ipaddress
import struct
from dataclasses import dataclass, field

MAGIC_MICROS = 0xA1B2C3D4
MAGIC_NANOS = 0xA1B23C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
ETHERTYPE_VLAN = 0x8100

PROTO_TCP = 6
PROTO_UDP = 17

# TCP flag bits, low to high: FIN SYN RST PSH ACK URG ECE CWR
FLAG_FIN = 0x01
FLAG_SYN = 0x02
FLAG_RST = 0x04
FLAG_PSH = 0x08
FLAG_ACK = 0x10
FLAG_URG = 0x20
FLAG_ECE = 0x40
FLAG_CWR = 0x80

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

# IPv6 extension headers sharing the generic (next, len, ...) layout.
_V6_EXT_GENERIC = {0, 43, 60, 135}
_V6_EXT_FRAGMENT = 44
_V6_EXT_AH = 51
_V6_EXT_MAX_CHAIN = 8


class UnknownMagic(ValueError):
    """File does not begin with a recognized capture magic."""


class TruncatedRecord(ValueError):
    """A record header claims more bytes than the file holds."""


class InvalidSpec(ValueError):
    """Packet spec field outside its legal range."""


@dataclass
class RawPacket:
    ts_seconds: int
    ts_fraction: int
    captured_len: int
    original_len: int
    frame: bytes
    ts_resolution: float = 1e-6  # seconds per ts_fraction unit, set by magic

    @property
    def timestamp(self) -> float:
        return self.ts_seconds + self.ts_fraction * self.ts_resolution


@dataclass(frozen=True)
class FiveTuple:
    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    proto: int


@dataclass(frozen=True)
class Skip:
    """Categorical non-decode outcome: non-ip, non-tcp-udp, fragment, malformed."""

    reason: str


@dataclass
class DecodedPacket:
    timestamp: float
    tuple: FiveTuple
    ip_header_len: int
    transport_header_len: int
    payload_len: int
    tcp_flags: int
    payload: bytes

    @property
    def header_len(self) -> int:
        return self.ip_header_len + self.transport_header_len


class CaptureReader:
    """Iterates RawPackets of one classic capture file, in file order.

    Exposes the per-file facts a decoder needs: ``link_type``, ``snaplen``
    and timestamp resolution.
    """

    def __init__(self, source):
        if isinstance(source, (bytes, bytearray)):
            source = io.BytesIO(source)
        self._f = source
        header = self._f.read(GLOBAL_HEADER_LEN)
        if len(header) < GLOBAL_HEADER_LEN:
            raise UnknownMagic("file shorter than a capture global header")
        magic_be = struct.unpack(">I", header[:4])[0]
        magic_le = struct.unpack("<I", header[:4])[0]
        if magic_le in (MAGIC_MICROS, MAGIC_NANOS):
            self.byte_order = "<"
            magic = magic_le
        elif magic_be in (MAGIC_MICROS, MAGIC_NANOS):
            self.byte_order = ">"
            magic = magic_be
        else:
            raise UnknownMagic(f"unrecognized capture magic 0x{magic_be:08x}")
        self.ts_resolution = 1e-6 if magic == MAGIC_MICROS else 1e-9
        (self.version_major, self.version_minor, _zone, _sigfigs,
         self.snaplen, self.link_type) = struct.unpack(
            self.byte_order + "HHiIII", header[4:])
        self._offset = GLOBAL_HEADER_LEN

    def __iter__(self):
        return self

    def __next__(self) -> RawPacket:
        header = self._f.read(RECORD_HEADER_LEN)
        if not header:
            raise StopIteration
        if len(header) < RECORD_HEADER_LEN:
            raise TruncatedRecord(
                f"partial record header at offset {self._offset}")
        ts_sec, ts_frac, incl_len, orig_len = struct.unpack(
            self.byte_order + "IIII", header)
        frame = self._f.read(incl_len)
        if len(frame) < incl_len:
            raise TruncatedRecord(
                f"record at offset {self._offset} claims {incl_len} bytes, "
                f"only {len(frame)} remain")
        self._offset += RECORD_HEADER_LEN + incl_len
        return RawPacket(ts_sec, ts_frac, incl_len, orig_len, frame,
                         self.ts_resolution)


def parse_capture(source) -> CaptureReader:
    """Open a classic capture file (path, file object, or bytes)."""
    if isinstance(source, str):
        source = open(source, "rb")
    return CaptureReader(source)


def write_capture(dest, packets, *, nanosecond=False, byte_order="<",
                  link_type=LINKTYPE_ETHERNET, snaplen=65535):
    """Write RawPackets as a classic capture file (test fixtures, mostly)."""
    close = False
    if isinstance(dest, str):
        dest = open(dest, "wb")
        close = True
    magic = MAGIC_NANOS if nanosecond else MAGIC_MICROS
    scale = 1e-9 if nanosecond else 1e-6
    dest.write(struct.pack(byte_order + "IHHiIII", magic, 2, 4, 0, 0,
                           snaplen, link_type))
    for pkt in packets:
        frac = pkt.ts_fraction
        if pkt.ts_resolution != scale:
            frac = int(round(frac * pkt.ts_resolution / scale))
        dest.write(struct.pack(byte_order + "IIII", pkt.ts_seconds, frac,
                               pkt.captured_len, pkt.original_len))
        dest.write(pkt.frame)
    if close:
        dest.close()


def _decode_ipv4(data, ts):
    if len(data) < 20:
        return Skip("malformed")
    ver_ihl = data[0]
    if ver_ihl >> 4 != 4:
        return Skip("malformed")
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or len(data) < ihl:
        return Skip("malformed")
    total_len, = struct.unpack(">H", data[2:4])
    flags_frag, = struct.unpack(">H", data[6:8])
    if flags_frag & 0x1FFF:
        return Skip("fragment")
    proto = data[9]
    if total_len < ihl:
        return Skip("malformed")
    src = str(ipaddress.IPv4Address(data[12:16]))
    dst = str(ipaddress.IPv4Address(data[16:20]))
    # total_len trims Ethernet trailer padding; captured bytes may fall short
    ip_payload = data[ihl:min(total_len, len(data))]
    declared = total_len - ihl
    return _decode_transport(ts, src, dst, proto, ihl, ip_payload, declared)


def _decode_ipv6(data, ts):
    if len(data) < 40:
        return Skip("malformed")
    if data[0] >> 4 != 6:
        return Skip("malformed")
    payload_len, = struct.unpack(">H", data[4:6])
    next_header = data[6]
    src = str(ipaddress.IPv6Address(data[8:24]))
    dst = str(ipaddress.IPv6Address(data[24:40]))
    offset = 40
    declared_end = 40 + payload_len
    chained = 0
    while True:
        if next_header in (PROTO_TCP, PROTO_UDP):
            break
        if next_header == _V6_EXT_FRAGMENT:
            if len(data) < offset + 8:
                return Skip("malformed")
            frag_off = struct.unpack(">H", data[offset + 2:offset + 4])[0] >> 3
            if frag_off:
                return Skip("fragment")
            next_header = data[offset]
            offset += 8
        elif next_header in _V6_EXT_GENERIC or next_header == _V6_EXT_AH:
            if len(data) < offset + 2:
                return Skip("malformed")
            if next_header == _V6_EXT_AH:
                ext_len = (data[offset + 1] + 2) * 4
            else:
                ext_len = (data[offset + 1] + 1) * 8
            next_header = data[offset]
            offset += ext_len
        else:
            return Skip("non-tcp-udp")
        chained += 1
        if chained > _V6_EXT_MAX_CHAIN or offset > len(data):
            return Skip("malformed")
    ip_payload = data[offset:min(declared_end, len(data))]
    declared = declared_end - offset
    return _decode_transport(ts, src, dst, next_header, offset, ip_payload,
                             declared)


def _decode_transport(ts, src, dst, proto, ip_hdr_len, data, declared):
    if proto == PROTO_TCP:
        if len(data) < 20 or declared < 20:
            return Skip("malformed")
        sport, dport = struct.unpack(">HH", data[:4])
        tcp_hdr_len = (data[12] >> 4) * 4
        if tcp_hdr_len < 20 or declared < tcp_hdr_len:
            return Skip("malformed")
        flags = data[13]
        payload_len = declared - tcp_hdr_len
        payload = data[tcp_hdr_len:tcp_hdr_len + payload_len]
        return DecodedPacket(ts, FiveTuple(src, dst, sport, dport, PROTO_TCP),
                             ip_hdr_len, tcp_hdr_len, payload_len, flags,
                             payload)
    if proto == PROTO_UDP:
        if len(data) < 8 or declared < 8:
            return Skip("malformed")
        sport, dport, udp_len = struct.unpack(">HHH", data[:6])
        if udp_len < 8 or udp_len > declared:
            return Skip("malformed")
        payload_len = udp_len - 8
        payload = data[8:8 + payload_len]
        return DecodedPacket(ts, FiveTuple(src, dst, sport, dport, PROTO_UDP),
                             ip_hdr_len, 8, payload_len, 0, payload)
    return Skip("non-tcp-udp")


def decode_packet(pkt: RawPacket, link_type: int):
    """Decode one raw frame; returns DecodedPacket or Skip(reason)."""
    ts = pkt.timestamp
    frame = pkt.frame
    if link_type == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            return Skip("malformed")
        ethertype, = struct.unpack(">H", frame[12:14])
        offset = 14
        if ethertype == ETHERTYPE_VLAN:
            if len(frame) < 18:
                return Skip("malformed")
            ethertype, = struct.unpack(">H", frame[16:18])
            offset = 18
        if ethertype == ETHERTYPE_IPV4:
            return _decode_ipv4(frame[offset:], ts)
        if ethertype == ETHERTYPE_IPV6:
            return _decode_ipv6(frame[offset:], ts)
        return Skip("non-ip")
    if link_type == LINKTYPE_RAW:
        if not frame:
            return Skip("malformed")
        version = frame[0] >> 4
        if version == 4:
            return _decode_ipv4(frame, ts)
        if version == 6:
            return _decode_ipv6(frame, ts)
        return Skip("non-ip")
    return Skip("non-ip")


@dataclass
class PacketSpec:
    """What to put on the wire; craft_packet turns this into a frame."""

    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    proto: int = PROTO_TCP
    tcp_flags: int = 0
    payload: bytes = b""
    timestamp: float = 0.0

    def __post_init__(self):
        try:
            src = ipaddress.ip_address(self.src_addr)
            dst = ipaddress.ip_address(self.dst_addr)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None
        if src.version != dst.version:
            raise InvalidSpec("address family mismatch")
        self.src_addr = str(src)
        self.dst_addr = str(dst)
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise InvalidSpec(f"port {port} out of range")
        if self.proto not in (PROTO_TCP, PROTO_UDP):
            raise InvalidSpec(f"unsupported protocol {self.proto}")
        if self.proto == PROTO_UDP and self.tcp_flags:
            raise InvalidSpec("tcp_flags must be 0 for UDP")
        if not 0 <= self.tcp_flags <= 0xFF:
            raise InvalidSpec("tcp_flags out of range")
        if len(self.payload) > 65000:
            raise InvalidSpec("payload too large for a single packet")
        if self.timestamp < 0:
            raise InvalidSpec("negative timestamp")


def _ipv4_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += struct.unpack(">H", header[i:i + 2])[0]
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def craft_packet(spec: PacketSpec) -> RawPacket:
    """Build an Ethernet frame for the spec; decode_packet round-trips it."""
    if spec.proto == PROTO_TCP:
        transport = struct.pack(">HHIIBBHHH", spec.src_port, spec.dst_port,
                                0, 0, 5 << 4, spec.tcp_flags, 65535, 0, 0)
    else:
        transport = struct.pack(">HHHH", spec.src_port, spec.dst_port,
                                8 + len(spec.payload), 0)
    src = ipaddress.ip_address(spec.src_addr)
    dst = ipaddress.ip_address(spec.dst_addr)
    segment = transport + spec.payload
    if src.version == 4:
        total_len = 20 + len(segment)
        header = struct.pack(">BBHHHBBH4s4s", 0x45, 0, total_len, 0, 0, 64,
                             spec.proto, 0, src.packed, dst.packed)
        checksum = _ipv4_checksum(header)
        header = header[:10] + struct.pack(">H", checksum) + header[12:]
        ethertype = ETHERTYPE_IPV4
    else:
        header = struct.pack(">IHBB16s16s", 6 << 28, len(segment), spec.proto,
                             64, src.packed, dst.packed)
        ethertype = ETHERTYPE_IPV6
    eth = (b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01"
           + struct.pack(">H", ethertype))
    frame = eth + header + segment
    ts_sec = int(spec.timestamp)
    ts_frac = int(round((spec.timestamp - ts_sec) * 1e6))
    if ts_frac == 1_000_000:
        ts_sec, ts_frac = ts_sec + 1, 0
    return RawPacket(ts_sec, ts_frac, len(frame), len(frame), frame)
