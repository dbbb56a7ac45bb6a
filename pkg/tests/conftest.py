import pytest

from flowlearn.flows import assemble_flows
from flowlearn.pcap import (LINKTYPE_ETHERNET, PacketSpec, craft_packet,
                            decode_packet)


def decode_spec(spec: PacketSpec):
    return decode_packet(craft_packet(spec), LINKTYPE_ETHERNET)


def make_flow(specs, **table_kwargs):
    """Craft packets from specs and run them through one flow table,
    returning the single resulting flow."""
    flows = assemble_flows((decode_spec(s) for s in specs), **table_kwargs)
    assert len(flows) == 1, f"expected one flow, got {len(flows)}"
    return flows[0]


@pytest.fixture
def tcp_exchange_specs():
    """Handshake, two data packets, FIN both ways on one tuple."""
    a = dict(src_addr="10.0.0.1", dst_addr="10.0.0.2",
             src_port=40000, dst_port=80)
    b = dict(src_addr="10.0.0.2", dst_addr="10.0.0.1",
             src_port=80, dst_port=40000)
    return [
        PacketSpec(**a, tcp_flags=0x02, timestamp=1.00),          # SYN
        PacketSpec(**b, tcp_flags=0x12, timestamp=1.01),          # SYN+ACK
        PacketSpec(**a, tcp_flags=0x10, timestamp=1.02),          # ACK
        PacketSpec(**a, tcp_flags=0x18, payload=b"x" * 100,
                   timestamp=1.03),
        PacketSpec(**b, tcp_flags=0x18, payload=b"y" * 50,
                   timestamp=1.04),
        PacketSpec(**a, tcp_flags=0x11, timestamp=1.05),          # FIN+ACK
        PacketSpec(**b, tcp_flags=0x11, timestamp=1.06),          # FIN+ACK
    ]
