"""Bidirectional flow assembly over decoded packets.

Flows keep at most the first 48 packets per direction; later packets only
advance the end timestamp (and post-cap counters, so packet accounting stays
exact). TCP flows close on FIN seen in both directions or any RST; everything
else closes by idle timeout or end of capture.
"""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass, field

from .pcap import FLAG_FIN, FLAG_RST, PROTO_TCP, DecodedPacket

PER_DIRECTION_CAP = 48
DEFAULT_IDLE_TIMEOUT = 60.0
DEFAULT_MAX_FLOWS = 1_000_000


class Termination(enum.Enum):
    FIN = "FIN"
    RST = "RST"
    IDLE_TIMEOUT = "IdleTimeout"
    END_OF_CAPTURE = "EndOfCapture"


@dataclass(frozen=True)
class FlowKey:
    """Canonical flow identity: endpoint_a is the initiator."""

    endpoint_a: tuple  # (addr, port)
    endpoint_b: tuple
    proto: int

    def sort_bytes(self) -> bytes:
        parts = []
        for addr, port in (self.endpoint_a, self.endpoint_b):
            ip = ipaddress.ip_address(addr)
            parts.append(bytes([ip.version]) + ip.packed
                         + port.to_bytes(2, "big"))
        parts.append(bytes([self.proto]))
        return b"".join(parts)


@dataclass
class Flow:
    key: FlowKey
    time_start: float
    time_end: float
    fwd_pkts: list = field(default_factory=list)
    rev_pkts: list = field(default_factory=list)
    termination: Termination = Termination.END_OF_CAPTURE
    fwd_post_cap: int = 0  # packets seen past the per-direction cap
    rev_post_cap: int = 0

    @property
    def stored_packets(self) -> int:
        return len(self.fwd_pkts) + len(self.rev_pkts)


class _FlowState:
    __slots__ = ("flow", "fin_fwd", "fin_rev")

    def __init__(self, flow: Flow):
        self.flow = flow
        self.fin_fwd = False
        self.fin_rev = False


def _norm_key(t) -> tuple:
    a = (t.src_addr, t.src_port)
    b = (t.dst_addr, t.dst_port)
    return (min(a, b), max(a, b), t.proto)


class FlowTable:
    """Single-writer table grouping packets into bidirectional flows.

    observe() returns a completed Flow when one closes on the incoming
    packet; expire()/finalize() drain the rest deterministically.
    """

    def __init__(self, idle_timeout=DEFAULT_IDLE_TIMEOUT,
                 max_flows=DEFAULT_MAX_FLOWS,
                 per_direction_cap=PER_DIRECTION_CAP):
        self.idle_timeout = idle_timeout
        self.max_flows = max_flows
        self.per_direction_cap = per_direction_cap
        self._table: dict[tuple, _FlowState] = {}
        self._evicted: list[Flow] = []

    def __len__(self):
        return len(self._table)

    def observe(self, packet: DecodedPacket) -> Flow | None:
        key = _norm_key(packet.tuple)
        state = self._table.get(key)
        if state is None:
            if len(self._table) >= self.max_flows:
                self._evict_oldest_idle()
            flow = Flow(
                key=FlowKey(
                    endpoint_a=(packet.tuple.src_addr, packet.tuple.src_port),
                    endpoint_b=(packet.tuple.dst_addr, packet.tuple.dst_port),
                    proto=packet.tuple.proto),
                time_start=packet.timestamp,
                time_end=packet.timestamp)
            state = _FlowState(flow)
            self._table[key] = state
        flow = state.flow
        forward = (packet.tuple.src_addr,
                   packet.tuple.src_port) == flow.key.endpoint_a
        side = flow.fwd_pkts if forward else flow.rev_pkts
        if len(side) < self.per_direction_cap:
            side.append(packet)
        elif forward:
            flow.fwd_post_cap += 1
        else:
            flow.rev_post_cap += 1
        flow.time_end = packet.timestamp
        if packet.tuple.proto == PROTO_TCP:
            if packet.tcp_flags & FLAG_RST:
                flow.termination = Termination.RST
                del self._table[key]
                return flow
            if packet.tcp_flags & FLAG_FIN:
                if forward:
                    state.fin_fwd = True
                else:
                    state.fin_rev = True
                if state.fin_fwd and state.fin_rev:
                    flow.termination = Termination.FIN
                    del self._table[key]
                    return flow
        return None

    def _evict_oldest_idle(self):
        key = min(self._table,
                  key=lambda k: (self._table[k].flow.time_end,
                                 self._table[k].flow.key.sort_bytes()))
        flow = self._table.pop(key).flow
        flow.termination = Termination.IDLE_TIMEOUT
        self._evicted.append(flow)

    def drain_evicted(self) -> list[Flow]:
        """Flows force-expired by the max_flows bound since the last drain."""
        out, self._evicted = self._evicted, []
        return out

    def expire(self, now: float) -> list[Flow]:
        """Emit flows idle strictly longer than idle_timeout, oldest first."""
        expired = []
        for key in list(self._table):
            flow = self._table[key].flow
            if now - flow.time_end > self.idle_timeout:
                flow.termination = Termination.IDLE_TIMEOUT
                expired.append(flow)
                del self._table[key]
        expired.sort(key=lambda f: (f.time_start, f.key.sort_bytes()))
        return expired

    def finalize(self) -> list[Flow]:
        """Emit everything left, ordered by time_start then canonical key."""
        remaining = [state.flow for state in self._table.values()]
        self._table.clear()
        for flow in remaining:
            flow.termination = Termination.END_OF_CAPTURE
        remaining.sort(key=lambda f: (f.time_start, f.key.sort_bytes()))
        return remaining


def assemble_flows(packets, idle_timeout=DEFAULT_IDLE_TIMEOUT,
                   max_flows=DEFAULT_MAX_FLOWS,
                   per_direction_cap=PER_DIRECTION_CAP) -> list[Flow]:
    """Run a packet iterable through one table; emission order is
    closing order for mid-capture terminations, then finalize order."""
    table = FlowTable(idle_timeout, max_flows, per_direction_cap)
    emitted = []
    for packet in packets:
        done = table.observe(packet)
        if done is not None:
            emitted.append(done)
        emitted.extend(table.drain_evicted())
    emitted.extend(table.finalize())
    return emitted
