"""Per-flow JSON records: one line per flow, fixed key order, schema-tagged.

Lines are emitted compactly with canonical key order and Python's shortest
round-trip float formatting, so serialize(parse(line)) reproduces the line
byte for byte.
"""

import json
from dataclasses import dataclass

from . import schema
from .dns import extract_dns
from .http import extract_http
from .metadata import extract_metadata
from .tls import extract_tls


@dataclass
class FlowRecord:
    id: int
    sa: str
    da: str
    metadata: dict
    trace: str = ""
    dataset: str = ""
    tls: dict | None = None
    dns: dict | None = None
    http: dict | None = None
    labels: dict | None = None
    schema_version: str = schema.SCHEMA_VERSION


def build_record(flow, record_id: int, trace: str = "") -> FlowRecord:
    """Extract all feature blocks from a flow. Addresses are still raw at
    this point; mask them before anything is written out."""
    return FlowRecord(
        id=record_id,
        sa=flow.key.endpoint_a[0],
        da=flow.key.endpoint_b[0],
        metadata=extract_metadata(flow),
        trace=trace,
        tls=extract_tls(flow),
        dns=extract_dns(flow),
        http=extract_http(flow),
    )


def serialize_record(rec: FlowRecord) -> str:
    obj = {
        "schema_version": rec.schema_version,
        "id": rec.id,
        "trace": rec.trace,
    }
    if rec.dataset:
        obj["dataset"] = rec.dataset
    obj["sa"] = rec.sa
    obj["da"] = rec.da
    obj["metadata"] = rec.metadata
    for name in ("tls", "dns", "http"):
        block = getattr(rec, name)
        if block is not None:
            obj[name] = block
    if rec.labels is not None:
        obj["labels"] = rec.labels
    return json.dumps(obj, separators=(",", ":"))


def parse_record(line: str) -> FlowRecord:
    obj = json.loads(line)
    return FlowRecord(
        id=obj["id"],
        sa=obj["sa"],
        da=obj["da"],
        metadata=obj["metadata"],
        trace=obj.get("trace", ""),
        dataset=obj.get("dataset", ""),
        tls=obj.get("tls"),
        dns=obj.get("dns"),
        http=obj.get("http"),
        labels=obj.get("labels"),
        schema_version=obj["schema_version"],
    )


def write_records(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(serialize_record(rec))
            f.write("\n")


def read_records(path):
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield parse_record(line)
