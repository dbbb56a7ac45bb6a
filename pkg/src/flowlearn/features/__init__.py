from .schema import SCHEMA_VERSION, column_names, schema_manifest
from .metadata import extract_metadata
from .tls import extract_tls
from .dns import extract_dns
from .http import extract_http
from .records import (FlowRecord, build_record, parse_record,
                      serialize_record, read_records, write_records)

__all__ = [
    "SCHEMA_VERSION", "column_names", "schema_manifest",
    "extract_metadata", "extract_tls", "extract_dns", "extract_http",
    "FlowRecord", "build_record", "parse_record", "serialize_record",
    "read_records", "write_records",
]
