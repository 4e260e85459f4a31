"""Durable, versioned document formats: canonical XML, a JSON rendering for
UI clients, and Graphviz export."""

from .dot import export_dot
from .json_io import (
    model_from_json,
    model_to_json,
    notation_to_json,
    trace_to_json,
    violations_to_json,
)
from .xml_io import (
    FORMAT_VERSION,
    document_kind,
    from_xml,
    notation_from_xml,
    notation_to_xml,
    to_xml,
    trace_from_xml,
    trace_to_xml,
)

__all__ = [
    "FORMAT_VERSION",
    "to_xml",
    "from_xml",
    "notation_to_xml",
    "notation_from_xml",
    "trace_to_xml",
    "trace_from_xml",
    "document_kind",
    "export_dot",
    "model_to_json",
    "model_from_json",
    "notation_to_json",
    "trace_to_json",
    "violations_to_json",
]
