"""Read and write graphs in the JSON graph file format."""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import jsonschema

from rs_coded_caching._rsgraph import RsGraph
from rs_coded_caching.exceptions import InvalidGraphError

if TYPE_CHECKING:
    from os import PathLike

_LABEL_LIST = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "integer"}},
}

GRAPH_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["F", "K", "matchings"],
    "properties": {
        "F": {"type": "integer", "minimum": 0},
        "K": {"type": "integer", "minimum": 0},
        "matchings": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {
                    "type": "array",
                    "items": {"type": "integer"},
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
        },
        "labels": {
            "type": "object",
            "properties": {"packets": _LABEL_LIST, "users": _LABEL_LIST},
        },
    },
}
"""JSON Schema of the graph file format."""


def graph_to_dict(graph: RsGraph) -> dict[str, Any]:
    """Convert a graph to the JSON graph file structure."""
    data: dict[str, Any] = {
        "F": graph.num_packets,
        "K": graph.num_users,
        "matchings": [
            [[packet, user] for packet, user in matching]
            for matching in graph.iter_matchings()
        ],
    }
    labels: dict[str, Any] = {}
    if graph.packet_labels is not None:
        labels["packets"] = [list(label) for label in graph.packet_labels]
    if graph.user_labels is not None:
        labels["users"] = [list(label) for label in graph.user_labels]
    if labels:
        data["labels"] = labels
    return data


def graph_from_dict(data: Any) -> RsGraph:  # noqa: ANN401
    """Create a graph from the JSON graph file structure.

    Raises:
        InvalidGraphError: If the structure does not match the graph file schema.

    """
    try:
        jsonschema.validate(data, GRAPH_SCHEMA)
    except jsonschema.ValidationError as err:
        raise InvalidGraphError(f"Malformed graph file: {err.message}") from err

    labels = data.get("labels", {})
    packet_labels = labels.get("packets")
    user_labels = labels.get("users")
    return RsGraph.from_matchings(
        num_packets=data["F"],
        num_users=data["K"],
        matchings=[[(f, k) for f, k in matching] for matching in data["matchings"]],
        packet_labels=tuple(map(tuple, packet_labels)) if packet_labels else None,
        user_labels=tuple(map(tuple, user_labels)) if user_labels else None,
    )


def write_graph(graph: RsGraph, path: str | PathLike[str]) -> None:
    """Write a graph to a JSON graph file."""
    Path(path).write_text(json.dumps(graph_to_dict(graph)) + "\n")


def read_graph(path: str | PathLike[str]) -> RsGraph:
    """Read a graph from a JSON graph file.

    Raises:
        InvalidGraphError: If the file is not valid JSON or does not match the schema.

    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise InvalidGraphError(f"Graph file {path} is not valid JSON: {err}") from err
    return graph_from_dict(data)
