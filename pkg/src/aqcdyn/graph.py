"""Syndrome-subspace transition graphs and the energy factor varpi."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .codes import CorrectabilityTable, ErrorModel, StabilizerCode, Syndrome
from .pauli import PauliOperator

EDGE_COLOURS = {"X": "black", "Z": "green", "Y": "orange"}
UNCORRECTABLE_COLOUR = "red"


def _nu_index(nu) -> int:
    return nu.index if isinstance(nu, Syndrome) else int(nu)


def varpi(code: StabilizerCode, error: PauliOperator, nu) -> int:
    """Energy change, in units of 2*alpha, when ``error`` acts on syndrome subspace ``nu``.

    Sum over generators anticommuting with the error of (-1)^{nu_m},
    evaluated as |s & ~nu| - |s & nu| with s the error's syndrome.
    """
    nu = _nu_index(nu)
    if not 0 <= nu < code.num_syndromes:
        raise IndexError(f"syndrome {nu} out of range for {code.name}")
    s = code.syndrome_index(error)
    return (s & ~nu).bit_count() - (s & nu).bit_count()


def varpi_by_definition(code: StabilizerCode, error: PauliOperator, nu) -> int:
    nu = _nu_index(nu)
    bits = code.syndrome(error).bits
    return sum((-1) ** ((nu >> m) & 1) for m, b in enumerate(bits) if b)


@dataclass(frozen=True)
class Node:
    syndrome: int
    correctable: bool
    weight: int | None
    representative: str | None


@dataclass(frozen=True)
class Edge:
    source: int
    error: int
    target: int
    correctable: bool
    varpi: int

    @property
    def cls(self) -> str:
        return "correctable" if self.correctable else "uncorrectable"


@dataclass
class SyndromeGraph:
    code: StabilizerCode
    model: ErrorModel
    nodes: list[Node]
    edges: list[Edge]
    table: CorrectabilityTable | None = None

    def node(self, s: int) -> Node:
        return self.nodes[s]

    def correctable_nodes(self) -> list[int]:
        return [n.syndrome for n in self.nodes if n.correctable]

    def out_edges(self, s: int) -> list[Edge]:
        return [e for e in self.edges if e.source == s]

    def edge_set(self) -> set[tuple]:
        return {(e.source, e.error, e.target, e.correctable, e.varpi) for e in self.edges}


def build_graph(code: StabilizerCode, model: ErrorModel, table: CorrectabilityTable) -> SyndromeGraph:
    if table.code is not code and table.code.to_dict() != code.to_dict():
        raise ValueError("correctability table was built for a different code")
    if table.model != model:
        raise ValueError("correctability table was built for a different error model")
    nodes = []
    for s in range(code.num_syndromes):
        r = table.records[s]
        nodes.append(Node(s, r.correctable, r.weight,
                          r.representative.label() if r.representative is not None else None))
    syn = [code.syndrome_index(e) for e in model.errors]
    edges = []
    for n in nodes:
        if not n.correctable:
            continue
        for j, e in enumerate(model.errors):
            edges.append(Edge(n.syndrome, j, n.syndrome ^ syn[j],
                              table.transitions[(n.syndrome, j)], varpi(code, e, n.syndrome)))
    return SyndromeGraph(code, model, nodes, edges, table)


def _edge_colour(graph: SyndromeGraph, e: Edge) -> str:
    if not e.correctable:
        return UNCORRECTABLE_COLOUR
    return EDGE_COLOURS[graph.model.kind(e.error)]


def to_dot(graph: SyndromeGraph) -> str:
    g = graph.code.num_generators
    lines = [f'digraph "{graph.code.name}" {{']
    for n in graph.nodes:
        bits = str(Syndrome.from_index(n.syndrome, g))
        style = "solid" if n.correctable else "dashed"
        lines.append(f'  n{n.syndrome} [label="{n.syndrome}\\n{bits}", style={style}];')
    labels = graph.model.labels()
    for e in graph.edges:
        lines.append(
            f'  n{e.source} -> n{e.target} [color={_edge_colour(graph, e)}, '
            f'label="{labels[e.error]}", varpi={e.varpi}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: SyndromeGraph) -> str:
    """JSON document with keys ``code``, ``errors``, ``nodes`` and ``edges``.

    Nodes carry ``syndrome`` (little-endian integer), ``bits``,
    ``correctable``, ``weight`` and ``representative``; edges carry
    ``source``, ``error`` (index into ``errors``), ``target``, ``class`` and
    ``varpi``.
    """
    g = graph.code.num_generators
    doc = {
        "code": graph.code.to_dict(),
        "errors": graph.model.labels(),
        "nodes": [
            {"syndrome": n.syndrome, "bits": str(Syndrome.from_index(n.syndrome, g)),
             "correctable": n.correctable, "weight": n.weight, "representative": n.representative}
            for n in graph.nodes
        ],
        "edges": [
            {"source": e.source, "error": e.error, "target": e.target, "class": e.cls, "varpi": e.varpi}
            for e in graph.edges
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def export_graph(graph: SyndromeGraph, fmt: str = "dot") -> str:
    fmt = fmt.lower()
    if fmt == "dot":
        return to_dot(graph)
    if fmt == "json":
        return to_json(graph)
    raise ValueError(f"unknown graph format {fmt!r} (expected dot or json)")


def import_graph(text: str) -> SyndromeGraph:
    doc = json.loads(text)
    code = StabilizerCode.from_dict(doc["code"])
    model = ErrorModel.from_labels(code.n, doc["errors"])
    nodes = [Node(int(n["syndrome"]), bool(n["correctable"]), n["weight"], n["representative"])
             for n in doc["nodes"]]
    edges = [Edge(int(e["source"]), int(e["error"]), int(e["target"]),
                  e["class"] == "correctable", int(e["varpi"])) for e in doc["edges"]]
    return SyndromeGraph(code, model, nodes, edges)
