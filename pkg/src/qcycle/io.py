"""JSON model documents.

A document is an object with the keys::

    type        "causal" (default) or "functional"
    metadata    {"name": str, "description": str}
    graph       {"vertices": [{"id", "kind"}], "edges": [{"source", "target", "kind"}]}
    spaces      {"edges": [{"source", "target", "dim" | "outcomes"}],
                 "vertices": [{"id", "outcomes"}]}
    mechanisms  {vertex id: mechanism}

Causal mechanisms are ``{"kraus": [M, ...]}``, ``{"choi": M}``, ``{"state": M}``
or ``{"povm": [M, ...]}``, optionally with ``in_order``/``out_order`` lists of
``[source, target]`` pairs. Functional mechanisms are
``{"errors": [...], "prior": [...], "table": [{"inputs": [...], "output": x}]}``
where ``inputs`` lists the parent values (parents ordered by source vertex)
followed by the error value. A matrix ``M`` is a list of rows of ``[re, im]``
pairs.

:func:`dumps` writes the canonical form: sorted keys, two-space indentation,
every default spelled out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Mapping

import numpy as np

from .errors import DimensionError, DocumentError, GraphError, ModelError
from .graph import CLASSICAL, OBSERVED, QUANTUM, UNOBSERVED, CausalGraph
from .model import CausalModel, FunctionalModel, TeleProtocol, embed_functional_model
from .tensor import KrausChannel, Povm, choi_to_kraus

CAUSAL = "causal"
FUNCTIONAL = "functional"
_CHANNEL_FORMS = ("kraus", "choi", "state", "povm")


def _fail(where: str, message: str):
    raise DocumentError(where, message)


def _expect_obj(x: Any, where: str, required: tuple = (), optional: tuple = ()) -> dict:
    if not isinstance(x, dict):
        _fail(where, "expected an object")
    unknown = sorted(set(x) - set(required) - set(optional))
    if unknown:
        _fail(f"{where}.{unknown[0]}" if where else unknown[0], "unknown key")
    for k in required:
        if k not in x:
            _fail(where, f"missing key {k!r}")
    return x


def _expect_list(x: Any, where: str) -> list:
    if not isinstance(x, list):
        _fail(where, "expected a list")
    return x


def _expect_str(x: Any, where: str) -> str:
    if not isinstance(x, str) or not x:
        _fail(where, "expected a non-empty string")
    return x


def _label(x: Any, where: str) -> Hashable:
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        _fail(where, "outcome labels must be integers or strings")
    return x


def _labels(x: Any, where: str) -> tuple:
    xs = tuple(_label(v, f"{where}[{i}]") for i, v in enumerate(_expect_list(x, where)))
    if not xs:
        _fail(where, "outcome list is empty")
    if len(set(xs)) != len(xs):
        _fail(where, "outcome labels repeat")
    return xs


def _number(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(where, "expected a number")
    return float(x)


def parse_matrix(x: Any, where: str) -> np.ndarray:
    rows = _expect_list(x, where)
    if not rows:
        _fail(where, "matrix has no rows")
    out = []
    width = None
    for i, row in enumerate(rows):
        row = _expect_list(row, f"{where}[{i}]")
        if width is None:
            width = len(row)
        if len(row) != width or not row:
            _fail(f"{where}[{i}]", "rows must be non-empty and of equal length")
        vals = []
        for j, z in enumerate(row):
            loc = f"{where}[{i}][{j}]"
            if not isinstance(z, list) or len(z) != 2:
                _fail(loc, "complex entries are [re, im] pairs")
            vals.append(complex(_number(z[0], loc), _number(z[1], loc)))
        out.append(vals)
    return np.asarray(out, dtype=complex)


def dump_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _edge_ref(x: Any, where: str, edges: set) -> tuple[str, str]:
    if not isinstance(x, list) or len(x) != 2 or not all(isinstance(s, str) for s in x):
        _fail(where, "edge references are [source, target] pairs")
    e = (x[0], x[1])
    if e not in edges:
        _fail(where, f"edge {e[0]}->{e[1]} is not declared")
    return e


@dataclass
class ModelDocument:
    """Parsed document, kept close to its on-disk shape so it can be written back."""

    type: str
    metadata: dict
    vertices: list[tuple[str, str]]
    edges: list[tuple[str, str, str]]
    edge_spaces: dict = field(default_factory=dict)      # edge -> ("dim", n) | ("outcomes", labels)
    vertex_outcomes: dict = field(default_factory=dict)  # vertex -> labels
    mechanisms: dict = field(default_factory=dict)       # vertex -> dict

    @property
    def name(self) -> str:
        return self.metadata.get("name", "")

    def graph(self) -> CausalGraph:
        return CausalGraph(tuple(self.vertices), tuple(self.edges))

    def functional_model(self) -> FunctionalModel:
        if self.type != FUNCTIONAL:
            raise ModelError("document does not describe a functional model")
        g = self.graph()
        errors, priors, functions = {}, {}, {}
        for v in g.ids:
            mech = self.mechanisms[v]
            errors[v] = mech["errors"]
            priors[v] = np.asarray(mech["prior"], dtype=float)
            functions[v] = {tuple(k): out for k, out in mech["table"]}
        return FunctionalModel(g, dict(self.vertex_outcomes), errors, priors, functions)

    def causal_model(self) -> CausalModel:
        if self.type == FUNCTIONAL:
            return embed_functional_model(self.functional_model())
        g = self.graph()
        dims, outcomes = {}, {}
        for e, (key, val) in self.edge_spaces.items():
            if key == "dim":
                dims[e] = val
            else:
                outcomes[e] = val
                dims[e] = len(val)
        channels, states, povms, ins, outs = {}, {}, {}, {}, {}
        for v, mech in self.mechanisms.items():
            form = mech["form"]
            where = f"mechanisms.{v}.{form}"
            try:
                if form == "kraus":
                    channels[v] = KrausChannel.from_operators(mech["value"])
                elif form == "choi":
                    din = _dim_product(dims, mech.get("in_order") or g.in_edges(v))
                    dout = _dim_product(dims, mech.get("out_order") or g.out_edges(v))
                    channels[v] = choi_to_kraus(mech["value"], din, dout)
                elif form == "state":
                    states[v] = mech["value"]
                else:
                    povms[v] = Povm.from_elements(mech["value"])
            except (ValueError, KeyError) as exc:
                raise DocumentError(where, str(exc)) from None
            if "in_order" in mech:
                ins[v] = mech["in_order"]
            if "out_order" in mech:
                outs[v] = mech["out_order"]
        return CausalModel.build(
            g,
            edge_dims=dims,
            edge_outcomes=outcomes,
            vertex_outcomes=self.vertex_outcomes,
            channels=channels,
            states=states,
            povms=povms,
            in_order=ins,
            out_order=outs,
        )

    def to_json(self) -> dict:
        doc: dict = {
            "type": self.type,
            "metadata": {"name": self.metadata.get("name", ""), "description": self.metadata.get("description", "")},
            "graph": {
                "vertices": [{"id": v, "kind": k} for v, k in self.vertices],
                "edges": [{"source": u, "target": v, "kind": k} for u, v, k in self.edges],
            },
            "spaces": {
                "edges": [
                    {"source": e[0], "target": e[1], key: (list(val) if key == "outcomes" else val)}
                    for e in [(u, v) for u, v, _ in self.edges]
                    if e in self.edge_spaces
                    for key, val in [self.edge_spaces[e]]
                ],
                "vertices": [{"id": v, "outcomes": list(self.vertex_outcomes[v])} for v, _ in self.vertices if v in self.vertex_outcomes],
            },
            "mechanisms": {},
        }
        for v, _ in self.vertices:
            if v not in self.mechanisms:
                continue
            mech = self.mechanisms[v]
            if self.type == FUNCTIONAL:
                out = {
                    "errors": list(mech["errors"]),
                    "prior": [float(p) for p in mech["prior"]],
                    "table": [{"inputs": list(k), "output": o} for k, o in mech["table"]],
                }
            else:
                form, val = mech["form"], mech["value"]
                if form in ("kraus", "povm"):
                    out = {form: [dump_matrix(m) for m in val]}
                else:
                    out = {form: dump_matrix(val)}
                for key in ("in_order", "out_order"):
                    if key in mech:
                        out[key] = [list(e) for e in mech[key]]
            doc["mechanisms"][v] = out
        return doc


def _dim_product(dims: Mapping, edges) -> int:
    return int(np.prod([dims[tuple(e)] for e in edges])) if edges else 1


def _parse_graph(raw: Any, functional: bool) -> tuple[list, list]:
    g = _expect_obj(raw, "graph", ("vertices", "edges"))
    vertices, edges = [], []
    for i, item in enumerate(_expect_list(g["vertices"], "graph.vertices")):
        where = f"graph.vertices[{i}]"
        item = _expect_obj(item, where, ("id",), ("kind",))
        kind = item.get("kind", OBSERVED)
        if kind not in (OBSERVED, UNOBSERVED):
            _fail(f"{where}.kind", f"unknown vertex kind {kind!r}")
        vertices.append((_expect_str(item["id"], f"{where}.id"), kind))
    for i, item in enumerate(_expect_list(g["edges"], "graph.edges")):
        where = f"graph.edges[{i}]"
        item = _expect_obj(item, where, ("source", "target"), ("kind",))
        kind = item.get("kind", CLASSICAL)
        if kind not in (CLASSICAL, QUANTUM):
            _fail(f"{where}.kind", f"unknown edge kind {kind!r}")
        edges.append((_expect_str(item["source"], f"{where}.source"), _expect_str(item["target"], f"{where}.target"), kind))
    try:
        CausalGraph(tuple(vertices), tuple(edges))
    except GraphError as exc:
        raise DocumentError("graph", str(exc)) from None
    if functional:
        if any(k != OBSERVED for _, k in vertices):
            _fail("graph.vertices", "functional models have observed vertices only")
        if any(k != CLASSICAL for *_, k in edges):
            _fail("graph.edges", "functional models have classical edges only")
    return vertices, edges


def from_json(raw: Any) -> ModelDocument:
    """Build a :class:`ModelDocument` from decoded JSON, checking its shape."""
    top = _expect_obj(raw, "", ("graph",), ("type", "metadata", "spaces", "mechanisms"))
    kind = top.get("type", CAUSAL)
    if kind not in (CAUSAL, FUNCTIONAL):
        _fail("type", f"unknown document type {kind!r}")
    meta = _expect_obj(top.get("metadata", {}), "metadata", (), ("name", "description"))
    for k, val in meta.items():
        if not isinstance(val, str):
            _fail(f"metadata.{k}", "expected a string")
    vertices, edges = _parse_graph(top["graph"], kind == FUNCTIONAL)
    vids = {v for v, _ in vertices}
    eset = {(u, v) for u, v, _ in edges}
    kinds = {(u, v): k for u, v, k in edges}
    doc = ModelDocument(kind, dict(meta), vertices, edges)

    spaces = _expect_obj(top.get("spaces", {}), "spaces", (), ("edges", "vertices"))
    for i, item in enumerate(_expect_list(spaces.get("edges", []), "spaces.edges")):
        where = f"spaces.edges[{i}]"
        item = _expect_obj(item, where, ("source", "target"), ("dim", "outcomes"))
        e = _edge_ref([item["source"], item["target"]], where, eset)
        if e in doc.edge_spaces:
            _fail(where, f"edge {e[0]}->{e[1]} given twice")
        if ("dim" in item) == ("outcomes" in item):
            _fail(where, "give exactly one of 'dim' or 'outcomes'")
        if "dim" in item:
            d = item["dim"]
            if isinstance(d, bool) or not isinstance(d, int) or d < 1:
                _fail(f"{where}.dim", "dimension must be a positive integer")
            doc.edge_spaces[e] = ("dim", d)
        else:
            if kinds[e] != CLASSICAL:
                _fail(f"{where}.outcomes", "only classical edges carry outcome sets")
            doc.edge_spaces[e] = ("outcomes", _labels(item["outcomes"], f"{where}.outcomes"))
    for i, item in enumerate(_expect_list(spaces.get("vertices", []), "spaces.vertices")):
        where = f"spaces.vertices[{i}]"
        item = _expect_obj(item, where, ("id", "outcomes"))
        v = _expect_str(item["id"], f"{where}.id")
        if v not in vids:
            _fail(f"{where}.id", f"unknown vertex {v!r}")
        if v in doc.vertex_outcomes:
            _fail(where, f"vertex {v!r} given twice")
        doc.vertex_outcomes[v] = _labels(item["outcomes"], f"{where}.outcomes")

    mechs = _expect_obj(top.get("mechanisms", {}), "mechanisms", (), tuple(vids))
    for v, raw_mech in mechs.items():
        where = f"mechanisms.{v}"
        if kind == FUNCTIONAL:
            doc.mechanisms[v] = _parse_functional(raw_mech, where)
        else:
            doc.mechanisms[v] = _parse_causal(raw_mech, where, eset)
    if kind == FUNCTIONAL:
        for v in vids:
            if v not in doc.mechanisms:
                _fail("mechanisms", f"vertex {v!r} has no function table")
            if v not in doc.vertex_outcomes:
                _fail("spaces.vertices", f"vertex {v!r} has no outcome set")
    return doc


def _parse_causal(raw: Any, where: str, eset: set) -> dict:
    m = _expect_obj(raw, where, (), _CHANNEL_FORMS + ("in_order", "out_order"))
    forms = [f for f in _CHANNEL_FORMS if f in m]
    if len(forms) != 1:
        _fail(where, "give exactly one of " + ", ".join(repr(f) for f in _CHANNEL_FORMS))
    form = forms[0]
    if form in ("kraus", "povm"):
        mats = [parse_matrix(x, f"{where}.{form}[{i}]") for i, x in enumerate(_expect_list(m[form], f"{where}.{form}"))]
        if not mats:
            _fail(f"{where}.{form}", "list is empty")
        if len({x.shape for x in mats}) != 1:
            _fail(f"{where}.{form}", "matrices differ in shape")
        value: Any = np.asarray(mats)
    else:
        value = parse_matrix(m[form], f"{where}.{form}")
    out = {"form": form, "value": value}
    for key in ("in_order", "out_order"):
        if key in m:
            refs = _expect_list(m[key], f"{where}.{key}")
            out[key] = [_edge_ref(x, f"{where}.{key}[{i}]", eset) for i, x in enumerate(refs)]
    return out


def _parse_functional(raw: Any, where: str) -> dict:
    m = _expect_obj(raw, where, ("errors", "prior", "table"))
    errors = _labels(m["errors"], f"{where}.errors")
    prior = [_number(p, f"{where}.prior[{i}]") for i, p in enumerate(_expect_list(m["prior"], f"{where}.prior"))]
    rows = []
    for i, row in enumerate(_expect_list(m["table"], f"{where}.table")):
        loc = f"{where}.table[{i}]"
        row = _expect_obj(row, loc, ("inputs", "output"))
        inputs = tuple(_label(x, f"{loc}.inputs[{j}]") for j, x in enumerate(_expect_list(row["inputs"], f"{loc}.inputs")))
        rows.append((inputs, _label(row["output"], f"{loc}.output")))
    if len({k for k, _ in rows}) != len(rows):
        _fail(f"{where}.table", "input tuples repeat")
    return {"errors": errors, "prior": prior, "table": rows}


def loads(text: str) -> ModelDocument:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return from_json(raw)


def load(path: str | Path) -> ModelDocument:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(str(p), exc.strerror or "cannot read file") from None
    return loads(text)


def dumps(doc: ModelDocument) -> str:
    return json.dumps(doc.to_json(), indent=2, sort_keys=True) + "\n"


def load_model(path: str | Path) -> CausalModel:
    return load(path).causal_model()


# -- documents from in-memory models -------------------------------------------

def document_from_model(m: CausalModel, name: str = "", description: str = "") -> ModelDocument:
    g = m.graph
    doc = ModelDocument(CAUSAL, {"name": name, "description": description}, list(g.vertices), list(g.edges))
    for u, v, kind in g.edges:
        e = (u, v)
        if kind == CLASSICAL and e in m.edge_outcomes:
            doc.edge_spaces[e] = ("outcomes", tuple(m.edge_outcomes[e]))
        else:
            doc.edge_spaces[e] = ("dim", int(m.edge_dims[e]))
    for v in g.observed:
        doc.vertex_outcomes[v] = tuple(m.vertex_outcomes[v])
    for v in g.ids:
        if v in m.povms:
            mech = {"form": "povm", "value": np.asarray(m.povms[v].elements)}
        elif v in m.states:
            mech = {"form": "state", "value": np.asarray(m.states[v])}
        elif v in m.channels:
            mech = {"form": "kraus", "value": np.asarray(m.channels[v].kraus)}
        else:
            continue
        if tuple(m.in_order[v]) != tuple(g.in_edges(v)):
            mech["in_order"] = list(m.in_order[v])
        if tuple(m.out_order[v]) != tuple(g.out_edges(v)):
            mech["out_order"] = list(m.out_order[v])
        doc.mechanisms[v] = mech
    return doc


def document_from_functional(f: FunctionalModel, name: str = "", description: str = "") -> ModelDocument:
    g = f.graph
    doc = ModelDocument(FUNCTIONAL, {"name": name, "description": description}, list(g.vertices), list(g.edges))
    for v in g.ids:
        doc.vertex_outcomes[v] = tuple(f.outcomes[v])
        doc.mechanisms[v] = {
            "errors": tuple(f.errors[v]),
            "prior": [float(p) for p in f.priors[v]],
            "table": sorted(f.functions[v].items(), key=lambda kv: [str(x) for x in kv[0]]),
        }
    return doc


# -- protocol files -------------------------------------------------------------

def parse_protocols(raw: Any, where: str = "protocol") -> dict[int, TeleProtocol]:
    """A protocol object ``{"dim_A", "post_element", "pre_state"}`` or a list of them.

    Returns protocols keyed by ``dim_A``; each is verified on load.
    """
    items = raw if isinstance(raw, list) else [raw]
    out: dict[int, TeleProtocol] = {}
    for i, item in enumerate(items):
        loc = f"{where}[{i}]" if isinstance(raw, list) else where
        item = _expect_obj(item, loc, ("dim_A", "post_element", "pre_state"))
        d = item["dim_A"]
        if isinstance(d, bool) or not isinstance(d, int) or d < 1:
            _fail(f"{loc}.dim_A", "dimension must be a positive integer")
        if d in out:
            _fail(loc, f"two protocols for dimension {d}")
        e = parse_matrix(item["post_element"], f"{loc}.post_element")
        t = parse_matrix(item["pre_state"], f"{loc}.pre_state")
        try:
            out[d] = TeleProtocol.from_operators(e, t, d)
        except (ModelError, DimensionError) as exc:
            raise DocumentError(loc, str(exc)) from None
    return out


def load_protocols(path: str | Path) -> dict[int, TeleProtocol]:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DocumentError(str(p), exc.strerror or "cannot read file") from None
    except json.JSONDecodeError as exc:
        raise DocumentError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return parse_protocols(raw)


def protocol_to_json(p: TeleProtocol) -> dict:
    return {"dim_A": p.dim_A, "post_element": dump_matrix(p.post_element), "pre_state": dump_matrix(p.pre_state)}
