"""Parse BPMN 2.0 XML into canonical gold element/relation tables.

The gold tables are the evaluation reference: one row per flow node, pool,
lane or flow arc, plus one relation row per flow arc. Flow arcs appear in
both tables on purpose — the name/type regimes score them as elements, the
relation regime scores them as (source, target, type) triples.
"""

from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

BPMN_MODEL_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"

RELATION_TAGS = frozenset({"sequenceflow", "messageflow", "association"})

# Containers whose children are flow elements and must be walked recursively.
SUBPROCESS_TAGS = frozenset({"subprocess", "transaction", "adhocsubprocess"})

# Direct children of a process/subprocess that are not diagram content.
NON_ELEMENT_TAGS = frozenset(
    {
        "laneset",
        "childlaneset",
        "documentation",
        "extensionelements",
        "iospecification",
        "property",
        "monitoring",
        "auditing",
        "multiinstanceloopcharacteristics",
        "standardloopcharacteristics",
        "datainputassociation",
        "dataoutputassociation",
        "correlationsubscription",
    }
)


class MalformedXml(ValueError):
    """Input bytes are not well-formed XML."""


class NotBpmn(ValueError):
    """XML is well-formed but has no BPMN definitions root."""


class DanglingReference(ValueError):
    """A flow or CSV row references an element id that was never declared."""


class BadHeader(ValueError):
    """CSV input does not carry the expected header row."""


class BadRow(ValueError):
    """CSV row has the wrong number of columns."""


@dataclass(frozen=True)
class GoldElement:
    id: str
    name: str
    element_type: str


@dataclass(frozen=True)
class GoldRelation:
    source_id: str
    target_id: str
    source_name: str
    target_name: str
    relation_type: str
    label: str = ""


@dataclass
class GoldStandard:
    diagram_id: str
    elements: list[GoldElement] = field(default_factory=list)
    relations: list[GoldRelation] = field(default_factory=list)

    def element_ids(self) -> set[str]:
        return {e.id for e in self.elements}


def _local_name(tag: str) -> tuple[str, str]:
    """Split an ElementTree tag into (namespace URI, local name)."""
    if tag.startswith("{"):
        uri, _, local = tag[1:].partition("}")
        return uri, local
    return "", tag


def _is_bpmn(tag: str) -> bool:
    uri, _ = _local_name(tag)
    return uri.startswith(BPMN_MODEL_NS)


@dataclass
class _RawRelation:
    element: ET.Element
    relation_type: str


def parse_bpmn_xml(xml_bytes: bytes, diagram_id: str) -> GoldStandard:
    """Build the gold tables for one diagram from its BPMN 2.0 XML source.

    Walks collaboration sections (participants -> "pool" elements, lanes ->
    "lane" elements, messageFlows) and every process subtree (flow nodes,
    artifacts, sequenceFlows, associations) in document order. Names come
    from the ``name`` attribute and stay empty when absent. Element types
    are the lowercased local tag names, except participants which are
    emitted as "pool".

    Raises MalformedXml, NotBpmn or DanglingReference.
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise MalformedXml(f"{diagram_id}: {exc}") from exc

    ns_uri, local = _local_name(root.tag)
    if local != "definitions" or not ns_uri.startswith(BPMN_MODEL_NS):
        raise NotBpmn(f"{diagram_id}: root element is not a BPMN definitions element")

    gold = GoldStandard(diagram_id=diagram_id)
    pending: list[_RawRelation] = []

    for child in root:
        if not _is_bpmn(child.tag):
            continue
        _, tag = _local_name(child.tag)
        tag = tag.lower()
        if tag == "collaboration":
            _walk_collaboration(child, gold, pending)
        elif tag == "process":
            _walk_flow_container(child, gold, pending)

    ids = gold.element_ids()
    names = {e.id: e.name for e in gold.elements}
    seen_triples: set[tuple[str, str, str]] = set()
    for raw in pending:
        src = raw.element.get("sourceRef", "")
        dst = raw.element.get("targetRef", "")
        if src not in ids or dst not in ids:
            raise DanglingReference(
                f"{diagram_id}: flow {raw.element.get('id', '?')} references "
                f"unknown element ({src!r} -> {dst!r})"
            )
        triple = (src, dst, raw.relation_type)
        if triple in seen_triples:
            continue
        seen_triples.add(triple)
        gold.relations.append(
            GoldRelation(
                source_id=src,
                target_id=dst,
                source_name=names[src],
                target_name=names[dst],
                relation_type=raw.relation_type,
                label=raw.element.get("name", ""),
            )
        )
    return gold


def _walk_collaboration(
    collab: ET.Element, gold: GoldStandard, pending: list[_RawRelation]
) -> None:
    for child in collab:
        if not _is_bpmn(child.tag):
            continue
        _, tag = _local_name(child.tag)
        tag = tag.lower()
        if tag == "participant":
            gold.elements.append(
                GoldElement(
                    id=child.get("id", ""),
                    name=child.get("name", ""),
                    element_type="pool",
                )
            )
        elif tag == "messageflow":
            gold.elements.append(
                GoldElement(
                    id=child.get("id", ""),
                    name=child.get("name", ""),
                    element_type="messageflow",
                )
            )
            pending.append(_RawRelation(child, "messageflow"))


def _walk_flow_container(
    container: ET.Element, gold: GoldStandard, pending: list[_RawRelation]
) -> None:
    for child in container:
        if not _is_bpmn(child.tag):
            continue
        _, tag = _local_name(child.tag)
        tag = tag.lower()
        if tag in {"laneset", "childlaneset"}:
            _walk_lanes(child, gold)
            continue
        if tag in NON_ELEMENT_TAGS or child.get("id") is None:
            continue
        gold.elements.append(
            GoldElement(
                id=child.get("id", ""),
                name=child.get("name", ""),
                element_type=tag,
            )
        )
        if tag in RELATION_TAGS:
            pending.append(_RawRelation(child, tag))
        elif tag in SUBPROCESS_TAGS:
            _walk_flow_container(child, gold, pending)


def _walk_lanes(laneset: ET.Element, gold: GoldStandard) -> None:
    for child in laneset:
        if not _is_bpmn(child.tag):
            continue
        _, tag = _local_name(child.tag)
        tag = tag.lower()
        if tag == "lane":
            gold.elements.append(
                GoldElement(
                    id=child.get("id", ""),
                    name=child.get("name", ""),
                    element_type="lane",
                )
            )
            for sub in child:
                if _is_bpmn(sub.tag) and _local_name(sub.tag)[1].lower() == "childlaneset":
                    _walk_lanes(sub, gold)


ELEMENTS_HEADER = ["id", "name", "type"]
RELATIONS_HEADER = ["source_id", "source_name", "target_id", "target_name", "type", "label"]


def _write_csv(rows: list[list[str]]) -> bytes:
    buf = io.StringIO()
    minimal = csv.writer(buf, lineterminator="\n")
    # The csv writer only quotes \r when it is part of the line terminator,
    # which would corrupt read-back; force full quoting for such rows.
    full = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_ALL)
    for row in rows:
        (full if any("\r" in f for f in row) else minimal).writerow(row)
    return buf.getvalue().encode("utf-8")


def _read_csv(data: bytes, header: list[str]) -> list[list[str]]:
    text = data.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or rows[0] != header:
        raise BadHeader(f"expected header {','.join(header)!r}")
    for row in rows[1:]:
        if len(row) != len(header):
            raise BadRow(f"expected {len(header)} columns, got {len(row)}: {row!r}")
    return rows[1:]


def gold_to_csv(gold: GoldStandard) -> tuple[bytes, bytes]:
    """Serialize the gold tables to two RFC-4180 CSV payloads (UTF-8, LF)."""
    element_rows = [ELEMENTS_HEADER] + [
        [e.id, e.name, e.element_type] for e in gold.elements
    ]
    relation_rows = [RELATIONS_HEADER] + [
        [r.source_id, r.source_name, r.target_id, r.target_name, r.relation_type, r.label]
        for r in gold.relations
    ]
    return _write_csv(element_rows), _write_csv(relation_rows)


def csv_to_gold(elements_csv: bytes, relations_csv: bytes, diagram_id: str) -> GoldStandard:
    """Inverse of gold_to_csv. Raises BadHeader, BadRow or DanglingReference."""
    gold = GoldStandard(diagram_id=diagram_id)
    for row in _read_csv(elements_csv, ELEMENTS_HEADER):
        gold.elements.append(GoldElement(id=row[0], name=row[1], element_type=row[2]))
    ids = gold.element_ids()
    for row in _read_csv(relations_csv, RELATIONS_HEADER):
        if row[0] not in ids or row[2] not in ids:
            raise DanglingReference(
                f"{diagram_id}: relation row references unknown id ({row[0]!r} -> {row[2]!r})"
            )
        gold.relations.append(
            GoldRelation(
                source_id=row[0],
                source_name=row[1],
                target_id=row[2],
                target_name=row[3],
                relation_type=row[4],
                label=row[5],
            )
        )
    return gold
