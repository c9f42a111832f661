#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
BPMN 2.0 export of a valid Method.

Mapping:
    composite activity   -> <subProcess> with its own start/end events
    leaf activity        -> <userTask>
    flow a -> b          -> <sequenceFlow>, plus synthesized start/end flows
    fan-out / fan-in > 1 -> explicit <parallelGateway> (split / join)
    role                 -> definitions-level <resource>, <potentialOwner> per participant
    inputs, techniques, resources (union) -> <dataInputAssociation>
    outputs              -> <dataOutputAssociation>
    description, optional flag, kind payload -> <documentation> lines

No diagram interchange section is written. Output is byte-deterministic:
element order follows the model, attributes are written id first.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Set, Tuple

from lxml import etree

import semantics
from diagnostics import ExportError
from metamodel import (Activity, DeploymentSpec, Method, MonitoringSpec, RequirementsSpec,
                       TrainingSpec, topological_order)
from output_config import ExportOptions

logger = logging.getLogger(__name__)

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
NSMAP = {"bpmn": BPMN_NS}
MAX_SUFFIX = 10 ** 6

_NON_NCNAME = re.compile(r"[^a-z0-9_.\-]")


def _tag(name: str) -> str:
    return f"{{{BPMN_NS}}}{name}"


def _sub(parent: etree._Element, name: str, /, **attrs: str) -> etree._Element:
    el = etree.SubElement(parent, _tag(name))
    for key, value in attrs.items():
        el.set(key, value)
    return el


# ----------------------- Id map -----------------------

class BpmnIdMap:
    """
    Injective map from model keys to XML ids. Model element ids are
    lowercased and made NCName-safe; collisions get a numeric suffix.
    """

    def __init__(self):
        self._ids: Dict[Hashable, str] = {}
        self._used: Set[str] = set()
        self.collisions = 0

    @staticmethod
    def sanitize(raw: str) -> str:
        out = _NON_NCNAME.sub("_", raw.lower())
        if not out or not (out[0].isalpha() or out[0] == "_"):
            out = "_" + out
        return out

    def assign(self, key: Hashable, raw: Optional[str] = None) -> str:
        if key in self._ids:
            return self._ids[key]
        base = self.sanitize(raw if raw is not None else str(key))
        candidate = base
        suffix = 1
        while candidate in self._used:
            suffix += 1
            self.collisions += 1
            if suffix > MAX_SUFFIX:
                raise ExportError("E002", f"id '{base}' collides more than {MAX_SUFFIX} times")
            candidate = f"{base}_{suffix}"
        self._ids[key] = candidate
        self._used.add(candidate)
        return candidate

    def __getitem__(self, key: Hashable) -> str:
        return self._ids[key]

    def __contains__(self, key: Hashable) -> bool:
        return key in self._ids

    def __len__(self) -> int:
        return len(self._ids)


# ----------------------- Flow synthesis -----------------------

@dataclass
class FlowPlan:
    """Synthesized nodes and sequence flows of one container."""
    nodes: List[etree._Element] = field(default_factory=list)
    start: Optional[etree._Element] = None
    end: Optional[etree._Element] = None
    sequence_flows: List[etree._Element] = field(default_factory=list)
    incoming: Dict[str, List[str]] = field(default_factory=dict)
    outgoing: Dict[str, List[str]] = field(default_factory=dict)


def documentation_lines(activity: Activity) -> List[str]:
    """Description, optional flag, completion rule and kind payload as text lines."""
    lines: List[str] = []
    if activity.description:
        lines.append(activity.description)
    if activity.is_optional:
        lines.append("optional: true")
    if activity.is_composite:
        lines.append(f"requiresAllSubactivities: {str(activity.requires_all).lower()}")
    p = activity.payload
    if isinstance(p, RequirementsSpec):
        for g in p.goals:
            lines.append(f"goal {g.id} ({g.kind.value}): {g.statement}")
        for c in p.criteria:
            lines.append(f"criterion {c.id} ({c.kind.value}): evaluates {c.evaluates}, "
                         f"baseline {c.baseline}, target {c.target}, dataType {c.data_type.value}")
        for r in p.requirements:
            lines.append(f"requirement {r.id} ({r.kind.value}): {r.statement}")
    elif isinstance(p, TrainingSpec):
        for pc in p.performance_criteria:
            lines.append(f"performance {pc.id}: {pc.metric_name}, threshold {pc.threshold}, "
                         f"{pc.direction.value}")
    elif isinstance(p, DeploymentSpec):
        lines.append(f"pattern: {p.pattern.value}")
        lines.append(f"strategy: {p.strategy.value}")
        lines.append(f"inferenceMode: {p.inference_mode.value}")
        if p.platform:
            lines.append(f"platform: {p.platform}")
        if p.scripts:
            lines.append(f"scripts: {', '.join(p.scripts)}")
    elif isinstance(p, MonitoringSpec):
        for fl in p.flaws:
            related = f" (relatedTo {fl.related_to})" if fl.related_to else ""
            lines.append(f"flaw {fl.id}: {fl.description}{related}")
        for me in p.metrics:
            unit = f" {me.unit}" if me.unit else ""
            lines.append(f"metric {me.id}: {me.name} in [{me.min_threshold}, {me.max_threshold}]{unit}")
    return lines


class BpmnExporter:
    def __init__(self, model: Method, opts: Optional[ExportOptions] = None):
        self.model = model
        self.opts = opts or ExportOptions()
        self.id_map = BpmnIdMap()
        # model ids first so they keep their plain sanitized form
        for el in model.iter_elements():
            self.id_map.assign(el.id)

    # --- data associations ---

    @staticmethod
    def association_sources(activity: Activity) -> List[str]:
        """inputs ∪ techniques ∪ resources, first occurrence order."""
        return list(dict.fromkeys(activity.inputs + activity.techniques + activity.resources))

    def used_data_elements(self) -> List[str]:
        used = set()
        for act in self.model.iter_activities():
            used.update(self.association_sources(act))
            used.update(act.outputs)
        ordered = [a.id for a in self.model.artifacts] + [r.id for r in self.model.resources] \
            + [t.id for t in self.model.techniques]
        return [eid for eid in ordered if eid in used]

    def map_data_associations(self, activity: Activity) -> List[etree._Element]:
        """ioSpecification followed by one association per data element."""
        sources = self.association_sources(activity)
        if not self.opts.emit_data_associations or not (sources or activity.outputs):
            return []
        aid = activity.id
        io = etree.Element(_tag("ioSpecification"))
        io.set("id", self.id_map.assign(("io", aid), f"{aid}_io"))
        input_ids = [self.id_map.assign(("in", aid, s), f"{aid}_in_{s}") for s in sources]
        output_ids = [self.id_map.assign(("out", aid, o), f"{aid}_out_{o}") for o in activity.outputs]
        for xml_id, eid in zip(input_ids, sources):
            _sub(io, "dataInput", id=xml_id, name=self.model.lookup(eid).display_name)
        for xml_id, eid in zip(output_ids, activity.outputs):
            _sub(io, "dataOutput", id=xml_id, name=self.model.lookup(eid).display_name)
        input_set = _sub(io, "inputSet", id=self.id_map.assign(("inset", aid), f"{aid}_inputs"))
        for xml_id in input_ids:
            _sub(input_set, "dataInputRefs").text = xml_id
        output_set = _sub(io, "outputSet", id=self.id_map.assign(("outset", aid), f"{aid}_outputs"))
        for xml_id in output_ids:
            _sub(output_set, "dataOutputRefs").text = xml_id

        fragments = [io]
        for xml_id, eid in zip(input_ids, sources):
            assoc = etree.Element(_tag("dataInputAssociation"))
            assoc.set("id", self.id_map.assign(("dia", aid, eid), f"{aid}_dia_{eid}"))
            _sub(assoc, "sourceRef").text = self.id_map[eid]
            _sub(assoc, "targetRef").text = xml_id
            fragments.append(assoc)
        for xml_id, eid in zip(output_ids, activity.outputs):
            assoc = etree.Element(_tag("dataOutputAssociation"))
            assoc.set("id", self.id_map.assign(("doa", aid, eid), f"{aid}_doa_{eid}"))
            _sub(assoc, "sourceRef").text = xml_id
            _sub(assoc, "targetRef").text = self.id_map[eid]
            fragments.append(assoc)
        return fragments

    # --- sequence flows ---

    def synthesize_flow(self, container, key: str) -> FlowPlan:
        """Start/end events, optional gateways and every sequence flow of `container`."""
        plan = FlowPlan()
        order = topological_order(container)
        position = {aid: i for i, aid in enumerate(order)}
        start_id = self.id_map.assign(("start", key), f"{key}_start")
        end_id = self.id_map.assign(("end", key), f"{key}_end")
        plan.start = etree.Element(_tag("startEvent"))
        plan.start.set("id", start_id)
        plan.end = etree.Element(_tag("endEvent"))
        plan.end.set("id", end_id)

        succ: Dict[str, List[str]] = {aid: [] for aid in order}
        pred: Dict[str, List[str]] = {aid: [] for aid in order}
        for f in container.flows:
            succ[f.source].append(f.target)
            pred[f.target].append(f.source)
        for aid in order:
            succ[aid].sort(key=position.get)

        # augmented graph: start -> sources, sinks -> end
        edges: List[Tuple[str, str]] = []
        edges.extend((start_id, self.id_map[aid]) for aid in order if not pred[aid])
        if not order:
            edges.append((start_id, end_id))
        for aid in order:
            edges.extend((self.id_map[aid], self.id_map[t]) for t in succ[aid])
        edges.extend((self.id_map[aid], end_id) for aid in order if not succ[aid])

        if self.opts.insert_gateways:
            edges = self._insert_gateways(edges, key, plan)

        for n, (src, tgt) in enumerate(edges, start=1):
            flow_id = self.id_map.assign(("flow", key, n), f"{key}_flow_{n}")
            sf = etree.Element(_tag("sequenceFlow"))
            sf.set("id", flow_id)
            sf.set("sourceRef", src)
            sf.set("targetRef", tgt)
            plan.sequence_flows.append(sf)
            plan.outgoing.setdefault(src, []).append(flow_id)
            plan.incoming.setdefault(tgt, []).append(flow_id)
        return plan

    def _insert_gateways(self, edges: List[Tuple[str, str]], key: str,
                         plan: FlowPlan) -> List[Tuple[str, str]]:
        out_deg: Dict[str, int] = {}
        in_deg: Dict[str, int] = {}
        for src, tgt in edges:
            out_deg[src] = out_deg.get(src, 0) + 1
            in_deg[tgt] = in_deg.get(tgt, 0) + 1
        split: Dict[str, str] = {}
        join: Dict[str, str] = {}
        for src, tgt in edges:
            if out_deg[src] > 1 and src not in split:
                split[src] = self._gateway(("split", key, src), f"{src}_split", plan)
            if in_deg[tgt] > 1 and tgt not in join:
                join[tgt] = self._gateway(("join", key, tgt), f"{tgt}_join", plan)

        result: List[Tuple[str, str]] = []
        seen: Set[Tuple[str, str]] = set()

        def add(edge: Tuple[str, str]) -> None:
            if edge not in seen:
                seen.add(edge)
                result.append(edge)

        for src, tgt in edges:
            a = src
            if src in split:
                add((src, split[src]))
                a = split[src]
            b = join.get(tgt, tgt)
            add((a, b))
            if tgt in join:
                add((join[tgt], tgt))
        return result

    def _gateway(self, key: Tuple, raw: str, plan: FlowPlan) -> str:
        gid = self.id_map.assign(key, raw)
        gw = etree.Element(_tag("parallelGateway"))
        gw.set("id", gid)
        plan.nodes.append(gw)
        return gid

    # --- activities ---

    def map_activity(self, activity: Activity) -> etree._Element:
        """One <userTask> or <subProcess> (with recursively mapped children)."""
        xml_id = self.id_map[activity.id]
        el = etree.Element(_tag("subProcess" if activity.is_composite else "userTask"))
        el.set("id", xml_id)
        el.set("name", activity.display_name)
        lines = documentation_lines(activity)
        if lines:
            _sub(el, "documentation").text = "\n".join(lines)
        # incoming/outgoing are filled in by the container once its flows exist
        for fragment in self.map_data_associations(activity):
            el.append(fragment)
        if self.opts.emit_performers:
            for n, p in enumerate(activity.participants, start=1):
                owner = _sub(el, "potentialOwner",
                             id=self.id_map.assign(("owner", activity.id, n), f"{activity.id}_owner_{n}"),
                             name=p.responsibility.value)
                expr = _sub(owner, "resourceRef")
                expr.text = self.id_map[p.role]
        if activity.is_composite:
            self._fill_container(el, activity, activity.id)
        logger.debug("mapped %s '%s' (%d line(s) of documentation)",
                     etree.QName(el).localname, activity.id, len(lines))
        return el

    def _fill_container(self, parent: etree._Element, container, key: str) -> None:
        plan = self.synthesize_flow(container, key)
        nodes: List[etree._Element] = [plan.start]
        by_id = {a.id: a for a in container.children}
        for aid in topological_order(container):
            nodes.append(self.map_activity(by_id[aid]))
        nodes.extend(plan.nodes)
        nodes.append(plan.end)
        for node in nodes:
            _set_flow_refs(node, plan.incoming.get(node.get("id"), []),
                           plan.outgoing.get(node.get("id"), []))
            parent.append(node)
        for sf in plan.sequence_flows:
            parent.append(sf)

    def build(self) -> etree._Element:
        m = self.model
        root = etree.Element(_tag("definitions"), nsmap=NSMAP)
        root.set("id", self.id_map.assign(("definitions",), "definitions"))
        root.set("targetNamespace", self.opts.target_namespace)
        if self.opts.emit_performers:
            for role in m.roles:
                _sub(root, "resource", id=self.id_map[role.id], name=role.display_name)
        process = _sub(root, "process", id=self.id_map.assign(("process",), "process"),
                       name=m.name, isExecutable="true")
        if m.description:
            _sub(process, "documentation").text = m.description
        if self.opts.emit_data_associations:
            for eid in self.used_data_elements():
                el = m.lookup(eid)
                object_id = self.id_map.assign(("object", eid), f"{eid}_object")
                _sub(process, "dataObject", id=object_id, name=el.display_name)
                _sub(process, "dataObjectReference", id=self.id_map[eid],
                     name=el.display_name, dataObjectRef=object_id)
        self._fill_container(process, m, "process")
        return root


def _set_flow_refs(node: etree._Element, incoming: List[str], outgoing: List[str]) -> None:
    """Insert <incoming>/<outgoing> right after <documentation>, as the schema orders them."""
    at = 1 if len(node) and node[0].tag == _tag("documentation") else 0
    refs = [("incoming", i) for i in incoming] + [("outgoing", o) for o in outgoing]
    for offset, (name, flow_id) in enumerate(refs):
        ref = etree.Element(_tag(name))
        ref.text = flow_id
        node.insert(at + offset, ref)


def export_bpmn(model: Method, opts: Optional[ExportOptions] = None) -> str:
    """The BPMN 2.0 XML document of `model`. Raises ExportError E001 on an invalid model."""
    errors = [d for d in semantics.validate(model) if d.is_error]
    if errors:
        raise ExportError("E001", f"model has {len(errors)} validation error(s), "
                                  f"first: {errors[0].code} {errors[0].message}")
    exporter = BpmnExporter(model, opts)
    root = exporter.build()
    text = etree.tostring(root, xml_declaration=True, encoding="UTF-8", pretty_print=True)
    logger.info("exported %d activit(ies), %d xml id(s)",
                sum(1 for _ in model.iter_activities()), len(exporter.id_map))
    return text.decode("utf-8")
