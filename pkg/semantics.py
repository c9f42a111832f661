#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Name resolution (AST -> Method) and rule-numbered validation.

resolve() checks every reference against the one flat identifier namespace
and builds the immutable metamodel; validate() runs the rule table over a
resolved Method. Both return diagnostics as values, sorted by rule code and
then source position, so output is byte-identical across runs.

Rule overview (see diagnostics.RULES for severities):
    R001-R003, R009 (conflicting payloads)  reported by resolve
    R004-R017                               reported by validate
"""

import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Dict, List, Optional, Tuple

import diagnostics as diag
import syntax as ast
from diagnostics import Diagnostic, MlprocError
from metamodel import (AIModelDetail, AIModelFlaw, Activity, ActivityKind, Artifact,
                       ArtifactKind, CRITERION_GOAL_FAMILY, DataAttribute, DataDetail,
                       DataSourceDetail, DatasetDetail, DatasetKind, DataType, DeploymentPattern,
                       DeploymentSpec, DeploymentStrategy, Direction, DocumentDetail, FlowEdge,
                       Goal, GoalKind, Hyperparameter, InferenceMode, Method, MonitoringSpec,
                       Participant, PerformanceCriterion, PerformanceMetric, Requirement,
                       RequirementKind, RequirementsSpec, Resource, ResourceKind,
                       ResponsibilityKind, Role, RoleKind, ScriptDetail, SuccessCriterion,
                       Technique, TrainingSpec, CriterionKind, payload_fits)
from utils import suggest

logger = logging.getLogger(__name__)

DECIMAL_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?")


@dataclass
class ResolutionResult:
    model: Optional[Method]
    diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.model is not None


# ----------------------- Declarations -----------------------

@dataclass
class _Decl:
    id: str
    family: str
    node: object
    span: Optional[diag.SourceSpan]


def _collect_declarations(method: ast.AstMethod) -> List[_Decl]:
    """Every id-bearing node of the tree in source order."""
    out: List[_Decl] = []
    families = {
        ast.AstRole: "role", ast.AstTechnique: "technique", ast.AstArtifact: "artifact",
        ast.AstResource: "resource", ast.AstGoal: "goal", ast.AstCriterion: "criterion",
        ast.AstRequirement: "requirement", ast.AstPerformance: "performance",
    }

    def visit_activity(act: ast.AstActivity) -> None:
        out.append(_Decl(act.id, "activity", act, act.span))
        if act.monitoring is not None:
            for fl in act.monitoring.flaws:
                out.append(_Decl(fl.id, "flaw", fl, fl.span))
            for me in act.monitoring.metrics:
                out.append(_Decl(me.id, "metric", me, me.span))
        for it in act.items:
            if isinstance(it, ast.AstActivity):
                visit_activity(it)
            elif type(it) in families:
                out.append(_Decl(it.id, families[type(it)], it, it.span))

    for it in method.items:
        if isinstance(it, ast.AstActivity):
            visit_activity(it)
        elif type(it) in families:
            out.append(_Decl(it.id, families[type(it)], it, it.span))
    return out


def _payload_families(act: ast.AstActivity) -> List[str]:
    found = []
    if act.of_type(ast.AstGoal) or act.of_type(ast.AstCriterion) or act.of_type(ast.AstRequirement):
        found.append("requirements")
    if act.of_type(ast.AstPerformance):
        found.append("training")
    if act.deployment is not None:
        found.append("deployment")
    if act.monitoring is not None:
        found.append("monitoring")
    return found


def _dedupe(names: List[str]) -> Tuple[str, ...]:
    return tuple(dict.fromkeys(names))


# ----------------------- Resolver -----------------------

class _Resolver:
    def __init__(self, method: ast.AstMethod):
        self.method = method
        self.diagnostics: List[Diagnostic] = []
        self.table: Dict[str, _Decl] = {}
        self.fatal = False

    def declare(self) -> None:
        for d in _collect_declarations(self.method):
            if d.id in self.table:
                first = self.table[d.id]
                where = f" (first declared at line {first.span.line})" if first.span else ""
                self.diagnostics.append(diag.make(
                    "R001", f"duplicate identifier '{d.id}'{where}", d.span, subject=d.id))
                self.fatal = True
            else:
                self.table[d.id] = d

    def check(self, ref: Optional[ast.Ref], what: str,
              accepts: Callable[[_Decl], bool]) -> None:
        """R002 when `ref` names nothing, R003 when it names the wrong family."""
        if ref is None:
            return
        decl = self.table.get(ref.name)
        if decl is None:
            candidates = [d.id for d in self.table.values() if accepts(d)]
            hint = suggest(ref.name, candidates)
            extra = f"; did you mean '{hint}'?" if hint else ""
            self.diagnostics.append(diag.make(
                "R002", f"unresolved reference '{ref.name}' (expected {what}){extra}",
                ref.span, subject=ref.name))
            self.fatal = True
        elif not accepts(decl):
            self.diagnostics.append(diag.make(
                "R003", f"'{ref.name}' is a {decl.family}, expected {what}",
                ref.span, subject=ref.name))
            self.fatal = True

    # --- family predicates ---

    @staticmethod
    def family(name: str) -> Callable[[_Decl], bool]:
        return lambda d: d.family == name

    @staticmethod
    def resource_of(kind: ResourceKind) -> Callable[[_Decl], bool]:
        return lambda d: d.family == "resource" and d.node.kind == kind.value

    @staticmethod
    def artifact_of(kind: ArtifactKind) -> Callable[[_Decl], bool]:
        return lambda d: d.family == "artifact" and d.node.kind == kind.value

    def check_references(self) -> None:
        is_ = self.family
        for it in self.method.items:
            if isinstance(it, ast.AstRole):
                for r in it.expert_in:
                    self.check(r, "a technique", is_("technique"))
            elif isinstance(it, ast.AstArtifact):
                self.check(it.template, "a Template resource", self.resource_of(ResourceKind.TEMPLATE))
                for r in it.collected_from:
                    self.check(r, "a DataSource resource", self.resource_of(ResourceKind.DATA_SOURCE))
                self.check(it.derived_from, "a Data artifact", self.artifact_of(ArtifactKind.DATA))
                names = {a.name for a in it.attributes}
                for attr in it.attributes:
                    for r in attr.correlated_to:
                        if r.name not in names:
                            self.diagnostics.append(diag.make(
                                "R002", f"'{r.name}' is not an attribute of '{it.id}'",
                                r.span, subject=r.name))
                            self.fatal = True
            elif isinstance(it, ast.AstResource):
                for r in it.requirements:
                    self.check(r, "a requirement", is_("requirement"))
            elif isinstance(it, ast.AstActivity):
                self.check_activity(it)
            elif isinstance(it, ast.AstFlow):
                self.check(it.source, "an activity", is_("activity"))
                self.check(it.target, "an activity", is_("activity"))

    def check_activity(self, act: ast.AstActivity) -> None:
        is_ = self.family
        for r in act.inputs + act.outputs:
            self.check(r, "an artifact", is_("artifact"))
        for r in act.uses:
            self.check(r, "a resource", is_("resource"))
        for r in act.applies:
            self.check(r, "a technique", is_("technique"))
        for p in act.participants:
            # wrong family is R006, reported by validate
            self.check(p.role, "a role", lambda d: True)
        if act.deployment is not None:
            self.check(act.deployment.platform, "a Platform resource",
                       self.resource_of(ResourceKind.PLATFORM))
            for r in act.deployment.scripts:
                self.check(r, "a Script resource", self.resource_of(ResourceKind.SCRIPT))
        if act.monitoring is not None:
            for fl in act.monitoring.flaws:
                self.check(fl.related_to, "a requirement", is_("requirement"))
        families = _payload_families(act)
        if len(families) > 1:
            self.diagnostics.append(diag.make(
                "R009", f"activity '{act.id}' mixes {' and '.join(families)} payloads",
                act.span, subject=act.id))
            self.fatal = True
        for it in act.items:
            if isinstance(it, ast.AstActivity):
                self.check_activity(it)
            elif isinstance(it, ast.AstFlow):
                self.check(it.source, "an activity", is_("activity"))
                self.check(it.target, "an activity", is_("activity"))
            elif isinstance(it, ast.AstCriterion):
                self.check(it.evaluates, "a goal", is_("goal"))

    # --- model construction ---

    def build(self) -> Method:
        m = self.method
        return Method(
            name=m.name,
            description=m.description,
            roles=tuple(self.build_role(r) for r in m.of_type(ast.AstRole)),
            techniques=tuple(Technique(t.id, t.display_name or t.id, t.description, t.span)
                             for t in m.of_type(ast.AstTechnique)),
            artifacts=tuple(self.build_artifact(a) for a in m.of_type(ast.AstArtifact)),
            resources=tuple(self.build_resource(r) for r in m.of_type(ast.AstResource)),
            activities=tuple(self.build_activity(a) for a in m.of_type(ast.AstActivity)),
            flows=tuple(FlowEdge(f.source.name, f.target.name, f.span)
                        for f in m.of_type(ast.AstFlow)),
            span=m.span,
        )

    @staticmethod
    def build_role(r: ast.AstRole) -> Role:
        return Role(id=r.id, display_name=r.display_name or r.id, kind=RoleKind(r.kind),
                    custom_label=r.custom_label, description=r.description,
                    expert_in=_dedupe([x.name for x in r.expert_in]), span=r.span)

    @staticmethod
    def build_artifact(a: ast.AstArtifact) -> Artifact:
        kind = ArtifactKind(a.kind)
        if kind is ArtifactKind.DOCUMENT:
            detail = DocumentDetail(template=a.template.name if a.template else None)
        elif kind is ArtifactKind.DATA:
            detail = DataDetail(attributes=_symmetric_attributes(a.attributes),
                                collected_from=_dedupe([x.name for x in a.collected_from]))
        elif kind is ArtifactKind.AI_MODEL:
            detail = AIModelDetail(
                hyperparameters=tuple(Hyperparameter(h.name, h.search_space, h.optimal_value)
                                      for h in a.hyperparameters),
                ranking=int(a.ranking) if a.ranking is not None else None)
        else:
            detail = DatasetDetail(
                dataset_kind=DatasetKind(a.dataset_kind) if a.dataset_kind else None,
                derived_from=a.derived_from.name if a.derived_from else None)
        return Artifact(id=a.id, display_name=a.display_name or a.id, kind=kind, detail=detail,
                        description=a.description, location=a.location, span=a.span)

    @staticmethod
    def build_resource(r: ast.AstResource) -> Resource:
        kind = ResourceKind(r.kind)
        detail = None
        if kind is ResourceKind.DATA_SOURCE:
            detail = DataSourceDetail(is_external=r.is_external, selected=r.selected,
                                      requirements=_dedupe([x.name for x in r.requirements]))
        elif kind is ResourceKind.SCRIPT:
            detail = ScriptDetail(interpreter_hint=r.interpreter)
        return Resource(id=r.id, display_name=r.display_name or r.id, kind=kind, detail=detail,
                        description=r.description, location=r.location, span=r.span)

    def build_activity(self, a: ast.AstActivity) -> Activity:
        return Activity(
            id=a.id,
            display_name=a.display_name or a.id,
            kind=ActivityKind(a.kind) if a.kind else ActivityKind.GENERIC,
            description=a.description,
            is_optional=a.is_optional,
            requires_all=a.requires_all,
            sub_activities=tuple(self.build_activity(c) for c in a.of_type(ast.AstActivity)),
            flows=tuple(FlowEdge(f.source.name, f.target.name, f.span)
                        for f in a.of_type(ast.AstFlow)),
            inputs=_dedupe([x.name for x in a.inputs]),
            outputs=_dedupe([x.name for x in a.outputs]),
            resources=_dedupe([x.name for x in a.uses]),
            techniques=_dedupe([x.name for x in a.applies]),
            participants=tuple(Participant(p.role.name, ResponsibilityKind(p.responsibility), p.span)
                               for p in a.participants),
            payload=self.build_payload(a),
            span=a.span,
        )

    @staticmethod
    def build_payload(a: ast.AstActivity):
        goals = a.of_type(ast.AstGoal)
        criteria = a.of_type(ast.AstCriterion)
        requirements = a.of_type(ast.AstRequirement)
        if goals or criteria or requirements:
            return RequirementsSpec(
                goals=tuple(Goal(g.id, GoalKind(g.kind), g.statement or "", g.span) for g in goals),
                criteria=tuple(SuccessCriterion(c.id, CriterionKind(c.kind), c.evaluates.name,
                                                c.baseline, c.target, DataType(c.data_type), c.span)
                               for c in criteria),
                requirements=tuple(Requirement(r.id, RequirementKind(r.kind), r.statement or "",
                                               r.span) for r in requirements))
        performance = a.of_type(ast.AstPerformance)
        if performance:
            return TrainingSpec(tuple(
                PerformanceCriterion(p.id, p.metric_name or "", p.threshold,
                                     Direction(p.direction), p.span) for p in performance))
        if a.deployment is not None:
            d = a.deployment
            return DeploymentSpec(
                pattern=DeploymentPattern(d.pattern), strategy=DeploymentStrategy(d.strategy),
                inference_mode=InferenceMode(d.inference),
                platform=d.platform.name if d.platform else None,
                scripts=_dedupe([x.name for x in d.scripts]))
        if a.monitoring is not None:
            return MonitoringSpec(
                flaws=tuple(AIModelFlaw(f.id, f.description or "",
                                        f.related_to.name if f.related_to else None, f.span)
                            for f in a.monitoring.flaws),
                metrics=tuple(PerformanceMetric(x.id, x.name or "", x.min_threshold,
                                                x.max_threshold, x.unit, x.span)
                              for x in a.monitoring.metrics))
        return None


def _symmetric_attributes(attrs: List[ast.AstDataAttribute]) -> Tuple[DataAttribute, ...]:
    links: Dict[str, List[str]] = {a.name: [r.name for r in a.correlated_to] for a in attrs}
    for a in attrs:
        for r in a.correlated_to:
            if r.name in links and a.name not in links[r.name]:
                links[r.name].append(a.name)
    return tuple(DataAttribute(a.name, a.semantic_type, a.is_feature, _dedupe(links[a.name]))
                 for a in attrs)


def resolve(tree: ast.AstMethod) -> ResolutionResult:
    """
    Resolve every reference of `tree`. The model is present iff no
    resolution error was found (R001, R002, R003, conflicting payloads R009).
    """
    if tree.errors:
        raise MlprocError("M002", f"cannot resolve a tree holding {len(tree.errors)} parse error(s)")
    resolver = _Resolver(tree)
    resolver.declare()
    resolver.check_references()
    found = sorted(resolver.diagnostics, key=diag.sort_key)
    if resolver.fatal:
        logger.info("resolve: %d diagnostic(s), no model", len(found))
        return ResolutionResult(model=None, diagnostics=found)
    model = resolver.build()
    logger.info("resolve: %d element(s), %d activit(ies)", len(model.index),
                sum(1 for _ in model.iter_activities()))
    return ResolutionResult(model=model, diagnostics=found)


# ----------------------- Validation -----------------------

def is_decimal(text: str) -> bool:
    return DECIMAL_RE.fullmatch(text.strip()) is not None


def _strongly_connected(nodes: List[str], edges: List[Tuple[str, str]]) -> List[List[str]]:
    """Tarjan's algorithm with an explicit stack; components in discovery order."""
    succ: Dict[str, List[str]] = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
    index: Dict[str, int] = {}
    low: Dict[str, int] = {}
    stack: List[str] = []
    on_stack = set()
    components: List[List[str]] = []

    def enter(v: str) -> None:
        index[v] = low[v] = len(index)
        stack.append(v)
        on_stack.add(v)

    for root in nodes:
        if root in index:
            continue
        enter(root)
        work = [(root, iter(succ[root]))]
        while work:
            v, pending = work[-1]
            for w in pending:
                if w not in index:
                    enter(w)
                    work.append((w, iter(succ[w])))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    components.append(comp)
    return components


def _check_container(container, out: List[Diagnostic]) -> None:
    children = {a.id for a in container.children}
    sibling_edges = []
    for f in container.flows:
        if f.source not in children or f.target not in children:
            out.append(diag.make("R004", f"flow {f.source} -> {f.target} does not connect two "
                                         f"direct children of the same container",
                                 f.span, subject=f"{f.source}->{f.target}"))
        else:
            sibling_edges.append(f)
    edges = [(f.source, f.target) for f in sibling_edges]
    for comp in _strongly_connected([a.id for a in container.children], edges):
        members = set(comp)
        cyclic = len(comp) > 1 or (comp[0], comp[0]) in edges
        if not cyclic:
            continue
        first = next(f for f in sibling_edges if f.source in members and f.target in members)
        ids = sorted(comp)
        out.append(diag.make("R005", "flow cycle among " + ", ".join(ids),
                             first.span, subject=",".join(ids)))


def _check_payload(model: Method, act: Activity, out: List[Diagnostic]) -> None:
    p = act.payload
    if not payload_fits(act.kind, p):
        out.append(diag.make("R009", f"{type(p).__name__} is not allowed on {act.kind.value} "
                                     f"activity '{act.id}'", act.span, subject=act.id))
    if isinstance(p, RequirementsSpec):
        for g in p.goals:
            if not g.statement.strip():
                out.append(diag.make("R017", f"goal '{g.id}' has an empty statement",
                                     g.span, subject=g.id))
        for r in p.requirements:
            if not r.statement.strip():
                out.append(diag.make("R017", f"requirement '{r.id}' has an empty statement",
                                     r.span, subject=r.id))
        for c in p.criteria:
            _check_criterion(model, c, out)
    elif isinstance(p, TrainingSpec):
        for pc in p.performance_criteria:
            if not pc.metric_name.strip():
                out.append(diag.make("R017", f"performance criterion '{pc.id}' has an empty "
                                             f"metric name", pc.span, subject=pc.id))
    elif isinstance(p, MonitoringSpec):
        for fl in p.flaws:
            if not fl.description.strip():
                out.append(diag.make("R017", f"flaw '{fl.id}' has an empty description",
                                     fl.span, subject=fl.id))
            if fl.related_to is not None:
                req = model.lookup(fl.related_to)
                if not isinstance(req, Requirement) or req.kind is not RequirementKind.AI_MODEL:
                    out.append(diag.make("R010", f"flaw '{fl.id}' is related to '{fl.related_to}', "
                                                 f"which is not an AIModelRequirement",
                                         fl.span, subject=fl.id))
        for me in p.metrics:
            if not me.name.strip():
                out.append(diag.make("R017", f"metric '{me.id}' has an empty name",
                                     me.span, subject=me.id))
            if Decimal(me.min_threshold) > Decimal(me.max_threshold):
                out.append(diag.make("R008", f"metric '{me.id}': min {me.min_threshold} is "
                                             f"greater than max {me.max_threshold}",
                                     me.span, subject=me.id))


def _check_criterion(model: Method, c: SuccessCriterion, out: List[Diagnostic]) -> None:
    bad = []
    if c.data_type in (DataType.NUMBER, DataType.PERCENTAGE):
        for label, value in (("baseline", c.baseline), ("target", c.target)):
            if not is_decimal(value):
                bad.append(f"{label} '{value}' is not a decimal number")
            elif c.data_type is DataType.PERCENTAGE and not (0 <= Decimal(value) <= 100):
                bad.append(f"{label} {value} is outside [0, 100]")
    if bad:
        out.append(diag.make("R007", f"criterion '{c.id}': " + "; ".join(bad),
                             c.span, subject=c.id))
    goal = model.lookup(c.evaluates)
    if isinstance(goal, Goal) and goal.kind is not CRITERION_GOAL_FAMILY[c.kind]:
        out.append(diag.make("R016", f"{c.kind.value} '{c.id}' evaluates {goal.kind.value} "
                                     f"'{goal.id}'", c.span, subject=c.id))


def validate(model: Method) -> List[Diagnostic]:
    """All rule violations of `model`; an empty list means the model is valid."""
    out: List[Diagnostic] = []
    _check_container(model, out)
    for act in model.iter_activities():
        _check_container(act, out)
        for p in act.participants:
            if not isinstance(model.lookup(p.role), Role):
                out.append(diag.make("R006", f"participant '{p.role}' of '{act.id}' is not a role",
                                     p.span or act.span, subject=p.role))
        _check_payload(model, act, out)
        if act.requires_all and not act.is_composite:
            out.append(diag.make("R011", f"requiresAll on leaf activity '{act.id}' has no effect",
                                 act.span, subject=act.id))
        if act.kind is ActivityKind.DATA_IDENTIFICATION:
            used = [model.lookup(r) for r in act.resources]
            if not any(isinstance(r, Resource) and r.is_selected_source for r in used):
                out.append(diag.make("R012", f"data identification '{act.id}' uses no selected "
                                             f"data source", act.span, subject=act.id))
        if act.kind is ActivityKind.AI_MODEL_EVALUATION:
            inputs = [model.lookup(a) for a in act.inputs]
            if not any(isinstance(a, Artifact) and isinstance(a.detail, DatasetDetail)
                       and a.detail.dataset_kind is DatasetKind.TEST for a in inputs):
                out.append(diag.make("R013", f"evaluation '{act.id}' has no Test dataset input",
                                     act.span, subject=act.id))

    flagged = set()
    for consumer in model.iter_activities():
        if consumer.is_optional:
            continue
        for artifact_id in consumer.inputs:
            producers = model.producers_of(artifact_id)
            if len(producers) == 1 and producers[0].is_optional:
                key = (producers[0].id, artifact_id)
                if key in flagged:
                    continue
                flagged.add(key)
                out.append(diag.make("R014", f"optional '{producers[0].id}' is the only producer of "
                                             f"'{artifact_id}', which mandatory '{consumer.id}' "
                                             f"consumes", producers[0].span,
                                     subject=producers[0].id))

    for art in model.artifacts:
        if isinstance(art.detail, AIModelDetail) and art.detail.ranking is not None \
                and art.detail.ranking < 1:
            out.append(diag.make("R015", f"ranking {art.detail.ranking} of '{art.id}' is not a "
                                         f"positive integer", art.span, subject=art.id))

    out.sort(key=diag.sort_key)
    logger.info("validate: %d error(s), %d warning(s)",
                sum(1 for d in out if d.is_error), sum(1 for d in out if not d.is_error))
    return out
