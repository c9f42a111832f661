#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Resolved in-memory representation of an ML engineering process model.

A Method is built by semantics.resolve() and never mutated afterwards, so it
can be shared read-only between exporters, the documentation generator and
any number of enactment instances.

All references between elements are stored as identifiers; a resolved Method
guarantees each of them names a declared element (one flat namespace).
"""

import heapq
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Tuple, Union

from diagnostics import CycleError, SourceSpan, UnknownElementError


# ----------------------- Enumerations -----------------------

class ActivityKind(str, Enum):
    GENERIC = "Generic"
    BUSINESS = "BusinessActivity"
    REQUIREMENTS_ENGINEERING = "RequirementsEngineeringActivity"
    DATA_IDENTIFICATION = "DataIdentificationActivity"
    DATA_PREPARATION = "DataPreparationActivity"
    DATA_COLLECTION = "DataCollectionActivity"
    DATA_PROCESSING = "DataProcessingActivity"
    FEATURE_ENGINEERING = "FeatureEngineeringActivity"
    AI_MODELING = "AIModelingActivity"
    AI_MODEL_TRAINING = "AIModelTrainingActivity"
    AI_MODEL_EVALUATION = "AIModelEvaluationActivity"
    OPERATIONS = "OperationsActivity"
    AI_MODEL_DEPLOYMENT = "AIModelDeploymentActivity"
    AI_MODEL_MONITORING = "AIModelMonitoringActivity"


class RoleKind(str, Enum):
    GROUP_MANAGER = "GroupManager"
    TEAM_LEAD = "TeamLead"
    PROJECT_LEAD = "ProjectLead"
    DATA_CONSUMER = "DataConsumer"
    BUSINESS_USER = "BusinessUser"
    BUSINESS_ANALYST = "BusinessAnalyst"
    DATA_ENGINEER = "DataEngineer"
    DATA_STEWARD = "DataSteward"
    DATA_PROVIDER = "DataProvider"
    DATA_ANNOTATOR = "DataAnnotator"
    DATA_SCIENTIST = "DataScientist"
    ARCHITECT = "Architect"
    SOFTWARE_ENGINEER = "SoftwareEngineer"
    MODEL_OPERATOR = "ModelOperator"
    CUSTOM = "Custom"


# Role groups as the process literature organizes them
ROLE_GROUPS: Dict[str, Tuple[RoleKind, ...]] = {
    "Management": (RoleKind.GROUP_MANAGER, RoleKind.TEAM_LEAD, RoleKind.PROJECT_LEAD),
    "Business": (RoleKind.DATA_CONSUMER, RoleKind.BUSINESS_USER, RoleKind.BUSINESS_ANALYST),
    "Data": (RoleKind.DATA_ENGINEER, RoleKind.DATA_STEWARD, RoleKind.DATA_PROVIDER,
             RoleKind.DATA_ANNOTATOR, RoleKind.DATA_SCIENTIST),
    "Engineering and operations": (RoleKind.ARCHITECT, RoleKind.SOFTWARE_ENGINEER,
                                   RoleKind.MODEL_OPERATOR),
}


class ResponsibilityKind(str, Enum):
    RESPONSIBLE = "Responsible"
    ACCOUNTABLE = "Accountable"
    CONSULTED = "Consulted"
    INFORMED = "Informed"


class ArtifactKind(str, Enum):
    DOCUMENT = "Document"
    DATA = "Data"
    AI_MODEL = "AIModel"
    AI_MODEL_DATASET = "AIModelDataset"


class DatasetKind(str, Enum):
    TRAINING = "Training"
    VALIDATION = "Validation"
    TEST = "Test"


class ResourceKind(str, Enum):
    TEMPLATE = "Template"
    DATA_SOURCE = "DataSource"
    SCRIPT = "Script"
    GUIDELINE = "Guideline"
    PLATFORM = "Platform"


class GoalKind(str, Enum):
    BUSINESS = "BusinessGoal"
    AI_MODEL = "AIModelGoal"


class CriterionKind(str, Enum):
    BUSINESS = "BusinessSuccessCriterion"
    AI_MODEL = "AIModelSuccessCriterion"


class DataType(str, Enum):
    NUMBER = "Number"
    PERCENTAGE = "Percentage"
    TEXT = "Text"


class RequirementKind(str, Enum):
    GENERIC = "Generic"
    AI_MODEL = "AIModelRequirement"
    DATA = "DataRequirement"
    DATA_SOURCE = "DataSourceRequirement"


class Direction(str, Enum):
    MAXIMIZE = "Maximize"
    MINIMIZE = "Minimize"


class DeploymentPattern(str, Enum):
    STATIC = "Static"
    DYNAMIC_ON_DEVICE = "DynamicOnDevice"
    DYNAMIC_ON_SERVER = "DynamicOnServer"
    STREAMING = "Streaming"


class DeploymentStrategy(str, Enum):
    SINGLE = "Single"
    SILENT = "Silent"
    CANARY = "Canary"
    MULTI_ARMED_BANDIT = "MultiArmedBandit"


class InferenceMode(str, Enum):
    BATCH = "Batch"
    ON_DEMAND = "OnDemand"


# Goal family a criterion kind must evaluate
CRITERION_GOAL_FAMILY: Dict[CriterionKind, GoalKind] = {
    CriterionKind.BUSINESS: GoalKind.BUSINESS,
    CriterionKind.AI_MODEL: GoalKind.AI_MODEL,
}


# ----------------------- Core elements -----------------------

@dataclass(frozen=True)
class FlowEdge:
    source: str
    target: str
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Technique:
    id: str
    display_name: str
    description: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Role:
    id: str
    display_name: str
    kind: RoleKind
    custom_label: Optional[str] = None
    description: Optional[str] = None
    expert_in: Tuple[str, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Participant:
    role: str
    responsibility: ResponsibilityKind
    span: Optional[SourceSpan] = field(default=None, compare=False)


# ----------------------- Artifacts -----------------------

@dataclass(frozen=True)
class DataAttribute:
    name: str
    semantic_type: Optional[str] = None
    is_feature: bool = False
    # symmetric after resolution
    correlated_to: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Hyperparameter:
    name: str
    search_space: Optional[str] = None
    optimal_value: Optional[str] = None


@dataclass(frozen=True)
class DocumentDetail:
    template: Optional[str] = None


@dataclass(frozen=True)
class DataDetail:
    attributes: Tuple[DataAttribute, ...] = ()
    collected_from: Tuple[str, ...] = ()


@dataclass(frozen=True)
class AIModelDetail:
    hyperparameters: Tuple[Hyperparameter, ...] = ()
    ranking: Optional[int] = None


@dataclass(frozen=True)
class DatasetDetail:
    dataset_kind: Optional[DatasetKind] = None
    derived_from: Optional[str] = None


ArtifactDetail = Union[DocumentDetail, DataDetail, AIModelDetail, DatasetDetail]


@dataclass(frozen=True)
class Artifact:
    id: str
    display_name: str
    kind: ArtifactKind
    detail: ArtifactDetail
    description: Optional[str] = None
    location: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)


# ----------------------- Resources -----------------------

@dataclass(frozen=True)
class DataSourceDetail:
    is_external: bool = False
    selected: bool = False
    requirements: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ScriptDetail:
    interpreter_hint: Optional[str] = None


@dataclass(frozen=True)
class Resource:
    id: str
    display_name: str
    kind: ResourceKind
    detail: Union[DataSourceDetail, ScriptDetail, None] = None
    description: Optional[str] = None
    location: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def is_selected_source(self) -> bool:
        return isinstance(self.detail, DataSourceDetail) and self.detail.selected


# ----------------------- Kind payloads -----------------------

@dataclass(frozen=True)
class Goal:
    id: str
    kind: GoalKind
    statement: str
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class SuccessCriterion:
    id: str
    kind: CriterionKind
    evaluates: str
    baseline: str
    target: str
    data_type: DataType
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Requirement:
    id: str
    kind: RequirementKind
    statement: str
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class PerformanceCriterion:
    id: str
    metric_name: str
    threshold: str
    direction: Direction
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class AIModelFlaw:
    id: str
    description: str
    related_to: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class PerformanceMetric:
    id: str
    name: str
    min_threshold: str
    max_threshold: str
    unit: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class RequirementsSpec:
    goals: Tuple[Goal, ...] = ()
    criteria: Tuple[SuccessCriterion, ...] = ()
    requirements: Tuple[Requirement, ...] = ()


@dataclass(frozen=True)
class TrainingSpec:
    performance_criteria: Tuple[PerformanceCriterion, ...] = ()


@dataclass(frozen=True)
class DeploymentSpec:
    pattern: DeploymentPattern
    strategy: DeploymentStrategy
    inference_mode: InferenceMode
    platform: Optional[str] = None
    scripts: Tuple[str, ...] = ()


@dataclass(frozen=True)
class MonitoringSpec:
    flaws: Tuple[AIModelFlaw, ...] = ()
    metrics: Tuple[PerformanceMetric, ...] = ()


KindPayload = Union[RequirementsSpec, TrainingSpec, DeploymentSpec, MonitoringSpec]

# payload family -> activity kinds admitting it
PAYLOAD_KINDS: Dict[type, Tuple[ActivityKind, ...]] = {
    RequirementsSpec: (ActivityKind.REQUIREMENTS_ENGINEERING, ActivityKind.DATA_IDENTIFICATION),
    TrainingSpec: (ActivityKind.AI_MODEL_TRAINING,),
    DeploymentSpec: (ActivityKind.AI_MODEL_DEPLOYMENT,),
    MonitoringSpec: (ActivityKind.AI_MODEL_MONITORING,),
}


def payload_fits(kind: ActivityKind, payload: Optional[KindPayload]) -> bool:
    return payload is None or kind in PAYLOAD_KINDS[type(payload)]


# ----------------------- Activities and the Method -----------------------

@dataclass(frozen=True)
class Activity:
    id: str
    display_name: str
    kind: ActivityKind = ActivityKind.GENERIC
    description: Optional[str] = None
    is_optional: bool = False
    requires_all: bool = False
    sub_activities: Tuple["Activity", ...] = ()
    flows: Tuple[FlowEdge, ...] = ()
    inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    resources: Tuple[str, ...] = ()
    techniques: Tuple[str, ...] = ()
    participants: Tuple[Participant, ...] = ()
    payload: Optional[KindPayload] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def is_composite(self) -> bool:
        return bool(self.sub_activities)

    @property
    def children(self) -> Tuple["Activity", ...]:
        return self.sub_activities

    def payload_elements(self) -> Iterator[Union[Goal, SuccessCriterion, Requirement,
                                                 PerformanceCriterion, AIModelFlaw,
                                                 PerformanceMetric]]:
        """Named elements declared inside this activity's payload."""
        p = self.payload
        if isinstance(p, RequirementsSpec):
            yield from p.goals
            yield from p.criteria
            yield from p.requirements
        elif isinstance(p, TrainingSpec):
            yield from p.performance_criteria
        elif isinstance(p, MonitoringSpec):
            yield from p.flaws
            yield from p.metrics


Container = Union["Method", Activity]
Element = Union[Role, Technique, Artifact, Resource, Activity, Goal, SuccessCriterion,
                Requirement, PerformanceCriterion, AIModelFlaw, PerformanceMetric]


@dataclass(frozen=True)
class Method:
    name: str
    description: Optional[str] = None
    roles: Tuple[Role, ...] = ()
    techniques: Tuple[Technique, ...] = ()
    artifacts: Tuple[Artifact, ...] = ()
    resources: Tuple[Resource, ...] = ()
    activities: Tuple[Activity, ...] = ()
    flows: Tuple[FlowEdge, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def children(self) -> Tuple[Activity, ...]:
        return self.activities

    # --- indexes (computed once; the Method is immutable) ---

    def iter_activities(self) -> Iterator[Activity]:
        """All activities, pre-order, declaration order."""
        stack: List[Activity] = list(reversed(self.activities))
        while stack:
            act = stack.pop()
            yield act
            stack.extend(reversed(act.sub_activities))

    def iter_elements(self) -> Iterator[Element]:
        """Every declared element in declaration order (method sections first)."""
        yield from self.roles
        yield from self.techniques
        yield from self.artifacts
        yield from self.resources
        for act in self.iter_activities():
            yield act
            yield from act.payload_elements()

    @cached_property
    def index(self) -> Dict[str, Element]:
        return {el.id: el for el in self.iter_elements()}

    @cached_property
    def parents(self) -> Dict[str, Optional[Activity]]:
        out: Dict[str, Optional[Activity]] = {a.id: None for a in self.activities}
        for act in self.iter_activities():
            for child in act.sub_activities:
                out[child.id] = act
        return out

    def lookup(self, element_id: str) -> Optional[Element]:
        return self.index.get(element_id)

    def activity(self, activity_id: str) -> Activity:
        el = self.index.get(activity_id)
        if not isinstance(el, Activity):
            raise UnknownElementError(activity_id)
        return el

    def parent_of(self, activity_id: str) -> Optional[Activity]:
        if activity_id not in self.parents:
            raise UnknownElementError(activity_id)
        return self.parents[activity_id]

    def container_of(self, activity_id: str) -> Container:
        return self.parent_of(activity_id) or self

    def predecessors(self, activity_id: str) -> List[str]:
        container = self.container_of(activity_id)
        return [f.source for f in container.flows if f.target == activity_id]

    def successors(self, activity_id: str) -> List[str]:
        container = self.container_of(activity_id)
        return [f.target for f in container.flows if f.source == activity_id]

    def descendants(self, activity_id: str) -> List[Activity]:
        """Every activity below `activity_id`, pre-order, siblings in flow order."""
        return flow_preorder(self.activity(activity_id))

    def producers_of(self, artifact_id: str) -> List[Activity]:
        return [a for a in self.iter_activities() if artifact_id in a.outputs]

    def consumers_of(self, artifact_id: str) -> List[Activity]:
        return [a for a in self.iter_activities() if artifact_id in a.inputs]

    def resources_of_kind(self, kind: ResourceKind) -> List[Resource]:
        return [r for r in self.resources if r.kind is kind]

    def artifacts_of_kind(self, kind: ArtifactKind) -> List[Artifact]:
        return [a for a in self.artifacts if a.kind is kind]


# ----------------------- Structural queries -----------------------

def lookup(method: Method, element_id: str) -> Optional[Element]:
    """The unique element declared with `element_id`, or None."""
    return method.lookup(element_id)


def parent_of(method: Method, activity_id: str) -> Optional[Activity]:
    """Enclosing activity, None for top-level ones; unknown ids raise."""
    return method.parent_of(activity_id)


def find_cycle(nodes: List[str], edges: List[Tuple[str, str]]) -> List[str]:
    """Some cycle among `nodes` (first node repeated at the end), or []."""
    succ: Dict[str, List[str]] = {n: [] for n in nodes}
    for a, b in edges:
        if a in succ and b in succ:
            succ[a].append(b)
    # 0 unvisited, 1 on the current path, 2 done
    color: Dict[str, int] = {n: 0 for n in nodes}

    for root in nodes:
        if color[root]:
            continue
        color[root] = 1
        path = [root]
        work = [iter(succ[root])]
        while work:
            for m in work[-1]:
                if color[m] == 1:
                    return path[path.index(m):] + [m]
                if color[m] == 0:
                    color[m] = 1
                    path.append(m)
                    work.append(iter(succ[m]))
                    break
            else:
                work.pop()
                color[path.pop()] = 2
    return []


def topological_order(container: Container) -> List[str]:
    """
    Child activity ids of `container` in an order consistent with its flows.
    Ties are broken by declaration order, so a container without flows
    yields its declaration order. Raises CycleError on a cyclic flow graph.
    """
    ids = [a.id for a in container.children]
    position = {aid: i for i, aid in enumerate(ids)}
    edges = [(f.source, f.target) for f in container.flows
             if f.source in position and f.target in position]
    indegree = {aid: 0 for aid in ids}
    succ: Dict[str, List[str]] = {aid: [] for aid in ids}
    for a, b in edges:
        succ[a].append(b)
        indegree[b] += 1

    heap = [position[aid] for aid in ids if indegree[aid] == 0]
    heapq.heapify(heap)
    order: List[str] = []
    while heap:
        aid = ids[heapq.heappop(heap)]
        order.append(aid)
        for nxt in succ[aid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(heap, position[nxt])

    if len(order) < len(ids):
        remaining = [aid for aid in ids if indegree[aid] > 0]
        raise CycleError(find_cycle(remaining, edges))
    return order


def flow_preorder(container: Container) -> List[Activity]:
    """Activities below `container`, pre-order, siblings in topological order."""
    out: List[Activity] = []
    by_id = {a.id: a for a in container.children}
    for aid in topological_order(container):
        out.append(by_id[aid])
        out.extend(flow_preorder(by_id[aid]))
    return out
