#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Desk-scale enactment of a valid Method.

Every activity moves through
    NotReady -> Ready -> Running -> Completed
with Ready -> Skipped for optional activities and * -> Skipped for the
descendants of an activity that is skipped, or completed without
requiresAll. An activity is Ready only while its parent (if any) is
Running and every flow predecessor is Completed or Skipped.

Each command appends events to an append-only log, the command's own event
first. A log is therefore a command trace: replay() re-drives it and checks
every generated event against it.

Log line format:  <seq> <kind> [<activityId>]
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional

import semantics
from diagnostics import EnactmentError, MlprocError, TraceError
from metamodel import Activity, Method, flow_preorder, topological_order

logger = logging.getLogger(__name__)

# sequence numbers are ASCII digits only
SEQ_RE = re.compile(r"[0-9]+")


class ActivityState(str, Enum):
    NOT_READY = "NotReady"
    READY = "Ready"
    RUNNING = "Running"
    COMPLETED = "Completed"
    SKIPPED = "Skipped"

    @property
    def is_terminal(self) -> bool:
        return self in (ActivityState.COMPLETED, ActivityState.SKIPPED)


class EventKind(str, Enum):
    INSTANCE_CREATED = "InstanceCreated"
    ACTIVITY_READY = "ActivityReady"
    ACTIVITY_STARTED = "ActivityStarted"
    ACTIVITY_COMPLETED = "ActivityCompleted"
    ACTIVITY_SKIPPED = "ActivitySkipped"
    INSTANCE_COMPLETED = "InstanceCompleted"


@dataclass(frozen=True)
class Event:
    seq: int
    kind: EventKind
    activity_id: Optional[str] = None

    def render(self) -> str:
        if self.activity_id is None:
            return f"{self.seq} {self.kind.value}"
        return f"{self.seq} {self.kind.value} {self.activity_id}"

    @classmethod
    def parse(cls, line: str, position: int) -> "Event":
        parts = line.split()
        if len(parts) not in (2, 3) or not SEQ_RE.fullmatch(parts[0]):
            raise TraceError(position, f"malformed log line {line!r}")
        try:
            kind = EventKind(parts[1])
        except ValueError:
            raise TraceError(position, f"unknown event kind {parts[1]!r}") from None
        return cls(int(parts[0]), kind, parts[2] if len(parts) == 3 else None)


@dataclass
class InstanceState:
    model: Method
    states: Dict[str, ActivityState] = field(default_factory=dict)
    log: List[Event] = field(default_factory=list)

    def state(self, activity_id: str) -> ActivityState:
        self.model.activity(activity_id)
        return self.states[activity_id]

    @property
    def is_complete(self) -> bool:
        return bool(self.log) and self.log[-1].kind is EventKind.INSTANCE_COMPLETED

    @property
    def ready(self) -> List[str]:
        """Ready activity ids, pre-order in flow order."""
        return [a.id for a in flow_preorder(self.model)
                if self.states[a.id] is ActivityState.READY]

    def _emit(self, kind: EventKind, activity_id: Optional[str] = None) -> None:
        event = Event(len(self.log) + 1, kind, activity_id)
        self.log.append(event)
        logger.debug("event %s", event.render())

    def _set(self, activity_id: str, state: ActivityState, kind: EventKind) -> None:
        self.states[activity_id] = state
        self._emit(kind, activity_id)


# ----------------------- Internal transitions -----------------------

def _promote(inst: InstanceState, container) -> None:
    """NotReady children of a live container whose predecessors are all terminal become Ready."""
    if isinstance(container, Activity) and inst.states[container.id] is not ActivityState.RUNNING:
        return
    for aid in topological_order(container):
        if inst.states[aid] is not ActivityState.NOT_READY:
            continue
        if all(inst.states[p].is_terminal for p in inst.model.predecessors(aid)):
            inst._set(aid, ActivityState.READY, EventKind.ACTIVITY_READY)


def _skip_descendants(inst: InstanceState, activity: Activity) -> None:
    for child_id in [a.id for a in inst.model.descendants(activity.id)]:
        if not inst.states[child_id].is_terminal:
            inst._set(child_id, ActivityState.SKIPPED, EventKind.ACTIVITY_SKIPPED)


def _after_terminal(inst: InstanceState, activity_id: str) -> None:
    _promote(inst, inst.model.container_of(activity_id))
    if not inst.is_complete and all(inst.states[a.id].is_terminal for a in inst.model.activities):
        inst._emit(EventKind.INSTANCE_COMPLETED)
        logger.info("instance of '%s' completed after %d event(s)", inst.model.name, len(inst.log))


# ----------------------- Operations -----------------------

def create_instance(model: Method) -> InstanceState:
    """Fresh instance: top-level flow sources Ready, everything else NotReady."""
    errors = [d for d in semantics.validate(model) if d.is_error]
    if errors:
        raise EnactmentError("N001", f"model has {len(errors)} validation error(s), "
                                     f"first: {errors[0].code} {errors[0].message}")
    inst = InstanceState(model=model,
                         states={a.id: ActivityState.NOT_READY for a in model.iter_activities()})
    inst._emit(EventKind.INSTANCE_CREATED)
    _promote(inst, model)
    if not model.activities:
        inst._emit(EventKind.INSTANCE_COMPLETED)
    return inst


def start(inst: InstanceState, activity_id: str) -> InstanceState:
    activity = inst.model.activity(activity_id)
    current = inst.states[activity_id]
    if current is not ActivityState.READY:
        raise EnactmentError("N002", f"cannot start '{activity_id}': it is {current.value}, not Ready")
    inst._set(activity_id, ActivityState.RUNNING, EventKind.ACTIVITY_STARTED)
    _promote(inst, activity)
    return inst


def complete(inst: InstanceState, activity_id: str) -> InstanceState:
    activity = inst.model.activity(activity_id)
    current = inst.states[activity_id]
    if current is not ActivityState.RUNNING:
        raise EnactmentError("N003", f"cannot complete '{activity_id}': it is {current.value}, "
                                     f"not Running")
    if activity.is_composite and activity.requires_all:
        pending = [c.id for c in activity.children if not inst.states[c.id].is_terminal]
        if pending:
            raise EnactmentError("N004", f"'{activity_id}' requires all sub-activities; still open: "
                                         + ", ".join(pending))
    inst._set(activity_id, ActivityState.COMPLETED, EventKind.ACTIVITY_COMPLETED)
    if not activity.requires_all:
        _skip_descendants(inst, activity)
    _after_terminal(inst, activity_id)
    return inst


def skip(inst: InstanceState, activity_id: str) -> InstanceState:
    activity = inst.model.activity(activity_id)
    if not activity.is_optional:
        raise EnactmentError("N005", f"cannot skip '{activity_id}': it is mandatory")
    current = inst.states[activity_id]
    if current not in (ActivityState.READY, ActivityState.RUNNING):
        raise EnactmentError("N006", f"cannot skip '{activity_id}' while it is {current.value}")
    inst._set(activity_id, ActivityState.SKIPPED, EventKind.ACTIVITY_SKIPPED)
    _skip_descendants(inst, activity)
    _after_terminal(inst, activity_id)
    return inst


@dataclass(frozen=True)
class StatusReport:
    method_name: str
    complete: bool
    # (depth, display name, id, state) in tree order
    rows: List[tuple]
    ready: List[str]

    def render(self) -> str:
        lines = [f"Method {self.method_name}: {'completed' if self.complete else 'running'}"]
        for depth, name, _, state in self.rows:
            lines.append(f"{'  ' * depth}{name}: {state.value}")
        lines.append("Ready: " + (", ".join(self.ready) if self.ready else "(none)"))
        return "\n".join(lines) + "\n"


def status(inst: InstanceState) -> StatusReport:
    """Per-activity states grouped under their top-level activity, plus the Ready set."""
    rows = []

    def visit(container, depth: int) -> None:
        by_id = {a.id: a for a in container.children}
        for aid in topological_order(container):
            act = by_id[aid]
            rows.append((depth, act.display_name, aid, inst.states[aid]))
            visit(act, depth + 1)

    visit(inst.model, 0)
    return StatusReport(inst.model.name, inst.is_complete, rows, inst.ready)


# ----------------------- Log (de)serialization and replay -----------------------

def render_log(events: Iterable[Event]) -> str:
    return "".join(e.render() + "\n" for e in events)


def parse_log(text: str) -> List[Event]:
    events = []
    for line in text.splitlines():
        if line.strip():
            events.append(Event.parse(line, len(events) + 1))
    return events


COMMANDS = {
    EventKind.ACTIVITY_STARTED: start,
    EventKind.ACTIVITY_COMPLETED: complete,
    EventKind.ACTIVITY_SKIPPED: skip,
}


def replay(model: Method, events: List[Event]) -> InstanceState:
    """
    Rebuild an instance from its log. Raises TraceError at the first event
    that is out of sequence, illegal, or differs from what the engine
    generates for the same commands.
    """
    for position, event in enumerate(events, start=1):
        if event.seq != position:
            raise TraceError(position, f"expected seq {position}, found {event.seq}")
    if not events or events[0].kind is not EventKind.INSTANCE_CREATED:
        raise TraceError(1, "log must start with InstanceCreated")

    inst = create_instance(model)
    cursor = 0

    def check_generated(upto: int) -> None:
        for i in range(cursor, upto):
            if i >= len(events):
                raise TraceError(i + 1, f"log ends before expected {inst.log[i].render()!r}")
            if events[i] != inst.log[i]:
                raise TraceError(i + 1, f"expected {inst.log[i].render()!r}, "
                                        f"found {events[i].render()!r}")

    check_generated(len(inst.log))
    cursor = len(inst.log)
    while cursor < len(events):
        event = events[cursor]
        command = COMMANDS.get(event.kind)
        if command is None or event.activity_id is None:
            raise TraceError(event.seq, f"{event.kind.value} cannot be issued as a command")
        try:
            command(inst, event.activity_id)
        except MlprocError as exc:
            raise TraceError(event.seq, exc.message) from None
        check_generated(len(inst.log))
        cursor = len(inst.log)
    return inst
