#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Static HTML documentation of a valid Method.

Single-file mode (default) renders one index.html: the method overview
(roles, resources by subclass, techniques, artifacts by subclass, the full
activity tree) followed by one section per activity. Multi-file mode keeps
the overview in index.html and moves each activity section to
activities/<anchor>.html.

Every declared element gets exactly one anchor; every internal link points
at one of them. Pages are well-formed (they also parse as XML) and carry no
script.
"""

import logging
import posixpath
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import jinja2
from markupsafe import Markup

import semantics
from diagnostics import DocgenError
from metamodel import (Activity, ArtifactKind, Method, ResourceKind, RoleKind,
                       topological_order)

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
INDEX_PAGE = "index.html"

_UNSAFE = re.compile(r"[^a-z0-9\-_]")

RESOURCE_GROUPS = [
    (ResourceKind.TEMPLATE, "Templates"),
    (ResourceKind.DATA_SOURCE, "Data sources"),
    (ResourceKind.SCRIPT, "Scripts"),
    (ResourceKind.GUIDELINE, "Guidelines"),
    (ResourceKind.PLATFORM, "Platforms"),
]
ARTIFACT_GROUPS = [
    (ArtifactKind.DOCUMENT, "Documents"),
    (ArtifactKind.DATA, "Data"),
    (ArtifactKind.AI_MODEL, "AI models"),
    (ArtifactKind.AI_MODEL_DATASET, "AI model datasets"),
]


@dataclass(frozen=True)
class DocPage:
    relative_path: str
    title: str
    body: str

    def __post_init__(self):
        parts = self.relative_path.split("/")
        if "\\" in self.relative_path or ".." in parts or "" in parts:
            raise ValueError(f"bad page path {self.relative_path!r}")


class AnchorMap:
    """
    Element id -> HTML id. Ids are lowercased and restricted to [a-z0-9-_];
    a collision gets a "-2", "-3", ... suffix. Element ids never contain "-",
    so suffixed anchors and the "mlproc-" section anchors cannot collide
    with them.
    """

    def __init__(self, model: Method):
        self._anchors: Dict[str, str] = {}
        used = set()
        for el in model.iter_elements():
            base = _UNSAFE.sub("_", el.id.lower()) or "_"
            candidate, n = base, 1
            while candidate in used:
                n += 1
                candidate = f"{base}-{n}"
            used.add(candidate)
            self._anchors[el.id] = candidate

    def anchor_id(self, element_id: str) -> str:
        return self._anchors[element_id]

    def __contains__(self, element_id: str) -> bool:
        return element_id in self._anchors


class HtmlDocGenerator:
    def __init__(self, model: Method, single_file: bool = True):
        self.model = model
        self.single_file = single_file
        self.anchors = AnchorMap(model)
        self.owner: Dict[str, str] = {}
        for act in model.iter_activities():
            for el in act.payload_elements():
                self.owner[el.id] = act.id
        self.current_page = INDEX_PAGE
        self.env = jinja2.Environment(
            loader=jinja2.FileSystemLoader(str(TEMPLATE_DIR)), autoescape=True,
            trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True,
            undefined=jinja2.StrictUndefined)
        self.env.globals.update(
            model=model,
            anchor=self.anchor,
            href=self.href,
            label=self.label,
            parent_of=model.parent_of,
            predecessors=model.predecessors,
            successors=model.successors,
            ordered_children=self.ordered_children,
            resource_groups=[(kind.value.lower(), label, model.resources_of_kind(kind))
                             for kind, label in RESOURCE_GROUPS],
            artifact_groups=[(kind.value.lower(), label, model.artifacts_of_kind(kind))
                             for kind, label in ARTIFACT_GROUPS],
            custom_role=RoleKind.CUSTOM,
            single_file=single_file,
        )

    # --- linking ---

    def anchor(self, element_id: str) -> str:
        return self.anchors.anchor_id(element_id)

    def page_of(self, element_id: str) -> str:
        if self.single_file:
            return INDEX_PAGE
        el = self.model.lookup(element_id)
        if isinstance(el, Activity):
            return f"activities/{self.anchor(element_id)}.html"
        if element_id in self.owner:
            return self.page_of(self.owner[element_id])
        return INDEX_PAGE

    def href(self, element_id: str) -> str:
        target = self.page_of(element_id)
        if target == self.current_page:
            return "#" + self.anchor(element_id)
        base = posixpath.dirname(self.current_page) or "."
        return posixpath.relpath(target, base) + "#" + self.anchor(element_id)

    def label(self, element_id: str) -> str:
        el = self.model.lookup(element_id)
        return getattr(el, "display_name", None) or element_id

    def ordered_children(self, container) -> List[Activity]:
        by_id = {a.id: a for a in container.children}
        return [by_id[aid] for aid in topological_order(container)]

    # --- rendering ---

    def activity_section(self, activity: Activity) -> str:
        """Rationale, artifacts, participants and navigation links of one activity."""
        template = self.env.get_template("activity_section.html.j2")
        return template.render(activity=activity)

    def _page(self, relative_path: str, title: str, template_name: str, **context) -> DocPage:
        self.current_page = relative_path
        try:
            body = self.env.get_template(template_name).render(
                title=title, root=posixpath.relpath(INDEX_PAGE, posixpath.dirname(relative_path) or "."),
                section=lambda act: Markup(self.activity_section(act)), **context)
        finally:
            self.current_page = INDEX_PAGE
        return DocPage(relative_path=relative_path, title=title, body=body)

    def generate(self) -> List[DocPage]:
        activities = list(self._activities_in_order())
        pages = [self._page(INDEX_PAGE, self.model.name, "index.html.j2",
                            activities=activities if self.single_file else [])]
        if not self.single_file:
            for act in activities:
                pages.append(self._page(self.page_of(act.id), act.display_name,
                                        "activity_page.html.j2", activity=act))
        logger.info("generated %d page(s), %d activity section(s)", len(pages), len(activities))
        return pages

    def _activities_in_order(self):
        """Pre-order walk following flow order within each container."""
        stack = list(reversed(self.ordered_children(self.model)))
        while stack:
            act = stack.pop()
            yield act
            stack.extend(reversed(self.ordered_children(act)))


def anchor_id(model: Method, element_id: str) -> str:
    return AnchorMap(model).anchor_id(element_id)


def activity_section(model: Method, activity: Activity, single_file: bool = True) -> str:
    return HtmlDocGenerator(model, single_file).activity_section(activity)


def generate_html(model: Method, single_file: bool = True) -> List[DocPage]:
    """All documentation pages of `model`. Raises DocgenError D001 on an invalid model."""
    errors = [d for d in semantics.validate(model) if d.is_error]
    if errors:
        raise DocgenError("D001", f"model has {len(errors)} validation error(s), "
                                  f"first: {errors[0].code} {errors[0].message}")
    return HtmlDocGenerator(model, single_file).generate()


def find_page(pages: List[DocPage], relative_path: str) -> Optional[DocPage]:
    return next((p for p in pages if p.relative_path == relative_path), None)
