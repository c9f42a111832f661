from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from lxml import etree
from pydantic import ValidationError

from bpmn_export import BPMN_NS, BpmnIdMap, ExportOptions, documentation_lines, export_bpmn
from conftest import build_model, build_valid_model
from diagnostics import ExportError
from model_gen import generate
from oracles import bpmn_association_counts, expected_association_counts

NS = {"b": BPMN_NS}
B = "{%s}" % BPMN_NS


def export_tree(model, **opts):
    xml = export_bpmn(model, ExportOptions(**opts))
    return etree.fromstring(xml.encode("utf-8"))


def process_of(root):
    return root.find("b:process", NS)


def direct(el, tag):
    return el.findall("b:" + tag, NS)


def flows_text(body: str) -> str:
    return 'method "m" {\n' + body + "\n}\n"


def assert_wired(container):
    """Every sequence flow connects two direct children and is listed on both ends."""
    nodes = {el.get("id"): el for el in container if el.get("id") is not None}
    for sf in direct(container, "sequenceFlow"):
        src, tgt = nodes[sf.get("sourceRef")], nodes[sf.get("targetRef")]
        assert sf.get("id") in [o.text for o in direct(src, "outgoing")]
        assert sf.get("id") in [i.text for i in direct(tgt, "incoming")]
    for sub in direct(container, "subProcess"):
        assert_wired(sub)


# ---- corpus ----

def test_tdsp_document(tdsp_model):
    root = export_tree(tdsp_model)
    assert root.tag == B + "definitions"
    assert root.get("targetNamespace") == "http://mlproc.example/process"
    process = process_of(root)
    assert process.get("id") == "process"
    assert process.get("isExecutable") == "true"
    assert process.get("name") == "TDSP"
    assert len(direct(process, "subProcess")) == 4
    assert len(direct(root, "resource")) == len(tdsp_model.roles)


def test_tdsp_nested_subprocess(tdsp_model):
    process = process_of(export_tree(tdsp_model))
    explore = process.find(".//b:subProcess[@id='explore_and_visualize_data']", NS)
    assert explore.get("name") == "Explore and visualize data"
    assert [t.get("id") for t in direct(explore, "userTask")] == [
        "prepare_data", "explore_data", "sample_data", "process_data"]
    assert len(direct(explore, "startEvent")) == 1
    assert len(direct(explore, "endEvent")) == 1


def test_tdsp_data_associations(tdsp_model):
    process = process_of(export_tree(tdsp_model))
    bu = process.find("b:subProcess[@id='business_understanding']", NS)
    outputs = direct(bu, "dataOutputAssociation")
    assert len(outputs) == 3
    assert [o.find("b:targetRef", NS).text for o in outputs] == [
        "charter", "data_dictionary", "data_sources"]
    assert bu.find("b:ioSpecification", NS) is not None
    references = {r.get("id") for r in direct(process, "dataObjectReference")}
    for assoc in process.iter(B + "dataInputAssociation"):
        assert assoc.find("b:sourceRef", NS).text in references


def test_tdsp_performers(tdsp_model):
    process = process_of(export_tree(tdsp_model))
    bu = process.find("b:subProcess[@id='business_understanding']", NS)
    owners = direct(bu, "potentialOwner")
    assert [o.get("name") for o in owners] == ["Accountable", "Consulted"]
    assert [o.find("b:resourceRef", NS).text for o in owners] == ["project_lead", "customer"]


def test_tdsp_documentation(tdsp_model):
    process = process_of(export_tree(tdsp_model))

    def doc(activity_id):
        el = process.find(f".//*[@id='{activity_id}']", NS)
        return el.find("b:documentation", NS).text.split("\n")

    assert "optional: true" in doc("sample_data")
    assert "requiresAllSubactivities: true" in doc("explore_and_visualize_data")
    deploy = doc("deploy_model")
    assert {"pattern: DynamicOnServer", "strategy: Canary", "inferenceMode: OnDemand",
            "platform: azure_ml", "scripts: scoring_script"} <= set(deploy)
    assert any(line.startswith("criterion churn_rate") for line in doc("define_objectives"))


def test_tdsp_wiring_and_unique_ids(tdsp_model):
    root = export_tree(tdsp_model)
    ids = [el.get("id") for el in root.iter() if el.get("id") is not None]
    assert len(ids) == len(set(ids))
    assert_wired(process_of(root))


def test_export_is_byte_deterministic(tdsp_model):
    assert export_bpmn(tdsp_model) == export_bpmn(tdsp_model)


def test_export_starts_with_xml_declaration(tdsp_model):
    assert export_bpmn(tdsp_model).startswith("<?xml version='1.0' encoding='UTF-8'?>")


# ---- flow synthesis ----

def test_linear_chain():
    model = build_valid_model(flows_text(
        "activity a activity b activity c activity d flow a -> b flow b -> c flow c -> d"))
    process = process_of(export_tree(model))
    assert len(direct(process, "sequenceFlow")) == 5
    assert direct(process, "parallelGateway") == []
    assert_wired(process)


def test_diamond_gets_split_and_join():
    model = build_valid_model(flows_text(
        "activity a activity b activity c activity d "
        "flow a -> b flow a -> c flow b -> d flow c -> d"))
    process = process_of(export_tree(model))
    gateways = [g.get("id") for g in direct(process, "parallelGateway")]
    assert sorted(gateways) == ["a_split", "d_join"]
    assert len(direct(process, "sequenceFlow")) == 8
    assert_wired(process)


def test_diamond_without_gateways():
    model = build_valid_model(flows_text(
        "activity a activity b activity c activity d "
        "flow a -> b flow a -> c flow b -> d flow c -> d"))
    process = process_of(export_tree(model, insert_gateways=False))
    assert direct(process, "parallelGateway") == []
    assert len(direct(process, "sequenceFlow")) == 6


def test_empty_method_connects_start_to_end():
    process = process_of(export_tree(build_valid_model(flows_text(""))))
    flows = direct(process, "sequenceFlow")
    assert [(f.get("sourceRef"), f.get("targetRef")) for f in flows] == [
        ("process_start", "process_end")]


def test_single_leaf():
    process = process_of(export_tree(build_valid_model(flows_text('activity only "Only"'))))
    assert [t.get("id") for t in direct(process, "userTask")] == ["only"]
    assert [(f.get("sourceRef"), f.get("targetRef")) for f in direct(process, "sequenceFlow")] == [
        ("process_start", "only"), ("only", "process_end")]


def test_unconnected_siblings_run_in_parallel():
    process = process_of(export_tree(build_valid_model(flows_text("activity a activity b"))))
    assert sorted(g.get("id") for g in direct(process, "parallelGateway")) == [
        "process_end_join", "process_start_split"]
    assert_wired(process)


def test_composite_gets_its_own_events():
    model = build_valid_model(flows_text("activity outer { activity inner }"))
    outer = process_of(export_tree(model)).find("b:subProcess", NS)
    assert [e.get("id") for e in direct(outer, "startEvent")] == ["outer_start"]
    assert [e.get("id") for e in direct(outer, "endEvent")] == ["outer_end"]
    assert len(direct(outer, "sequenceFlow")) == 2


# ---- options ----

def test_options_switch_off_data_and_performers(tdsp_model):
    root = export_tree(tdsp_model, emit_data_associations=False, emit_performers=False)
    assert list(root.iter(B + "dataObject")) == []
    assert list(root.iter(B + "dataInputAssociation")) == []
    assert list(root.iter(B + "potentialOwner")) == []
    assert direct(root, "resource") == []


def test_custom_namespace(tdsp_model):
    root = export_tree(tdsp_model, target_namespace="urn:example:ml")
    assert root.get("targetNamespace") == "urn:example:ml"


@pytest.mark.parametrize("value", ["", "   "])
def test_empty_namespace_is_rejected(value):
    with pytest.raises(ValidationError):
        ExportOptions(target_namespace=value)


def test_options_are_frozen():
    opts = ExportOptions()
    with pytest.raises(ValidationError):
        opts.insert_gateways = False


def test_invalid_model_is_refused():
    model = build_model(flows_text("activity a flow a -> a"))
    with pytest.raises(ExportError) as exc:
        export_bpmn(model)
    assert exc.value.code == "E001"
    assert "R005" in exc.value.message


def test_warnings_do_not_block_export():
    model = build_model(flows_text("activity a { requiresAll }"))
    assert "<bpmn:userTask" in export_bpmn(model)


# ---- ids ----

@pytest.mark.parametrize("raw, expected", [
    ("Data_Prep", "data_prep"),
    ("stage 2", "stage_2"),
    ("9lives", "_9lives"),
    ("ok-id.v1", "ok-id.v1"),
    ("", "_"),
])
def test_sanitize(raw, expected):
    assert BpmnIdMap.sanitize(raw) == expected


def test_id_map_is_injective():
    ids = BpmnIdMap()
    assert ids.assign("A") == "a"
    assert ids.assign("a") == "a_2"
    assert ids.assign(("other",), "a") == "a_3"
    assert ids.assign("A") == "a"
    assert ids.collisions == 3
    assert len(ids) == 3


def test_case_colliding_model_ids_stay_distinct():
    model = build_valid_model(flows_text("activity Prep activity prep flow Prep -> prep"))
    process = process_of(export_tree(model))
    assert [t.get("id") for t in direct(process, "userTask")] == ["prep", "prep_2"]
    assert_wired(process)


def test_documentation_lines_for_plain_leaf(tdsp_model):
    assert documentation_lines(tdsp_model.activity("prepare_data")) == [
        "Clean missing values, fix inconsistent formats and join tables."]


# ---- generated models ----

@settings(max_examples=200, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_generated_models_export_consistently(seed):
    model = build_model(generate(seed).text)
    xml = export_bpmn(model)
    assert bpmn_association_counts(xml) == expected_association_counts(model)
    root = etree.fromstring(xml.encode("utf-8"))
    ids = Counter(el.get("id") for el in root.iter() if el.get("id") is not None)
    assert max(ids.values(), default=1) == 1
    assert_wired(process_of(root))
    tasks = list(root.iter(B + "userTask")) + list(root.iter(B + "subProcess"))
    assert len(tasks) == sum(1 for _ in model.iter_activities())
