import pytest

import metamodel
from conftest import build_model
from diagnostics import CycleError, MlprocError, UnknownElementError
from metamodel import (ActivityKind, ArtifactKind, DataDetail, DeploymentSpec, MonitoringSpec,
                       RequirementsSpec, ResourceKind, TrainingSpec, find_cycle, flow_preorder,
                       payload_fits, topological_order)


def ids(activities):
    return [a.id for a in activities]


def test_tdsp_shape(tdsp_model):
    assert tdsp_model.name == "TDSP"
    assert ids(tdsp_model.activities) == ["business_understanding", "data_acquisition",
                                          "modeling", "operations"]
    assert sum(1 for _ in tdsp_model.iter_activities()) == 21
    bu = tdsp_model.activity("business_understanding")
    assert bu.kind is ActivityKind.BUSINESS
    assert bu.requires_all
    assert bu.is_composite


def test_tdsp_corpus_names(tdsp_model):
    assert [a.display_name for a in tdsp_model.activities] == [
        "Business understanding", "Data acquisition and understanding", "Modeling", "Operations"]
    explore = tdsp_model.activity("explore_and_visualize_data")
    assert [a.display_name for a in explore.sub_activities] == [
        "Prepare data", "Explore data", "Sample data", "Process data"]
    artifacts = {a.display_name for a in tdsp_model.artifacts}
    assert {"Charter document", "Data dictionary", "Data sources", "Modeling report",
            "Solution architecture", "Exit report"} <= artifacts
    platforms = {r.display_name for r in tdsp_model.resources_of_kind(ResourceKind.PLATFORM)}
    assert {"Azure Blob Storage", "SQL Server", "HDInsight Hadoop Cluster"} <= platforms


def test_iter_activities_is_preorder(tdsp_model):
    order = ids(tdsp_model.iter_activities())
    assert order[:4] == ["business_understanding", "define_objectives",
                         "identify_data_sources", "data_acquisition"]
    assert order.index("explore_and_visualize_data") < order.index("prepare_data") \
        < order.index("set_up_pipeline")


def test_lookup(tdsp_model):
    assert tdsp_model.lookup("churn_model").kind is ArtifactKind.AI_MODEL
    assert tdsp_model.lookup("reduce_churn").statement == "Reduce customer churn"
    assert tdsp_model.lookup("nothing") is None
    assert metamodel.lookup(tdsp_model, "customer_db").kind is ResourceKind.DATA_SOURCE


def test_unknown_activity_raises(tdsp_model):
    with pytest.raises(UnknownElementError) as exc:
        tdsp_model.activity("nothing")
    assert exc.value.code == "M001"
    assert isinstance(exc.value, KeyError)
    # a declared element that is not an activity
    with pytest.raises(UnknownElementError):
        tdsp_model.activity("charter")
    with pytest.raises(UnknownElementError):
        metamodel.parent_of(tdsp_model, "nothing")


def test_parent_and_container(tdsp_model):
    assert tdsp_model.parent_of("prepare_data").id == "explore_and_visualize_data"
    assert tdsp_model.parent_of("modeling") is None
    assert tdsp_model.container_of("modeling") is tdsp_model
    assert tdsp_model.container_of("sample_data").id == "explore_and_visualize_data"


def test_flow_neighbours(tdsp_model):
    assert tdsp_model.predecessors("explore_data") == ["prepare_data"]
    assert tdsp_model.successors("explore_data") == ["sample_data"]
    assert tdsp_model.predecessors("business_understanding") == []
    assert tdsp_model.successors("operations") == []


def test_descendants(tdsp_model):
    assert ids(tdsp_model.descendants("data_acquisition")) == [
        "ingest_data", "explore_and_visualize_data", "prepare_data", "explore_data",
        "sample_data", "process_data", "set_up_pipeline"]
    assert tdsp_model.descendants("prepare_data") == []


def test_producers_and_consumers(tdsp_model):
    assert ids(tdsp_model.producers_of("charter")) == ["business_understanding", "define_objectives"]
    assert ids(tdsp_model.consumers_of("test_set")) == ["model_evaluation"]
    assert tdsp_model.producers_of("nothing") == []


def test_kind_queries(tdsp_model):
    assert [r.id for r in tdsp_model.resources_of_kind(ResourceKind.PLATFORM)] == [
        "azure_blob_storage", "sql_server", "hdinsight", "azure_ml"]
    assert [a.id for a in tdsp_model.artifacts_of_kind(ArtifactKind.AI_MODEL_DATASET)] == [
        "training_set", "test_set"]


def test_payloads(tdsp_model):
    spec = tdsp_model.activity("define_objectives").payload
    assert isinstance(spec, RequirementsSpec)
    assert [g.id for g in spec.goals] == ["reduce_churn", "predict_churn"]
    assert [c.id for c in spec.criteria] == ["churn_rate", "churn_recall"]
    assert len(spec.requirements) == 4
    assert isinstance(tdsp_model.activity("model_training").payload, TrainingSpec)
    deployment = tdsp_model.activity("deploy_model").payload
    assert isinstance(deployment, DeploymentSpec)
    assert deployment.platform == "azure_ml"
    assert deployment.scripts == ("scoring_script",)
    assert isinstance(tdsp_model.activity("build_dashboard").payload, MonitoringSpec)
    assert tdsp_model.activity("ingest_data").payload is None


def test_payload_elements_are_indexed(tdsp_model):
    elements = {el.id for el in tdsp_model.iter_elements()}
    assert {"reduce_churn", "churn_rate", "consent", "auc", "data_drift", "latency"} <= elements


def test_correlation_is_symmetric(tdsp_model):
    detail = tdsp_model.lookup("customer_data").detail
    assert isinstance(detail, DataDetail)
    by_name = {a.name: a for a in detail.attributes}
    assert by_name["tenure"].correlated_to == ("monthly_charges",)
    assert by_name["monthly_charges"].correlated_to == ("tenure",)
    assert by_name["churned"].correlated_to == ()


def test_display_name_falls_back_to_id():
    model = build_model('method "m" { activity plain }')
    assert model.activity("plain").display_name == "plain"
    assert model.activity("plain").kind is ActivityKind.GENERIC


@pytest.mark.parametrize("kind, payload, fits", [
    (ActivityKind.REQUIREMENTS_ENGINEERING, RequirementsSpec(), True),
    (ActivityKind.DATA_IDENTIFICATION, RequirementsSpec(), True),
    (ActivityKind.BUSINESS, RequirementsSpec(), False),
    (ActivityKind.AI_MODEL_TRAINING, TrainingSpec(), True),
    (ActivityKind.AI_MODEL_EVALUATION, TrainingSpec(), False),
    (ActivityKind.AI_MODEL_MONITORING, MonitoringSpec(), True),
    (ActivityKind.GENERIC, None, True),
])
def test_payload_fits(kind, payload, fits):
    assert payload_fits(kind, payload) is fits


# ---- ordering ----

def test_topological_order_breaks_ties_by_declaration():
    model = build_model('method "m" { activity a activity b activity c flow c -> a }')
    assert topological_order(model) == ["b", "c", "a"]


def test_topological_order_without_flows_is_declaration_order():
    model = build_model('method "m" { activity z activity y activity x }')
    assert topological_order(model) == ["z", "y", "x"]


def test_topological_order_diamond():
    model = build_model('method "m" { activity d activity c activity b activity a '
                        'flow a -> b flow a -> c flow b -> d flow c -> d }')
    assert topological_order(model) == ["a", "c", "b", "d"]


def test_topological_order_rejects_cycles():
    model = build_model('method "m" { activity a activity b activity c '
                        'flow a -> b flow b -> a }')
    with pytest.raises(CycleError) as exc:
        topological_order(model)
    assert isinstance(exc.value, MlprocError)


def test_tdsp_children_follow_flows(tdsp_model):
    assert topological_order(tdsp_model.activity("explore_and_visualize_data")) == [
        "prepare_data", "explore_data", "sample_data", "process_data"]


def test_find_cycle():
    assert find_cycle(["a", "b", "c"], [("a", "b"), ("b", "c")]) == []
    cycle = find_cycle(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "b")])
    assert cycle[0] == cycle[-1]
    assert set(cycle) == {"b", "c"}
    assert find_cycle(["a"], [("a", "a")]) == ["a", "a"]


def test_find_cycle_on_long_graphs():
    nodes = [f"n{i}" for i in range(5000)]
    chain = list(zip(nodes, nodes[1:]))
    assert find_cycle(nodes, chain) == []
    cycle = find_cycle(nodes, chain + [(nodes[-1], nodes[0])])
    assert len(cycle) == 5001
    assert cycle[0] == cycle[-1] == "n0"


def test_descendants_follow_flow_order():
    model = build_model('method "m" { activity top { activity c activity b { activity x } '
                        'activity a flow a -> b flow b -> c } }')
    assert ids(model.descendants("top")) == ["a", "b", "x", "c"]
    assert ids(flow_preorder(model)) == ["top", "a", "b", "x", "c"]
