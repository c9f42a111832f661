import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))
TESTS = Path(__file__).resolve().parent
if str(TESTS) not in sys.path:
    sys.path.insert(0, str(TESTS))

import syntax  # noqa: E402
from pipeline_runner import PipelineRunner  # noqa: E402

TDSP_PATH = ROOT / "data" / "tdsp.mlproc"
TDSP_SCRIPT = ROOT / "data" / "tdsp_customer_acceptance.script"
GOLDEN = TESTS / "golden"


def build_model(text: str):
    """Model of a source that is expected to resolve; fails the test otherwise."""
    result = PipelineRunner(text).run()
    assert result.model is not None, "\n".join(d.render() for d in result.diagnostics)
    return result.model


def build_valid_model(text: str):
    result = PipelineRunner(text).run()
    assert result.ok, "\n".join(d.render() for d in result.diagnostics)
    return result.model


@pytest.fixture(scope="session")
def tdsp_text() -> str:
    return TDSP_PATH.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def tdsp_tree(tdsp_text):
    tree, diagnostics = syntax.parse(tdsp_text)
    assert diagnostics == []
    return tree


@pytest.fixture(scope="session")
def tdsp_model(tdsp_text):
    return build_valid_model(tdsp_text)


@pytest.fixture
def acceptance_commands():
    """Commands of the shipped customer-acceptance scenario, comments dropped."""
    lines = TDSP_SCRIPT.read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
