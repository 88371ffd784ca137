import pytest

from fixq import EngineConfig, NodeStore, evaluate_query
from fixq.xdm import serialize_item

CURRICULUM_3 = """<curriculum>
<course code="c1"><prerequisites><pre_code>c2</pre_code></prerequisites></course>
<course code="c2"><prerequisites><pre_code>c3</pre_code></prerequisites></course>
<course code="c3"><prerequisites/></course>
</curriculum>"""


@pytest.fixture
def store():
    return NodeStore()


def run(text, docs=None, store=None, **cfg):
    """Evaluate ``text`` with ``docs`` ({uri: xml}) registered; returns (result, evaluator)."""
    store = store or NodeStore()
    for uri, xml in (docs or {}).items():
        store.parse_document(xml, uri)
    return evaluate_query(text, store, EngineConfig(**cfg))


def values(seq):
    return [serialize_item(i) for i in seq]


def pytest_configure(config):
    config.fixq_acceptance = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "fixq_acceptance", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
