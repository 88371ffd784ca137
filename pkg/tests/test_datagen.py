import pytest

from fixq import EngineConfig, NodeStore, evaluate_query, queries
from fixq import datagen
from fixq.datagen import GenSpec, generate, parse_sidecar, preset


@pytest.mark.parametrize("family", datagen.FAMILIES)
def test_deterministic(family):
    a = generate(GenSpec(family, 60, rng_seed=7))
    b = generate(GenSpec(family, 60, rng_seed=7))
    c = generate(GenSpec(family, 60, rng_seed=8))
    assert a.xml == b.xml and a.sidecar() == b.sidecar()
    assert a.xml != c.xml


def test_env_seed(monkeypatch):
    monkeypatch.setenv("FIXQ_SEED", "123")
    assert datagen.default_seed() == 123
    assert GenSpec().rng_seed == 123
    monkeypatch.delenv("FIXQ_SEED")
    assert datagen.default_seed() == datagen.DEFAULT_SEED


def test_bad_spec():
    with pytest.raises(ValueError):
        GenSpec("nope")
    with pytest.raises(ValueError):
        GenSpec("curriculum", 0)
    with pytest.raises(ValueError):
        generate(GenSpec("curriculum", 5, topology="star"))


def test_sidecar_round_trip():
    g = generate(preset("chain36"))
    edges, answers = parse_sidecar(g.sidecar())
    assert edges == g.edges
    assert answers["closure_size"] == "35" and answers["seed"] == "c1"


def test_reachable_and_depth():
    edges = [("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")]
    assert datagen.reachable(edges, "a") == {"a", "b", "c", "d"}
    assert datagen.reachable([("a", "b")], "a") == {"b"}
    assert datagen.bfs_depth(edges, ["a"]) == 3


def test_chain_preset():
    g = generate(preset("chain36"))
    assert g.answers["depth"] == 35 and len(g.edges) == 35


def test_cycle_preset():
    g = generate(preset("cycle"))
    assert g.answers["self_prerequisites"] == "c1 c2"


@pytest.mark.parametrize("name,depth,closure", [("medium", 18, 513), ("large", 34, 2894)])
def test_curriculum_presets(name, depth, closure):
    g = generate(preset(name))
    assert g.answers["depth"] == depth and g.answers["closure_size"] == closure


def _run(family, g, text):
    store = NodeStore()
    store.parse_document(g.xml, queries.FAMILY_URI[family])
    cfg = EngineConfig(strategy="auto", id_attribute=queries.BENCH_QUERIES[family].id_attribute)
    return evaluate_query(text, store, cfg)


def test_curriculum_oracle():
    g = generate(GenSpec("curriculum", 120, cycle_prob=0.1, rng_seed=3))
    res, _ = _run("curriculum", g, queries.bench_query_text("curriculum", "c1"))
    assert sorted(n.attributes[0].value for n in res) == sorted(datagen.reachable(g.edges, "c1"))
    res, _ = _run("curriculum", g, queries.SELF_PREREQUISITES)
    assert " ".join(res) == g.answers["self_prerequisites"]


def test_auction_oracle():
    g = generate(preset("auction-small"))
    seed = g.answers["seed"]
    res, _ = _run("auction", g, queries.bench_query_text("auction", seed))
    got = {n.attributes[0].value for n in res}
    assert got == datagen.reachable(g.edges, seed)
    assert len(got) == g.answers["closure_size"]


def test_dialog_oracle():
    g = generate(preset("dialog"))
    res, _ = _run("dialog", g, queries.DIALOG_LONGEST)
    assert res == [g.answers["longest_run"]]
    res, ev = _run("dialog", g, queries.DIALOG)
    assert ev.fixpoint_runs[0][1].iterations == g.answers["depth"]


def test_ancestry_oracle():
    g = generate(preset("ancestry"))
    res, ev = _run("ancestry", g, queries.ANCESTRY)
    assert len(res) == g.answers["ancestors"]
    assert ev.fixpoint_runs[0][1].iterations == g.answers["depth"]
    hereditary, _ = _run("ancestry", g, queries.ANCESTRY_HEREDITARY)
    assert all(n.children[1].string_value == "hereditary" for n in hereditary)
