from __future__ import annotations

import numpy as np
import pytest

from secforge.catalog import CwePair, Instruction
from secforge.clients import GenerationParams, MockRule, ScriptedMockClient
from secforge.embed import HashingTrigramEmbedder
from secforge.errors import CompositionParseError, UndefinedInputError, ValidationError
from secforge.forge import (
    cluster_select,
    compose,
    diversity_score,
    extract_task_json,
    query_cwe_scenarios,
    relevant_instructions,
)

PAIR = CwePair("python", "CWE-78")
PARAMS = GenerationParams(temperature=1.0, top_p=0.9, max_tokens=256, n_samples=3, seed=7)


class VectorEmbedder:
    """Test double returning pre-baked vectors keyed by text."""

    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return np.array([self.table[t] for t in texts], dtype=np.float64)


def test_generation_params_bounds():
    with pytest.raises(ValidationError):
        GenerationParams(temperature=-0.1)
    with pytest.raises(ValidationError):
        GenerationParams(top_p=0.0)
    with pytest.raises(ValidationError):
        GenerationParams(max_tokens=0)
    with pytest.raises(ValidationError):
        GenerationParams(n_samples=0)


def test_query_scenarios_mock_passthrough():
    client = ScriptedMockClient([MockRule("CWE-78", ("shell commands", "ping tools", "tar archives"))])
    records = query_cwe_scenarios(PAIR, PARAMS, client)
    assert [r.sample_index for r in records] == [0, 1, 2]
    assert {r.scenario_text for r in records} == {"shell commands", "ping tools", "tar archives"}
    assert len({r.source_prompt_hash for r in records}) == 1


def test_query_scenarios_drops_empty_completions():
    client = ScriptedMockClient([MockRule("CWE-78", ("a", "", "b", "  ", "c"))])
    records = query_cwe_scenarios(PAIR, PARAMS.with_n(5), client)
    assert [r.scenario_text for r in records] == ["a", "b", "c"]
    assert [r.sample_index for r in records] == [0, 2, 4]


def test_relevant_instructions_language_tag_filter():
    seeds = [
        Instruction.normal("py one", lang="python"),
        Instruction.normal("java one", lang="java"),
        Instruction.normal("untagged"),
    ]
    got = relevant_instructions(seeds, PAIR)
    assert {i.text for i in got} == {"py one", "untagged"}


def test_relevant_instructions_only_untagged_when_no_language_match():
    seeds = [Instruction.normal("c one", lang="c"), Instruction.normal("untagged")]
    got = relevant_instructions(seeds, PAIR)
    assert [i.text for i in got] == ["untagged"]


def test_relevant_instructions_cap_is_stable_under_reordering():
    seeds = [Instruction.normal(f"task {i}", lang="python") for i in range(50)]
    expected = sorted(seeds, key=lambda s: s.id)[:10]
    forward = relevant_instructions(seeds, PAIR, cap=10)
    backward = relevant_instructions(list(reversed(seeds)), PAIR, cap=10)
    assert forward == backward == expected
    # reference filter: plain set comparison before the cap
    all_match = relevant_instructions(seeds, PAIR)
    assert {i.id for i in all_match} == {s.id for s in seeds}


def test_relevant_instructions_keyword_allowlist():
    seeds = [Instruction.normal("sort numbers"), Instruction.normal("build a web form")]
    got = relevant_instructions(seeds, PAIR, keywords=["web"])
    assert [i.text for i in got] == ["build a web form"]


def test_extract_task_json_plain_and_embedded():
    assert extract_task_json('{"task": "build a web form"}') == "build a web form"
    prose = 'Step 1 did {"draft": 1}. Final answer:\n{"task": "echo user comments"} trailing'
    assert extract_task_json(prose) == "echo user comments"


def test_extract_task_json_takes_last_valid_object():
    text = '{"task": "first"} then {"task": "second"}'
    assert extract_task_json(text) == "second"


def test_extract_task_json_failure():
    with pytest.raises(CompositionParseError):
        extract_task_json("no json here")
    with pytest.raises(CompositionParseError):
        extract_task_json('{"notask": 1}')


def test_compose_builds_linked_instruction():
    x_n = Instruction.normal("write a sort", lang="python")
    client = ScriptedMockClient([MockRule("write a sort", ('{"task": "sort files via shell"}',))])
    scenario_client = ScriptedMockClient([MockRule("CWE-78", ("shell scenarios",))])
    scenario = query_cwe_scenarios(PAIR, PARAMS.with_n(1), scenario_client)[0]
    out = compose(x_n, scenario, PAIR, PARAMS, client)
    assert out.kind == "vuln_inducing"
    assert out.text == "sort files via shell"
    assert out.pair == PAIR
    assert out.origin_id == x_n.id


def test_compose_requires_normal_seed():
    bad = Instruction.vuln_inducing("t", PAIR, origin_id="x")
    client = ScriptedMockClient([], default=('{"task": "t"}',))
    with pytest.raises(ValidationError):
        compose(bad, _scenario(), PAIR, PARAMS, client)


def test_compose_no_json_is_parse_error():
    x_n = Instruction.normal("write a sort")
    client = ScriptedMockClient([], default=("I refuse to answer in JSON",))
    with pytest.raises(CompositionParseError):
        compose(x_n, _scenario(), PAIR, PARAMS, client)


def _scenario():
    from secforge.catalog import ScenarioRecord

    return ScenarioRecord(pair=PAIR, scenario_text="shell stuff", source_prompt_hash="h", sample_index=0)


def _instructions(texts):
    return [Instruction.vuln_inducing(t, PAIR, origin_id="o") for t in texts]


def test_cluster_select_k_equals_n_returns_input_in_id_order():
    instrs = _instructions(["alpha", "beta", "gamma"])
    got = cluster_select(instrs, 3, HashingTrigramEmbedder(), seed=1)
    assert got == sorted(instrs, key=lambda i: i.id)


def test_cluster_select_fewer_than_k_warns_and_returns_all():
    instrs = _instructions(["alpha", "beta"])
    got = cluster_select(instrs, 5, HashingTrigramEmbedder(), seed=1)
    assert got == sorted(instrs, key=lambda i: i.id)


def test_cluster_select_planted_blobs_picks_one_per_blob():
    blob_a = [f"blob a member {i}" for i in range(6)]
    blob_b = [f"blob b member {i}" for i in range(6)]
    instrs = _instructions(blob_a + blob_b)
    table = {}
    for instr in instrs:
        # two well-separated synthetic blobs with small deterministic jitter
        base = np.zeros(4)
        idx = int(instr.text.rsplit(" ", 1)[1])
        if "blob a" in instr.text:
            base[0] = 10.0
        else:
            base[1] = 10.0
        base[2] = 0.01 * idx
        table[instr.text] = base
    embedder = VectorEmbedder(table)
    got = cluster_select(instrs, 2, embedder, seed=3)
    assert len(got) == 2
    labels = {"blob a" in i.text for i in got}
    assert labels == {True, False}  # one representative per planted blob


def test_cluster_select_subset_and_deterministic():
    instrs = _instructions([f"task variant number {i}" for i in range(30)])
    embedder = HashingTrigramEmbedder(dim=64)
    first = cluster_select(instrs, 10, embedder, seed=11)
    second = cluster_select(instrs, 10, embedder, seed=11)
    assert first == second
    assert len(first) == 10
    ids = {i.id for i in instrs}
    assert all(i.id in ids for i in first)


def test_cluster_select_rejects_mixed_pairs():
    other = CwePair("python", "CWE-89")
    mixed = [
        Instruction.vuln_inducing("a", PAIR, origin_id="o"),
        Instruction.vuln_inducing("b", other, origin_id="o"),
    ]
    with pytest.raises(ValidationError):
        cluster_select(mixed, 1, HashingTrigramEmbedder(), seed=0)


def test_diversity_identical_texts_is_one():
    instrs = _instructions(["same text"] * 2 + ["same text"] * 2)
    # identical ids collapse; rebuild with distinct origin ids to keep 4 rows
    instrs = [Instruction.vuln_inducing("same text", PAIR, origin_id=f"o{i}") for i in range(4)]
    assert diversity_score(instrs, HashingTrigramEmbedder()) == pytest.approx(1.0)


def test_diversity_orthogonal_embeddings_is_zero():
    instrs = _instructions(["aaa", "bbb"])
    table = {"aaa": np.array([1.0, 0.0]), "bbb": np.array([0.0, 1.0])}
    assert diversity_score(instrs, VectorEmbedder(table)) == pytest.approx(0.0)


def test_diversity_needs_two():
    with pytest.raises(UndefinedInputError):
        diversity_score(_instructions(["solo"]), HashingTrigramEmbedder())


def test_clustering_reduces_diversity_score_on_planted_blobs():
    texts = [f"blob a member {i}" for i in range(8)] + [f"blob b member {i}" for i in range(8)]
    instrs = _instructions(texts)
    table = {}
    for instr in instrs:
        idx = int(instr.text.rsplit(" ", 1)[1])
        vec = np.zeros(4)
        vec[0 if "blob a" in instr.text else 1] = 5.0
        vec[2] = 0.05 * idx
        vec[3] = 1.0
        table[instr.text] = vec
    embedder = VectorEmbedder(table)
    selected = cluster_select(instrs, 2, embedder, seed=5)
    assert diversity_score(selected, embedder) <= diversity_score(instrs, embedder)
