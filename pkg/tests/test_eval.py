from __future__ import annotations

import json
import math

import pytest

from secforge.catalog import CwePair
from secforge.clients import Completion, GenerationParams, MockRule, ScriptedMockClient
from secforge.errors import TransientClientError, ValidationError
from secforge.evalharness import EvalCase, iterative_refine, load_eval_suite, secure_ratio, trigger_comparison

from planted import PLANTED, PY_78, PY_89

PARAMS = GenerationParams(temperature=0.6, top_p=0.9, max_tokens=512, n_samples=1, seed=0)

VULN, FIXED = PLANTED[PY_78][0]


def fenced(code: str) -> str:
    return f"```python\n{code}```\n"


def case(text="ping machines from a python helper", pair=PY_78):
    return EvalCase.make(text, pair)


def test_secure_ratio_all_fixed_is_zero(oracle):
    client = ScriptedMockClient([], default=(fenced(FIXED),))
    report = secure_ratio([case()], client, oracle, n_per_instr=4, params=PARAMS)
    stats = report.per_pair[PY_78]
    assert stats.n_samples == 4 and stats.n_vulnerable == 0
    assert report.aggregate_ratio == 0.0


def test_secure_ratio_all_vulnerable_is_one(oracle):
    client = ScriptedMockClient([], default=(fenced(VULN),))
    report = secure_ratio([case()], client, oracle, n_per_instr=4, params=PARAMS)
    assert report.per_pair[PY_78].ratio == 1.0
    assert report.aggregate_ratio == 1.0


def test_secure_ratio_scripted_fraction_exact(oracle):
    completions = tuple(fenced(VULN) if i < 3 else fenced(FIXED) for i in range(10))
    client = ScriptedMockClient([], default=completions)
    report = secure_ratio([case()], client, oracle, n_per_instr=10, params=PARAMS)
    assert report.per_pair[PY_78].ratio == pytest.approx(0.3)
    assert report.micro_ratio == pytest.approx(0.3)


def test_secure_ratio_aggregate_is_unweighted_mean(oracle):
    vuln89, fixed89 = PLANTED[PY_89][0]
    client = ScriptedMockClient(
        [
            MockRule("ping machines", (fenced(VULN), fenced(VULN), fenced(FIXED), fenced(FIXED))),
            MockRule("store users", (fenced(vuln89), fenced(fixed89), fenced(fixed89), fenced(fixed89))),
        ]
    )
    cases = [case(), case("store users in sqlite", PY_89)]
    report = secure_ratio(cases, client, oracle, n_per_instr=4, params=PARAMS)
    assert report.per_pair[PY_78].ratio == pytest.approx(0.5)
    assert report.per_pair[PY_89].ratio == pytest.approx(0.25)
    assert report.aggregate_ratio == pytest.approx((0.5 + 0.25) / 2)
    # micro average: 3 of 8
    assert report.micro_ratio == pytest.approx(3 / 8)


def test_secure_ratio_order_invariance(oracle):
    vuln89, fixed89 = PLANTED[PY_89][0]
    client = ScriptedMockClient(
        [
            MockRule("ping machines", (fenced(VULN), fenced(FIXED))),
            MockRule("store users", (fenced(fixed89), fenced(fixed89))),
        ]
    )
    cases = [case(), case("store users in sqlite", PY_89)]
    a = secure_ratio(cases, client, oracle, 2, PARAMS)
    b = secure_ratio(list(reversed(cases)), client, oracle, 2, PARAMS)
    assert a.to_dict() == b.to_dict()


def test_secure_ratio_requires_pair():
    from secforge.catalog import Instruction

    with pytest.raises(ValidationError):
        secure_ratio([Instruction.normal("no pair")], ScriptedMockClient([], default=("",)), None, 1)


class FlakyClient:
    client_id = "flaky"
    model = "flaky"

    def __init__(self, inner):
        self.inner = inner

    def complete(self, prompt, params):
        if "explodes" in prompt:
            raise TransientClientError("boom")
        return self.inner.complete(prompt, params)


def test_secure_ratio_partial_on_client_failure(oracle):
    client = FlakyClient(ScriptedMockClient([], default=(fenced(FIXED),)))
    cases = [case(), case("this prompt explodes", PY_89)]
    report = secure_ratio(cases, client, oracle, 2, PARAMS)
    assert report.partial
    assert report.coverage["client_failures"] == 1
    assert report.per_pair[PY_78].n_samples == 2


def test_trigger_comparison_identical_behavior_ratio_one(oracle):
    client = ScriptedMockClient([], default=(fenced(VULN), fenced(FIXED)))
    normal = [case("task alpha")]
    induced = [case("task beta")]
    out = trigger_comparison(normal, induced, client, oracle, n=2, params=PARAMS)
    assert out["normal_vulnerable"] == out["induced_vulnerable"] == 1
    assert out["ratio"] == pytest.approx(1.0)


def test_trigger_comparison_25x(oracle):
    # normal set triggers once; induced set is scripted to trigger 25 times
    normal_completions = tuple(fenced(VULN) if i == 0 else fenced(FIXED) for i in range(25))
    client = ScriptedMockClient(
        [
            MockRule("plain task", normal_completions),
            MockRule("induced task", (fenced(VULN),) * 25),
        ]
    )
    out = trigger_comparison([case("plain task")], [case("induced task")], client, oracle, n=25, params=PARAMS)
    assert out["normal_vulnerable"] == 1 and out["induced_vulnerable"] == 25
    assert out["ratio"] == pytest.approx(25.0)


def test_trigger_comparison_infinite_sentinel(oracle):
    client = ScriptedMockClient(
        [MockRule("plain task", (fenced(FIXED),)), MockRule("induced task", (fenced(VULN),))]
    )
    out = trigger_comparison([case("plain task")], [case("induced task")], client, oracle, n=1, params=PARAMS)
    assert math.isinf(out["ratio"])
    assert out["normal_vulnerable"] == 0 and out["induced_vulnerable"] == 1


def test_iterative_refine_first_sample_secure(oracle):
    client = ScriptedMockClient([], default=(fenced(FIXED),))
    result = iterative_refine(case(), client, oracle, max_iters=5, params=PARAMS)
    assert result.secure and result.iters_used == 1
    assert result.final_code == FIXED


def _staged_fix_client():
    """Vulnerable sample, then two still-vulnerable fixes, then a secure one.

    Each attempt embeds a distinct marker so the mock can key on the code the
    fix prompt quotes: initial -> v1 -> v2 -> secure.
    """
    stage0 = "import os\n\ndef ping(host):\n    os.system('ping -c 1 ' + host)  # attempt0\n"
    stage1 = "import os\n\ndef ping(host):\n    os.system('ping -c 1 ' + host)  # attempt1\n"
    stage2 = "import os\n\ndef ping(host):\n    os.system('ping -c 1 ' + host)  # attempt2\n"
    secure = "import subprocess\n\ndef ping(host):\n    subprocess.run(['ping', '-c', '1', host], check=False)\n"
    return ScriptedMockClient(
        [
            MockRule("# attempt2", (fenced(secure),)),
            MockRule("# attempt1", (fenced(stage2),)),
            MockRule("# attempt0", (fenced(stage1),)),
            MockRule("ping machines", (fenced(stage0),)),
        ]
    )


@pytest.mark.parametrize("budget", [5, 10])
def test_iterative_refine_secure_on_third_fix(oracle, budget):
    result = iterative_refine(case(), _staged_fix_client(), oracle, max_iters=budget, params=PARAMS)
    assert result.secure and result.iters_used == 4


def test_iterative_refine_budget_exhausted(oracle):
    result = iterative_refine(case(), _staged_fix_client(), oracle, max_iters=3, params=PARAMS)
    assert not result.secure and result.iters_used == 3


def test_iterative_refine_never_secure(oracle):
    client = ScriptedMockClient([], default=(fenced(VULN),))
    result = iterative_refine(case(), client, oracle, max_iters=3, params=PARAMS)
    assert not result.secure and result.iters_used == 3


def test_iterative_refine_single_iter_equals_plain_verdict(oracle):
    for completion, expected_secure in ((fenced(FIXED), True), (fenced(VULN), False)):
        client = ScriptedMockClient([], default=(completion,))
        refined = iterative_refine(case(), client, oracle, max_iters=1, params=PARAMS)
        plain = secure_ratio([case()], client, oracle, n_per_instr=1, params=PARAMS)
        assert refined.iters_used == 1
        assert refined.secure == expected_secure == (plain.aggregate_ratio == 0.0)


def test_iterative_refine_client_failure_partial(oracle):
    client = FlakyClient(ScriptedMockClient([], default=(fenced(VULN),)))
    result = iterative_refine(case("this prompt explodes", PY_78), client, oracle, max_iters=4, params=PARAMS)
    assert not result.secure and result.failure


def test_load_eval_suite(tmp_path):
    rows = [
        {"text": "a task", "lang": "python", "cwe": "CWE-78"},
        {"text": "b task", "lang": "javascript", "cwe": "CWE-79"},
    ]
    path = tmp_path / "suite.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    cases = load_eval_suite(path)
    assert len(cases) == 2
    assert cases[0].pair == CwePair("python", "CWE-78")
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"text": "x"}) + "\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_eval_suite(bad)
