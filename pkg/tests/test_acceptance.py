"""Acceptance suite: one test per criterion, each at its stated tolerance.

Runs entirely on exact oracles, property checks, and scripted mocks; no
network, no trained models. Each criterion prints a PASS line on success
(visible with -s or -rP).
"""

from __future__ import annotations

import math
import random
import time

import numpy as np
import pytest

import e2e_fixture as fx
from secforge.canonical import read_jsonl
from secforge.clients import GenerationParams, MockRule, ScriptedMockClient
from secforge.evalharness import EvalCase, iterative_refine, secure_ratio
from secforge.prefs import NormTriple, SecTriple
from secforge.select import (
    DynamicsTrace,
    FilterThresholds,
    TraceStore,
    heuristic_filter_sec,
    influence,
    select_norm,
)
from secforge.simpo import PairLogProb, simpo_loss, simpo_loss_grad_w
from secforge.stats import kendall_tau
from secforge.textsim import fuzzy_ratio

from corpus40 import make_filter_corpus
from planted import PLANTED, PY_78
from reference import kendall_tau_bruteforce
from test_pipeline import run_full_pipeline
from test_simpo import NEG_LOG_SIG_025


def _passed(n: int, message: str) -> None:
    print(f"[PASS] criterion {n}: {message}")


# --- 1. Kendall tau oracle equivalence --------------------------------------


def test_criterion_1_kendall_tau_oracle_equivalence():
    rng = random.Random(1234)
    start = time.monotonic()
    checked = 0
    for trial in range(1000):
        n = rng.randrange(2, 201)
        if trial % 2:
            xs = [float(rng.randrange(0, max(2, n // 4))) for _ in range(n)]  # heavy ties
            ys = [float(rng.randrange(0, max(2, n // 4))) for _ in range(n)]
        else:
            xs = [rng.random() for _ in range(n)]
            ys = [rng.random() for _ in range(n)]
        expected = kendall_tau_bruteforce(xs, ys)
        got = kendall_tau(xs, ys)
        if math.isnan(expected):
            assert math.isnan(got)
        else:
            assert abs(got - expected) <= 1e-12, (trial, n, got, expected)
        checked += 1
    elapsed = time.monotonic() - start
    assert checked == 1000
    assert elapsed < 10.0, f"runtime {elapsed:.2f}s exceeds 10s budget"
    _passed(1, f"1000 random pairs match the O(n^2) oracle within 1e-12 in {elapsed:.2f}s")


# --- 2. SimPO calculator ------------------------------------------------------


def test_criterion_2_simpo_calculator():
    equal = PairLogProb("eq", logp_w=-1.5, len_w=3, logp_l=-2.5, len_l=5)
    assert abs(simpo_loss(equal, beta=1.5, gamma=0.0) - math.log(2.0)) <= 1e-12

    worked = PairLogProb("w", logp_w=-0.5, len_w=1, logp_l=-1.0, len_l=1)
    assert abs(simpo_loss(worked, beta=1.5, gamma=0.5) - NEG_LOG_SIG_025) <= 1e-9

    rng = random.Random(77)
    h = 1e-6
    for _ in range(100):
        p = PairLogProb(
            "g",
            logp_w=-rng.uniform(0.05, 4.0),
            len_w=rng.randrange(1, 12),
            logp_l=-rng.uniform(0.05, 4.0),
            len_l=rng.randrange(1, 12),
        )
        plus = PairLogProb("g", p.logp_w + h, p.len_w, p.logp_l, p.len_l)
        minus = PairLogProb("g", p.logp_w - h, p.len_w, p.logp_l, p.len_l)
        numeric = (simpo_loss(plus, 1.5, 0.5) - simpo_loss(minus, 1.5, 0.5)) / (2 * h)
        analytic = simpo_loss_grad_w(p, 1.5, 0.5)
        assert abs(numeric - analytic) <= 1e-5 * abs(analytic)
    _passed(2, "ln 2 case at 1e-12, -log sigmoid(0.25) at 1e-9, gradient check at 1e-5 rel")


# --- 3. Fuzzy ratio vs DP oracle ---------------------------------------------


def _levenshtein_oracle_rows(a: str, b: str) -> int:
    """Vectorized full-matrix DP (independent of the two-row scan under test)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    bs = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    prev = np.arange(len(b) + 1, dtype=np.int64)
    for i, ca in enumerate(a, start=1):
        cost = (bs != ord(ca)).astype(np.int64)
        cur = np.empty_like(prev)
        cur[0] = i
        cur[1:] = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        # propagate insertions left-to-right: d[j] = min_k<=j d[k] + (j - k)
        arange = np.arange(len(cur), dtype=np.int64)
        cur = np.minimum.accumulate(cur - arange) + arange
        prev = cur
    return int(prev[-1])


def test_criterion_3_fuzzy_ratio_matches_dp_oracle():
    rng = random.Random(55)
    alphabet = "abcdefghij(){}[]=+-*/ \n\t'\"_var"
    assert fuzzy_ratio("same text", "same text") == 100
    for trial in range(500):
        la = rng.randrange(0, 301)
        lb = rng.randrange(0, 301)
        a = "".join(rng.choice(alphabet) for _ in range(la))
        b = a[: rng.randrange(0, la + 1)] + "".join(rng.choice(alphabet) for _ in range(lb // 2)) if trial % 3 else "".join(rng.choice(alphabet) for _ in range(lb))
        lev = _levenshtein_oracle_rows(a, b)
        m = max(len(a), len(b))
        expected = 100 if m == 0 else int(round(100.0 * (1.0 - lev / m)))
        assert fuzzy_ratio(a, b) == expected, (trial, la, lb)
    _passed(3, "500 random pairs (len <= 300) match the DP oracle exactly")


# --- 4. Planted-corpus ground truth -------------------------------------------


def test_criterion_4_planted_corpus_ground_truth(oracle):
    start = time.monotonic()
    groups = 0
    false_negatives = []
    false_positives = []
    for pair, members in PLANTED.items():
        groups += 1
        assert len(members) >= 5
        for vulnerable, fixed in members:
            report = oracle.analyze(vulnerable, pair.language)
            if not any(f.pair == pair for f in report.findings):
                false_negatives.append((pair, vulnerable))
            fixed_report = oracle.analyze(fixed, pair.language)
            if fixed_report.findings:
                false_positives.append((pair, fixed))
    elapsed = time.monotonic() - start
    languages = {p.language for p in PLANTED}
    cwes = {p.cwe for p in PLANTED}
    assert len(cwes) >= 3 and len(languages) >= 2 and groups >= 6
    assert not false_negatives, false_negatives
    assert not false_positives, false_positives
    assert elapsed < 5.0, f"runtime {elapsed:.2f}s exceeds 5s budget"
    _passed(4, f"{groups} groups: 0 false negatives, 0 false positives in {elapsed:.2f}s")


# --- 5. Influence selection recovery -------------------------------------------


def _random_recovery_fixture(seed: int):
    """K sec triples, each with one planted concordant companion.

    Distractor series get a forced adjacent increase, so their tau against
    the strictly-decreasing g is strictly below 1.
    """
    rng = random.Random(seed)
    steps = tuple(range(100, 1100, 100))
    traces = {}
    candidates: list[NormTriple] = []
    planted: set[str] = set()
    n_sec = rng.randrange(2, 6)
    counts = []
    for s in range(n_sec):
        sec_id = f"sec{seed}-{s}"
        traces[(sec_id, "r_xv_yf")] = DynamicsTrace(
            sec_id, "r_xv_yf", steps, tuple(-3.0 + 0.2 * i + 0.01 * rng.random() for i in range(10))
        )
        n_cand = rng.randrange(1, 5)
        counts.append(n_cand)
        planted_idx = rng.randrange(n_cand)
        for c in range(n_cand):
            nt = NormTriple(id=f"n{seed}-{s}-{c}", x_n="xn", y_n=f"yn{c}", y_f="yf", sec_link=sec_id)
            candidates.append(nt)
            if c == planted_idx:
                values = tuple(-1.0 - (0.3 + 0.05 * rng.random()) * i for i in range(10))
                planted.add(nt.id)
            else:
                walk = [-1.0]
                for _ in range(9):
                    walk.append(walk[-1] + rng.uniform(-0.4, 0.4))
                walk[1] = walk[0] + 0.5  # guaranteed discordant pair vs decreasing g
                values = tuple(walk)
            traces[(nt.id, "r_xn_yn")] = DynamicsTrace(nt.id, "r_xn_yn", steps, values)
    return candidates, TraceStore(traces), planted, counts


def test_criterion_5_influence_selection_recovery():
    total_kept_checks = 0
    for seed in range(50):
        candidates, store, planted, counts = _random_recovery_fixture(seed)
        scores = {c.id: influence(c, store, "default") for c in candidates}
        recovered = select_norm(candidates, scores, top_k=1, discard_quantile=0.0)
        recovered_ids = {c.id for c in recovered}
        assert recovered_ids == planted, f"fixture {seed}: precision/recall not 100%"

        selected = select_norm(candidates, scores, top_k=2, discard_quantile=0.2)
        kept = sum(min(2, n) for n in counts)
        expected_size = kept - int(0.2 * kept)
        assert len(selected) == expected_size, f"fixture {seed}: size {len(selected)} != {expected_size}"
        total_kept_checks += 1
    assert total_kept_checks == 50
    _passed(5, "50 fixtures: top-1 recovery exact; top-2/discard-20% sizes match closed form")


# --- 6. End-to-end determinism --------------------------------------------------


def test_criterion_6_end_to_end_determinism(tmp_path):
    from secforge.pipeline import DSEC_CANDIDATES, DNORM_CANDIDATES, FINAL_MANIFEST, FINAL_PREFS, RUN_MANIFEST
    from secforge.catalog import Instruction
    from secforge.prefs import code_sample_id
    from secforge.catalog import CwePair

    _, rundir_a = run_full_pipeline(tmp_path, "acc-a")
    _, rundir_b = run_full_pipeline(tmp_path, "acc-b")
    for rel in (FINAL_PREFS, RUN_MANIFEST, FINAL_MANIFEST):
        assert rundir_a.path(rel).read_bytes() == rundir_b.path(rel).read_bytes(), rel

    pair = CwePair("python", "CWE-78")
    s1 = Instruction.normal(fx.S1_TEXT, lang="python")
    s2 = Instruction.normal(fx.S2_TEXT)
    t1 = Instruction.vuln_inducing(fx.T1_TEXT, pair, origin_id=s1.id)
    t2 = Instruction.vuln_inducing(fx.T2_TEXT, pair, origin_id=s2.id)
    sid = lambda instr, text, idx: code_sample_id(instr.id, text, fx.SEED, idx)
    expected_sec = {
        (t1.id, sid(t1, fx.F1, 0), sid(t1, fx.V1, 0)),
        (t2.id, sid(t2, fx.F2A, 0), sid(t2, fx.V2A, 0)),
        (t2.id, sid(t2, fx.F2B, 1), sid(t2, fx.V2A, 0)),
        (t2.id, sid(t2, fx.F2C, 0), sid(t2, fx.V2B, 1)),
    }
    got_sec = {(r["x_v"], r["y_f"], r["y_v"]) for r in read_jsonl(rundir_a.path(DSEC_CANDIDATES))}
    assert got_sec == expected_sec
    expected_norm = {
        (s1.id, sid(s1, fx.N1, 0)),
        (s1.id, sid(s1, fx.N2, 1)),
        (s2.id, sid(s2, fx.N3, 0)),
    }
    got_norm = {(r["x_n"], r["y_n"]) for r in read_jsonl(rundir_a.path(DNORM_CANDIDATES))}
    assert got_norm == expected_norm
    assert len(list(read_jsonl(rundir_a.path(DNORM_CANDIDATES)))) == 5
    _passed(6, "two scripted runs byte-identical; D_sec/D_norm match hand enumeration")


# --- 7. Heuristic filter ---------------------------------------------------------


def test_criterion_7_heuristic_filter_counts():
    triples, texts = make_filter_corpus()
    thresholds = FilterThresholds(min_lines=5, dedup_ratio=90)
    result = heuristic_filter_sec(triples, texts, thresholds)
    assert len(result.kept) == 22
    assert result.drop_counts == {"syntax": 5, "keyword": 5, "min_lines": 5, "dedup": 3}
    again = heuristic_filter_sec(result.kept, texts, thresholds)
    assert again.kept == result.kept and sum(again.drop_counts.values()) == 0
    _passed(7, "40-triple corpus -> 22 kept with drops {5,5,5,3}; idempotent")


# --- 8. Eval harness arithmetic ---------------------------------------------------


def test_criterion_8_eval_arithmetic(oracle):
    vuln, fixed = PLANTED[PY_78][0]
    fence = lambda code: f"```python\n{code}```"
    params = GenerationParams(temperature=0.5, top_p=0.9, max_tokens=512, n_samples=1, seed=0)

    completions = tuple(fence(vuln) if i < 3 else fence(fixed) for i in range(10))
    client = ScriptedMockClient([], default=completions)
    case = EvalCase.make("ping machines for the dashboard", PY_78)
    report = secure_ratio([case], client, oracle, n_per_instr=10, params=params)
    assert report.per_pair[PY_78].n_samples == 10
    assert report.per_pair[PY_78].n_vulnerable == 3
    assert report.per_pair[PY_78].ratio == 0.3
    assert report.aggregate_ratio == 0.3

    stage0 = "import os\n\ndef ping(host):\n    os.system('ping -c 1 ' + host)  # attempt0\n"
    stage1 = stage0.replace("attempt0", "attempt1")
    stage2 = stage0.replace("attempt0", "attempt2")
    secure = "import subprocess\n\ndef ping(host):\n    subprocess.run(['ping', '-c', '1', host], check=False)\n"
    refine_client = ScriptedMockClient(
        [
            MockRule("# attempt2", (fence(secure),)),
            MockRule("# attempt1", (fence(stage2),)),
            MockRule("# attempt0", (fence(stage1),)),
            MockRule("ping machines", (fence(stage0),)),
        ]
    )
    outcomes = {}
    for budget in (3, 5, 10):
        result = iterative_refine(case, refine_client, oracle, max_iters=budget, params=params)
        outcomes[budget] = (result.iters_used, result.secure)
    assert outcomes == {3: (3, False), 5: (4, True), 10: (4, True)}
    _passed(8, "scripted ratios exact; refine budgets {3,5,10} report scripted iterations")
