from __future__ import annotations

import numpy as np
import pytest

from trainer_bridge.model import ToyPrefLM
from trainer_bridge.objectives import PairInput, simpo
from trainer_bridge.tokenizer import BOS, HashingTokenizer


def test_tokenizer_deterministic_and_bos_reserved():
    tok = HashingTokenizer(48)
    a = tok.encode("Ping the host, please!")
    b = tok.encode("Ping the host, please!")
    assert a == b
    assert all(0 < t < 48 for t in a)
    assert tok.encode("") == [tok.unk]
    assert tok.encode("   ") == [tok.unk]


def test_tokenizer_case_insensitive_words():
    tok = HashingTokenizer(48)
    assert tok.encode("Ping HOST") == tok.encode("ping host")


def test_model_rescoring_is_identical():
    model = ToyPrefLM("toy-v1")
    first = model.logprob("archive the folder", "import shutil\nshutil.make_archive('b', 'gztar', d)")
    second = model.logprob("archive the folder", "import shutil\nshutil.make_archive('b', 'gztar', d)")
    assert first == second
    assert first[0] < 0.0 and first[1] > 0


def test_initial_model_equals_base_reference():
    model = ToyPrefLM("toy-v1")
    with_adapters, _ = model.logprob("a prompt", "some response text")
    base_only, _ = model.logprob("a prompt", "some response text", base_only=True)
    assert with_adapters == pytest.approx(base_only, abs=1e-15)


def test_different_model_refs_differ():
    a = ToyPrefLM("toy-v1").logprob("p", "some response")[0]
    b = ToyPrefLM("toy-v2").logprob("p", "some response")[0]
    assert a != b


def test_checkpoint_round_trip(tmp_path):
    model = ToyPrefLM("toy-v1")
    model.b_w += 0.01  # make adapters non-trivial
    model.a_c *= 1.5
    path = tmp_path / "ckpt-000005.npz"
    model.save_checkpoint(path, 5)
    loaded, step = ToyPrefLM.load_checkpoint(path)
    assert step == 5
    assert loaded.meta() == model.meta()
    text = ("ping the host", "import subprocess\nsubprocess.run(['ping'])")
    assert loaded.logprob(*text) == model.logprob(*text)


def _simpo_scalar(model: ToyPrefLM, x, y_w, y_l, beta, gamma) -> float:
    logp_w, _ = model.sequence_logprob(x, y_w)
    logp_l, _ = model.sequence_logprob(x, y_l)
    loss, _, _ = simpo(
        PairInput(logp_w=logp_w, len_w=len(y_w), logp_l=logp_l, len_l=len(y_l)), beta, gamma
    )
    return loss


def test_adapter_gradient_matches_finite_differences():
    """End-to-end chain rule check: table grads -> low-rank factors."""
    model = ToyPrefLM("toy-grad", vocab_size=24, rank=4, alpha=8)
    rng = np.random.RandomState(0)
    model.b_w = rng.normal(0, 0.02, size=model.b_w.shape)
    model.b_c = rng.normal(0, 0.02, size=model.b_c.shape)
    x = model.tokenizer.encode("ping the host now")
    y_w = model.tokenizer.encode("subprocess run ping list")
    y_l = model.tokenizer.encode("os system ping concat")
    beta, gamma = 1.5, 0.5

    logp_w, grad_w = model.sequence_logprob(x, y_w, want_grad=True)
    logp_l, grad_l = model.sequence_logprob(x, y_l, want_grad=True)
    _, d_w, d_l = simpo(PairInput(logp_w, len(y_w), logp_l, len(y_l)), beta, gamma)
    g_w = d_w * grad_w.g_w + d_l * grad_l.g_w
    g_c = d_w * grad_w.g_c + d_l * grad_l.g_c
    analytic = {
        "a_w": model.scale * (g_w @ model.b_w.T),
        "b_w": model.scale * (model.a_w.T @ g_w),
        "a_c": model.scale * (g_c @ model.b_c.T),
        "b_c": model.scale * (model.a_c.T @ g_c),
    }

    h = 1e-6
    rng = np.random.RandomState(7)
    for name in ("a_w", "b_w", "a_c", "b_c"):
        matrix = getattr(model, name)
        for _ in range(5):
            i = rng.randint(matrix.shape[0])
            j = rng.randint(matrix.shape[1])
            original = matrix[i, j]
            matrix[i, j] = original + h
            up = _simpo_scalar(model, x, y_w, y_l, beta, gamma)
            matrix[i, j] = original - h
            down = _simpo_scalar(model, x, y_w, y_l, beta, gamma)
            matrix[i, j] = original
            numeric = (up - down) / (2 * h)
            assert numeric == pytest.approx(analytic[name][i, j], rel=1e-4, abs=1e-9), name


def test_apply_table_grads_moves_loss_downhill():
    model = ToyPrefLM("toy-step", vocab_size=24, rank=4, alpha=8)
    x = model.tokenizer.encode("archive the reports")
    y_w = model.tokenizer.encode("shutil make archive")
    y_l = model.tokenizer.encode("os system tar concat")
    before = _simpo_scalar(model, x, y_w, y_l, 1.5, 0.5)
    for _ in range(5):
        logp_w, grad_w = model.sequence_logprob(x, y_w, want_grad=True)
        logp_l, grad_l = model.sequence_logprob(x, y_l, want_grad=True)
        _, d_w, d_l = simpo(PairInput(logp_w, len(y_w), logp_l, len(y_l)), 1.5, 0.5)
        model.apply_table_grads(d_w * grad_w.g_w + d_l * grad_l.g_w,
                                d_w * grad_w.g_c + d_l * grad_l.g_c, lr=0.5)
    after = _simpo_scalar(model, x, y_w, y_l, 1.5, 0.5)
    assert after < before
