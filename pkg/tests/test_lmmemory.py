import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from behavnav.lmmemory import (
    UNKNOWN, DegenerateEmbedding, EmptyDataset, ShapeMismatch, TrainConfig, build_memory, calibrate_unknown,
    detect, load_memory, loss_and_grad, memory_for_plan, probabilities, save_memory, score, score_batch,
    synthetic_views, train,
)


def random_memory(rng, n=5, m=3, d=16):
    return build_memory(rng.standard_normal((n, m, d)), [f"O{i + 1}" for i in range(n)],
                        rng.standard_normal((d, d)), rng.standard_normal((d, d)), alpha_unk=0.5)


def test_single_exact_match_detected():
    rng = np.random.default_rng(0)
    raw = rng.standard_normal((4, 1, 8))
    mem = build_memory(raw, ["O1", "O2", "O3", "H1"], alpha_unk=0.5)
    assert detect(mem, raw[2]) == "O3"


def test_unknown_when_nothing_beats_threshold():
    rng = np.random.default_rng(1)
    mem = random_memory(rng)
    mem.alpha_unk = 1e9
    assert detect(mem, rng.standard_normal((3, 3, 16))) == UNKNOWN


def test_probabilities_form_a_distribution():
    rng = np.random.default_rng(2)
    mem = random_memory(rng)
    p = probabilities(score(mem, rng.standard_normal((7, 7, 16))))
    assert p.shape == (mem.n + 1,)
    assert np.isclose(p.sum(), 1.0) and (p >= 0).all()


def test_batch_scores_match_single():
    rng = np.random.default_rng(3)
    mem = random_memory(rng)
    views = rng.standard_normal((6, 4, 4, 16))
    batch = score_batch(mem, views)
    for b in range(6):
        assert np.allclose(batch[b], score(mem, views[b]).alpha)


def test_shape_errors():
    rng = np.random.default_rng(4)
    with pytest.raises(ShapeMismatch):
        build_memory(rng.standard_normal((3, 8)), ["a", "b", "c"])
    with pytest.raises(ShapeMismatch):
        build_memory(rng.standard_normal((3, 1, 8)), ["O1", "O2"])
    mem = random_memory(rng)
    with pytest.raises(ShapeMismatch):
        score(mem, rng.standard_normal((2, 2, 9)))


def test_zero_embedding_rejected():
    with pytest.raises(DegenerateEmbedding):
        build_memory(np.zeros((1, 1, 4)), ["O1"])


def test_training_rejects_empty_set():
    mem = random_memory(np.random.default_rng(5))
    with pytest.raises(EmptyDataset):
        train(mem, np.zeros((0, 2, 2, 16)), np.zeros(0, int))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_score_invariant_to_descriptor_scale(seed):
    rng = np.random.default_rng(seed)
    mem = random_memory(rng)
    view = rng.standard_normal((3, 3, 16))
    assert np.allclose(score(mem, view).alpha, score(mem, 3.7 * view).alpha)


def test_training_lowers_loss(library):
    rng = np.random.default_rng(6)
    ids = np.arange(12)
    raw = np.stack([library.noisy(int(i), rng, 0.05, 2) for i in ids])
    mem = build_memory(raw, [str(i) for i in ids], alpha_unk=2.0)
    views, labels = synthetic_views(library, ids, rng, 512, 0.05)
    hist = train(mem, views, labels, TrainConfig(lr=1e-3, epochs=8))
    assert hist.loss[-1] < hist.loss[0]


def test_zero_learning_rate_keeps_parameters():
    rng = np.random.default_rng(7)
    mem = random_memory(rng)
    F0, W0 = mem.F.copy(), mem.W.copy()
    views = rng.standard_normal((16, 2, 2, 16))
    train(mem, views, rng.integers(0, mem.n + 1, 16), TrainConfig(lr=0.0, epochs=2))
    assert np.array_equal(mem.F, F0) and np.array_equal(mem.W, W0)


def test_calibration_hits_false_accept_rate(library):
    rng = np.random.default_rng(8)
    mem = random_memory(rng, d=library.dim)
    views, _ = synthetic_views(library, np.arange(5), rng, 2000, 0.05, unknown_frac=1.0)
    calibrate_unknown(mem, views, false_accept=0.05)
    rate = (score_batch(mem, views).max(axis=1) > mem.alpha_unk).mean()
    assert abs(rate - 0.05) < 0.01


def test_checkpoint_round_trip(tmp_path):
    mem = random_memory(np.random.default_rng(9))
    save_memory(mem, tmp_path / "m.lmem")
    back = load_memory(tmp_path / "m.lmem")
    assert back.values == mem.values
    assert np.array_equal(back.raw, mem.raw.astype(np.float32))
    assert np.array_equal(back.F, mem.F.astype(np.float32))
    assert back.alpha_unk == np.float32(mem.alpha_unk)
    save_memory(back, tmp_path / "n.lmem")
    assert (tmp_path / "m.lmem").read_bytes() == (tmp_path / "n.lmem").read_bytes()


def test_bad_checkpoint(tmp_path):
    (tmp_path / "x").write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_memory(tmp_path / "x")


def test_plan_memory_uses_place_ids(reference, library, base_memory):
    plan, _ = reference
    mem = memory_for_plan(plan, library, base_memory)
    assert sorted(mem.values) == sorted(lm.place for lm in plan.landmarks)
    assert mem.alpha_unk == base_memory.alpha_unk
    lm = plan.landmarks[0]
    view = library.distractors(np.random.default_rng(0), 49).reshape(7, 7, -1)
    view[2:5, 2:4] = library.noisy(lm.id, np.random.default_rng(1), 0.05, 6).reshape(3, 2, -1)
    assert detect(mem, view) == lm.place


def test_gradient_shapes():
    rng = np.random.default_rng(10)
    mem = random_memory(rng, d=8)
    loss, dF, dW, acc = loss_and_grad(mem.F, mem.W, mem.raw, rng.standard_normal((4, 2, 2, 8)),
                                      np.array([0, 1, 5, 2]), mem.alpha_unk)
    assert dF.shape == (8, 8) and dW.shape == (8, 8) and loss > 0 and 0 <= acc <= 1
