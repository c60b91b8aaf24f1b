import math

import numpy as np
import pytest

from simtkit import (
    BIDIRECTIONAL,
    CapacityError,
    MicroModel,
    ModelFileError,
    NumericError,
    UNIDIRECTIONAL,
    load_model,
    save_model,
    sgd_step,
)

from conftest import make_vocab


def small_model(mode=BIDIRECTIONAL, seed=3, d=8):
    return MicroModel(make_vocab(8), d=d, max_len=12, mode=mode, seed=seed)


def test_zeroed_output_projection_gives_uniform():
    m = small_model()
    m.params["out_proj"][...] = 0.0
    n = len(m.vocab)
    out = m.forward_next((5, 6, 1), (5,)).probs
    assert np.array_equal(out, np.full(n, 1.0 / n))


def test_uniform_model_loss_is_log_vocab():
    m = small_model()
    m.params["out_proj"][...] = 0.0
    loss, _ = m.loss_and_grads([((5, 6, 7, 1), (5, 6, 7, 1), "full")])
    assert math.isclose(loss, math.log(len(m.vocab)), rel_tol=0, abs_tol=1e-12)


def test_unidirectional_invariance_bitwise_and_bidirectional_violation():
    rng = np.random.default_rng(11)
    bi_violations = 0
    for trial in range(100):
        uni = small_model(mode=UNIDIRECTIONAL, seed=trial, d=16)
        bi = MicroModel(uni.vocab, d=16, max_len=12, mode=BIDIRECTIONAL,
                        params=uni.clone_params())
        n = int(rng.integers(4, 9))
        g = int(rng.integers(1, n))
        src = [int(x) for x in rng.integers(3, 11, size=n)]
        tgt = tuple(int(x) for x in rng.integers(3, 11, size=int(rng.integers(1, 5))))
        src2 = list(src)
        for pos in range(g, n):
            src2[pos] = int(rng.integers(3, 11))
        if src2 == src:
            src2[g] = (src2[g] - 3 + 1) % 8 + 3
        base = uni.forward_next(tuple(src), tgt, cross_limit=g).probs
        pert = uni.forward_next(tuple(src2), tgt, cross_limit=g).probs
        assert np.array_equal(base, pert), f"unidirectional leak at trial {trial}"
        if not np.array_equal(bi.forward_next(tuple(src), tgt, cross_limit=g).probs,
                              bi.forward_next(tuple(src2), tgt, cross_limit=g).probs):
            bi_violations += 1
    assert bi_violations >= 1


def max_fd_rel_error(model, batch, h=1e-4):
    """Worst relative error of analytic grads vs central finite differences,
    over every entry of every parameter tensor."""
    _, grads = model.loss_and_grads(batch)
    worst = 0.0
    for name, param in model.params.items():
        flat = param.ravel()
        grad = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = model.loss_and_grads(batch)[0]
            flat[i] = orig - h
            down = model.loss_and_grads(batch)[0]
            flat[i] = orig
            fd = (up - down) / (2 * h)
            rel = abs(grad[i] - fd) / max(abs(grad[i]), abs(fd), 1e-6)
            worst = max(worst, rel)
    return worst


def test_gradient_check_offline():
    m = small_model(mode=BIDIRECTIONAL)
    batch = [((5, 6, 7, 4, 1), (5, 6, 7, 4, 1), "full")]
    assert max_fd_rel_error(m, batch) < 1e-3


def test_gradient_check_multipath_limits():
    m = small_model(mode=UNIDIRECTIONAL)
    src = (5, 6, 7, 4, 1)
    tgt = (5, 6, 7, 4, 1)
    limits = [min(t + 1, len(src)) for t in range(1, len(tgt) + 1)]  # k = 2
    assert max_fd_rel_error(m, [(src, tgt, limits)]) < 1e-3


def test_gradient_check_p2f_prefix():
    m = small_model(mode=BIDIRECTIONAL)
    batch = [((5,), (5, 6, 7, 1), "full")]  # l = 1 truncated source
    assert max_fd_rel_error(m, batch) < 1e-3


def test_batch_loss_permutation_invariant():
    m = small_model()
    a = ((5, 6, 1), (6, 5, 1), "full")
    b = ((7, 4, 3, 1), (7, 4, 3, 1), "full")
    l1, _ = m.loss_and_grads([a, b])
    l2, _ = m.loss_and_grads([b, a])
    assert math.isclose(l1, l2, rel_tol=1e-12)


def test_sgd_step_arithmetic_and_noops():
    m = small_model()
    before = m.clone_params()
    zero = {name: np.zeros_like(p) for name, p in m.params.items()}
    sgd_step(m, zero, lr=0.5)
    assert all(np.array_equal(before[k], m.params[k]) for k in before)

    grads = {name: np.ones_like(p) for name, p in m.params.items()}
    sgd_step(m, grads, lr=0.0)
    assert all(np.array_equal(before[k], m.params[k]) for k in before)

    m.params["out_proj"][...] = 1.0
    sgd_step(m, {**zero, "out_proj": np.full_like(m.params["out_proj"], 2.0)}, lr=0.1)
    assert np.allclose(m.params["out_proj"], 0.8)


def test_sgd_step_detects_nonfinite():
    m = small_model()
    bad = {name: np.zeros_like(p) for name, p in m.params.items()}
    bad["ff_w1"][0, 0] = np.inf
    with pytest.raises(NumericError, match="ff_w1"):
        sgd_step(m, bad, lr=1.0)


def test_capacity_and_limit_errors():
    m = small_model()
    with pytest.raises(CapacityError):
        m.forward_next(tuple([3] * 20) + (1,), ())
    with pytest.raises(Exception):
        m.forward_next((3, 4, 1), (), cross_limit=9)  # beyond source length


def test_save_load_round_trip_bitwise(tmp_path):
    m = small_model(seed=9)
    path = tmp_path / "m.json"
    save_model(m, path)
    m2 = load_model(path)
    assert m2.mode == m.mode and m2.d == m.d and m2.max_len == m.max_len
    assert all(np.array_equal(m.params[k], m2.params[k]) for k in m.params)
    rng = np.random.default_rng(0)
    for _ in range(100):
        src = tuple(int(x) for x in rng.integers(3, 11, size=int(rng.integers(1, 7)))) + (1,)
        tgt = tuple(int(x) for x in rng.integers(3, 11, size=int(rng.integers(0, 5))))
        assert np.array_equal(m.next_dist(src, tgt).probs, m2.next_dist(src, tgt).probs)


def test_truncated_model_file_rejected(tmp_path):
    m = small_model()
    path = tmp_path / "m.json"
    save_model(m, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(ModelFileError):
        load_model(path)


def test_table_model_round_trip_lookup_traces(tmp_path):
    from simtkit import TableModel, delta_distribution, uniform_distribution
    vocab = make_vocab(3)
    n = len(vocab)
    entries = {
        ((3,), ()): delta_distribution(n, 3).probs,
        ((3, 4), (3,)): delta_distribution(n, 4).probs,
        ((4,), ()): uniform_distribution(n, [3, 4]).probs,
    }
    model = TableModel(n, entries, uniform_distribution(n).probs, vocab=vocab)
    path = tmp_path / "t.json"
    save_model(model, path)
    model2 = load_model(path)
    assert set(model2.entries) == set(model.entries)
    for src in [(3,), (4,), (3, 4), (5, 5)]:
        for tgt in [(), (3,), (3, 4)]:
            assert np.array_equal(model.next_dist(src, tgt).probs,
                                  model2.next_dist(src, tgt).probs)
