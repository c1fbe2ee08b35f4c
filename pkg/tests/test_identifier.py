import numpy as np
import pytest

from feddiar.clustering import Segment, cluster_segments
from feddiar.errors import (
    DimensionMismatch,
    EmptyCluster,
    EmptySegment,
    EmptySet,
    InvalidArch,
    ZeroNormEmbedding,
)
from feddiar.identifier import (
    AdamState,
    Embedding,
    EmbeddingBank,
    ModelArch,
    ModelWeights,
    cosine_similarity,
    cross_entropy_loss,
    embed_segment,
    evaluate,
    forward,
    gradients,
    init_model,
    load_checkpoint,
    online_update,
    predict_cluster,
    save_checkpoint,
    softmax,
    train_local,
)


def zero_model(arch):
    weights = tuple(np.zeros((a, b)) for a, b in zip(arch.layer_sizes, arch.layer_sizes[1:]))
    biases = tuple(np.zeros(b) for b in arch.layer_sizes[1:])
    return ModelWeights(arch, weights, biases)


def two_blob_data(n_per=60, d=12, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_per, d)) - 2.0
    b = rng.standard_normal((n_per, d)) + 2.0
    frames = np.vstack([a, b])
    labels = np.array([0] * n_per + [1] * n_per)
    return frames, labels


def test_param_count_formula() -> None:
    arch = ModelArch(input_dim=12, hidden_sizes=(64, 64), num_classes=12)
    assert arch.num_params() == (12 * 64 + 64) + (64 * 64 + 64) + (64 * 12 + 12) == 5772


def test_arch_validation() -> None:
    with pytest.raises(InvalidArch):
        ModelArch(input_dim=0, hidden_sizes=(4,), num_classes=2)
    with pytest.raises(InvalidArch):
        ModelArch(input_dim=12, hidden_sizes=(0,), num_classes=2)
    with pytest.raises(InvalidArch):
        ModelArch(input_dim=12, hidden_sizes=(4,), num_classes=0)


def test_init_seeded_and_bounded() -> None:
    arch = ModelArch(12, (8,), 3)
    a = init_model(arch, seed=5)
    b = init_model(arch, seed=5)
    c = init_model(arch, seed=6)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights))
    # layer bound is 1/sqrt(fan_in)
    assert np.max(np.abs(a.weights[0])) <= 1 / np.sqrt(12)
    assert np.max(np.abs(a.weights[1])) <= 1 / np.sqrt(8)
    assert a.version == 0


def test_forward_zero_model_uniform() -> None:
    arch = ModelArch(12, (8,), 5)
    model = zero_model(arch)
    logits, probs = forward(model, np.ones(12))
    assert np.allclose(logits, 0.0)
    assert np.allclose(probs, 0.2)


def test_forward_checks_input_dim() -> None:
    model = zero_model(ModelArch(12, (8,), 3))
    with pytest.raises(DimensionMismatch):
        forward(model, np.ones(11))


def test_softmax_shift_invariant_simplex() -> None:
    z = np.array([0.5, -1.0, 3.0])
    p = softmax(z)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p > 0)
    assert np.allclose(softmax(z + 100.0), p)
    assert np.allclose(softmax(np.array([1000.0, 0.0])), [1.0, 0.0])


def test_cross_entropy_hand_value() -> None:
    # all-zero weights give uniform class probabilities, so the loss is
    # exactly ln(num_classes) regardless of the input
    zeroed = zero_model(ModelArch(4, (5,), 3))
    frames = np.random.default_rng(0).standard_normal((6, 4))
    labels = np.array([0, 1, 2, 0, 1, 2])
    assert cross_entropy_loss(zeroed, frames, labels) == pytest.approx(np.log(3.0))


def test_gradients_match_finite_differences() -> None:
    arch = ModelArch(12, (4,), 3)
    model = init_model(arch, seed=0)
    rng = np.random.default_rng(1)
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal((1, 12))
        y = np.array([int(rng.integers(0, 3))])
        grad_w, grad_b = gradients(model, x, y)
        fd_max = 0.0
        diff_max = 0.0
        for li in range(len(model.weights)):
            for arr, grad in ((model.weights[li], grad_w[li]),
                              (model.biases[li], grad_b[li])):
                it = np.nditer(arr, flags=["multi_index"])
                for _v in it:
                    ix = it.multi_index
                    orig = arr[ix]
                    arr[ix] = orig + h
                    lp = evaluate(model, x, y)[0]
                    arr[ix] = orig - h
                    lm = evaluate(model, x, y)[0]
                    arr[ix] = orig
                    fd = (lp - lm) / (2 * h)
                    fd_max = max(fd_max, abs(fd))
                    diff_max = max(diff_max, abs(fd - grad[ix]))
        worst = max(worst, diff_max / max(fd_max, 1e-12))
    assert worst < 1e-4


def test_train_lr_zero_is_identity() -> None:
    frames, labels = two_blob_data()
    model = init_model(ModelArch(12, (8,), 2), seed=2)
    trained, _ = train_local(model, frames, labels, lr=0.0, epochs=3)
    for w0, w1 in zip(model.weights, trained.weights):
        assert np.array_equal(w0, w1)
    for b0, b1 in zip(model.biases, trained.biases):
        assert np.array_equal(b0, b1)
    assert trained.version == model.version + 1


def test_train_separates_two_blobs() -> None:
    frames, labels = two_blob_data(seed=3)
    model = init_model(ModelArch(12, (8,), 2), seed=3)
    trained, _ = train_local(model, frames, labels, lr=0.01, epochs=200)
    _, acc = evaluate(trained, frames, labels)
    assert acc >= 0.99


def test_train_deterministic_without_rng() -> None:
    frames, labels = two_blob_data(seed=4)
    model = init_model(ModelArch(12, (8,), 2), seed=4)
    a, _ = train_local(model, frames, labels, lr=0.01, epochs=5)
    b, _ = train_local(model, frames, labels, lr=0.01, epochs=5)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_embed_single_frame_is_logits() -> None:
    model = init_model(ModelArch(12, (8,), 4), seed=5)
    frame = np.full(12, 0.3)
    logits, _ = forward(model, frame)
    emb = embed_segment(model, frame.reshape(1, -1))
    assert np.allclose(emb.values, logits)
    with pytest.raises(EmptySegment):
        embed_segment(model, np.zeros((0, 12)))


def test_cosine_hand_cases() -> None:
    v = Embedding(np.array([1.0, 2.0, 3.0]))
    assert cosine_similarity([v], [v]) == pytest.approx(1.0)
    e1 = Embedding(np.array([1.0, 0.0]))
    e2 = Embedding(np.array([0.0, 1.0]))
    assert cosine_similarity([e1], [e2]) == pytest.approx(0.0)
    both = Embedding(np.array([1.0, 1.0]))
    got = cosine_similarity([e1, e2], [both])
    assert got == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-9)


def test_cosine_error_paths() -> None:
    z = Embedding(np.array([0.0, 0.0]))
    ok = Embedding(np.array([1.0, 0.0]))
    with pytest.raises(ZeroNormEmbedding):
        cosine_similarity([z], [ok])
    with pytest.raises(EmptySet):
        cosine_similarity([], [ok])
    with pytest.raises(DimensionMismatch):
        cosine_similarity([ok], [Embedding(np.array([1.0, 0.0, 0.0]))])


def test_predict_cluster_tie_picks_lowest() -> None:
    model = zero_model(ModelArch(12, (8,), 5))
    rows = np.random.default_rng(6).standard_normal((10, 12))
    speaker, confidence = predict_cluster(model, rows)
    assert speaker == 0
    assert confidence == pytest.approx(0.2)
    with pytest.raises(EmptyCluster):
        predict_cluster(model, np.zeros((0, 12)))


def test_bank_fifo_eviction() -> None:
    bank = EmbeddingBank(bank_cap=3)
    for i in range(4):
        bank.add(0, Embedding(np.array([float(i), 1.0])))
    assert bank.size(0) == 3
    kept = [e.values[0] for e in bank.get(0)]
    assert kept == [1.0, 2.0, 3.0]
    assert bank.get(1) == []
    assert bank.speakers() == [0]


def segments_and_clusters(seed=7):
    rng = np.random.default_rng(seed)
    segs = [Segment(0, 40, rng.standard_normal((40, 12)) - 2.0),
            Segment(50, 90, rng.standard_normal((40, 12)) + 2.0)]
    clusters = cluster_segments(segs)
    return segs, clusters


def test_online_update_gate_closed_is_identity() -> None:
    segs, clusters = segments_and_clusters()
    model = init_model(ModelArch(12, (8,), 2), seed=8)
    bank = EmbeddingBank()
    for spk in (0, 1):
        bank.add(spk, Embedding(np.ones(2)))
    updated, decisions = online_update(model, segs, clusters, bank, tau=1.5)
    for w0, w1 in zip(model.weights, updated.weights):
        assert np.array_equal(w0, w1)
    assert all(not d.updated for d in decisions)
    assert updated.version == model.version


def test_online_update_gate_open_trains_each_cluster_once() -> None:
    segs, clusters = segments_and_clusters()
    model = init_model(ModelArch(12, (8,), 2), seed=9)
    bank = EmbeddingBank()
    for spk in (0, 1):
        bank.add(spk, Embedding(np.ones(2)))
    before = bank.size(0) + bank.size(1)
    updated, decisions = online_update(model, segs, clusters, bank, tau=-1.0)
    assert len(decisions) == len(clusters)
    assert all(d.updated for d in decisions)
    assert updated.version == model.version + len(clusters)
    assert bank.size(0) + bank.size(1) == before + len(segs)


def test_online_update_empty_bank_never_opens() -> None:
    segs, clusters = segments_and_clusters()
    model = init_model(ModelArch(12, (8,), 2), seed=10)
    updated, decisions = online_update(model, segs, clusters, EmbeddingBank(), tau=-1.0)
    assert all(not d.updated for d in decisions)
    assert all(np.isnan(d.similarity) for d in decisions)
    assert updated.version == model.version


def test_checkpoint_round_trip(tmp_path) -> None:
    model = init_model(ModelArch(12, (16, 8), 4), seed=11)
    trained, _ = train_local(model, *two_blob_data(n_per=20, seed=11), epochs=2)
    path = tmp_path / "m.npz"
    save_checkpoint(path, trained)
    back = load_checkpoint(path)
    assert back.arch == trained.arch
    assert back.version == trained.version
    for w0, w1 in zip(trained.weights, back.weights):
        assert np.array_equal(w0, w1)
    for b0, b1 in zip(trained.biases, back.biases):
        assert np.array_equal(b0, b1)


def test_adam_state_shapes() -> None:
    arch = ModelArch(12, (8,), 2)
    model = init_model(arch, seed=12)
    opt = AdamState.for_model(model)
    assert opt.step == 0
    assert [m.shape for m in opt.m_w] == [w.shape for w in model.weights]
    assert [v.shape for v in opt.v_b] == [b.shape for b in model.biases]
