import math
import warnings

import numpy as np
import pytest

from dscom import AttributedGraph, NumericError, random_attributed_graph
from dscom.graph import DiffusionDataset
from dscom.relation import (
    Candidates,
    TrainConfig,
    WeightedGraph,
    _segment_softmax,
    _skipgram_loss_grad,
    build_chains,
    extract_edge_weights,
    gat_forward,
    init_attention_model,
    load_attention_model,
    load_weighted_graph,
    loss_and_param_grads,
    save_attention_model,
    save_weighted_graph,
    skipgram_objective,
    train_relation_model,
    uniform_weighted,
    window_positives,
)


def chain_dataset(pairs):
    return DiffusionDataset(pairs, [f"c{i}" for i in range(len(pairs))])


# ------------------------------------------------------------- forward pass


def test_segment_softmax_arithmetic():
    g = AttributedGraph(2, [(0, 1)], np.zeros((2, 1)))
    cand = Candidates(g)
    # candidates sorted by (tgt, src): (0,0), (1,0), (1,1)
    assert cand.tgt.tolist() == [0, 1, 1]
    assert cand.src.tolist() == [0, 0, 1]
    e = np.array([7.0, 0.0, math.log(3.0)])
    alpha = _segment_softmax(e, cand)
    assert alpha[0] == pytest.approx(1.0)
    assert alpha[1] == pytest.approx(0.25)
    assert alpha[2] == pytest.approx(0.75)


def test_source_node_attends_only_itself():
    g = AttributedGraph(2, [(0, 1)], np.array([[1.0, 2.0], [0.5, -1.0]]))
    model = init_attention_model(2, out_dim=3, layers=1, final_heads=1,
                                 rng_seed=3)
    Z, attns = gat_forward(model, g)
    cand = Candidates(g)
    self_alpha = attns[0][0][cand.pos_of_self[0]]
    assert self_alpha == pytest.approx(1.0)
    W = model.layers[0]["heads"][0]["W"]
    assert np.allclose(Z[0], W @ g.features[0])


def test_equal_logits_split_three_ways():
    X = np.tile([[0.3, -0.7]], (3, 1))
    g = AttributedGraph(3, [(1, 0), (2, 0)], X)
    model = init_attention_model(2, out_dim=3, layers=1, final_heads=1,
                                 rng_seed=4)
    _, attns = gat_forward(model, g)
    cand = Candidates(g)
    for c in range(cand.size):
        if cand.tgt[c] == 0:
            assert attns[0][0][c] == pytest.approx(1.0 / 3.0)


def test_attention_mass_sums_to_one_everywhere():
    g = random_attributed_graph(80, 4.0, 3, rng_seed=5)
    model = init_attention_model(3, hidden_dim=4, out_dim=4, layers=2,
                                 heads=3, rng_seed=6)
    _, attns = gat_forward(model, g)
    cand = Candidates(g)
    for layer in attns:
        for head in layer:
            sums = np.add.reduceat(head, cand.seg_start)
            assert np.abs(sums - 1.0).max() <= 1e-6


def test_embeddings_finite():
    g = random_attributed_graph(40, 4.0, 4, rng_seed=7)
    model = init_attention_model(4, rng_seed=8)
    Z, _ = gat_forward(model, g)
    assert np.isfinite(Z).all()
    assert Z.shape == (40, 8)


def test_forward_permutation_equivariance():
    g = random_attributed_graph(12, 3.0, 3, rng_seed=9)
    rng = np.random.default_rng(10)
    perm = rng.permutation(g.n)
    X2 = np.empty_like(g.features)
    X2[perm] = g.features
    edges2 = [(perm[u], perm[v]) for u, v in g.edges]
    g2 = AttributedGraph(g.n, edges2, X2)
    model = init_attention_model(3, hidden_dim=4, out_dim=4, layers=2,
                                 heads=2, rng_seed=11)
    Z1, _ = gat_forward(model, g)
    Z2, _ = gat_forward(model, g2)
    assert np.allclose(Z2[perm], Z1, atol=1e-10)
    w1 = extract_edge_weights(model, g)
    w2 = extract_edge_weights(model, g2)
    for u, v in g.edges:
        assert w2.weight(perm[u], perm[v]) == pytest.approx(
            w1.weight(u, v), abs=1e-10
        )


# ---------------------------------------------------------------- objective


def test_skipgram_zero_embeddings_frozen_value():
    Z = np.zeros((6, 4))
    for K in (1, 3, 5):
        negatives = np.zeros((2, K), dtype=np.int64)
        loss, dZ = _skipgram_loss_grad(Z, [(0, 1), (2, 3)], negatives)
        assert loss == pytest.approx((1 + K) * math.log(2.0))
        assert np.allclose(dZ, 0.0)


def test_skipgram_strong_positive_leaves_negative_floor():
    Z = np.zeros((4, 2))
    Z[0] = [50.0, 0.0]
    Z[1] = [50.0, 0.0]
    # negatives orthogonal to z_u
    Z[2] = [0.0, 0.0]
    K = 3
    loss, _ = _skipgram_loss_grad(Z, [(0, 1)], np.full((1, K), 2))
    assert loss == pytest.approx(K * math.log(2.0), abs=1e-6)


def test_skipgram_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    Z = rng.standard_normal((5, 3)) * 0.7
    positives = np.array([(0, 1), (2, 3), (1, 4), (3, 0)])
    negatives = rng.integers(0, 5, size=(4, 3))
    _, dZ = _skipgram_loss_grad(Z, positives, negatives)
    h = 1e-5
    for i in range(Z.shape[0]):
        for j in range(Z.shape[1]):
            zp = Z.copy()
            zp[i, j] += h
            zm = Z.copy()
            zm[i, j] -= h
            lp, _ = _skipgram_loss_grad(zp, positives, negatives)
            lm, _ = _skipgram_loss_grad(zm, positives, negatives)
            fd = (lp - lm) / (2 * h)
            assert abs(fd - dZ[i, j]) <= 1e-4 * max(1.0, abs(fd))


def test_skipgram_objective_avoids_context_collisions():
    rng = np.random.default_rng(13)
    Z = rng.standard_normal((3, 2))
    positives = np.array([(0, 1)] * 50)
    loss, dZ = skipgram_objective(Z, positives, negatives_per_positive=5,
                                  rng_seed=1)
    assert np.isfinite(loss)
    assert dZ.shape == Z.shape


def test_end_to_end_parameter_gradients_match_fd():
    g = random_attributed_graph(5, 2.0, 3, rng_seed=14)
    model = init_attention_model(3, hidden_dim=3, out_dim=2, layers=2,
                                 heads=2, rng_seed=15)
    rng = np.random.default_rng(16)
    positives = np.array([(0, 1), (2, 3), (4, 0), (1, 2), (3, 4), (2, 0)])
    negatives = rng.integers(0, 5, size=(6, 2))
    _, grads = loss_and_param_grads(model, g, g.features, positives, negatives)
    h = 1e-5
    worst = 0.0
    for li, hi, name, arr in model.parameters():
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            lp, _ = loss_and_param_grads(model, g, g.features, positives,
                                         negatives)
            arr[idx] = orig - h
            lm, _ = loss_and_param_grads(model, g, g.features, positives,
                                         negatives)
            arr[idx] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[li][hi][name][idx]
            rel = abs(an - fd) / max(abs(an) + abs(fd), 1e-6)
            worst = max(worst, rel)
    assert worst < 1e-3


# ------------------------------------------------------------------- chains


def test_chains_concatenate_consecutive_pairs():
    ds = chain_dataset([(0, 1), (1, 2)])
    corpus = build_chains(ds, walks_per_pair=1, max_len=3, rng_seed=0)
    assert [0, 1, 2] in corpus.chains
    assert [0, 1] in corpus.chains


def test_single_pair_chain():
    ds = chain_dataset([(4, 7)])
    corpus = build_chains(ds, walks_per_pair=1, max_len=5, rng_seed=0)
    assert all(ch[:2] == [4, 7] for ch in corpus.chains)


def test_walk_frequency_follows_multiplicity():
    ds = chain_dataset([(0, 1), (0, 1), (0, 1), (0, 2)])
    corpus = build_chains(ds, walks_per_pair=2500, max_len=2, rng_seed=1)
    walks = [ch for i, ch in enumerate(corpus.chains) if i % 2501 != 0]
    assert len(walks) == 10000
    freq = sum(1 for ch in walks if ch[1] == 1) / len(walks)
    assert abs(freq - 0.75) < 0.02


def test_window_positives_symmetric():
    corpus = build_chains(chain_dataset([(0, 1), (1, 2)]), walks_per_pair=0,
                          max_len=2, rng_seed=0)
    corpus.chains = [[0, 1, 2]]
    pos = window_positives(corpus, window=2)
    got = {tuple(p) for p in pos.tolist()}
    assert got == {(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)}


def test_chains_deterministic():
    ds = chain_dataset([(0, 1), (1, 2), (2, 3), (0, 1)])
    a = build_chains(ds, walks_per_pair=2, max_len=4, rng_seed=9)
    b = build_chains(ds, walks_per_pair=2, max_len=4, rng_seed=9)
    assert a.chains == b.chains


# ----------------------------------------------------------------- training


def make_training_instance(rng_seed=20):
    g = random_attributed_graph(14, 3.0, 3, rng_seed=rng_seed)
    rng = np.random.default_rng(rng_seed + 1)
    idx = rng.integers(0, g.m, size=60)
    pairs = [tuple(map(int, g.edges[i])) for i in idx]
    return g, chain_dataset(pairs)


def test_epochs_zero_returns_seeded_init():
    g, ds = make_training_instance()
    cfg = TrainConfig(epochs=0, rng_seed=7)
    model, history = train_relation_model(g, ds, cfg)
    assert history == []
    ref = init_attention_model(g.feature_dim, cfg.hidden_dim, cfg.out_dim,
                               cfg.layers, cfg.heads, cfg.final_heads,
                               cfg.leaky_slope, rng_seed=7)
    for (_, _, _, got), (_, _, _, want) in zip(model.parameters(),
                                               ref.parameters()):
        assert np.array_equal(got, want)


def test_training_reduces_loss():
    g, ds = make_training_instance()
    cfg = TrainConfig(epochs=40, hidden_dim=4, out_dim=4, heads=2,
                      batch_size=64, rng_seed=3)
    model, history = train_relation_model(g, ds, cfg)
    assert len(history) == 40
    assert history[-1] < history[0]


def test_training_curve_smoothed_non_increasing():
    g, ds = make_training_instance(rng_seed=30)
    cfg = TrainConfig(epochs=60, hidden_dim=4, out_dim=4, heads=2,
                      batch_size=128, rng_seed=5)
    _, history = train_relation_model(g, ds, cfg)
    ma = np.convolve(history, np.ones(10) / 10.0, mode="valid")
    # fresh negatives each epoch leave a little plateau noise; the smoothed
    # curve must never climb beyond it and must descend overall
    assert np.all(np.diff(ma) <= 5e-3)
    assert ma[-1] < ma[0] - 0.05


def test_training_deterministic():
    g, ds = make_training_instance(rng_seed=40)
    cfg = TrainConfig(epochs=8, rng_seed=11)
    _, h1 = train_relation_model(g, ds, cfg)
    _, h2 = train_relation_model(g, ds, cfg)
    assert h1 == h2


def test_divergence_raises_numeric_error():
    g, ds = make_training_instance(rng_seed=50)
    cfg = TrainConfig(epochs=20, lr=1e14, rng_seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(NumericError):
            train_relation_model(g, ds, cfg)


def test_checkpoint_roundtrip(tmp_path):
    model = init_attention_model(3, rng_seed=21)
    p = tmp_path / "model.json"
    save_attention_model(model, str(p))
    loaded = load_attention_model(str(p))
    for (_, _, _, got), (_, _, _, want) in zip(loaded.parameters(),
                                               model.parameters()):
        assert np.array_equal(got, want)
    assert loaded.leaky_slope == model.leaky_slope


# --------------------------------------------------------------- extraction


def test_extracted_weights_partition_unit_mass():
    g = random_attributed_graph(60, 4.0, 3, rng_seed=22)
    model = init_attention_model(3, rng_seed=23)
    weighted = extract_edge_weights(model, g)
    sums = weighted.self_mass.copy()
    np.add.at(sums, g.edges[:, 1], weighted.weights)
    assert np.abs(sums - 1.0).max() <= 1e-6
    assert weighted.weights.min() > 0.0


def test_extracted_weight_single_in_neighbor_equal_logits():
    X = np.tile([[1.0, 1.0]], (2, 1))
    g = AttributedGraph(2, [(0, 1)], X)
    model = init_attention_model(2, out_dim=3, layers=1, rng_seed=24)
    weighted = extract_edge_weights(model, g)
    # identical features make source and self logits equal at the target
    assert weighted.weight(0, 1) == pytest.approx(0.5)


def test_weighted_graph_export_roundtrip(tmp_path):
    g = random_attributed_graph(20, 3.0, 2, rng_seed=25)
    model = init_attention_model(2, rng_seed=26)
    weighted = extract_edge_weights(model, g)
    p = tmp_path / "weights.txt"
    save_weighted_graph(weighted, str(p))
    loaded = load_weighted_graph(str(p), g)
    assert np.allclose(loaded.weights, weighted.weights, rtol=1e-8, atol=0)


def test_uniform_weighted_graph():
    g = random_attributed_graph(10, 2.0, 2, rng_seed=27)
    w = uniform_weighted(g)
    assert np.all(w.weights == 1.0)
    assert w.self_mass is None
