import math

import numpy as np
import pytest

from dscom import AttributedGraph, ParameterError, ValidationError, random_attributed_graph
from dscom.diffusion import (
    DiffusionModel,
    PICParams,
    edge_probability,
    load_model,
    make_model,
    save_model,
)


def test_ic_probability_range():
    g = AttributedGraph(2, [(0, 1)], np.zeros((2, 1)))
    model = make_model("IC", g, rng_seed=0, calibration=0.5)
    p = edge_probability(model, 0, 1)
    assert 0.0 <= p <= 1.0


def test_ic_uniform_mean_tracks_calibration():
    g = random_attributed_graph(60, 8.0, 2, rng_seed=2)
    model = make_model("IC", g, rng_seed=3, calibration=0.2)
    assert abs(model.edge_prob.mean() - 0.2) < 0.03
    assert model.edge_prob.max() <= 0.4 + 1e-12


def test_pic_hand_evaluated_probability():
    # d=1, F=1, W=[[1,1]], v=[1], a=1, b=0, X=0 rows: tanh(0)=0, sigmoid(0)=0.5
    g = AttributedGraph(2, [(0, 1)], np.zeros((2, 1)))
    params = PICParams(W=[[1.0, 1.0]], v=[1.0], a=1.0, b=0.0)
    model = DiffusionModel("PIC", g.edges, [0.5], 2, params=params)
    assert edge_probability(model, 0, 1, g.features) == pytest.approx(0.5)


def test_pic_zero_weight_matrix_gives_sigmoid_b():
    g = random_attributed_graph(10, 2.0, 3, rng_seed=4)
    params = PICParams(W=np.zeros((4, 6)), v=np.ones(4), a=1.0, b=0.7)
    want = 1.0 / (1.0 + math.exp(-0.7))
    probs = [
        edge_probability(
            DiffusionModel("PIC", g.edges, np.full(g.m, want), g.n, params=params),
            u, v, g.features,
        )
        for u, v in g.edges[:5]
    ]
    assert all(p == pytest.approx(want) for p in probs)


def test_pic_zero_scale_ignores_features():
    g = random_attributed_graph(10, 2.0, 3, rng_seed=5)
    params = PICParams(W=np.random.default_rng(0).standard_normal((4, 6)),
                       v=np.ones(4), a=0.0, b=-0.3)
    model = DiffusionModel("PIC", g.edges, np.zeros(g.m), g.n, params=params)
    want = 1.0 / (1.0 + math.exp(0.3))
    for u, v in g.edges[:5]:
        assert edge_probability(model, u, v, g.features) == pytest.approx(want)


def test_pic_calibration_hits_target_mean():
    g = random_attributed_graph(120, 9.0, 4, rng_seed=6)
    assert g.m >= 1000
    model = make_model("PIC", g, rng_seed=7, calibration=0.05)
    # independent recomputation through the public scorer
    probs = np.array([
        edge_probability(model, u, v, g.features) for u, v in g.edges
    ])
    assert 0.049 <= probs.mean() <= 0.051
    assert np.allclose(probs, model.edge_prob)


def test_pic_probabilities_strictly_inside_unit_interval():
    g = random_attributed_graph(50, 4.0, 3, rng_seed=8)
    model = make_model("PIC", g, rng_seed=9, calibration=0.1)
    assert model.edge_prob.min() > 0.0
    assert model.edge_prob.max() < 1.0


def test_pic_identical_feature_pairs_get_identical_probability():
    X = np.array([[1.0, -2.0], [0.5, 0.25], [1.0, -2.0], [0.5, 0.25]])
    g = AttributedGraph(4, [(0, 1), (2, 3)], X)
    model = make_model("PIC", g, rng_seed=10, calibration=0.3)
    p1 = edge_probability(model, 0, 1, X)
    p2 = edge_probability(model, 2, 3, X)
    assert p1 == pytest.approx(p2, rel=0, abs=0)


def test_lt_star_normalization():
    edges = [(1, 0), (2, 0), (3, 0), (4, 0)]
    g = AttributedGraph(5, edges, np.zeros((5, 1)))
    model = DiffusionModel("LT", g.edges,
                           np.array([0.5, 0.5, 0.5, 0.5]) / 2.0, 5)
    assert np.allclose(model.edge_prob, 0.25)
    # the constructor enforces the sum cap
    with pytest.raises(ParameterError):
        DiffusionModel("LT", g.edges, [0.5, 0.5, 0.5, 0.5], 5)


def test_lt_and_plt_incoming_sums_capped():
    g = random_attributed_graph(40, 6.0, 3, rng_seed=11)
    for kind, seed in (("LT", 12), ("PLT", 13)):
        model = make_model(kind, g, rng_seed=seed, calibration=0.4)
        sums = np.zeros(g.n)
        np.add.at(sums, g.edges[:, 1], model.edge_prob)
        assert sums.max() <= 1.0 + 1e-9


def test_plt_lookup_matches_stored_normalization():
    g = random_attributed_graph(30, 5.0, 3, rng_seed=14)
    model = make_model("PLT", g, rng_seed=15, calibration=0.4)
    for i, (u, v) in enumerate(g.edges[:10]):
        assert edge_probability(model, u, v) == pytest.approx(
            float(model.edge_prob[i]), rel=0, abs=0
        )


def test_parameter_validation():
    g = AttributedGraph(2, [(0, 1)], np.zeros((2, 1)))
    with pytest.raises(ParameterError):
        make_model("IC", g, rng_seed=0, calibration=0.0)
    with pytest.raises(ParameterError):
        make_model("IC", g, rng_seed=0, calibration=1.0)
    with pytest.raises(ParameterError):
        make_model("bogus", g, rng_seed=0, calibration=0.5)
    model = make_model("PIC", g, rng_seed=0, calibration=0.5)
    with pytest.raises(ParameterError):
        edge_probability(model, 0, 1)  # PIC needs X


def test_non_edge_rejected():
    g = AttributedGraph(3, [(0, 1)], np.zeros((3, 1)))
    ic = make_model("IC", g, rng_seed=0, calibration=0.5)
    pic = make_model("PIC", g, rng_seed=0, calibration=0.5)
    with pytest.raises(ValidationError):
        edge_probability(ic, 1, 2)
    with pytest.raises(ValidationError):
        edge_probability(pic, 1, 2, g.features)


def test_serialization_roundtrip_bit_exact(tmp_path):
    g = random_attributed_graph(25, 4.0, 3, rng_seed=16)
    for kind in ("IC", "LT", "PIC", "PLT"):
        model = make_model(kind, g, rng_seed=17, calibration=0.2)
        p = tmp_path / f"{kind}.json"
        save_model(model, str(p))
        loaded = load_model(str(p))
        assert loaded.kind == model.kind
        assert np.array_equal(loaded.edges, model.edges)
        assert np.array_equal(loaded.edge_prob, model.edge_prob)
        if model.params is not None:
            assert np.array_equal(loaded.params.W, model.params.W)
            assert np.array_equal(loaded.params.v, model.params.v)
            assert loaded.params.a == model.params.a
            assert loaded.params.b == model.params.b


def test_make_model_deterministic():
    g = random_attributed_graph(30, 4.0, 3, rng_seed=18)
    a = make_model("PIC", g, rng_seed=19, calibration=0.15)
    b = make_model("PIC", g, rng_seed=19, calibration=0.15)
    assert np.array_equal(a.edge_prob, b.edge_prob)
    assert a.params.b == b.params.b
