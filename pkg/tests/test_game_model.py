import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sgsevo.game_model import (
    GameFormatError, GameInstance, Graph, TargetUtility, build_uncertainty_matrix, game_to_dict,
    load_game, neighbors, save_game,
)

from conftest import IDENTITY, UNIT, make_k2


def test_uncertainty_identity_at_zero():
    assert build_uncertainty_matrix(0.0) == IDENTITY


def test_uncertainty_full():
    assert np.array_equal(np.array(build_uncertainty_matrix(1.0)), [[1, 1, 0.5], [0, 0, 0.5], [0, 0, 0]])


def test_uncertainty_half():
    assert np.array_equal(np.array(build_uncertainty_matrix(0.5)),
                          [[1, 0.5, 0.25], [0, 0.5, 0.25], [0, 0, 0.5]])


@pytest.mark.parametrize("kappa", [-0.1, 1.5, float("nan")])
def test_uncertainty_domain(kappa):
    with pytest.raises(ValueError):
        build_uncertainty_matrix(kappa)


@given(st.floats(0.0, 1.0))
def test_uncertainty_columns_sum_to_one(kappa):
    m = np.array(build_uncertainty_matrix(kappa))
    assert np.all(m >= 0) and np.all(m <= 1)
    assert np.allclose(m.sum(axis=0), 1.0, atol=1e-15)


def test_neighbors_examples():
    path = Graph(3, ((0, 1), (1, 2)))
    assert neighbors(path, 1) == {0, 2}
    assert neighbors(Graph(3, ((0, 1),)), 2) == frozenset()
    k4 = Graph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))
    assert neighbors(k4, 0) == {1, 2, 3}


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 1), (1, 0)), ((0, 5),)])
def test_graph_rejects_bad_edges(edges):
    with pytest.raises(GameFormatError):
        Graph(3, edges)


@given(st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))))
def test_neighbors_symmetric(data):
    n, pairs = data
    edges = {(min(a, b), max(a, b)) for a, b in pairs if a != b}
    g = Graph(n, tuple(sorted(edges)))
    for v in range(n):
        assert v not in neighbors(g, v)
        for u in neighbors(g, v):
            assert v in neighbors(g, u)
    assert sum(len(neighbors(g, v)) for v in range(n)) == 2 * len(edges)


def test_minimal_game_round_trip_bytes():
    g = make_k2(gamma=0.25, pi=build_uncertainty_matrix(0.3))
    raw = save_game(g)
    back = load_game(raw)
    assert back == g
    assert save_game(back) == raw
    assert list(json.loads(raw)) == ["name", "num_vertices", "edges", "num_patrollers", "num_sensors",
                                     "gamma", "pi", "utilities"]


def test_too_many_resources():
    d = game_to_dict(make_k2())
    d["num_sensors"] = 2
    with pytest.raises(GameFormatError, match="num_sensors|num_patrollers"):
        load_game(json.dumps(d))


def test_pi_column_sum():
    d = game_to_dict(make_k2())
    d["pi"] = [[0.9, 0, 0], [0, 1, 0], [0, 0, 1]]
    with pytest.raises(GameFormatError, match="pi"):
        load_game(json.dumps(d))


@pytest.mark.parametrize("field, value", [
    ("gamma", 1.5), ("num_patrollers", 0), ("edges", [[0, 2]]), ("name", 3),
])
def test_invalid_fields_named(field, value):
    d = game_to_dict(make_k2())
    d[field] = value
    with pytest.raises(GameFormatError, match=field):
        load_game(json.dumps(d))


def test_utility_sign_violation():
    d = game_to_dict(make_k2())
    d["utilities"][1]["adv_caught"] = 2.0
    with pytest.raises(GameFormatError, match="adv_caught"):
        load_game(json.dumps(d))


def test_missing_field():
    d = game_to_dict(make_k2())
    del d["utilities"]
    with pytest.raises(GameFormatError, match="utilities"):
        load_game(json.dumps(d))


def test_not_json():
    with pytest.raises(GameFormatError):
        load_game(b"{oops")


utility = st.builds(TargetUtility, st.floats(0.01, 500), st.floats(-500, -0.01),
                    st.floats(0.01, 500), st.floats(-500, -0.01))


@given(st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(utility, min_size=n, max_size=n), st.floats(0, 1), st.floats(0, 1))))
def test_round_trip_any_game(data):
    n, utils, gamma, kappa = data
    g = GameInstance("g", Graph(n, tuple((i, i + 1) for i in range(n - 1))), tuple(utils), 1, n - 1,
                     gamma, build_uncertainty_matrix(kappa))
    once = load_game(save_game(g))
    assert save_game(once) == save_game(g)
    assert once.graph == g.graph and once.num_sensors == g.num_sensors
    # values survive up to 12 significant digits
    assert np.allclose(once.utility_array, g.utility_array, rtol=1e-11, atol=0)


def test_unit_fixture_sane():
    assert UNIT.def_caught > 0 > UNIT.def_attacked
