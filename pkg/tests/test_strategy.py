import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sgsevo.game_model import GameInstance, Graph
from sgsevo.strategy import (
    Chromosome, PureStrategy, StrategyFormatError, allocation_state, chromosome_to_dict, chromosome_violations,
    is_feasible, load_chromosome, random_chromosome, random_mixed_chromosome, random_pure_strategy, repair,
    repair_chromosome, save_chromosome,
)

from conftest import UNIT, make_k2, small_games


def game_on(graph, k, l):
    return GameInstance("t", graph, (UNIT,) * graph.num_vertices, k, l, 0.5, make_k2().pi)


K5 = Graph(5, tuple((i, j) for i in range(5) for j in range(i + 1, 5)))


def test_random_pure_k2(k2):
    rng = np.random.default_rng(0)
    for _ in range(50):
        e = random_pure_strategy(k2, rng)
        assert sorted(e.patrollers + e.sensors) == [0, 1]
        assert e.reallocation[0] in (0, 1)


def test_isolated_patroller_stays():
    g = game_on(Graph(3, ((1, 2),)), 1, 0)
    rng = np.random.default_rng(1)
    for _ in range(100):
        e = random_pure_strategy(g, rng)
        if e.patrollers == (0,):
            assert e.reallocation == (0,)


def test_random_pure_uniform_on_k5():
    g = game_on(K5, 1, 2)
    rng = np.random.default_rng(2)
    counts = np.zeros(5)
    for _ in range(10_000):
        counts[random_pure_strategy(g, rng).patrollers[0]] += 1
    assert np.all(np.abs(counts / 10_000 - 0.2) <= 0.02)
    chi2 = ((counts - 2000) ** 2 / 2000).sum()
    assert chi2 < 18.47  # 4 dof, alpha = 0.001


def test_random_chromosome_shape(game8):
    ch = random_chromosome(game8, np.random.default_rng(3))
    assert len(ch) == 1 and ch.q[0] == 1.0
    assert ch.psi.shape == ch.phi.shape == (3, game8.num_vertices)
    assert chromosome_violations(ch, game8) == []


def test_random_chromosome_signal_moments(game8):
    rng = np.random.default_rng(4)
    vals = np.concatenate([np.concatenate([c.psi.ravel(), c.phi.ravel()])
                           for c in (random_chromosome(game8, rng) for _ in range(10_000 // 48 + 1))])
    assert abs(vals.mean() - 0.5) < 0.01
    assert vals.min() >= 0 and vals.max() <= 1


def test_random_chromosome_passes_repair(game8):
    rng = np.random.default_rng(5)
    for _ in range(50):
        ch = random_chromosome(game8, rng)
        before = ch.copy()
        assert not repair_chromosome(ch, game8, rng)
        assert np.array_equal(before.P, ch.P) and np.array_equal(before.R, ch.R)


def test_repair_illegal_move():
    g = game_on(Graph(4, ((0, 1), (2, 3))), 1, 0)
    rng = np.random.default_rng(6)
    seen = set()
    for _ in range(200):
        out = repair(PureStrategy((0,), (), (3,)), g, rng)
        seen.add(out.reallocation[0])
    assert seen == {0, 1}


def test_repair_duplicate_sensor():
    g = game_on(Graph(3, ((0, 1),)), 1, 1)
    rng = np.random.default_rng(7)
    seen = set()
    for _ in range(100):
        out = repair(PureStrategy((2,), (2,), (2,)), g, rng)
        assert out.patrollers == (2,)
        seen.add(out.sensors[0])
    assert seen == {0, 1}


def test_repair_feasible_unchanged(game8):
    rng = np.random.default_rng(8)
    e = random_pure_strategy(game8, rng)
    assert repair(e, game8, rng) is e


@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_repair_always_feasible(seed, which):
    game = small_games(4, n=8)[which]
    rng = np.random.default_rng(seed)
    n, k, l = game.num_vertices, game.num_patrollers, game.num_sensors
    e = PureStrategy(tuple(rng.integers(0, n, k)), tuple(rng.integers(0, n, l)), tuple(rng.integers(0, n, k)))
    out = repair(e, game, rng)
    assert is_feasible(out, game)
    assert repair(out, game, rng) == out


def test_allocation_state_examples():
    g = game_on(Graph(2, ((0, 1),)), 1, 1)
    assert allocation_state(PureStrategy((0,), (1,), (1,)), g, 1) == "s_plus"
    assert allocation_state(PureStrategy((0,), (1,), (0,)), g, 1) == "s_minus"
    g3 = game_on(Graph(3, ((0, 1),)), 1, 1)
    e = PureStrategy((0,), (2,), (0,))
    assert allocation_state(e, g3, 2) == "s_bar"
    assert allocation_state(e, g3, 0) == "patroller"
    assert allocation_state(e, g3, 1) == "uncovered"


@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_allocation_state_partitions(seed, which):
    game = small_games(4, n=8)[which]
    e = random_pure_strategy(game, np.random.default_rng(seed))
    states = [allocation_state(e, game, v) for v in range(game.num_vertices)]
    assert states.count("patroller") == game.num_patrollers
    assert sum(s in ("s_plus", "s_minus", "s_bar") for s in states) == game.num_sensors
    adj = game.graph.adjacency
    for v, s in enumerate(states):
        if s == "s_plus":
            assert any(r == v and (p == v or v in adj[p]) for p, r in zip(e.patrollers, e.reallocation))


def test_json_round_trip_exact(game8):
    ch = random_mixed_chromosome(game8, 4, np.random.default_rng(9))
    raw = save_chromosome(ch)
    back = load_chromosome(raw, game8)
    for a in ("P", "S", "R", "q", "psi", "phi"):
        assert np.array_equal(getattr(ch, a), getattr(back, a))
    assert save_chromosome(back) == raw
    assert list(json.loads(raw)) == ["strategies", "psi", "phi"]


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.pop("psi"), "psi"),
    (lambda d: d["strategies"][0].__setitem__("prob", 1.5), "prob"),
    (lambda d: d["strategies"][0].__setitem__("sensors", []), "strategies"),
    (lambda d: d.__setitem__("phi", [[0.1]]), "phi"),
    (lambda d: d["strategies"][0].__setitem__("patrollers", [99]), "strategies"),
])
def test_json_errors(k2, k2_canonical, mutate, field):
    d = chromosome_to_dict(k2_canonical)
    mutate(d)
    with pytest.raises(StrategyFormatError, match=field):
        load_chromosome(json.dumps(d), k2)


def test_json_probability_sum(k2):
    e = {"patrollers": [0], "sensors": [1], "reallocation": [1], "prob": 0.6}
    d = {"strategies": [e, dict(e)], "psi": [[0, 0]] * 3, "phi": [[1, 1]] * 3}
    with pytest.raises(StrategyFormatError, match="sum"):
        load_chromosome(json.dumps(d), k2)


def test_violations_detected(k2):
    ch = Chromosome(np.array([[0]]), np.array([[0]]), np.array([[1]]), np.array([0.7]),
                    np.full((3, 2), 1.2), np.zeros((3, 2)))
    msgs = " ".join(chromosome_violations(ch, k2))
    assert "sum" in msgs and "psi" in msgs
    ch.q[:] = 1.0
    ch.psi[:] = 0.5
    assert "infeasible" in " ".join(chromosome_violations(ch, k2))
