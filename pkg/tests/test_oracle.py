import numpy as np
import pytest

from sgsevo.evaluation import AdversaryStrategy, outcome_probabilities, payoff_against, payoff_table
from sgsevo.game_model import GameInstance, Graph
from sgsevo.oracle import exact_payoff, mc_estimate, mc_target, simulate_once, validate
from sgsevo.strategy import Chromosome, PureStrategy, random_mixed_chromosome

from conftest import IDENTITY, UNIT, k2_chromosome, make_k2, small_games


def test_k2_flee_on_strong():
    g, ch = make_k2(), k2_chromosome()
    rng = np.random.default_rng(0)
    adv = AdversaryStrategy(1, 1)
    for _ in range(200):
        out = simulate_once(ch, g, adv, rng)
        assert out.terminal == "attack_interrupted"
        assert (out.defender_payoff, out.adversary_payoff) == (0.0, 0.0)


def test_patrolled_target_always_caught():
    g, ch = make_k2(gamma=0.4), k2_chromosome(psi=0.5, phi=0.5)
    rng = np.random.default_rng(1)
    for _ in range(200):
        out = simulate_once(ch, g, AdversaryStrategy(0, 0), rng)
        assert out.terminal == "caught" and out.adversary_payoff == UNIT.adv_caught


def _missed_sensor_game():
    g = GameInstance("miss", Graph(3, ((0, 1),)), (UNIT,) * 3, 1, 1, 1.0, IDENTITY)
    ch = Chromosome.from_strategies([(PureStrategy((0,), (2,), (0,)), 1.0)], np.zeros((3, 3)), np.ones((3, 3)))
    return g, ch


def test_missed_detection_weak_signal_success():
    g, ch = _missed_sensor_game()
    rng = np.random.default_rng(2)
    for _ in range(100):
        out = simulate_once(ch, g, AdversaryStrategy(2, 0), rng)
        assert out.terminal == "attack_successful"
        assert (out.defender_payoff, out.adversary_payoff) == (UNIT.def_attacked, UNIT.adv_success)
    mean_d, mean_a, se_d, se_a = mc_estimate(ch, g, AdversaryStrategy(2, 0), 1000, rng)
    assert (mean_d, mean_a, se_d, se_a) == (-1.0, 1.0, 0.0, 0.0)


def test_never_caught_when_fleeing(game8):
    ch = random_mixed_chromosome(game8, 3, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for _ in range(300):
        adv = AdversaryStrategy(int(rng.integers(0, 8)), int(rng.integers(0, 8)))
        out = simulate_once(ch, game8, adv, rng)
        if out.terminal == "caught":
            assert not all(adv.flees(o) for o in range(3))
        if out.terminal == "attack_interrupted":
            assert (out.defender_payoff, out.adversary_payoff) == (0.0, 0.0)


def test_k2_half_gamma_mc():
    g = make_k2(gamma=0.5)
    ch = k2_chromosome(psi=0.3, phi=0.6, move=0)
    rng = np.random.default_rng(5)
    for b in range(8):
        adv = AdversaryStrategy(1, b)
        ref = payoff_against(ch, g, adv)
        md, ma, sd, sa = mc_estimate(ch, g, adv, 10**6, rng)
        assert abs(md - ref[0]) <= 4 * sd + 1e-12
        assert abs(ma - ref[1]) <= 4 * sa + 1e-12


def test_stderr_shrinks():
    g = make_k2(gamma=0.5)
    ch = k2_chromosome(psi=0.3, phi=0.6, move=0)
    adv = AdversaryStrategy(1, 0)
    se1 = mc_estimate(ch, g, adv, 200_000, np.random.default_rng(6))[2]
    se2 = mc_estimate(ch, g, adv, 400_000, np.random.default_rng(7))[2]
    assert se1 / se2 == pytest.approx(np.sqrt(2), rel=0.05)


def test_k2_validate_all_strategies():
    g = make_k2(gamma=0.5)
    ch = k2_chromosome(psi=0.3, phi=0.6, move=0)
    rep = validate(ch, g, 100_000, np.random.default_rng(8))
    assert rep.passed and rep.comparisons == 16
    assert set(rep.to_dict()) == {"pass", "max_abs_z", "comparisons", "samples_per_comparison"}


def test_swapped_signals_fail():
    g = make_k2(gamma=0.3)
    ch = k2_chromosome(psi=0.1, phi=0.8, move=0)

    def swapped(c, game):
        return payoff_table(Chromosome(c.P, c.S, c.R, c.q, 1 - c.psi, 1 - c.phi), game)

    assert validate(ch, g, 100_000, np.random.default_rng(9)).passed
    assert not validate(ch, g, 100_000, np.random.default_rng(9), analytic=swapped).passed


def test_random_subset_on_larger_games(game20):
    ch = random_mixed_chromosome(game20, 3, np.random.default_rng(10))
    rep = validate(ch, game20, 20_000, np.random.default_rng(11))
    assert rep.comparisons >= 32 and rep.passed


def test_zero_samples(k2, k2_canonical):
    with pytest.raises(ValueError):
        validate(k2_canonical, k2, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        mc_estimate(k2_canonical, k2, AdversaryStrategy(0, 0), 0, np.random.default_rng(0))


def test_terminal_frequencies_chi_square(game8):
    ch = random_mixed_chromosome(game8, 4, np.random.default_rng(12))
    rng = np.random.default_rng(13)
    n = 10**6
    for t in (0, 3):
        adv = AdversaryStrategy(t, 2)
        est = mc_target(ch, game8, t, n, rng)
        probs = outcome_probabilities(ch, game8, adv)
        # caught / success / interrupted counts recovered from the shared-sample means
        u = game8.utilities[t]
        # mean_adv = p_succ * adv_success + p_caught * adv_caught, same for defender: solve 2x2
        a = np.array([[u.def_caught, u.def_attacked], [u.adv_caught, u.adv_success]])
        p_c, p_s = np.linalg.solve(a, est[2, :2])
        obs = np.array([p_c, p_s, 1 - p_c - p_s]) * n
        exp = np.array([probs["caught"], probs["attack_successful"], probs["attack_interrupted"]]) * n
        mask = exp > 0
        chi2 = (((obs - exp) ** 2)[mask] / exp[mask]).sum()
        assert chi2 < 13.82  # 2 dof, alpha = 0.001


def test_exact_enumeration_agrees(game8):
    ch = random_mixed_chromosome(game8, 5, np.random.default_rng(14))
    tab = payoff_table(ch, game8)
    for t in range(game8.num_vertices):
        for b in range(8):
            assert np.allclose(exact_payoff(ch, game8, AdversaryStrategy(t, b)), tab[t, b], atol=1e-9)


def test_seeded_reproducible(game8):
    ch = random_mixed_chromosome(game8, 2, np.random.default_rng(15))
    a = mc_estimate(ch, game8, AdversaryStrategy(1, 0), 5000, np.random.default_rng(3))
    b = mc_estimate(ch, game8, AdversaryStrategy(1, 0), 5000, np.random.default_rng(3))
    assert a == b
