import numpy as np
import pytest
from hypothesis import settings

from sgsevo.bench_gen import SuiteConfig, gen_suite
from sgsevo.game_model import GameInstance, Graph, TargetUtility
from sgsevo.strategy import Chromosome, PureStrategy

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

IDENTITY = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
UNIT = TargetUtility(def_caught=1.0, def_attacked=-1.0, adv_success=1.0, adv_caught=-1.0)


def make_k2(gamma=0.0, pi=IDENTITY):
    return GameInstance(name="k2", graph=Graph(2, ((0, 1),)), utilities=(UNIT, UNIT),
                        num_patrollers=1, num_sensors=1, gamma=gamma, pi=pi)


def k2_chromosome(psi=0.0, phi=1.0, move=1):
    """Patroller on 0 moving to ``move``, sensor on 1."""
    e = PureStrategy((0,), (1,), (move,))
    return Chromosome.from_strategies([(e, 1.0)], np.full((3, 2), psi), np.full((3, 2), phi))


@pytest.fixture
def k2():
    return make_k2()


@pytest.fixture
def k2_canonical():
    return k2_chromosome()


def small_games(count=4, n=8, seed=0):
    """Games from several families, all with ``n`` vertices."""
    fams = ["sparse", "moderate", "dense", "erdos_renyi"]
    out = []
    for i in range(count):
        games, _ = gen_suite(SuiteConfig(fams[i % len(fams)], seed=seed + i, n=n, games_per_setting=1))
        out.append(games[0][1])
    return out


@pytest.fixture(scope="session")
def game20():
    games, _ = gen_suite(SuiteConfig("moderate", seed=5, n=20, games_per_setting=1))
    return games[0][1]


@pytest.fixture(scope="session")
def game8():
    return small_games(1, n=8, seed=3)[0]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import SUMMARY
    except ImportError:
        return
    if SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in sorted(SUMMARY):
            terminalreporter.write_line(line)
