"""Exact expected payoffs and the adversary's best response."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .game_model import GameInstance
from .strategy import Chromosome, PureStrategy, SignalingTable

OBSERVED = ("n", "s0", "s1")


@dataclass(frozen=True)
class AdversaryStrategy:
    """Target vertex plus a reaction scheme.

    ``scheme`` packs the reaction as three bits (n, s0, s1), most significant
    first; a set bit means flee. Scheme 0 always attacks, scheme 7 always
    flees, and scheme 1 flees only on an observed strong signal.
    """

    target: int
    scheme: int

    def __post_init__(self):
        if not 0 <= self.scheme < kernels.N_SCHEMES:
            raise ValueError(f"reaction scheme must be in 0..7, got {self.scheme}")
        if self.target < 0:
            raise ValueError("target must be a vertex id")

    @property
    def reaction(self) -> dict[str, str]:
        return {o: ("flee" if kernels.scheme_flees(self.scheme, i) else "attack") for i, o in enumerate(OBSERVED)}

    def flees(self, observed: int) -> bool:
        return kernels.scheme_flees(self.scheme, observed)

    @classmethod
    def from_reaction(cls, target: int, reaction: dict[str, str]) -> "AdversaryStrategy":
        scheme = 0
        for i, o in enumerate(OBSERVED):
            act = reaction[o]
            if act not in ("attack", "flee"):
                raise ValueError(f"reaction to {o} must be 'attack' or 'flee', got {act!r}")
            if act == "flee":
                scheme |= 1 << (2 - i)
        return cls(target, scheme)


@dataclass(frozen=True)
class EvalReport:
    defender_payoff: float
    adversary_payoff: float
    best_response: AdversaryStrategy

    def to_dict(self) -> dict:
        return {
            "defender_payoff": self.defender_payoff,
            "adversary_payoff": self.adversary_payoff,
            "target": self.best_response.target,
            "reaction": self.best_response.reaction,
        }


@dataclass(frozen=True)
class MarginalTable:
    p_pat: np.ndarray      # (N,)
    x: np.ndarray          # (3, N) sensor-state marginals, rows s_bar, s_plus, s_minus
    p_realloc: np.ndarray  # (N,) uncovered but visited in the reaction stage


def _game_args(game: GameInstance):
    return game.graph.adjacency_matrix, game.gamma, game.pi_array, game.utility_array


def outcome_mass(ch: Chromosome, game: GameInstance) -> np.ndarray:
    adj, gamma, _, _ = _game_args(game)
    return kernels.outcome_mass(ch.P, ch.S, ch.R, ch.q, ch.psi, ch.phi, adj, gamma)


def payoff_table(ch: Chromosome, game: GameInstance) -> np.ndarray:
    """(N, 8, 2) expected (defender, adversary) payoffs for every adversary pure strategy."""
    _, _, pi, util = _game_args(game)
    return kernels.scheme_table(outcome_mass(ch, game), pi, util)


def payoff_against(ch: Chromosome, game: GameInstance, adv: AdversaryStrategy) -> tuple[float, float]:
    if adv.target >= game.num_vertices:
        raise ValueError(f"target {adv.target} out of range")
    row = payoff_table(ch, game)[adv.target, adv.scheme]
    return float(row[0]), float(row[1])


def evaluate(ch: Chromosome, game: GameInstance) -> EvalReport:
    """Best response against ``ch``; caches fitness and the attacked vertex on the chromosome."""
    adj, gamma, pi, util = _game_args(game)
    d, a, t, b = kernels.evaluate_arrays(ch.P, ch.S, ch.R, ch.q, ch.psi, ch.phi, adj, gamma, pi, util)
    ch.fitness = float(d)
    ch.adversary_payoff = float(a)
    ch.adv_target = int(t)
    ch.adv_scheme = int(b)
    return EvalReport(float(d), float(a), AdversaryStrategy(int(t), int(b)))


best_response = evaluate


def ensure_evaluated(ch: Chromosome, game: GameInstance) -> float:
    if ch.fitness is None:
        evaluate(ch, game)
    return ch.fitness


def cached_report(ch: Chromosome) -> EvalReport:
    return EvalReport(ch.fitness, ch.adversary_payoff, AdversaryStrategy(ch.adv_target, ch.adv_scheme))


def strategy_utilities(ch: Chromosome, game: GameInstance) -> np.ndarray:
    """Defender payoff of each of the chromosome's pure strategies played alone (cached)."""
    if ch._utilities is None:
        adj, gamma, pi, util = _game_args(game)
        ch._utilities = kernels.strategy_utilities(ch.P, ch.S, ch.R, ch.psi, ch.phi, adj, gamma, pi, util)
    return ch._utilities


def pure_strategy_utility(e: PureStrategy, signaling: SignalingTable, game: GameInstance) -> float:
    ch = Chromosome.from_strategies([(e, 1.0)], signaling.psi, signaling.phi)
    return evaluate(ch, game).defender_payoff


def marginals(ch: Chromosome, game: GameInstance) -> MarginalTable:
    state, visit = kernels.classify_numpy(ch.P, ch.S, ch.R, game.graph.adjacency_matrix)
    w = ch.q[:, None]
    p_pat = (w * (state == kernels.PATROLLER)).sum(axis=0)
    x = np.stack([(w * (state == th)).sum(axis=0) for th in range(3)])
    p_realloc = (w * ((state == kernels.UNCOVERED) & visit)).sum(axis=0)
    return MarginalTable(p_pat, x, p_realloc)


def signal_probabilities(ch: Chromosome, game: GameInstance, v: int,
                         table: MarginalTable | None = None) -> tuple[float, float]:
    """Probabilities that the sensor at ``v`` sends the weak / strong signal."""
    m = marginals(ch, game) if table is None else table
    x = m.x[:, v]
    g = game.gamma
    psi = ch.psi[:, v]
    phi = ch.phi[:, v]
    p0 = g * float(np.dot(x, phi)) + (1 - g) * float(np.dot(x, psi))
    p1 = g * float(np.dot(x, 1 - phi)) + (1 - g) * float(np.dot(x, 1 - psi))
    return p0, p1


def outcome_probabilities(ch: Chromosome, game: GameInstance, adv: AdversaryStrategy) -> dict[str, float]:
    """Probabilities of the three playout terminals against ``adv``."""
    mass = outcome_mass(ch, game)[adv.target]
    obs = game.pi_array @ mass  # (observed, caught/success)
    out = {"caught": 0.0, "attack_successful": 0.0, "attack_interrupted": 0.0}
    for o in range(3):
        if adv.flees(o):
            out["attack_interrupted"] += float(obs[o].sum())
        else:
            out["caught"] += float(obs[o, kernels.CAUGHT])
            out["attack_successful"] += float(obs[o, kernels.SUCCESS])
    return out
