"""Defender strategies: pure strategies, chromosomes (mixed strategy + signalling)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .game_model import GameInstance, neighbors

PROB_TOL = 1e-9

STATE_NAMES = {
    kernels.S_BAR: "s_bar",
    kernels.S_PLUS: "s_plus",
    kernels.S_MINUS: "s_minus",
    kernels.PATROLLER: "patroller",
    kernels.UNCOVERED: "uncovered",
}
SIGNAL_ROWS = ("s_bar", "s_plus", "s_minus")


class StrategyFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PureStrategy:
    patrollers: tuple[int, ...]
    sensors: tuple[int, ...]
    reallocation: tuple[int, ...]

    def __post_init__(self):
        for f in ("patrollers", "sensors", "reallocation"):
            object.__setattr__(self, f, tuple(int(v) for v in getattr(self, f)))
        if len(self.reallocation) != len(self.patrollers):
            raise ValueError("reallocation must pair one target with each patroller")


class SignalingTable(NamedTuple):
    psi: np.ndarray  # (3, N): P[sigma0 | detected, state]
    phi: np.ndarray  # (3, N): P[sigma0 | missed, state]


class Chromosome:
    """Mixed strategy as parallel arrays plus signalling tables and cached evaluation."""

    __slots__ = ("P", "S", "R", "q", "psi", "phi", "fitness", "adversary_payoff",
                 "adv_target", "adv_scheme", "_utilities")

    def __init__(self, P, S, R, q, psi, phi):
        self.P = np.ascontiguousarray(P, dtype=np.int64)
        self.S = np.ascontiguousarray(S, dtype=np.int64)
        self.R = np.ascontiguousarray(R, dtype=np.int64)
        self.q = np.ascontiguousarray(q, dtype=np.float64)
        self.psi = np.ascontiguousarray(psi, dtype=np.float64)
        self.phi = np.ascontiguousarray(phi, dtype=np.float64)
        self.fitness = None
        self.adversary_payoff = None
        self.adv_target = None
        self.adv_scheme = None
        self._utilities = None

    @classmethod
    def from_strategies(cls, pairs, psi, phi) -> "Chromosome":
        pairs = list(pairs)
        if not pairs:
            raise ValueError("a chromosome needs at least one pure strategy")
        k = len(pairs[0][0].patrollers)
        l = len(pairs[0][0].sensors)
        P = np.array([e.patrollers for e, _ in pairs], dtype=np.int64).reshape(len(pairs), k)
        S = np.array([e.sensors for e, _ in pairs], dtype=np.int64).reshape(len(pairs), l)
        R = np.array([e.reallocation for e, _ in pairs], dtype=np.int64).reshape(len(pairs), k)
        q = np.array([p for _, p in pairs], dtype=np.float64)
        return cls(P, S, R, q, psi, phi)

    def __len__(self):
        return self.q.shape[0]

    @property
    def strategies(self) -> list[tuple[PureStrategy, float]]:
        return [(self.pure(i), float(self.q[i])) for i in range(len(self))]

    @property
    def signaling(self) -> SignalingTable:
        return SignalingTable(self.psi, self.phi)

    def pure(self, i: int) -> PureStrategy:
        return PureStrategy(tuple(self.P[i]), tuple(self.S[i]), tuple(self.R[i]))

    def copy(self) -> "Chromosome":
        c = Chromosome(self.P.copy(), self.S.copy(), self.R.copy(), self.q.copy(),
                       self.psi.copy(), self.phi.copy())
        c.fitness = self.fitness
        c.adversary_payoff = self.adversary_payoff
        c.adv_target = self.adv_target
        c.adv_scheme = self.adv_scheme
        c._utilities = self._utilities
        return c

    def invalidate(self):
        self.fitness = None
        self.adversary_payoff = None
        self.adv_target = None
        self.adv_scheme = None
        self._utilities = None

    def __repr__(self):
        fit = "?" if self.fitness is None else f"{self.fitness:.4f}"
        return f"Chromosome(d={len(self)}, fitness={fit})"


def random_pure_strategy(game: GameInstance, rng: np.random.Generator) -> PureStrategy:
    p, s, r = _random_rows(game, rng)
    return PureStrategy(tuple(p), tuple(s), tuple(r))


def _random_rows(game, rng):
    k, l = game.num_patrollers, game.num_sensors
    picks = rng.choice(game.num_vertices, size=k + l, replace=False)
    p = picks[:k].astype(np.int64)
    s = picks[k:].astype(np.int64)
    adj = game.graph.adjacency
    r = np.array([_random_move(int(v), adj, rng) for v in p], dtype=np.int64)
    return p, s, r


def _random_move(p, adj, rng):
    # same draw as kernels.random_move, without the jit call overhead
    nb = sorted(adj[p])
    c = int(rng.integers(0, len(nb) + 1))
    return p if c == len(nb) else nb[c]


def random_chromosome(game: GameInstance, rng: np.random.Generator) -> Chromosome:
    """One random pure strategy with probability 1 and i.i.d. uniform signalling."""
    p, s, r = _random_rows(game, rng)
    n = game.num_vertices
    psi = rng.random((3, n))
    phi = rng.random((3, n))
    return Chromosome(p[None, :], s[None, :], r[None, :], np.ones(1), psi, phi)


def random_mixed_chromosome(game: GameInstance, support: int, rng: np.random.Generator) -> Chromosome:
    """``support`` random pure strategies with Dirichlet(1) probabilities."""
    if support < 1:
        raise ValueError("support must be positive")
    rows = [_random_rows(game, rng) for _ in range(support)]
    n = game.num_vertices
    q = rng.dirichlet(np.ones(support))
    q = np.maximum(q, 1e-12)
    q /= q.sum()
    psi = rng.random((3, n))
    phi = rng.random((3, n))
    return Chromosome(np.stack([r[0] for r in rows]), np.stack([r[1] for r in rows]),
                      np.stack([r[2] for r in rows]), q, psi, phi)


def repair(strategy: PureStrategy, game: GameInstance, rng: np.random.Generator) -> PureStrategy:
    p = np.array(strategy.patrollers, dtype=np.int64)
    s = np.array(strategy.sensors, dtype=np.int64)
    r = np.array(strategy.reallocation, dtype=np.int64)
    n = game.num_vertices
    if len(p) != game.num_patrollers or len(s) != game.num_sensors:
        raise ValueError("allocation lists do not match the game's resource counts")
    if np.any((p < 0) | (p >= n)) or np.any((s < 0) | (s >= n)) or np.any((r < 0) | (r >= n)):
        raise ValueError("vertex id out of range")
    ptr, idx = game.graph.csr
    if not kernels.repair_row(p, s, r, game.graph.adjacency_matrix, ptr, idx, rng):
        return strategy
    return PureStrategy(tuple(p), tuple(s), tuple(r))


def repair_chromosome(ch: Chromosome, game: GameInstance, rng: np.random.Generator) -> bool:
    """Repair every pure strategy in place; returns True if anything changed."""
    ptr, idx = game.graph.csr
    adj = game.graph.adjacency_matrix
    changed = False
    for i in range(len(ch)):
        if kernels.repair_row(ch.P[i], ch.S[i], ch.R[i], adj, ptr, idx, rng):
            changed = True
    if changed:
        ch.invalidate()
    return changed


def allocation_state(strategy: PureStrategy, game: GameInstance, v: int) -> str:
    """One of 'patroller', 's_plus', 's_minus', 's_bar', 'uncovered'."""
    if v in strategy.patrollers:
        return "patroller"
    if v not in strategy.sensors:
        return "uncovered"
    if v in strategy.reallocation:
        return "s_plus"
    nb = neighbors(game.graph, v)
    if any(p in nb for p in strategy.patrollers):
        return "s_minus"
    return "s_bar"


def is_feasible(strategy: PureStrategy, game: GameInstance) -> bool:
    k, l = game.num_patrollers, game.num_sensors
    if len(strategy.patrollers) != k or len(strategy.sensors) != l or len(strategy.reallocation) != k:
        return False
    alloc = strategy.patrollers + strategy.sensors
    if any(not 0 <= v < game.num_vertices for v in alloc + strategy.reallocation):
        return False
    if len(set(alloc)) != len(alloc):
        return False
    adj = game.graph.adjacency
    return all(r == p or r in adj[p] for p, r in zip(strategy.patrollers, strategy.reallocation))


def chromosome_violations(ch: Chromosome, game: GameInstance) -> list[str]:
    """Human-readable list of broken invariants (empty when the chromosome is valid)."""
    out = []
    d = len(ch)
    n = game.num_vertices
    if d == 0:
        out.append("no pure strategies")
    if ch.P.shape != (d, game.num_patrollers) or ch.R.shape != (d, game.num_patrollers):
        out.append(f"patroller arrays have shape {ch.P.shape}/{ch.R.shape}")
    if ch.S.shape != (d, game.num_sensors):
        out.append(f"sensor array has shape {ch.S.shape}")
    if abs(ch.q.sum() - 1.0) > PROB_TOL:
        out.append(f"probabilities sum to {ch.q.sum()!r}")
    if np.any(ch.q <= 0.0) or np.any(ch.q > 1.0):
        out.append("probability outside (0, 1]")
    for name, tab in (("psi", ch.psi), ("phi", ch.phi)):
        if tab.shape != (3, n):
            out.append(f"{name} has shape {tab.shape}")
        elif np.any(tab < 0.0) or np.any(tab > 1.0) or np.any(np.isnan(tab)):
            out.append(f"{name} entry outside [0, 1]")
    if not out:
        adj = game.graph.adjacency_matrix
        for i in range(d):
            if not kernels.row_feasible(ch.P[i], ch.S[i], ch.R[i], adj):
                out.append(f"pure strategy {i} infeasible: {ch.pure(i)}")
    return out


# --------------------------------------------------------------------------
# JSON


def chromosome_to_dict(ch: Chromosome) -> dict:
    return {
        "strategies": [
            {
                "patrollers": [int(v) for v in ch.P[i]],
                "sensors": [int(v) for v in ch.S[i]],
                "reallocation": [int(v) for v in ch.R[i]],
                "prob": float(ch.q[i]),
            }
            for i in range(len(ch))
        ],
        "psi": ch.psi.tolist(),
        "phi": ch.phi.tolist(),
    }


def save_chromosome(ch: Chromosome) -> bytes:
    return (json.dumps(chromosome_to_dict(ch), indent=1) + "\n").encode("utf-8")


def _int_list(value, where):
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise StrategyFormatError(f"{where}: expected a list of integers")
    return value


def chromosome_from_dict(data, game: GameInstance) -> Chromosome:
    if not isinstance(data, dict):
        raise StrategyFormatError("strategy: top-level value must be an object")
    for key in ("strategies", "psi", "phi"):
        if key not in data:
            raise StrategyFormatError(f"{key}: missing field")
    entries = data["strategies"]
    if not isinstance(entries, list) or not entries:
        raise StrategyFormatError("strategies: expected a non-empty list")
    n, k, l = game.num_vertices, game.num_patrollers, game.num_sensors
    pairs = []
    for i, ent in enumerate(entries):
        if not isinstance(ent, dict):
            raise StrategyFormatError(f"strategies[{i}]: expected an object")
        for key in ("patrollers", "sensors", "reallocation", "prob"):
            if key not in ent:
                raise StrategyFormatError(f"strategies[{i}].{key}: missing field")
        p = _int_list(ent["patrollers"], f"strategies[{i}].patrollers")
        s = _int_list(ent["sensors"], f"strategies[{i}].sensors")
        r = _int_list(ent["reallocation"], f"strategies[{i}].reallocation")
        if len(p) != k or len(r) != k or len(s) != l:
            raise StrategyFormatError(f"strategies[{i}]: list lengths do not match k={k}, l={l}")
        if any(not 0 <= v < n for v in p + s + r):
            raise StrategyFormatError(f"strategies[{i}]: vertex id out of range")
        prob = ent["prob"]
        if not isinstance(prob, (int, float)) or isinstance(prob, bool) or not 0.0 < prob <= 1.0:
            raise StrategyFormatError(f"strategies[{i}].prob: expected a number in (0, 1]")
        pairs.append((PureStrategy(p, s, r), float(prob)))
    tables = []
    for key in ("psi", "phi"):
        try:
            tab = np.array(data[key], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise StrategyFormatError(f"{key}: not a numeric matrix") from exc
        if tab.shape != (3, n):
            raise StrategyFormatError(f"{key}: expected shape (3, {n}), got {tab.shape}")
        if np.any(np.isnan(tab)) or np.any(tab < 0) or np.any(tab > 1):
            raise StrategyFormatError(f"{key}: entries must lie in [0, 1]")
        tables.append(tab)
    total = sum(p for _, p in pairs)
    if abs(total - 1.0) > PROB_TOL:
        raise StrategyFormatError(f"strategies: probabilities sum to {total}, expected 1")
    return Chromosome.from_strategies(pairs, tables[0], tables[1])


def load_chromosome(data: bytes | str, game: GameInstance) -> Chromosome:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise StrategyFormatError(f"strategy: invalid JSON ({exc})") from exc
    return chromosome_from_dict(obj, game)
