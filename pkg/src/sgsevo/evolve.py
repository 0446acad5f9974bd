"""The evolutionary search over defender mixed strategies."""

from __future__ import annotations

import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .evaluation import ensure_evaluated, evaluate, strategy_utilities
from .game_model import GameInstance
from .strategy import Chromosome, random_chromosome

ABLATIONS = (
    "no_crossover",
    "no_mutation",
    "no_m1",
    "no_m2",
    "no_m3",
    "no_local_opt",
    "no_refresh",
    "no_crossover_removal",
    "legacy_crossover",
)

STAGNATION_TOL = 1e-9

# stream phases
_INIT, _PAIRING, _CROSS, _MUT_PICK, _MUT, _SELECT, _REFRESH, _REFRESH_NEW = range(8)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvolveParams:
    n_pop: int = 200
    n_gen: int = 2000
    n_ref: int = 300
    p_c: float = 0.5
    p_m: float = 0.8
    p_sp: float = 0.8
    m_limit: int = 10
    n_e: int = 2
    ablation: frozenset = field(default_factory=frozenset)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ablation", frozenset(self.ablation))

    def validate(self) -> "EvolveParams":
        for name in ("n_pop", "n_gen", "n_ref", "m_limit", "n_e", "seed"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ConfigError(f"{name}: expected an integer, got {v!r}")
        if self.n_pop < 2:
            raise ConfigError("n_pop must be at least 2")
        if self.n_gen < 0 or self.n_ref < 1 or self.m_limit < 1:
            raise ConfigError("n_gen must be >= 0, n_ref and m_limit >= 1")
        if not 0 <= self.n_e < self.n_pop:
            raise ConfigError("n_e must satisfy 0 <= n_e < n_pop")
        for name in ("p_c", "p_m"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.5 <= self.p_sp <= 1.0:
            raise ConfigError("p_sp must lie in [0.5, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer")
        unknown = sorted(set(self.ablation) - set(ABLATIONS))
        if unknown:
            raise ConfigError(f"unknown ablation switch(es) {unknown}; valid: {', '.join(ABLATIONS)}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablation"] = sorted(self.ablation)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "EvolveParams":
        if not isinstance(data, dict):
            raise ConfigError("params: expected a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"params: unknown field(s) {sorted(unknown)}")
        data = dict(data)
        if "ablation" in data:
            ab = data["ablation"]
            if not isinstance(ab, list) or not all(isinstance(s, str) for s in ab):
                raise ConfigError("ablation: expected a list of switch names")
            data["ablation"] = frozenset(ab)
        return cls(**data).validate()


class GenerationRecord(NamedTuple):
    generation: int
    best_fitness: float
    mean_fitness: float
    mean_strategy_count: float
    wall_time_ms: int
    refreshed: bool


@dataclass
class SolveResult:
    best: Chromosome
    best_fitness: float
    history: list[GenerationRecord]
    generations_to_best: int
    wall_time_ms: int
    params: EvolveParams


def stream(seed: int, generation: int, phase: int, index: int = 0) -> np.random.Generator:
    """Independent random stream for one (generation, phase, individual)."""
    return np.random.default_rng([seed, generation, phase, index])


def enabled_ops(ablation) -> np.ndarray:
    if "no_mutation" in ablation:
        return np.empty(0, dtype=np.int64)
    ops = [op for op, sw in ((kernels.OP_M1, "no_m1"), (kernels.OP_M2, "no_m2"), (kernels.OP_M3, "no_m3"))
           if sw not in ablation]
    return np.array(ops, dtype=np.int64)


def _game_arrays(game):
    ptr, idx = game.graph.csr
    return game.graph.adjacency_matrix, ptr, idx, game.gamma, game.pi_array, game.utility_array


# --------------------------------------------------------------------------
# population


def _fresh(game, rng):
    ch = random_chromosome(game, rng)
    evaluate(ch, game)
    return ch


def init_population(game: GameInstance, params: EvolveParams, executor=None) -> list[Chromosome]:
    mapper = executor.map if executor is not None else map
    return list(mapper(lambda i: _fresh(game, stream(params.seed, 0, _INIT, i)), range(params.n_pop)))


# --------------------------------------------------------------------------
# crossover


def _normalized_utilities(u: np.ndarray) -> np.ndarray:
    lo, hi = float(u.min()), float(u.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return np.zeros_like(u)
    return 2.0 * (u - lo) / (hi - lo) - 1.0


def _legacy_merge(a: Chromosome, b: Chromosome):
    merged: dict[bytes, int] = {}
    rows_p, rows_s, rows_r, probs = [], [], [], []
    for ch in (a, b):
        for i in range(len(ch)):
            key = ch.P[i].tobytes() + b"|" + ch.S[i].tobytes() + b"|" + ch.R[i].tobytes()
            if key in merged:
                probs[merged[key]] += ch.q[i] / 2
                continue
            merged[key] = len(probs)
            rows_p.append(ch.P[i])
            rows_s.append(ch.S[i])
            rows_r.append(ch.R[i])
            probs.append(ch.q[i] / 2)
    k, l = a.P.shape[1], a.S.shape[1]
    return (np.array(rows_p, dtype=np.int64).reshape(-1, k), np.array(rows_s, dtype=np.int64).reshape(-1, l),
            np.array(rows_r, dtype=np.int64).reshape(-1, k), np.array(probs))


def crossover(a: Chromosome, b: Chromosome, game: GameInstance, rng: np.random.Generator,
              prune: bool = True, legacy: bool = False) -> Chromosome:
    """Child holding both parents' pure strategies, reweighted by normalised utility, then pruned."""
    if legacy:
        P, S, R, w = _legacy_merge(a, b)
    else:
        u = np.concatenate([strategy_utilities(a, game), strategy_utilities(b, game)])
        w = np.exp2(_normalized_utilities(u)) * np.concatenate([a.q, b.q])
        P = np.concatenate([a.P, b.P])
        S = np.concatenate([a.S, b.S])
        R = np.concatenate([a.R, b.R])
    q = w / w.sum()
    if prune:
        keep = rng.random(q.shape[0]) >= (1.0 - q) ** 2
        if not keep.any():
            keep[int(np.argmax(q))] = True
        P, S, R, q = P[keep], S[keep], R[keep], q[keep]
        q = q / q.sum()
    return Chromosome(P, S, R, q, (a.psi + b.psi) / 2, (a.phi + b.phi) / 2)


# --------------------------------------------------------------------------
# mutation


def _adopt(ch: Chromosome, changed: bool) -> Chromosome:
    if changed:
        ch.invalidate()
    return ch


def mutate_m1(ch: Chromosome, rng: np.random.Generator) -> Chromosome:
    out = ch.copy()
    return _adopt(out, kernels.m1_probability(out.q, rng))


def mutate_m2_alloc(ch: Chromosome, game: GameInstance, rng: np.random.Generator,
                    local_opt: bool = True) -> Chromosome:
    out = ch.copy()
    adj, ptr, idx = game.graph.adjacency_matrix, *game.graph.csr
    return _adopt(out, kernels.m2_allocation(out.P, out.S, out.R, adj, ptr, idx, local_opt, rng))


def mutate_m2_signal(ch: Chromosome, rng: np.random.Generator) -> Chromosome:
    out = ch.copy()
    return _adopt(out, kernels.m2_signal(out.psi, out.phi, rng))


def mutate_m3(ch: Chromosome, game: GameInstance, rng: np.random.Generator,
              local_opt: bool = True) -> Chromosome:
    """Cover the vertex the adversary attacked at the last evaluation; no-op if all strategies cover it."""
    ensure_evaluated(ch, game)
    out = ch.copy()
    adj, ptr, idx = game.graph.adjacency_matrix, *game.graph.csr
    changed = kernels.m3_coverage(out.P, out.S, out.R, ch.adv_target, adj, ptr, idx, local_opt, rng)
    return _adopt(out, changed)


def mutate_counted(ch: Chromosome, game: GameInstance, params: EvolveParams,
                   rng: np.random.Generator) -> tuple[Chromosome, int]:
    """Mutation with retries; returns the result and the number of attempts used."""
    ops = enabled_ops(params.ablation)
    if ops.size == 0:
        return ch, 0
    ensure_evaluated(ch, game)
    adj, ptr, idx, gamma, pi, util = _game_arrays(game)
    res = kernels.mutate_kernel(ch.P, ch.S, ch.R, ch.q, ch.psi, ch.phi, ch.fitness, ch.adv_target, ops,
                                params.m_limit, "no_local_opt" not in params.ablation,
                                adj, ptr, idx, gamma, pi, util, rng)
    out = Chromosome(*res[:6])
    out.fitness = float(res[6])
    out.adversary_payoff = float(res[7])
    out.adv_target = int(res[8])
    out.adv_scheme = int(res[9])
    return out, int(res[10])


def mutate(ch: Chromosome, game: GameInstance, params: EvolveParams, rng: np.random.Generator) -> Chromosome:
    return mutate_counted(ch, game, params, rng)[0]


# --------------------------------------------------------------------------
# selection and refresh


def select(pool: list[Chromosome], params: EvolveParams, rng: np.random.Generator) -> list[Chromosome]:
    """Elites first, then binary tournaments with replacement over the whole pool."""
    if len(pool) < params.n_pop:
        raise ValueError("selection pool smaller than the population size")
    fits = np.array([c.fitness for c in pool])
    order = np.argsort(-fits, kind="stable")
    out = [pool[i] for i in order[:params.n_e]]
    m = params.n_pop - params.n_e
    draws = rng.integers(0, len(pool), size=(m, 2))
    coins = rng.random(m)
    for (i, j), u in zip(draws, coins):
        better, worse = (i, j) if fits[i] >= fits[j] else (j, i)
        out.append(pool[better] if u < params.p_sp else pool[worse])
    return out


def refresh(population: list[Chromosome], game: GameInstance, params: EvolveParams, generation: int,
            executor=None) -> list[Chromosome]:
    """Replace half the population, never the current best, with fresh random individuals."""
    n = len(population)
    fits = np.array([c.fitness for c in population])
    best = int(np.argmax(fits))
    others = np.array([i for i in range(n) if i != best])
    rng = stream(params.seed, generation, _REFRESH)
    chosen = np.sort(rng.choice(others, size=n // 2, replace=False))
    mapper = executor.map if executor is not None else map
    fresh = list(mapper(lambda j: _fresh(game, stream(params.seed, generation, _REFRESH_NEW, j)),
                        range(len(chosen))))
    out = list(population)
    for i, ch in zip(chosen, fresh):
        out[i] = ch
    return out


# --------------------------------------------------------------------------
# main loop


def run(game: GameInstance, params: EvolveParams, threads: int = 1,
        callback: Callable[[int, list, list], None] | None = None) -> SolveResult:
    """Evolve for ``params.n_gen`` generations; result bytes do not depend on ``threads``.

    ``callback(generation, population, offspring)`` is invoked after selection.
    """
    params.validate()
    if threads == 0:
        threads = os.cpu_count() or 1
    executor = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        return _run(game, params, executor, callback)
    finally:
        if executor is not None:
            executor.shutdown()


def _run(game, params, executor, callback):
    t0 = time.perf_counter()
    mapper = executor.map if executor is not None else map
    ab = params.ablation
    seed = params.seed
    do_cross = "no_crossover" not in ab
    prune = "no_crossover_removal" not in ab
    legacy = "legacy_crossover" in ab
    do_mut = enabled_ops(ab).size > 0
    do_refresh = "no_refresh" not in ab

    pop = init_population(game, params, executor)
    best = max(pop, key=lambda c: c.fitness)
    best_fit = best.fitness
    gen_best = 0
    stagnant = 0
    history = []

    def make_child(job):
        j, a, b = job
        rng = stream(seed, g, _CROSS, j)
        child = crossover(pop[a], pop[b], game, rng, prune=prune, legacy=legacy)
        # rows are copied from parents, which are already repaired when local_opt is on
        evaluate(child, game)
        return child

    def make_mutant(i):
        return mutate(pop[i], game, params, stream(seed, g, _MUT, i))

    for g in range(1, params.n_gen + 1):
        offspring = []
        if do_cross:
            prng = stream(seed, g, _PAIRING)
            sel = np.nonzero(prng.random(params.n_pop) < params.p_c)[0]
            sel = prng.permutation(sel)
            if sel.size % 2:
                sel = np.delete(sel, prng.integers(0, sel.size))
            jobs = [(j, int(a), int(b)) for j, (a, b) in enumerate(sel.reshape(-1, 2))]
            offspring.extend(mapper(make_child, jobs))
        if do_mut:
            mrng = stream(seed, g, _MUT_PICK)
            picked = np.nonzero(mrng.random(params.n_pop) < params.p_m)[0]
            offspring.extend(mapper(make_mutant, picked.tolist()))

        pop = select(pop + offspring, params, stream(seed, g, _SELECT))
        if callback is not None:
            callback(g, pop, offspring)

        cur = max(pop, key=lambda c: c.fitness)
        if cur.fitness > best_fit + STAGNATION_TOL:
            best, best_fit, gen_best = cur, cur.fitness, g
            stagnant = 0
        else:
            stagnant += 1
        refreshed = False
        if do_refresh and stagnant >= params.n_ref:
            pop = refresh(pop, game, params, g, executor)
            stagnant = 0
            refreshed = True

        fits = np.fromiter((c.fitness for c in pop), dtype=np.float64, count=len(pop))
        history.append(GenerationRecord(
            g, best_fit, float(fits.mean()), float(np.mean([len(c) for c in pop])),
            int((time.perf_counter() - t0) * 1000), refreshed))

    return SolveResult(best, best_fit, history, gen_best, int((time.perf_counter() - t0) * 1000), params)


HISTORY_HEADER = "generation,best_fitness,mean_fitness,mean_strategy_count,wall_time_ms,refreshed"


def history_csv(history: list[GenerationRecord]) -> str:
    buf = io.StringIO()
    buf.write(HISTORY_HEADER + "\n")
    for r in history:
        buf.write(f"{r.generation},{r.best_fitness!r},{r.mean_fitness!r},{r.mean_strategy_count!r},"
                  f"{r.wall_time_ms},{int(r.refreshed)}\n")
    return buf.getvalue()
