"""Benchmark game generation: graph families, resources, utilities, uncertainty."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game_model import GameInstance, Graph, TargetUtility, build_uncertainty_matrix, round_sig, save_game

FAMILIES = ("sparse", "moderate", "dense", "locally_dense", "erdos_renyi")
WS_FAMILIES = ("sparse", "moderate", "dense")
WS_SIZES = tuple(range(10, 101, 10))
CLIQUE_RANGE = tuple(range(3, 11))


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class SuiteConfig:
    family: str
    seed: int
    n: int | None = None            # WS / ER size; None = the 10..100 sweep
    cliques: int | None = None      # locally-dense; None = the full 3..10 sweep
    clique_size: int | None = None
    rule: int | None = None
    games_per_setting: int = 5
    beta: float = 0.3
    er_p: float = 0.3
    adv_success: tuple[float, float] = (50.0, 400.0)
    adv_caught: tuple[float, float] = (-400.0, -50.0)
    def_attacked: tuple[float, float] = (-400.0, -50.0)
    def_caught: tuple[float, float] = (10.0, 100.0)

    def __post_init__(self):
        fam = self.family.replace("-", "_")
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise GenerationError(f"unknown family {self.family!r}; valid: {', '.join(FAMILIES)}")
        if fam == "locally_dense":
            given = [x is not None for x in (self.cliques, self.clique_size, self.rule)]
            if any(given) and not all(given):
                raise GenerationError("locally-dense needs cliques, clique_size and rule together")
            if all(given):
                if self.rule not in (1, 2, 3):
                    raise GenerationError("rule must be 1, 2 or 3")
                if self.cliques < 3 or self.clique_size < 3:
                    raise GenerationError("cliques and clique_size must be at least 3")
        if self.games_per_setting < 1:
            raise GenerationError("games_per_setting must be positive")


def mean_degree(family: str, n: int) -> int:
    """Even lattice degree for a WS family (odd targets round down)."""
    target = {"sparse": 2, "moderate": n // 2, "dense": n - 2}[family]
    return max(2, target - target % 2)


def gen_watts_strogatz(n: int, mean_degree: int, beta: float, rng: np.random.Generator) -> Graph:
    """Ring lattice with ``mean_degree / 2`` neighbours per side, each edge rewired with prob. ``beta``."""
    if mean_degree % 2 or not 0 <= mean_degree < n:
        raise GenerationError(f"mean_degree must be even and below n, got {mean_degree} for n={n}")
    half = mean_degree // 2
    nbrs = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, half + 1):
            v = (u + j) % n
            nbrs[u].add(v)
            nbrs[v].add(u)
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= beta or v not in nbrs[u]:
                continue
            if len(nbrs[u]) >= n - 1:
                continue
            choices = [w for w in range(n) if w != u and w not in nbrs[u]]
            w = choices[int(rng.integers(0, len(choices)))]
            nbrs[u].discard(v)
            nbrs[v].discard(u)
            nbrs[u].add(w)
            nbrs[w].add(u)
    edges = {(min(u, v), max(u, v)) for u in range(n) for v in nbrs[u]}
    return Graph(n, tuple(sorted(edges)))


def gen_erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph(n, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))


def gen_locally_dense(cliques: int, clique_size: int, rule: int) -> Graph:
    """``cliques`` disjoint cliques joined by ``rule``; local vertex 0 is each clique's hub."""
    if rule not in (1, 2, 3):
        raise GenerationError("rule must be 1, 2 or 3")
    c, m = cliques, clique_size
    edges = set()
    for a in range(c):
        base = a * m
        for i in range(m):
            for j in range(i + 1, m):
                edges.add((base + i, base + j))

    def link(u, v):
        if u != v:
            edges.add((min(u, v), max(u, v)))

    if rule == 3:
        for a in range(c):
            for b in range(a + 1, c):
                link(a * m, b * m)
    else:
        for a in range(c):
            b = (a + 1) % c
            if rule == 1:
                link(a * m, b * m)
            else:
                for i in range(m):
                    link(a * m + i, b * m + i)
    return Graph(c * m, tuple(sorted(edges)))


def resource_counts(n: int) -> tuple[int, int]:
    k = max(1, math.floor(math.sqrt(n / 2) + 0.5))
    l = math.floor(2 * n / 3 - k + 0.5)
    l = min(max(l, 0), n - k)
    if k + l > n:
        raise GenerationError(f"graph with {n} vertices is too small for {k} patrollers")
    return k, l


def gen_game(graph: Graph, cfg: SuiteConfig, rng: np.random.Generator, name: str = "game") -> GameInstance:
    n = graph.num_vertices
    k, l = resource_counts(n)
    gamma = round_sig(rng.random())
    kappa = round_sig(rng.random())
    pi = build_uncertainty_matrix(kappa)
    utils = []
    for _ in range(n):
        adv_success = rng.uniform(*cfg.adv_success)
        adv_caught = rng.uniform(*cfg.adv_caught)
        def_attacked = rng.uniform(*cfg.def_attacked)
        def_caught = rng.uniform(cfg.def_caught[0], min(cfg.def_caught[1], adv_success))
        utils.append(TargetUtility(round_sig(def_caught), round_sig(def_attacked),
                                   round_sig(adv_success), round_sig(adv_caught)))
    pi = tuple(tuple(round_sig(x) for x in row) for row in pi)
    return GameInstance(name=name, graph=graph, utilities=tuple(utils), num_patrollers=k,
                        num_sensors=l, gamma=gamma, pi=pi)


def _file_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _settings(cfg: SuiteConfig):
    """Yield (file stem, graph builder) pairs in a fixed order."""
    fam = cfg.family
    if fam == "locally_dense":
        if cfg.cliques is not None:
            combos = [(cfg.cliques, cfg.clique_size, cfg.rule)]
        else:
            combos = [(c, m, r) for c in CLIQUE_RANGE for m in CLIQUE_RANGE for r in (1, 2, 3)]
        for c, m, r in combos:
            stem = f"{c:02d}_{m:02d}_{r}"
            for i in range(cfg.games_per_setting):
                name = stem if cfg.games_per_setting == 1 else f"{stem}_{i:02d}"
                yield name, (lambda rng, c=c, m=m, r=r: gen_locally_dense(c, m, r))
        return
    sizes = [cfg.n] if cfg.n is not None else list(WS_SIZES)
    for n in sizes:
        for i in range(cfg.games_per_setting):
            name = f"{fam}_{n:03d}_{i:02d}"
            if fam == "erdos_renyi":
                yield name, (lambda rng, n=n: gen_erdos_renyi(n, cfg.er_p, rng))
            else:
                yield name, (lambda rng, n=n: gen_watts_strogatz(n, mean_degree(fam, n), cfg.beta, rng))


def gen_suite(cfg: SuiteConfig) -> tuple[list[tuple[str, GameInstance]], dict]:
    """Games as (file name, instance) plus the manifest; each file draws from its own stream."""
    games = []
    for index, (stem, build) in enumerate(_settings(cfg)):
        rng = _file_rng(cfg.seed, index)
        graph = build(rng)
        games.append((f"{stem}.json", gen_game(graph, cfg, rng, name=stem)))
    manifest = {
        "family": cfg.family,
        "seed": cfg.seed,
        "games": [{"file": f, "n": g.num_vertices, "k": g.num_patrollers, "l": g.num_sensors} for f, g in games],
    }
    return games, manifest


def write_suite(cfg: SuiteConfig, out_dir) -> dict:
    import json
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    games, manifest = gen_suite(cfg)
    for fname, game in games:
        (out / fname).write_bytes(save_game(game))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest
