"""Game instances: graph, per-target utilities, resources and uncertainty."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

PI_COLUMN_TOL = 1e-9

# Row/column order of the observation matrix.
SIGNAL_STATES = ("n", "s0", "s1")


class GameFormatError(ValueError):
    """Raised when a game file or a game instance violates the schema or an invariant."""


@dataclass(frozen=True)
class Graph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not isinstance(self.num_vertices, int) or self.num_vertices < 1:
            raise GameFormatError(f"num_vertices: must be a positive integer, got {self.num_vertices!r}")
        seen = set()
        normalized = []
        for e in self.edges:
            if len(e) != 2:
                raise GameFormatError(f"edges: {e!r} is not a vertex pair")
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise GameFormatError(f"edges: endpoint out of range in {e!r}")
            if u == v:
                raise GameFormatError(f"edges: self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GameFormatError(f"edges: duplicate edge {key}")
            seen.add(key)
            normalized.append(key)
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    @cached_property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.num_vertices)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        adj = np.zeros((self.num_vertices, self.num_vertices), dtype=np.bool_)
        for u, v in self.edges:
            adj[u, v] = adj[v, u] = True
        adj.setflags(write=False)
        return adj

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted neighbour lists as (indptr, indices)."""
        ptr = np.zeros(self.num_vertices + 1, dtype=np.int64)
        idx = []
        for v, nb in enumerate(self.adjacency):
            idx.extend(sorted(nb))
            ptr[v + 1] = len(idx)
        indices = np.asarray(idx, dtype=np.int64)
        ptr.setflags(write=False)
        indices.setflags(write=False)
        return ptr, indices

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])


def neighbors(graph: Graph, v: int) -> frozenset[int]:
    if not 0 <= v < graph.num_vertices:
        raise IndexError(f"vertex {v} out of range for a graph with {graph.num_vertices} vertices")
    return graph.adjacency[v]


class TargetUtility(NamedTuple):
    def_caught: float
    def_attacked: float
    adv_success: float
    adv_caught: float


def build_uncertainty_matrix(kappa: float) -> tuple[tuple[float, float, float], ...]:
    """Observation matrix P[observed | true] over (n, s0, s1) for one noise level."""
    if not 0.0 <= kappa <= 1.0 or math.isnan(kappa):
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    half = kappa / 2
    return (
        (1.0, kappa, half),
        (0.0, 1.0 - kappa, half),
        (0.0, 0.0, 1.0 - kappa),
    )


@dataclass(frozen=True)
class GameInstance:
    name: str
    graph: Graph
    utilities: tuple[TargetUtility, ...]
    num_patrollers: int
    num_sensors: int
    gamma: float
    pi: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "utilities", tuple(TargetUtility(*map(float, u)) for u in self.utilities))
        object.__setattr__(self, "pi", tuple(tuple(float(x) for x in row) for row in self.pi))
        object.__setattr__(self, "gamma", float(self.gamma))
        validate_game(self)

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices

    @cached_property
    def utility_array(self) -> np.ndarray:
        """Columns: def_caught, def_attacked, adv_success, adv_caught."""
        arr = np.array(self.utilities, dtype=np.float64).reshape(self.num_vertices, 4)
        arr.setflags(write=False)
        return arr

    @cached_property
    def pi_array(self) -> np.ndarray:
        arr = np.array(self.pi, dtype=np.float64)
        arr.setflags(write=False)
        return arr


def validate_game(game: GameInstance) -> None:
    n = game.graph.num_vertices
    for field, value in (("num_patrollers", game.num_patrollers), ("num_sensors", game.num_sensors)):
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise GameFormatError(f"{field}: expected an integer, got {value!r}")
    if game.num_patrollers < 1:
        raise GameFormatError("num_patrollers: at least one patroller is required")
    if game.num_sensors < 0:
        raise GameFormatError("num_sensors: must be non-negative")
    if game.num_patrollers + game.num_sensors > n:
        raise GameFormatError(
            f"num_patrollers + num_sensors = {game.num_patrollers + game.num_sensors} exceeds num_vertices = {n}"
        )
    if not 0.0 <= game.gamma <= 1.0:
        raise GameFormatError(f"gamma: must lie in [0, 1], got {game.gamma}")
    if len(game.pi) != 3 or any(len(row) != 3 for row in game.pi):
        raise GameFormatError("pi: must be a 3x3 matrix")
    for row in game.pi:
        for x in row:
            if not 0.0 <= x <= 1.0:
                raise GameFormatError(f"pi: entry {x} outside [0, 1]")
    for c in range(3):
        s = sum(game.pi[r][c] for r in range(3))
        if abs(s - 1.0) > PI_COLUMN_TOL:
            raise GameFormatError(f"pi: column {SIGNAL_STATES[c]} sums to {s}, expected 1")
    if len(game.utilities) != n:
        raise GameFormatError(f"utilities: expected {n} entries, got {len(game.utilities)}")
    for v, u in enumerate(game.utilities):
        if not u.def_caught > 0:
            raise GameFormatError(f"utilities[{v}].def_caught: must be > 0")
        if not u.def_attacked < 0:
            raise GameFormatError(f"utilities[{v}].def_attacked: must be < 0")
        if not u.adv_success > 0:
            raise GameFormatError(f"utilities[{v}].adv_success: must be > 0")
        if not u.adv_caught < 0:
            raise GameFormatError(f"utilities[{v}].adv_caught: must be < 0")


def round_sig(x: float, digits: int = 12) -> float:
    return float(format(float(x), f".{digits}g"))


def game_to_dict(game: GameInstance) -> dict:
    return {
        "name": game.name,
        "num_vertices": game.num_vertices,
        "edges": [list(e) for e in game.graph.edges],
        "num_patrollers": int(game.num_patrollers),
        "num_sensors": int(game.num_sensors),
        "gamma": round_sig(game.gamma),
        "pi": [[round_sig(x) for x in row] for row in game.pi],
        "utilities": [
            {
                "def_caught": round_sig(u.def_caught),
                "def_attacked": round_sig(u.def_attacked),
                "adv_success": round_sig(u.adv_success),
                "adv_caught": round_sig(u.adv_caught),
            }
            for u in game.utilities
        ],
    }


def save_game(game: GameInstance) -> bytes:
    return (json.dumps(game_to_dict(game), indent=1) + "\n").encode("utf-8")


def _require(obj: dict, key: str, kind, where: str = ""):
    if key not in obj:
        raise GameFormatError(f"{where}{key}: missing field")
    value = obj[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise GameFormatError(f"{where}{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def game_from_dict(data: dict) -> GameInstance:
    if not isinstance(data, dict):
        raise GameFormatError("game: top-level value must be an object")
    name = _require(data, "name", str)
    n = _require(data, "num_vertices", int)
    edges = _require(data, "edges", list)
    for e in edges:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in e)):
            raise GameFormatError(f"edges: entry {e!r} is not a pair of integers")
    k = _require(data, "num_patrollers", int)
    l = _require(data, "num_sensors", int)
    gamma = _require(data, "gamma", float)
    pi = _require(data, "pi", list)
    if len(pi) != 3 or not all(isinstance(r, list) and len(r) == 3 for r in pi):
        raise GameFormatError("pi: must be a 3x3 array")
    for row in pi:
        for x in row:
            if not isinstance(x, (int, float)) or isinstance(x, bool):
                raise GameFormatError(f"pi: non-numeric entry {x!r}")
    utils = _require(data, "utilities", list)
    parsed = []
    for v, u in enumerate(utils):
        if not isinstance(u, dict):
            raise GameFormatError(f"utilities[{v}]: expected an object")
        parsed.append(TargetUtility(*(float(_require(u, f, float, f"utilities[{v}].")) for f in TargetUtility._fields)))
    graph = Graph(n, tuple(tuple(e) for e in edges))
    return GameInstance(name=name, graph=graph, utilities=tuple(parsed), num_patrollers=k,
                        num_sensors=l, gamma=float(gamma), pi=tuple(tuple(map(float, r)) for r in pi))


def load_game(data: bytes | str) -> GameInstance:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"game: invalid JSON ({exc})") from exc
    return game_from_dict(obj)


def read_game(path) -> GameInstance:
    with open(path, "rb") as fh:
        return load_game(fh.read())


def write_game(game: GameInstance, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_game(game))
