"""Monte-Carlo playouts of the game timeline, used to check the analytic evaluator.

Nothing here reuses the evaluator's payoff code: target states, branch
resolution and payoffs are recomputed from the game rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .evaluation import AdversaryStrategy, payoff_table
from .game_model import GameInstance
from .strategy import Chromosome

Z_THRESHOLD = 4.0
MIN_RANDOM_COMPARISONS = 32
EXHAUSTIVE_MAX_VERTICES = 10

# local codes; deliberately not imported from the kernels
_PAT, _UNC, _SBAR, _SPLUS, _SMINUS = "patroller", "uncovered", "s_bar", "s_plus", "s_minus"
_ROW = {_SBAR: 0, _SPLUS: 1, _SMINUS: 2}
_N, _W, _S = 0, 1, 2  # no sensor / weak / strong


@dataclass(frozen=True)
class PlayoutOutcome:
    terminal: str  # caught | attack_successful | attack_interrupted
    defender_payoff: float
    adversary_payoff: float


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    max_abs_z: float
    comparisons: int
    samples_per_comparison: int

    def to_dict(self) -> dict:
        return {"pass": self.passed, "max_abs_z": self.max_abs_z, "comparisons": self.comparisons,
                "samples_per_comparison": self.samples_per_comparison}


def _target_state(ch: Chromosome, game: GameInstance, i: int, t: int) -> tuple[str, bool]:
    """State of ``t`` under pure strategy ``i`` and whether a patroller legally moves onto it."""
    nbrs = game.graph.adjacency
    pats = [int(v) for v in ch.P[i]]
    moves = [int(v) for v in ch.R[i]]
    visited = any(r == t and (r == p or r in nbrs[p]) for p, r in zip(pats, moves))
    if t in pats:
        return _PAT, visited
    if t in (int(v) for v in ch.S[i]):
        if visited:
            return _SPLUS, visited
        if any(p in nbrs[t] for p in pats):
            return _SMINUS, visited
        return _SBAR, visited
    return _UNC, visited


def _resolve(state: str, visited: bool, detected: bool) -> bool:
    """Whether an attacker who keeps going is caught."""
    if state == _PAT:
        return True
    if state == _UNC:
        return visited
    if detected:
        return state in (_SPLUS, _SMINUS)
    return state == _SPLUS


def simulate_once(ch: Chromosome, game: GameInstance, adv: AdversaryStrategy,
                  rng: np.random.Generator) -> PlayoutOutcome:
    t = adv.target
    i = int(rng.choice(len(ch), p=ch.q / ch.q.sum()))
    state, visited = _target_state(ch, game, i, t)
    detected = False
    if state in _ROW:
        detected = rng.random() >= game.gamma
        table = ch.psi if detected else ch.phi
        true_signal = _W if rng.random() < table[_ROW[state], t] else _S
    else:
        true_signal = _N
    column = [game.pi[o][true_signal] for o in range(3)]
    observed = int(rng.choice(3, p=np.asarray(column) / sum(column)))
    if adv.flees(observed):
        return PlayoutOutcome("attack_interrupted", 0.0, 0.0)
    u = game.utilities[t]
    if _resolve(state, visited, detected):
        return PlayoutOutcome("caught", u.def_caught, u.adv_caught)
    return PlayoutOutcome("attack_successful", u.def_attacked, u.adv_success)


def _playout_batch(codes, visited, weak_det, weak_miss, cum_q, cum_pi, gamma, n, rng):
    """Vectorised playouts against one target for all 8 reaction schemes at once.

    Returns per-sample (observed, caught) arrays; the reaction only masks them.
    """
    idx = np.searchsorted(cum_q, rng.random(n), side="right")
    idx = np.minimum(idx, len(cum_q) - 1)
    code = codes[idx]
    has_sensor = code >= 2
    missed = rng.random(n) < gamma
    p_weak = np.where(missed, weak_miss[idx], weak_det[idx])
    true_sig = np.where(has_sensor, np.where(rng.random(n) < p_weak, _W, _S), _N)
    u = rng.random(n)
    observed = (u >= cum_pi[0, true_sig]).astype(np.int64) + (u >= cum_pi[1, true_sig])
    caught = np.where(
        code == 0, True,
        np.where(code == 1, visited[idx],
                 np.where(missed, code == 3, code >= 3)))
    return observed, caught


def _prepare(ch: Chromosome, game: GameInstance, t: int):
    # codes: 0 patroller, 1 uncovered, 2 s_bar, 3 s_plus, 4 s_minus
    code_of = {_PAT: 0, _UNC: 1, _SBAR: 2, _SPLUS: 3, _SMINUS: 4}
    d = len(ch)
    codes = np.empty(d, dtype=np.int64)
    visited = np.empty(d, dtype=bool)
    weak_det = np.zeros(d)
    weak_miss = np.zeros(d)
    for i in range(d):
        st, vis = _target_state(ch, game, i, t)
        codes[i] = code_of[st]
        visited[i] = vis
        if st in _ROW:
            weak_det[i] = ch.psi[_ROW[st], t]
            weak_miss[i] = ch.phi[_ROW[st], t]
    cum_q = np.cumsum(ch.q / ch.q.sum())
    cum_pi = np.cumsum(np.asarray(game.pi, dtype=float), axis=0)
    return codes, visited, weak_det, weak_miss, cum_q, cum_pi


def mc_target(ch: Chromosome, game: GameInstance, target: int, samples: int, rng: np.random.Generator,
              chunk: int = 250_000) -> np.ndarray:
    """Estimates for all 8 schemes against ``target`` from shared playouts.

    Returns an (8, 4) array of (mean_def, mean_adv, stderr_def, stderr_adv).
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    prep = _prepare(ch, game, target)
    u = game.utilities[target]
    pay_def = np.array([u.def_attacked, u.def_caught])
    pay_adv = np.array([u.adv_success, u.adv_caught])
    # per scheme: running sum and sum of squares of (def, adv)
    sums = np.zeros((8, 2))
    sq = np.zeros((8, 2))
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        observed, caught = _playout_batch(*prep, game.gamma, m, rng)
        ci = caught.astype(np.int64)
        for scheme in range(8):
            flee = np.array([(scheme >> (2 - o)) & 1 for o in range(3)], dtype=bool)[observed]
            dv = np.where(flee, 0.0, pay_def[ci])
            av = np.where(flee, 0.0, pay_adv[ci])
            sums[scheme] += dv.sum(), av.sum()
            sq[scheme] += (dv * dv).sum(), (av * av).sum()
        done += m
    mean = sums / samples
    if samples > 1:
        var = np.maximum(sq / samples - mean ** 2, 0.0) * samples / (samples - 1)
        # cancellation noise on constant payoffs
        var[var <= 1e-12 * np.maximum(mean ** 2, 1.0)] = 0.0
    else:
        var = np.zeros_like(mean)
    se = np.sqrt(var / samples)
    return np.hstack([mean, se])


def mc_estimate(ch: Chromosome, game: GameInstance, adv: AdversaryStrategy, samples: int,
                rng: np.random.Generator) -> tuple[float, float, float, float]:
    """(mean_def, mean_adv, stderr_def, stderr_adv) over ``samples`` playouts."""
    row = mc_target(ch, game, adv.target, samples, rng)[adv.scheme]
    return tuple(float(x) for x in row)


def exact_payoff(ch: Chromosome, game: GameInstance, adv: AdversaryStrategy) -> tuple[float, float]:
    """Expected payoffs by walking every branch of the playout tree."""
    t = adv.target
    u = game.utilities[t]
    total_def = total_adv = 0.0
    for i in range(len(ch)):
        state, visited = _target_state(ch, game, i, t)
        branches = []  # (prob, true signal, detected)
        if state in _ROW:
            r = _ROW[state]
            for detected, p_det, table in ((True, 1 - game.gamma, ch.psi), (False, game.gamma, ch.phi)):
                branches.append((p_det * table[r, t], _W, detected))
                branches.append((p_det * (1 - table[r, t]), _S, detected))
        else:
            branches.append((1.0, _N, False))
        for p, sig, detected in branches:
            for o in range(3):
                w = float(ch.q[i]) * p * game.pi[o][sig]
                if w == 0.0 or adv.flees(o):
                    continue
                if _resolve(state, visited, detected):
                    total_def += w * u.def_caught
                    total_adv += w * u.adv_caught
                else:
                    total_def += w * u.def_attacked
                    total_adv += w * u.adv_success
    return total_def, total_adv


def _z(analytic: float, mean: float, se: float) -> float:
    diff = abs(analytic - mean)
    if se == 0.0:
        return 0.0 if diff <= 1e-9 * max(1.0, abs(analytic)) else float("inf")
    return diff / se


def validate(ch: Chromosome, game: GameInstance, samples: int, rng: np.random.Generator,
             analytic: Callable[[Chromosome, GameInstance], np.ndarray] = payoff_table) -> ValidationReport:
    """Compare Monte-Carlo estimates with ``analytic(ch, game)`` (an (N, 8, 2) table).

    Exhaustive over all adversary strategies for small graphs, otherwise a
    random subset of at least 32.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    n = game.num_vertices
    table = analytic(ch, game)
    if n <= EXHAUSTIVE_MAX_VERTICES:
        pairs = [(t, s) for t in range(n) for s in range(8)]
    else:
        flat = rng.choice(n * 8, size=min(n * 8, MIN_RANDOM_COMPARISONS), replace=False)
        pairs = sorted((int(f) // 8, int(f) % 8) for f in flat)
    by_target: dict[int, list[int]] = {}
    for t, s in pairs:
        by_target.setdefault(t, []).append(s)
    worst = 0.0
    for t, schemes in sorted(by_target.items()):
        est = mc_target(ch, game, t, samples, rng)
        for s in schemes:
            worst = max(worst,
                        _z(table[t, s, 0], est[s, 0], est[s, 2]),
                        _z(table[t, s, 1], est[s, 1], est[s, 3]))
    return ValidationReport(bool(worst <= Z_THRESHOLD), float(worst), len(pairs), samples)
