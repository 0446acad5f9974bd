"""Array kernels for evaluation, repair and mutation.

A chromosome is held as parallel arrays:

    P    (d, k) int64   patroller vertices
    S    (d, l) int64   sensor vertices
    R    (d, k) int64   reallocation targets, paired with P by column
    q    (d,)   float64 probabilities
    psi  (3, N) float64 P[sigma0 | detected], rows s_bar, s_plus, s_minus
    phi  (3, N) float64 P[sigma0 | missed]

Game arrays: ``adj`` (N, N) bool, neighbour CSR ``nbr_ptr``/``nbr_idx``,
``util`` (N, 4) with columns def_caught, def_attacked, adv_success,
adv_caught, and ``pi`` (3, 3) = P[observed | true] over (n, s0, s1).

Every function decorated with ``njit`` also runs unchanged under CPython, and
takes ``np.random.Generator`` objects, whose streams numba reproduces exactly.
"""

import numpy as np

from ._jit import USE_NUMBA, njit

# Allocation states. The first three double as row indices of psi / phi.
S_BAR = 0
S_PLUS = 1
S_MINUS = 2
PATROLLER = 3
UNCOVERED = 4

# True / observed signalling states.
SIG_N = 0
SIG_0 = 1
SIG_1 = 2

CAUGHT = 0
SUCCESS = 1

N_SCHEMES = 8

# Mutation op codes.
OP_M1 = 0
OP_M2 = 1
OP_M3 = 2
OP_M2_ALLOC = 10
OP_M2_SIGNAL = 11

IMPROVE_TOL = 1e-9


def scheme_flees(scheme, observed):
    """True if reaction scheme ``scheme`` flees on observed state index."""
    return (scheme >> (2 - observed)) & 1 == 1


# --------------------------------------------------------------------------
# allocation states


@njit
def classify_row(prow, srow, rrow, adj, state, visit):
    """Fill ``state`` (preset to UNCOVERED) and ``visit`` (preset False) for one pure strategy.

    A reallocation counts only if it stays put or follows an edge.
    """
    k = prow.shape[0]
    for j in range(k):
        p = prow[j]
        r = rrow[j]
        if r == p or adj[p, r]:
            visit[r] = True
    for j in range(srow.shape[0]):
        v = srow[j]
        if visit[v]:
            state[v] = S_PLUS
        else:
            st = S_BAR
            for jj in range(k):
                if adj[prow[jj], v]:
                    st = S_MINUS
                    break
            state[v] = st
    for j in range(k):
        state[prow[j]] = PATROLLER


def classify_numpy(P, S, R, adj):
    """Vectorised ``classify_row`` over all pure strategies: (state, visit), both (d, N)."""
    d, k = P.shape
    n = adj.shape[0]
    rows = np.arange(d)[:, None]
    legal = (R == P) | adj[P, R]
    visit = np.zeros((d, n), dtype=np.bool_)
    ii, jj = np.nonzero(legal)
    visit[ii, R[ii, jj]] = True
    state = np.full((d, n), UNCOVERED, dtype=np.int64)
    if S.shape[1]:
        near = adj[P].any(axis=1) if k else np.zeros((d, n), dtype=np.bool_)
        sv = np.where(visit[rows, S], S_PLUS, np.where(near[rows, S], S_MINUS, S_BAR))
        state[rows, S] = sv
    state[rows, P] = PATROLLER
    return state, visit


# --------------------------------------------------------------------------
# evaluation


@njit
def _sensor_mass(mass, x, psi, phi, gamma):
    n = mass.shape[0]
    for v in range(n):
        for th in range(3):
            xv = x[v, th]
            if xv == 0.0:
                continue
            det = (1.0 - gamma) * xv
            miss = gamma * xv
            col_det = SUCCESS if th == S_BAR else CAUGHT
            col_miss = CAUGHT if th == S_PLUS else SUCCESS
            mass[v, SIG_0, col_det] += det * psi[th, v]
            mass[v, SIG_1, col_det] += det * (1.0 - psi[th, v])
            mass[v, SIG_0, col_miss] += miss * phi[th, v]
            mass[v, SIG_1, col_miss] += miss * (1.0 - phi[th, v])


@njit
def outcome_mass_loop(P, S, R, q, psi, phi, adj, gamma):
    """(N, 3, 2) array: probability mass of (true signal state, caught/success) per target."""
    d = P.shape[0]
    n = adj.shape[0]
    mass = np.zeros((n, 3, 2))
    x = np.zeros((n, 3))
    state = np.empty(n, dtype=np.int64)
    visit = np.empty(n, dtype=np.bool_)
    for i in range(d):
        state[:] = UNCOVERED
        visit[:] = False
        classify_row(P[i], S[i], R[i], adj, state, visit)
        w = q[i]
        for v in range(n):
            s = state[v]
            if s == PATROLLER:
                mass[v, SIG_N, CAUGHT] += w
            elif s == UNCOVERED:
                if visit[v]:
                    mass[v, SIG_N, CAUGHT] += w
                else:
                    mass[v, SIG_N, SUCCESS] += w
            else:
                x[v, s] += w
    _sensor_mass(mass, x, psi, phi, gamma)
    return mass


def outcome_mass_numpy(P, S, R, q, psi, phi, adj, gamma):
    state, visit = classify_numpy(P, S, R, adj)
    n = adj.shape[0]
    w = q[:, None]
    mass = np.zeros((n, 3, 2))
    unc = state == UNCOVERED
    mass[:, SIG_N, CAUGHT] = (w * ((state == PATROLLER) | (unc & visit))).sum(axis=0)
    mass[:, SIG_N, SUCCESS] = (w * (unc & ~visit)).sum(axis=0)
    x = np.stack([(w * (state == th)).sum(axis=0) for th in range(3)])  # (3, N)
    det = (1.0 - gamma) * x
    miss = gamma * x
    s0_det, s1_det = det * psi, det * (1.0 - psi)
    s0_miss, s1_miss = miss * phi, miss * (1.0 - phi)
    mass[:, SIG_0, CAUGHT] = s0_det[S_PLUS] + s0_det[S_MINUS] + s0_miss[S_PLUS]
    mass[:, SIG_0, SUCCESS] = s0_det[S_BAR] + s0_miss[S_BAR] + s0_miss[S_MINUS]
    mass[:, SIG_1, CAUGHT] = s1_det[S_PLUS] + s1_det[S_MINUS] + s1_miss[S_PLUS]
    mass[:, SIG_1, SUCCESS] = s1_det[S_BAR] + s1_miss[S_BAR] + s1_miss[S_MINUS]
    return mass


@njit
def scheme_table_loop(mass, pi, util):
    """(N, 8, 2) expected (defender, adversary) payoff for every target and reaction scheme."""
    n = mass.shape[0]
    out = np.zeros((n, N_SCHEMES, 2))
    dpo = np.empty(3)
    apo = np.empty(3)
    for v in range(n):
        dc = util[v, 0]
        da = util[v, 1]
        asu = util[v, 2]
        ac = util[v, 3]
        for o in range(3):
            c = 0.0
            s = 0.0
            for t in range(3):
                c += pi[o, t] * mass[v, t, CAUGHT]
                s += pi[o, t] * mass[v, t, SUCCESS]
            dpo[o] = c * dc + s * da
            apo[o] = c * ac + s * asu
        for b in range(N_SCHEMES):
            dv = 0.0
            av = 0.0
            for o in range(3):
                if (b >> (2 - o)) & 1 == 0:
                    dv += dpo[o]
                    av += apo[o]
            out[v, b, 0] = dv
            out[v, b, 1] = av
    return out


_ATTACK_MASK = np.array([[((b >> (2 - o)) & 1) == 0 for o in range(3)] for b in range(N_SCHEMES)], dtype=np.float64)


def scheme_table_numpy(mass, pi, util):
    obs = np.einsum("ot,vtc->voc", pi, mass)  # (N, 3, 2)
    dpo = obs[:, :, CAUGHT] * util[:, 0:1] + obs[:, :, SUCCESS] * util[:, 1:2]
    apo = obs[:, :, CAUGHT] * util[:, 3:4] + obs[:, :, SUCCESS] * util[:, 2:3]
    return np.stack([dpo @ _ATTACK_MASK.T, apo @ _ATTACK_MASK.T], axis=-1)


@njit
def best_from_table(table):
    """Adversary best response: max adversary payoff, then max defender payoff,
    then lowest scheme index, then lowest target. Returns (def, adv, target, scheme)."""
    n = table.shape[0]
    bt = -1
    bs = -1
    bd = 0.0
    ba = 0.0
    for b in range(N_SCHEMES):
        for v in range(n):
            a = table[v, b, 1]
            dv = table[v, b, 0]
            if bt < 0 or a > ba or (a == ba and dv > bd):
                bt = v
                bs = b
                bd = dv
                ba = a
    return bd, ba, bt, bs


if USE_NUMBA:
    outcome_mass = outcome_mass_loop
    scheme_table = scheme_table_loop
else:
    outcome_mass = outcome_mass_numpy
    scheme_table = scheme_table_numpy


@njit
def evaluate_arrays(P, S, R, q, psi, phi, adj, gamma, pi, util):
    mass = outcome_mass(P, S, R, q, psi, phi, adj, gamma)
    return best_from_table(scheme_table(mass, pi, util))


@njit
def strategy_utilities(P, S, R, psi, phi, adj, gamma, pi, util):
    """Defender payoff of each pure strategy played alone (with the given signalling)."""
    d = P.shape[0]
    out = np.empty(d)
    one = np.ones(1)
    for i in range(d):
        res = evaluate_arrays(P[i:i + 1], S[i:i + 1], R[i:i + 1], one, psi, phi, adj, gamma, pi, util)
        out[i] = res[0]
    return out


# --------------------------------------------------------------------------
# repair


@njit
def repair_row(prow, srow, rrow, adj, nbr_ptr, nbr_idx, rng):
    """In-place repair of one pure strategy; returns True if anything changed.

    Duplicate allocations (scan order: patrollers then sensors, first kept) move
    to a uniformly random unoccupied vertex; illegal reallocations become a
    uniformly random member of neighbours(p) plus p itself. Feasible input draws
    nothing from ``rng``.
    """
    n = adj.shape[0]
    k = prow.shape[0]
    l = srow.shape[0]
    changed = False
    count = np.zeros(n, dtype=np.int64)
    for j in range(k):
        count[prow[j]] += 1
    for j in range(l):
        count[srow[j]] += 1
    seen = np.zeros(n, dtype=np.bool_)
    for slot in range(k + l):
        v = prow[slot] if slot < k else srow[slot - k]
        if not seen[v]:
            seen[v] = True
            continue
        nfree = 0
        for u in range(n):
            if count[u] == 0:
                nfree += 1
        pick = rng.integers(0, nfree)
        u = 0
        while True:
            if count[u] == 0:
                if pick == 0:
                    break
                pick -= 1
            u += 1
        count[v] -= 1
        count[u] += 1
        seen[u] = True
        if slot < k:
            prow[slot] = u
        else:
            srow[slot - k] = u
        changed = True
    for j in range(k):
        p = prow[j]
        r = rrow[j]
        if r != p and not adj[p, r]:
            rrow[j] = random_move(p, nbr_ptr, nbr_idx, rng)
            changed = True
    return changed


@njit
def random_move(p, nbr_ptr, nbr_idx, rng):
    """Uniform member of neighbours(p) plus p itself."""
    deg = nbr_ptr[p + 1] - nbr_ptr[p]
    c = rng.integers(0, deg + 1)
    if c == deg:
        return p
    return nbr_idx[nbr_ptr[p] + c]


@njit
def row_feasible(prow, srow, rrow, adj):
    n = adj.shape[0]
    used = np.zeros(n, dtype=np.bool_)
    for j in range(prow.shape[0]):
        if used[prow[j]]:
            return False
        used[prow[j]] = True
    for j in range(srow.shape[0]):
        if used[srow[j]]:
            return False
        used[srow[j]] = True
    for j in range(prow.shape[0]):
        if rrow[j] != prow[j] and not adj[prow[j], rrow[j]]:
            return False
    return True


# --------------------------------------------------------------------------
# mutations (in place on the arrays passed in)


@njit
def set_probability(q, i, rho):
    """Give entry ``i`` probability ``rho`` and scale the rest to total ``1 - rho``."""
    d = q.shape[0]
    rest = 0.0
    for j in range(d):
        if j != i:
            rest += q[j]
    if rest > 0.0:
        scale = (1.0 - rho) / rest
        for j in range(d):
            if j != i:
                q[j] *= scale
    else:
        for j in range(d):
            if j != i:
                q[j] = (1.0 - rho) / (d - 1)
    q[i] = rho


@njit
def m1_probability(q, rng):
    d = q.shape[0]
    if d == 1:
        return False
    i = rng.integers(0, d)
    rho = rng.random()
    while rho == 0.0:
        rho = rng.random()
    set_probability(q, i, rho)
    return True


@njit
def m2_allocation(P, S, R, adj, nbr_ptr, nbr_idx, local_opt, rng):
    d, k = P.shape
    l = S.shape[1]
    n = adj.shape[0]
    i = rng.integers(0, d)
    if l > 0:
        z = rng.integers(0, 3)
    else:
        z = 2 * rng.integers(0, 2)
    if z == 0:
        j = rng.integers(0, k)
        P[i, j] = rng.integers(0, n)
    elif z == 1:
        j = rng.integers(0, l)
        S[i, j] = rng.integers(0, n)
    else:
        j = rng.integers(0, k)
        R[i, j] = random_move(P[i, j], nbr_ptr, nbr_idx, rng)
    if local_opt:
        repair_row(P[i], S[i], R[i], adj, nbr_ptr, nbr_idx, rng)
    return True


@njit
def m2_signal(psi, phi, rng):
    n = psi.shape[1]
    c = rng.integers(0, 6 * n)
    which = c // (3 * n)
    rem = c % (3 * n)
    th = rem // n
    v = rem % n
    if which == 0:
        psi[th, v] = 1.0 - psi[th, v]
    else:
        phi[th, v] = 1.0 - phi[th, v]
    return True


@njit
def m3_coverage(P, S, R, target, adj, nbr_ptr, nbr_idx, local_opt, rng):
    """Put ``target`` into one random slot of a random pure strategy that leaves it uncovered."""
    d, k = P.shape
    l = S.shape[1]
    if target < 0:
        return False
    cand = np.empty(d, dtype=np.int64)
    nc = 0
    for i in range(d):
        covered = False
        for j in range(k):
            if P[i, j] == target:
                covered = True
        for j in range(l):
            if S[i, j] == target:
                covered = True
        if not covered:
            cand[nc] = i
            nc += 1
    if nc == 0:
        return False
    i = cand[rng.integers(0, nc)]
    slot = rng.integers(0, k + l)
    if slot < k:
        P[i, slot] = target
    else:
        S[i, slot - k] = target
    if local_opt:
        repair_row(P[i], S[i], R[i], adj, nbr_ptr, nbr_idx, rng)
    return True


@njit
def apply_mutation(op, P, S, R, q, psi, phi, target, adj, nbr_ptr, nbr_idx, local_opt, rng):
    """Apply one mutation type in place. M2 picks allocation or signalling with equal odds."""
    if op == OP_M2:
        op = OP_M2_ALLOC if rng.integers(0, 2) == 0 else OP_M2_SIGNAL
    if op == OP_M1:
        return m1_probability(q, rng)
    if op == OP_M2_ALLOC:
        return m2_allocation(P, S, R, adj, nbr_ptr, nbr_idx, local_opt, rng)
    if op == OP_M2_SIGNAL:
        return m2_signal(psi, phi, rng)
    return m3_coverage(P, S, R, target, adj, nbr_ptr, nbr_idx, local_opt, rng)


@njit
def mutate_kernel(P, S, R, q, psi, phi, base_fitness, target, ops, m_limit, local_opt,
                  adj, nbr_ptr, nbr_idx, gamma, pi, util, rng):
    """Up to ``m_limit`` attempts from the unmutated state; stop at the first strict improvement.

    Returns (P, S, R, q, psi, phi, def, adv, target, scheme, attempts); the last
    attempt is returned when none improves.
    """
    nops = ops.shape[0]
    P2 = P.copy()
    S2 = S.copy()
    R2 = R.copy()
    q2 = q.copy()
    psi2 = psi.copy()
    phi2 = phi.copy()
    res = (base_fitness, 0.0, target, 0)
    attempts = 0
    for attempt in range(m_limit):
        attempts = attempt + 1
        P2[:, :] = P
        S2[:, :] = S
        R2[:, :] = R
        q2[:] = q
        psi2[:, :] = psi
        phi2[:, :] = phi
        op = ops[rng.integers(0, nops)]
        apply_mutation(op, P2, S2, R2, q2, psi2, phi2, target, adj, nbr_ptr, nbr_idx, local_opt, rng)
        res = evaluate_arrays(P2, S2, R2, q2, psi2, phi2, adj, gamma, pi, util)
        if res[0] > base_fitness + IMPROVE_TOL:
            break
    return P2, S2, R2, q2, psi2, phi2, res[0], res[1], res[2], res[3], attempts
