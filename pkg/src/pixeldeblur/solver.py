"""L1-regularized least squares with an optimality certificate.

The problem solved is

    minimize  0.5 * ||M x - b||_2^2 + lam * sum_j w_j |x_j|

with non-negative per-coordinate weights ``w`` (all ones unless given). The
main method is a feature-sign active-set search; if it stalls numerically
the iterate is handed to cyclic coordinate descent, which also tries an
exact solve on its support ("polish") whenever the sign pattern settles. A result is only reported as converged when it passes the KKT
test:

    x_j != 0:  |g_j + lam w_j sign(x_j)| <= tol * scale
    x_j == 0:  |g_j| <= lam w_j + tol * scale

where ``g = M^T (M x - b)`` and ``scale = max(lam, ||M^T b||_inf)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NumericError, ParameterError, ShapeError

__all__ = [
    "SolverConfig",
    "SolveReport",
    "solve_lasso",
    "solve_ols",
    "transition_count",
    "lasso_objective",
    "kkt_violation",
]

# Relative slack when comparing objectives; the polished point is optimal to
# within tol, so a candidate that is larger only by rounding is still accepted.
_OBJ_SLACK = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    max_iters: int = 10_000
    tol: float = 1e-8

    def __post_init__(self):
        if not self.lam >= 0:
            raise ParameterError(f"lam must be non-negative, got {self.lam}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if int(self.max_iters) < 1:
            raise ParameterError(f"max_iters must be at least 1, got {self.max_iters}")


@dataclass
class SolveReport:
    x: np.ndarray = field(repr=False)
    iterations: int
    objective_value: float
    kkt_violation: float
    converged: bool


@njit(cache=True, nogil=True)
def _violation(m, b, x, lamw):
    r = m @ x - b
    g = m.T @ r
    worst = 0.0
    for j in range(x.size):
        if x[j] > 0.0:
            v = abs(g[j] + lamw[j])
        elif x[j] < 0.0:
            v = abs(g[j] - lamw[j])
        else:
            v = abs(g[j]) - lamw[j]
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _objective(m, b, x, lamw):
    r = m @ x - b
    return 0.5 * (r @ r) + np.sum(lamw * np.abs(x))


@njit(cache=True, nogil=True)
def _polish(m, gram, c, lamw, x, cand):
    """Solve the stationarity equations on the current support.

    Writes the candidate into ``cand``; returns False if the support is too
    large, singular, or the solution flips a sign.
    """
    k = x.size
    support = np.empty(k, dtype=np.int64)
    ns = 0
    for j in range(k):
        if x[j] != 0.0:
            support[ns] = j
            ns += 1
    if ns == 0 or ns > m.shape[0]:
        return False
    gs = np.empty((ns, ns))
    rhs = np.empty(ns)
    for p in range(ns):
        jp = support[p]
        s = 1.0 if x[jp] > 0.0 else -1.0
        rhs[p] = c[jp] - lamw[jp] * s
        for q in range(ns):
            gs[p, q] = gram[jp, support[q]]
    # lstsq tolerates a singular support; the KKT test rejects bad candidates
    sol = np.linalg.lstsq(gs, rhs)[0]
    for j in range(k):
        cand[j] = 0.0
    for p in range(ns):
        jp = support[p]
        if not np.isfinite(sol[p]):
            return False
        if (sol[p] > 0.0) != (x[jp] > 0.0) or sol[p] == 0.0:
            return False
        cand[jp] = sol[p]
    return True


@njit(cache=True, nogil=True)
def _support_solve(m, c, lamw, theta, support, ns, out):
    """Minimize the smooth model on ``support`` with fixed signs ``theta``.

    Uses a QR factorization of the active columns, which keeps the condition
    number at cond(M_S) instead of its square. Returns False when the active
    columns are numerically dependent.
    """
    n = m.shape[0]
    if ns > n:
        return False
    ms = np.empty((n, ns))
    rhs = np.empty(ns)
    for p in range(ns):
        jp = support[p]
        rhs[p] = c[jp] - lamw[jp] * theta[jp]
        for i in range(n):
            ms[i, p] = m[i, jp]
    q, r = np.linalg.qr(ms)
    rmax = 0.0
    for p in range(ns):
        rmax = max(rmax, abs(r[p, p]))
    if rmax == 0.0:
        return False
    for p in range(ns):
        if abs(r[p, p]) <= 1e-13 * rmax:
            return False
    # R^T z = rhs, then R x = z
    z = np.empty(ns)
    for p in range(ns):
        acc = rhs[p]
        for q_ in range(p):
            acc -= r[q_, p] * z[q_]
        z[p] = acc / r[p, p]
    sol = np.empty(ns)
    for p in range(ns - 1, -1, -1):
        acc = z[p]
        for q_ in range(p + 1, ns):
            acc -= r[p, q_] * sol[q_]
        sol[p] = acc / r[p, p]
    for p in range(ns):
        if not np.isfinite(sol[p]):
            return False
        out[support[p]] = sol[p]
    return True


@njit(cache=True, nogil=True)
def _null_step(m, b, lamw, x, support, ns):
    """Descent step inside the null space of dependent active columns.

    Moving along a null vector leaves the fit unchanged, so the objective
    changes only through the penalty, linearly until the first active
    coefficient reaches zero; that coefficient is dropped.
    """
    n = m.shape[0]
    ms = np.zeros((n, ns))
    for p in range(ns):
        for i in range(n):
            ms[i, p] = m[i, support[p]]
    _, _, vt = np.linalg.svd(ms)
    v = vt[ns - 1].copy()
    best_dir = 0.0
    best_rate = 0.0
    for sgn in (1.0, -1.0):
        rate = 0.0
        for p in range(ns):
            j = support[p]
            if x[j] > 0.0:
                rate += lamw[j] * sgn * v[p]
            elif x[j] < 0.0:
                rate -= lamw[j] * sgn * v[p]
            else:
                rate += lamw[j] * abs(v[p])
        if rate < best_rate:
            best_rate = rate
            best_dir = sgn
    if best_dir == 0.0:
        return False
    for p in range(ns):
        v[p] *= best_dir
    t = np.inf
    hit = -1
    for p in range(ns):
        j = support[p]
        if lamw[j] > 0.0 and x[j] * v[p] < 0.0:
            tj = -x[j] / v[p]
            if tj < t:
                t = tj
                hit = j
    if hit < 0:
        return False
    trial = x.copy()
    for p in range(ns):
        trial[support[p]] += t * v[p]
    trial[hit] = 0.0
    if not _objective(m, b, trial, lamw) < _objective(m, b, x, lamw):
        return False
    for j in range(x.size):
        x[j] = trial[j]
    return True


@njit(cache=True, nogil=True)
def _feature_sign(m, b, lamw, x, max_iters, tol_abs):
    """Feature-sign active-set search in place on ``x``.

    Every step strictly lowers the objective, so the method terminates in
    finitely many steps in exact arithmetic. Returns (steps, converged,
    violation); on a numerical stall it returns early with converged False
    and leaves ``x`` at the best point found.
    """
    k = x.size
    c = m.T @ b
    theta = np.zeros(k)
    active = np.zeros(k, dtype=np.bool_)
    for j in range(k):
        if x[j] != 0.0:
            active[j] = True
            theta[j] = 1.0 if x[j] > 0.0 else -1.0
    support = np.empty(k, dtype=np.int64)
    target = np.empty(k)
    trial = np.empty(k)
    best = np.empty(k)
    ts = np.empty(k + 1)
    viol = _violation(m, b, x, lamw)
    for step in range(max_iters):
        if viol <= tol_abs:
            return step, True, viol
        g = m.T @ (m @ x - b)
        nz_ok = True
        for j in range(k):
            if active[j] and abs(g[j] + lamw[j] * theta[j]) > tol_abs:
                nz_ok = False
                break
        if nz_ok:
            pick = -1
            worst = tol_abs
            for j in range(k):
                if not active[j]:
                    v = abs(g[j]) - lamw[j]
                    if v > worst:
                        worst = v
                        pick = j
            if pick < 0:
                return step, False, viol
            active[pick] = True
            if lamw[pick] > 0.0:
                theta[pick] = -1.0 if g[pick] > 0.0 else 1.0
        ns = 0
        for j in range(k):
            if active[j]:
                support[ns] = j
                ns += 1
        for j in range(k):
            target[j] = 0.0
        if not _support_solve(m, c, lamw, theta, support, ns, target):
            if not _null_step(m, b, lamw, x, support, ns):
                return step, False, viol
            for j in range(k):
                if lamw[j] > 0.0:
                    active[j] = x[j] != 0.0
                    theta[j] = 0.0 if x[j] == 0.0 else (1.0 if x[j] > 0.0 else -1.0)
            viol = _violation(m, b, x, lamw)
            continue
        # discrete line search over the segment x -> target: the end point and
        # every point where an active coefficient crosses zero
        nt = 0
        ts[nt] = 1.0
        nt += 1
        for p in range(ns):
            j = support[p]
            if x[j] != 0.0 and lamw[j] > 0.0 and x[j] * target[j] < 0.0:
                ts[nt] = x[j] / (x[j] - target[j])
                nt += 1
        f_best = _objective(m, b, x, lamw)
        f_start = f_best
        for j in range(k):
            best[j] = x[j]
        for i in range(nt):
            t = ts[i]
            for j in range(k):
                trial[j] = x[j] + t * (target[j] - x[j])
            if i > 0:
                # the crossing coordinate lands exactly on zero
                for p in range(ns):
                    j = support[p]
                    if x[j] != 0.0 and x[j] * target[j] < 0.0 and ts[i] == x[j] / (x[j] - target[j]):
                        trial[j] = 0.0
            f = _objective(m, b, trial, lamw)
            if f < f_best:
                f_best = f
                for j in range(k):
                    best[j] = trial[j]
        if not f_best < f_start:
            return step, False, viol
        for j in range(k):
            x[j] = best[j]
            if x[j] == 0.0 and lamw[j] > 0.0:
                active[j] = False
                theta[j] = 0.0
            elif lamw[j] > 0.0:
                theta[j] = 1.0 if x[j] > 0.0 else -1.0
        viol = _violation(m, b, x, lamw)
    return max_iters, viol <= tol_abs, viol


@njit(cache=True, nogil=True)
def _cd_solve(m, gram, b, lamw, x, max_iters, tol_abs):
    """Coordinate descent in place on ``x``. Returns (sweeps, converged, violation)."""
    k = x.size
    c = m.T @ b
    g = gram @ x - c
    diag = np.empty(k)
    for j in range(k):
        diag[j] = gram[j, j]
    cand = np.empty(k)
    prev_sign = np.zeros(k, dtype=np.int8)
    sign = np.zeros(k, dtype=np.int8)
    viol = _violation(m, b, x, lamw)
    if viol <= tol_abs:
        return 0, True, viol
    for it in range(1, max_iters + 1):
        for j in range(k):
            d = diag[j]
            if d <= 0.0:
                continue
            z = x[j] - g[j] / d
            t = lamw[j] / d
            if z > t:
                new = z - t
            elif z < -t:
                new = z + t
            else:
                new = 0.0
            delta = new - x[j]
            if delta != 0.0:
                for i in range(k):
                    g[i] += delta * gram[i, j]
                x[j] = new
        # refresh the running gradient to stop drift
        g = gram @ x - c
        viol = _violation(m, b, x, lamw)
        if viol <= tol_abs:
            return it, True, viol
        stable = True
        for j in range(k):
            sign[j] = 1 if x[j] > 0.0 else (-1 if x[j] < 0.0 else 0)
            if sign[j] != prev_sign[j]:
                stable = False
            prev_sign[j] = sign[j]
        if stable and _polish(m, gram, c, lamw, x, cand):
            cviol = _violation(m, b, cand, lamw)
            if cviol <= tol_abs:
                fc = _objective(m, b, cand, lamw)
                fx = _objective(m, b, x, lamw)
                if fc <= fx + _OBJ_SLACK * abs(fx):
                    for j in range(k):
                        x[j] = cand[j]
                    return it, True, cviol
    return max_iters, False, viol


@njit(cache=True, nogil=True)
def _solve_inplace(m, gram, b, lamw, x, max_iters, tol_abs):
    """Active-set search, then coordinate descent if it stalls."""
    steps, conv, viol = _feature_sign(m, b, lamw, x, max_iters, tol_abs)
    if conv or steps >= max_iters:
        return steps, conv, viol
    sweeps, conv, viol = _cd_solve(m, gram, b, lamw, x, max_iters - steps, tol_abs)
    return steps + sweeps, conv, viol


@njit(cache=True, nogil=True)
def _zero_is_optimal(m, b, lamw):
    c = m.T @ b
    for j in range(c.size):
        if abs(c[j]) > lamw[j]:
            return False
    return True


def _as_weights(weights, k, lam):
    if weights is None:
        w = np.ones(k)
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.size != k:
            raise ShapeError(f"expected {k} weights, got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite and non-negative")
    return np.ascontiguousarray(lam * w)


def kkt_violation(m, b, x, lam: float, weights=None) -> float:
    """Largest KKT residual of ``x`` (absolute, not scaled)."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return float(max(_violation(m, b, x, _as_weights(weights, x.size, lam)), 0.0))


def lasso_objective(m, b, x, lam: float, weights=None) -> float:
    m = np.ascontiguousarray(m, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return float(_objective(m, np.ascontiguousarray(b, dtype=np.float64), x,
                            _as_weights(weights, x.size, lam)))


def kkt_scale(m, b, lam: float) -> float:
    return max(lam, float(np.max(np.abs(np.asarray(m).T @ np.asarray(b)), initial=0.0)))


def solve_lasso(m, b, cfg: SolverConfig, *, weights=None, x0=None, gram=None) -> SolveReport:
    """Minimize ``0.5||m x - b||^2 + cfg.lam * ||w * x||_1``.

    Args:
        m: (N, K) matrix.
        b: (N,) data vector.
        cfg: penalty weight and stopping rule.
        weights: optional non-negative per-coordinate penalty weights.
        x0: optional warm start.
        gram: optional precomputed ``m.T @ m`` shared across calls.

    Returns:
        A SolveReport. ``converged`` is False when ``max_iters`` sweeps ran
        without passing the KKT test; ``x`` is then the last iterate.
    """
    m = np.ascontiguousarray(m, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
    if m.ndim != 2 or m.shape[0] != b.size:
        raise ShapeError(f"matrix shape {m.shape} does not match data length {b.size}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
        raise NumericError("non-finite values in lasso inputs")
    k = m.shape[1]
    lamw = _as_weights(weights, k, cfg.lam)
    tol_abs = cfg.tol * kkt_scale(m, b, cfg.lam)

    if _zero_is_optimal(m, b, lamw):
        x = np.zeros(k)
        return SolveReport(x, 0, lasso_objective(m, b, x, cfg.lam, weights),
                           kkt_violation(m, b, x, cfg.lam, weights), True)

    if gram is None:
        gram = m.T @ m
    gram = np.ascontiguousarray(gram, dtype=np.float64)
    x = np.zeros(k) if x0 is None else np.array(x0, dtype=np.float64).reshape(-1)
    if x.size != k:
        raise ShapeError(f"warm start has {x.size} entries, expected {k}")
    iters, conv, _ = _solve_inplace(m, gram, b, lamw, x, int(cfg.max_iters), tol_abs)
    return SolveReport(
        x=x,
        iterations=int(iters),
        objective_value=lasso_objective(m, b, x, cfg.lam, weights),
        kkt_violation=kkt_violation(m, b, x, cfg.lam, weights),
        converged=bool(conv),
    )


def solve_ols(m, b) -> np.ndarray:
    """Minimum-norm least-squares solution (pseudo-inverse semantics)."""
    m = np.asarray(m, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if m.ndim != 2 or m.shape[0] != b.size:
        raise ShapeError(f"matrix shape {m.shape} does not match data length {b.size}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
        raise NumericError("non-finite values in least-squares inputs")
    x, *_ = np.linalg.lstsq(m, b, rcond=None)
    return x


def transition_count(a, tol: float = 0.0) -> int:
    """Number of consecutive coefficient pairs differing by more than ``tol``."""
    if tol < 0:
        raise ParameterError(f"tol must be non-negative, got {tol}")
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    return int(np.count_nonzero(np.abs(np.diff(a)) > tol))
