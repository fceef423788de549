"""Exhaustive integer reference optimum for tiny scheduling programs.

Enumerates every integer schedule (q, f) on a small grid, keeps those whose
expected capacity path stays >= 0 and that never request and release at the
same step (plans cannot express that), and returns the best objective. Used
as the independent oracle for the LP solver and the rounding pipeline: the
relaxed optimum must lower-bound this value, and rounded plans must come
close to it.
"""
from __future__ import annotations

import math

import numpy as np

from scalesim.optimizer import LpModel


def _grid(levels: int, count: int) -> np.ndarray:
    """All integer vectors of length `count` with entries in 0..levels."""
    axes = np.meshgrid(*([np.arange(levels + 1)] * count), indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def _enumerate(model: LpModel, q_cap: int, f_cap: int, chunk_rows: int = 200_000):
    n1 = model.n_actions
    Q = _grid(q_cap, n1)
    F = _grid(f_cap, n1)
    best_val = math.inf
    best_x = None
    step = max(1, chunk_rows // len(F))
    for i in range(0, len(Q), step):
        Qc = Q[i : i + step]
        X = np.hstack(
            [np.repeat(Qc, len(F), axis=0), np.tile(F, (len(Qc), 1))]
        ).astype(np.float64)
        feasible = np.all(model.capacity_batch(X) >= -1e-9, axis=1)
        feasible &= ~np.any((X[:, :n1] > 0) & (X[:, n1:] > 0), axis=1)
        if not feasible.any():
            continue
        Xf = X[feasible]
        vals = model.objective_batch(Xf)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_x = Xf[j].copy()
    if best_x is None:
        raise AssertionError("no feasible integer schedule in the enumeration grid")
    return best_val, best_x


def integer_optimum(model: LpModel, max_grow: int = 3):
    """(objective, x) of the best integer schedule, with self-checked grid caps.

    Starts from caps justified by the data scale and doubles any cap the
    optimum touches (other than the genuine throughput bound floor(rho_hat)),
    so a too-small grid can never silently truncate the search.
    """
    prob = model.problem
    rho = prob.rho_hat
    zmax = float(prob.samples.max())
    q_cap = int(math.ceil(zmax)) + 1
    if math.isfinite(rho):
        q_cap = min(q_cap, int(math.floor(rho)))
    f_cap = int(math.ceil(float(model.B.max()) + zmax)) + 1
    for _ in range(max_grow + 1):
        val, x = _enumerate(model, q_cap, f_cap)
        q, f = model.split(x)
        rho_bound = int(math.floor(rho)) if math.isfinite(rho) else None
        q_suspicious = q.max() >= q_cap and (rho_bound is None or q_cap < rho_bound)
        f_suspicious = f.max() >= f_cap
        if not q_suspicious and not f_suspicious:
            return val, x
        if q_suspicious:
            q_cap *= 2
        if f_suspicious:
            f_cap *= 2
    raise AssertionError("enumeration grid caps kept binding after growth")
