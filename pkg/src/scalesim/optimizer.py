"""Sample-average stochastic program over request/release schedules.

The problem: choose per-step host requests q_0..q_n (each capped by the
throughput estimate rho_hat) and instant releases f_0..f_n to minimize the
average pinball loss of the expected capacity path against S sampled demand
paths,

    min (1/S) sum_s sum_{t=1..n} loss(r_hat_t, z_{s,t})
    s.t. r_hat_t = B_t + sum_{i<=t} (q_i * c_{t-i} - f_i) >= 0,
         0 <= q_i <= rho_hat,  f_i >= 0,

where c_d = P(tau_hat <= d) keeps the delayed-arrival expectation linear in q
and B_t folds in the starting fleet plus already-submitted requests. The
capacity floor r_hat_t >= 0 is the linearized release bound (a release cannot
exceed what is live before it).

The LP is solved by an in-repo Mehrotra predictor-corrector interior-point
method specialized to this structure: the per-sample auxiliary loss variables
are eliminated from every Newton system analytically, leaving dense p x p
solves with p = 2(n+1). Fractional schedules are then made integral by
randomized rounding with netting.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import RngSeed
from .cost import ProviderEstimate, as_alpha, pinball_loss

__all__ = [
    "SaaProblem",
    "LpModel",
    "LpSolution",
    "OptimizerError",
    "build_lp",
    "solve_lp",
    "randomized_round",
    "solve",
]


class OptimizerError(RuntimeError):
    """Solver could not produce a usable schedule."""


@dataclass(frozen=True)
class SaaProblem:
    """Data of one receding-horizon optimization instance.

    samples[s, t-1] is the demand of path s at relative step t (1..n).
    delay_cdf[d] = P(tau_hat <= d) for d = 0..n.
    fixed_arrival_profile[t] is the expected cumulative count, by step t, of
    hosts from requests submitted before the plan started.
    """

    samples: np.ndarray
    r_init: float
    delay_cdf: np.ndarray
    rho_hat: float
    alpha: float
    fixed_arrival_profile: np.ndarray | None = None

    def __post_init__(self) -> None:
        samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise ValueError("samples must be a (S, n) array with n >= 1")
        if not np.all(np.isfinite(samples)) or np.any(samples < 0):
            raise ValueError("samples must be finite and >= 0")
        n = samples.shape[1]
        cdf = np.asarray(self.delay_cdf, dtype=np.float64)
        object.__setattr__(self, "delay_cdf", cdf)
        if cdf.shape != (n + 1,):
            raise ValueError(f"delay_cdf must have length n+1 = {n + 1}")
        if np.any(cdf < -1e-12) or np.any(cdf > 1 + 1e-12) or np.any(np.diff(cdf) < -1e-12):
            raise ValueError("delay_cdf must be a nondecreasing CDF in [0, 1]")
        if self.r_init < 0:
            raise ValueError("r_init must be >= 0")
        if not self.rho_hat >= 0:
            raise ValueError("rho_hat must be >= 0")
        as_alpha(self.alpha)
        if self.fixed_arrival_profile is not None:
            prof = np.asarray(self.fixed_arrival_profile, dtype=np.float64)
            if prof.shape != (n + 1,):
                raise ValueError(f"fixed_arrival_profile must have length {n + 1}")
            if np.any(prof < 0) or np.any(np.diff(prof) < -1e-12):
                raise ValueError("fixed_arrival_profile must be nonneg and nondecreasing")
            object.__setattr__(self, "fixed_arrival_profile", prof)

    @property
    def n(self) -> int:
        return int(self.samples.shape[1])

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @classmethod
    def from_estimate(
        cls,
        samples,
        r_init: float,
        estimate: ProviderEstimate,
        alpha,
        fixed_requests=(),
    ) -> "SaaProblem":
        """Build the LP data from a ProviderEstimate.

        fixed_requests is a sequence of (age_steps, count) for requests already
        in flight; their arrival probability by relative step t uses the delay
        law conditioned on not having arrived yet.
        """
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        n = samples.shape[1]
        cdf = np.array([estimate.delay_hat.cdf(d) for d in range(n + 1)])
        profile = None
        if fixed_requests:
            profile = np.zeros(n + 1)
            for age, count in fixed_requests:
                if age < 0 or count < 0:
                    raise ValueError("fixed_requests entries must be >= 0")
                c_age = estimate.delay_hat.cdf(age)
                if c_age >= 1.0:
                    # estimate says it must already be live; credit immediately
                    profile += count
                    continue
                for t in range(n + 1):
                    p = (estimate.delay_hat.cdf(age + t) - c_age) / (1.0 - c_age)
                    profile[t] += count * p
        return cls(samples, float(r_init), cdf, float(estimate.rho_hat), as_alpha(alpha), profile)


@dataclass
class LpModel:
    """Explicit LP of a SaaProblem: capacity map, bounds, and base path."""

    problem: SaaProblem
    A_cap: np.ndarray  # (n+1, p): capacity offset at step t per unit action
    B: np.ndarray      # (n+1,): base capacity path with no plan actions
    ub: np.ndarray     # (p,): upper bounds (rho_hat on q entries, inf on f)

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def n_actions(self) -> int:
        return self.n + 1

    @property
    def p(self) -> int:
        return 2 * self.n_actions

    def split(self, x: np.ndarray):
        return x[: self.n_actions], x[self.n_actions :]

    def capacity(self, x: np.ndarray) -> np.ndarray:
        """Expected capacity path r_hat_0..r_hat_n under schedule x = (q, f)."""
        return self.B + self.A_cap @ np.asarray(x, dtype=np.float64)

    def objective(self, x: np.ndarray) -> float:
        r = self.capacity(x)[1:]
        return float(
            np.mean(np.sum(pinball_loss(r[None, :], self.problem.samples, self.problem.alpha), axis=1))
        )

    def objective_batch(self, X: np.ndarray) -> np.ndarray:
        """SAA objective for many schedules at once; X has shape (m, p)."""
        R = X @ self.A_cap[1:].T + self.B[1:]
        z = self.problem.samples
        a = self.problem.alpha
        diff = R[:, None, :] - z[None, :, :]
        loss = np.where(diff > 0, (1 - a) * diff, -a * diff)
        return loss.sum(axis=2).mean(axis=1)

    def capacity_batch(self, X: np.ndarray) -> np.ndarray:
        return X @ self.A_cap.T + self.B


@dataclass(frozen=True)
class LpSolution:
    q: np.ndarray
    f: np.ndarray
    objective: float
    status: str  # "optimal" | "iteration-limit" | "infeasible"
    iterations: int
    rel_gap: float


def build_lp(problem: SaaProblem) -> LpModel:
    n1 = problem.n + 1
    c = problem.delay_cdf
    A_q = np.zeros((n1, n1))
    for t in range(n1):
        A_q[t, : t + 1] = c[t::-1]
    A_f = -np.tril(np.ones((n1, n1)))
    B = np.full(n1, float(problem.r_init))
    if problem.fixed_arrival_profile is not None:
        B = B + problem.fixed_arrival_profile
    ub = np.concatenate([np.full(n1, problem.rho_hat), np.full(n1, np.inf)])
    return LpModel(problem, np.hstack([A_q, A_f]), B, ub)


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest step in [0, 1] keeping v + step*dv >= 0."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _min_action_lp(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    ub: np.ndarray,
    x_start: np.ndarray,
    max_iterations: int = 100,
    tol: float = 1e-9,
) -> np.ndarray | None:
    """min c'x  s.t.  Ax = b, 0 <= x <= ub  (ub entries may be inf).

    Used to re-express an optimal schedule with the fewest total actions: the
    loss depends on x only through the capacity path Ax, whose map has a large
    null space, so the loss-optimizing phase returns x with cancelling
    request/release churn. Pinning Ax to the optimal path and minimizing
    action mass strips every null-ray component. Infeasible-start Mehrotra
    predictor-corrector; returns None if it fails to converge.
    """
    m, p = A.shape
    finite_ub = np.isfinite(ub)
    lo_clip = 1e-2 * (1.0 + float(np.abs(b).max(initial=0.0))) / max(p, 1)
    x = np.maximum(x_start, lo_clip)
    x = np.where(finite_ub, np.minimum(x, ub * (1.0 - 1e-6) + 1e-12), x)
    nu = np.zeros(m)
    xi_lo = np.ones(p)
    xi_up = np.where(finite_ub, 1.0, 0.0)
    n_terms = p + int(finite_ub.sum())
    scale_b = 1.0 + float(np.abs(b).max(initial=0.0))
    scale_c = 1.0 + float(np.abs(c).max(initial=0.0))
    best_x = None
    best_merit = math.inf
    best_pinf = math.inf

    saved_err = np.seterr(divide="ignore", invalid="ignore", over="ignore")
    for _ in range(max_iterations):
        gap_x = ub - x
        safe_gap = np.where(finite_ub, gap_x, 0.0)
        rp = b - A @ x
        rd = c - A.T @ nu - xi_lo + xi_up
        comp = float((x * xi_lo).sum() + (safe_gap * xi_up)[finite_ub].sum())
        mu_gap = comp / n_terms
        pinf = float(np.abs(rp).max(initial=0.0)) / scale_b
        dinf = float(np.abs(rd).max(initial=0.0)) / scale_c
        rel_gap = comp / (1.0 + abs(float(c @ x)))
        if not (math.isfinite(pinf) and math.isfinite(dinf) and math.isfinite(rel_gap)):
            break
        # pinf guards loss fidelity (tight); the action-mass gap only bounds
        # leftover churn, so 1e-4 relative is ample for clean rounding
        merit = max(pinf / tol, rel_gap / 1e-4, dinf / max(tol, 1e-7))
        if os.environ.get("SCALESIM_IPM_DEBUG2"):
            print(f"  p2: pinf={pinf:.3e} dinf={dinf:.3e} gap={rel_gap:.3e} merit={merit:.3e}")
        if merit < best_merit:
            best_merit = merit
            best_x = x.copy()
        if merit <= 1.0 or mu_gap <= 1e-18:
            break
        if pinf > max(100.0 * best_pinf, 1e-4):
            break  # equality tracking lost (degenerate vertex); keep best iterate
        best_pinf = min(best_pinf, pinf)

        dl = xi_lo / x
        du = np.where(finite_ub, xi_up / np.where(finite_ub, gap_x, 1.0), 0.0)
        d_inv = 1.0 / (dl + du)
        M = (A * d_inv[None, :]) @ A.T
        try:
            M_inv = np.linalg.inv(M + 1e-13 * np.trace(M) / m * np.eye(m))
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(M_inv)):
            break

        def newton(rc_l, rc_u):
            r1 = rd - rc_l / x + np.where(finite_ub, rc_u / np.where(finite_ub, gap_x, 1.0), 0.0)
            rhs = rp + A @ (d_inv * r1)
            dnu = M_inv @ rhs
            dx = d_inv * (A.T @ dnu - r1)
            dxi_lo = (rc_l - xi_lo * dx) / x
            dxi_up = np.where(finite_ub, (rc_u + xi_up * dx) / np.where(finite_ub, gap_x, 1.0), 0.0)
            return dx, dnu, dxi_lo, dxi_up

        def step_lengths(d):
            dx, _, dxi_lo, dxi_up = d
            a_p = min(
                _max_step(x, dx),
                _max_step(gap_x[finite_ub], -dx[finite_ub]) if finite_ub.any() else 1.0,
            )
            a_d = min(
                _max_step(xi_lo, dxi_lo),
                _max_step(xi_up[finite_ub], dxi_up[finite_ub]) if finite_ub.any() else 1.0,
            )
            return a_p, a_d

        aff = newton(-x * xi_lo, -safe_gap * xi_up)
        ap_aff, ad_aff = step_lengths(aff)
        comp_aff = float(
            ((x + ap_aff * aff[0]) * (xi_lo + ad_aff * aff[2])).sum()
            + ((ub - x - ap_aff * aff[0])[finite_ub] * (xi_up + ad_aff * aff[3])[finite_ub]).sum()
        )
        sigma = min(1.0, max(1e-8, (comp_aff / comp) ** 3)) if comp > 0 else 0.1
        tau = sigma * mu_gap
        corr = newton(
            tau - x * xi_lo - aff[0] * aff[2],
            np.where(finite_ub, tau, 0.0) - safe_gap * xi_up + aff[0] * aff[3],
        )
        a_p, a_d = step_lengths(corr)
        a_p = min(1.0, 0.9995 * a_p)
        a_d = min(1.0, 0.9995 * a_d)
        x_new = x + a_p * corr[0]
        if not np.all(np.isfinite(x_new)):
            break
        x = x_new
        nu = nu + a_d * corr[1]
        xi_lo = xi_lo + a_d * corr[2]
        xi_up = np.where(finite_ub, xi_up + a_d * corr[3], 0.0)
    np.seterr(**saved_err)

    if best_x is None or best_merit > 10.0:
        return None
    return best_x


def _canonical_vertex(model: LpModel, x: np.ndarray) -> np.ndarray:
    """Deterministic cleanup of an optimal-face point.

    Interior-point iterates converge to face centers, not vertices: when
    several schedules share the optimal loss (e.g. request+release raised
    together under zero delay, or a request split across loss-equivalent
    steps), the returned point carries fractional mass that rounds badly.
    Sweeps of verified moves fix the representation without touching the
    objective: net out request/release pairs that cancel in capacity, defer
    request mass to the latest loss-neutral step, advance release mass to
    the earliest, and finally move any release (or request) off a step that
    still carries the other kind of action, since such a pair is not churn
    but would be netted by the rounding post-pass. Every move is accepted
    only if the capacity path stays feasible and the recomputed loss does
    not increase.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    n1 = model.n_actions
    rho = model.problem.rho_hat
    base = model.objective(x)
    atol = 1e-11 * (1.0 + abs(base))

    def accept(trial: np.ndarray) -> bool:
        nonlocal base, x
        if model.capacity(trial).min() < -1e-9:
            return False
        val = model.objective(trial)
        if val <= base + atol:
            x = trial
            base = min(base, val)
            return True
        return False

    def strip_idle() -> None:
        # drop actions with no effect on the loss (e.g. requests whose
        # arrivals fall entirely past the horizon)
        for i in range(2 * n1):
            if x[i] > 1e-12:
                t = x.copy()
                t[i] = 0.0
                accept(t)

    strip_idle()
    for i in range(n1):  # net request/release pairs that cancel in capacity
        if x[i] <= 1e-12:
            continue
        for j in range(n1):
            m = min(x[i], x[n1 + j])
            if m > 1e-12:
                t = x.copy()
                t[i] -= m
                t[n1 + j] -= m
                accept(t)
    for i in range(n1 - 1):  # cascade request mass rightward
        room = rho - x[i + 1] if math.isfinite(rho) else math.inf
        m = min(x[i], room)
        if m > 1e-12:
            t = x.copy()
            t[i] -= m
            t[i + 1] += m
            accept(t)
    for i in range(n1 - 2, -1, -1):  # cascade release mass leftward
        m = x[n1 + i + 1]
        if m > 1e-12:
            t = x.copy()
            t[n1 + i + 1] -= m
            t[n1 + i] += m
            accept(t)

    def relocate(src: int, dst: int, offset: int, mass: float) -> bool:
        t = x.copy()
        t[offset + src] -= mass
        t[offset + dst] += mass
        return accept(t)

    # A request and a release parked on the same step are NOT churn when the
    # request is still maturing (the release acts now, the request later), yet
    # the rounding post-pass nets same-step pairs unconditionally. Move the
    # release (or failing that, the request) to a loss-neutral step of its
    # own so netting only ever cancels genuine churn.
    for i in range(n1):
        if x[i] <= 1e-12 or x[n1 + i] <= 1e-12:
            continue
        for j in range(n1 - 1, -1, -1):
            if j == i or x[j] > 1e-12:
                continue
            if relocate(i, j, n1, x[n1 + i]):
                break
        else:
            for j in range(n1 - 1, -1, -1):
                if j == i or x[n1 + j] > 1e-12:
                    continue
                if relocate(i, j, 0, x[i]):
                    break
    strip_idle()
    return x


def solve_lp(
    model: LpModel, max_iterations: int = 500, tol: float = 1e-9, tie_eps: float = 1e-9
) -> LpSolution:
    """Mehrotra predictor-corrector IPM on the reduced (q, f) system.

    tie_eps charges every requested or released host an infinitesimal fee
    (plus an even smaller early-request / late-release surcharge). Equal-loss
    schedules are therefore resolved to the minimal-action vertex — without
    it, (q_i, f_i) raised together is a cost-free ray under zero delay and the
    iterates park on fractional face centers that round badly. The reported
    objective is always the unperturbed loss of the returned point.
    """
    prob = model.problem
    S, n = prob.n_samples, prob.n
    alpha = prob.alpha
    w = 1.0 / S

    active = model.ub > 0  # rho_hat = 0 pins those q to zero
    A = model.A_cap[:, active]
    ub = model.ub[active]
    p = int(active.sum())
    finite_ub = np.isfinite(ub)
    B = model.B
    h = prob.samples - B[1:]  # (S, n)
    n1 = n + 1
    idx = np.arange(n1)
    cost_q = tie_eps * (1.0 + (n1 - idx) / (100.0 * n1))
    cost_f = tie_eps * (1.0 + (idx + 1.0) / (100.0 * n1))
    c_x = np.concatenate([cost_q, cost_f])[active]

    # interior start
    x = np.where(finite_ub, np.minimum(1.0, ub / 2.0), 1.0)
    x = np.maximum(x, 1e-3 * np.where(finite_ub, ub, 1.0))
    Rx = A @ x
    r0 = h - Rx[1:]
    e_pos = np.maximum(r0, 0.0) + 1.0
    e_neg = np.maximum(-r0, 0.0) + 1.0
    s = np.maximum(B + Rx, 1.0)
    lam = np.full((S, n), w * (2.0 * alpha - 1.0) / 2.0)
    mu = np.full(n + 1, w)
    xi_lo = np.full(p, w)
    xi_up = np.where(finite_ub, w, 0.0)

    n_terms = 2 * S * n + (n + 1) + p + int(finite_ub.sum())
    scale_p = 1.0 + max(np.abs(h).max(initial=0.0), np.abs(B).max(initial=0.0))
    # primal feasibility and gap converge to tol. The dual residual, however,
    # turns into noise once the iterate lands on a degenerate optimal face
    # (the Newton system is numerically singular there), so the dual side is
    # certified by the best residual seen at any iterate that already had a
    # small gap — the primal only improves afterwards.
    tol_d = max(tol, 1e-5)
    dinf_cert = math.inf
    status = "iteration-limit"
    iterations = max_iterations
    rel_gap = math.inf
    best_x = x.copy()
    best_merit = math.inf
    final_x = None
    final_gap = math.inf
    polishing = False
    debug = bool(os.environ.get("SCALESIM_IPM_DEBUG"))

    # division by slacks that underflow to 0 is expected on the optimal face;
    # every non-finite outcome is detected and handled via the breaks below
    saved_err = np.seterr(divide="ignore", invalid="ignore", over="ignore")
    for it in range(1, max_iterations + 1):
        pi_pos = w * alpha - lam
        pi_neg = w * (1.0 - alpha) + lam
        Rx = A @ x
        rp1 = h - Rx[1:] - e_pos + e_neg
        rp2 = -B - Rx + s
        dual_vec = np.concatenate([[0.0], lam.sum(axis=0)]) + mu
        rd = c_x - (A.T @ dual_vec + xi_lo - xi_up)

        comp = float(
            (e_pos * pi_pos).sum()
            + (e_neg * pi_neg).sum()
            + (s * mu).sum()
            + (x * xi_lo).sum()
            + ((ub - x)[finite_ub] * xi_up[finite_ub]).sum()
        )
        mu_gap = comp / n_terms
        obj_now = float(w * (alpha * e_pos.sum() + (1.0 - alpha) * e_neg.sum()))
        pinf = max(np.abs(rp1).max(initial=0.0), np.abs(rp2).max(initial=0.0)) / scale_p
        dinf = np.abs(rd).max(initial=0.0) / (1.0 + w)
        rel_gap = comp / (1.0 + abs(obj_now))
        if debug:
            print(
                f"it={it} pinf={pinf:.3e} dinf={dinf:.3e} gap={rel_gap:.3e} "
                f"minx={x.min(initial=math.inf):.3e} mins={s.min():.3e} "
                f"minmu={mu.min():.3e} minxil={xi_lo.min(initial=math.inf):.3e}"
            )
        if not (math.isfinite(pinf) and math.isfinite(rel_gap) and math.isfinite(dinf)):
            break
        if rel_gap <= 1e-4:
            dinf_cert = min(dinf_cert, dinf)
        merit = max(pinf / tol, rel_gap / tol, dinf_cert / tol_d)
        if polishing:
            # converged already; a few extra iterations tighten complementarity
            if pinf / tol <= 10.0 and rel_gap <= final_gap:
                final_x = x.copy()
                final_gap = rel_gap
            if mu_gap <= 1e-16:
                break
        else:
            iter_merit = max(pinf / tol, rel_gap / tol, dinf / tol_d)
            if iter_merit < best_merit:
                best_merit = iter_merit
                best_x = x.copy()
            if merit <= 1.0:
                status = "optimal"
                iterations = it - 1
                polishing = True
                final_x = x.copy()
                final_gap = rel_gap
            elif mu_gap <= 1e-18:
                break  # complementarity at numerical floor; no further progress

        d1 = e_pos / pi_pos + e_neg / pi_neg     # (S, n)
        d2 = s / mu                              # (n+1,)
        gap_x = ub - x
        safe_gap = np.where(finite_ub, gap_x, 0.0)  # avoids inf*0 on unbounded vars
        dl = xi_lo / x
        du = np.where(finite_ub, xi_up / np.where(finite_ub, gap_x, 1.0), 0.0)

        # shared Gram matrix: objective rows (t >= 1, summed over s) + capacity rows
        psi = 1.0 / d2
        psi_obj = (1.0 / d1).sum(axis=0)
        psi = psi + np.concatenate([[0.0], psi_obj])
        H = (A * psi[:, None]).T @ A
        H[np.diag_indices_from(H)] += dl + du
        if not np.all(np.isfinite(H)):
            break

        H_inv = None
        ridge = 0.0
        while H_inv is None:
            try:
                H_inv = np.linalg.inv(H if ridge == 0.0 else H + ridge * np.eye(p))
                if not np.all(np.isfinite(H_inv)):
                    raise np.linalg.LinAlgError("non-finite inverse")
            except np.linalg.LinAlgError:
                H_inv = None
                ridge = max(ridge * 100.0, 1e-12 * max(1.0, float(np.trace(H)) / p))
                if ridge > 1e-3 * max(1.0, float(np.trace(H)) / p):
                    break
        if H_inv is None:
            break

        def newton(rc1, rc2, rc3, rc4, rc5):
            u1 = rp1 - rc1 / pi_pos + rc2 / pi_neg
            u2 = rp2 + rc3 / mu
            vec = np.concatenate([[0.0], (u1 / d1).sum(axis=0)]) + u2 / d2
            rhs = A.T @ vec + rc4 / x - np.where(finite_ub, rc5 / np.where(finite_ub, gap_x, 1.0), 0.0) - rd
            dx = H_inv @ rhs
            Adx = A @ dx
            dlam = (u1 - Adx[1:]) / d1
            dmu = (u2 - Adx) / d2
            dpi_pos = -dlam
            dpi_neg = dlam
            de_pos = (rc1 - e_pos * dpi_pos) / pi_pos
            de_neg = (rc2 - e_neg * dpi_neg) / pi_neg
            ds = (rc3 - s * dmu) / mu
            dxi_lo = (rc4 - xi_lo * dx) / x
            dxi_up = np.where(
                finite_ub, (rc5 + xi_up * dx) / np.where(finite_ub, gap_x, 1.0), 0.0
            )
            return dx, de_pos, de_neg, ds, dlam, dmu, dxi_lo, dxi_up, dpi_pos, dpi_neg

        def step_lengths(d):
            dx, de_pos, de_neg, ds, dlam, dmu, dxi_lo, dxi_up, dpi_pos, dpi_neg = d
            a_p = min(
                _max_step(x, dx),
                _max_step(gap_x[finite_ub], -dx[finite_ub]) if finite_ub.any() else 1.0,
                _max_step(e_pos.ravel(), de_pos.ravel()),
                _max_step(e_neg.ravel(), de_neg.ravel()),
                _max_step(s, ds),
            )
            a_d = min(
                _max_step(pi_pos.ravel(), dpi_pos.ravel()),
                _max_step(pi_neg.ravel(), dpi_neg.ravel()),
                _max_step(mu, dmu),
                _max_step(xi_lo, dxi_lo),
                _max_step(xi_up[finite_ub], dxi_up[finite_ub]) if finite_ub.any() else 1.0,
            )
            return a_p, a_d

        # predictor
        zero5 = (
            -e_pos * pi_pos,
            -e_neg * pi_neg,
            -s * mu,
            -x * xi_lo,
            -safe_gap * xi_up,
        )
        aff = newton(*zero5)
        ap_aff, ad_aff = step_lengths(aff)
        comp_aff = float(
            ((e_pos + ap_aff * aff[1]) * (pi_pos + ad_aff * aff[8])).sum()
            + ((e_neg + ap_aff * aff[2]) * (pi_neg + ad_aff * aff[9])).sum()
            + ((s + ap_aff * aff[3]) * (mu + ad_aff * aff[5])).sum()
            + ((x + ap_aff * aff[0]) * (xi_lo + ad_aff * aff[6])).sum()
            + ((ub - x - ap_aff * aff[0])[finite_ub] * (xi_up + ad_aff * aff[7])[finite_ub]).sum()
        )
        sigma = min(1.0, max(1e-8, (comp_aff / comp) ** 3)) if comp > 0 else 0.1
        tau = sigma * mu_gap

        # corrector with second-order terms
        corr = newton(
            tau - e_pos * pi_pos - aff[1] * aff[8],
            tau - e_neg * pi_neg - aff[2] * aff[9],
            tau - s * mu - aff[3] * aff[5],
            tau - x * xi_lo - aff[0] * aff[6],
            np.where(finite_ub, tau, 0.0) - safe_gap * xi_up + aff[0] * aff[7],
        )
        a_p, a_d = step_lengths(corr)
        a_p = min(1.0, 0.9995 * a_p)
        a_d = min(1.0, 0.9995 * a_d)

        x_new = x + a_p * corr[0]
        if not np.all(np.isfinite(x_new)):
            break
        x = x_new
        e_pos = e_pos + a_p * corr[1]
        e_neg = e_neg + a_p * corr[2]
        s = s + a_p * corr[3]
        lam = lam + a_d * corr[4]
        mu = mu + a_d * corr[5]
        xi_lo = xi_lo + a_d * corr[6]
        xi_up = np.where(finite_ub, xi_up + a_d * corr[7], 0.0)

    np.seterr(**saved_err)
    chosen = final_x if final_x is not None else best_x
    chosen = np.clip(chosen, 0.0, np.where(np.isfinite(ub), ub, np.inf))
    x_full = np.zeros(model.p)
    x_full[active] = chosen
    obj0 = model.objective(x_full)
    # re-express the schedule with minimal total action mass at the same
    # capacity path (strips request/release churn along null rays), with a
    # placement surcharge: late requests and early releases win ties
    act_cost = np.concatenate(
        [1.0 + (n1 - idx) / (1000.0 * n1), 1.0 + (idx + 1.0) / (1000.0 * n1)]
    )[active]
    # pin the capacity path only where the loss sees it (t >= 1); step 0 just
    # needs feasibility, expressed as a costless slack column s0 = r_hat_0
    cap_path = A @ chosen
    A_aug = np.hstack([A, np.zeros((n1, 1))])
    A_aug[0, -1] = -1.0
    b_aug = np.concatenate([[-B[0]], cap_path[1:]])
    x2 = _min_action_lp(
        A_aug,
        b_aug,
        np.concatenate([act_cost, [0.0]]),
        np.concatenate([ub, [np.inf]]),
        np.concatenate([chosen, [cap_path[0] + B[0]]]),
    )
    x2 = None if x2 is None else x2[:p]
    if debug:
        print("phase2 none?", x2 is None)
    if x2 is not None:
        cand = np.zeros(model.p)
        cand[active] = np.clip(x2, 0.0, np.where(np.isfinite(ub), ub, np.inf))
        if debug:
            print(
                "phase2 capmin", model.capacity(cand).min(),
                "obj2", model.objective(cand), "obj0", obj0,
            )
        if (
            model.capacity(cand).min() >= -1e-9
            and model.objective(cand) <= obj0 + 5e-7 * (1.0 + abs(obj0))
        ):
            x_full = cand
    x_full = _canonical_vertex(model, x_full)
    q, f = model.split(x_full)
    return LpSolution(
        q=q.copy(),
        f=f.copy(),
        objective=model.objective(x_full),
        status=status,
        iterations=iterations if status == "optimal" else max_iterations,
        rel_gap=float(final_gap if final_x is not None else rel_gap),
    )


def randomized_round(q, f, rho_hat: float, seed: RngSeed):
    """floor(x) + Bernoulli(frac(x)) per entry; q clamped to floor(rho_hat);
    simultaneous request+release at one step netted out."""
    rng = seed.rng()
    q = np.maximum(np.asarray(q, dtype=np.float64), 0.0)
    f = np.maximum(np.asarray(f, dtype=np.float64), 0.0)

    def bern_round(v):
        fl = np.floor(v)
        return (fl + (rng.random(v.shape) < (v - fl))).astype(np.int64)

    q_i = bern_round(q)
    f_i = bern_round(f)
    if math.isfinite(rho_hat):
        q_i = np.minimum(q_i, int(math.floor(rho_hat)))
    nets = np.minimum(q_i, f_i)
    return q_i - nets, f_i - nets


def solve(
    problem: SaaProblem,
    k: int,
    seed: RngSeed,
    max_iterations: int = 500,
    rounding_draws: int = 1,
):
    """Solve the relaxation, round, and return the first k steps as a plan.

    With rounding_draws > 1, that many independent roundings of the relaxed
    optimum are drawn (all from `seed`'s stream, so the result stays
    deterministic) and the one with the lowest sample-average objective is
    kept.
    """
    from .policies import ScalingPlan  # deferred: policies imports this module

    if k < 1:
        raise ValueError("k must be >= 1")
    if rounding_draws < 1:
        raise ValueError("rounding_draws must be >= 1")
    model = build_lp(problem)
    sol = solve_lp(model, max_iterations=max_iterations)
    if sol.status == "infeasible":
        raise OptimizerError(f"LP reported infeasible after {sol.iterations} iterations")
    best_qf = None
    best_obj = math.inf
    for j in range(rounding_draws):
        q_i, f_i = randomized_round(sol.q, sol.f, problem.rho_hat, seed.child(f"draw{j}"))
        obj = model.objective(np.concatenate([q_i, f_i]).astype(np.float64))
        if obj < best_obj:
            best_obj = obj
            best_qf = (q_i, f_i)
    q_i, f_i = best_qf
    k = min(k, len(q_i))
    return ScalingPlan(start=0, q=q_i[:k], f=f_i[:k])
