"""Dense convex QP solver.

Operator-splitting ADMM in the standard two-block form

    minimize   0.5 x'Hx + f'x
    subject to l <= Ax <= u

with over-relaxation (alpha = 1.6), Ruiz equilibration, an adaptive penalty
parameter, and an active-set polish step that refines the ADMM iterate to
high accuracy.  Everything is dense numpy; problems here are tiny (tens of
variables), so each penalty update simply refactors the reduced KKT matrix.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

INF = 1e30


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass
class QpProblem:
    """Convex QP with inequality rows (A_in x <= b_in), equality rows and box bounds."""

    hessian: np.ndarray
    linear: np.ndarray
    a_ineq: np.ndarray | None = None
    b_ineq: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.hessian = np.asarray(self.hessian, dtype=float)
        self.linear = np.asarray(self.linear, dtype=float).ravel()
        n = self.linear.size
        if self.hessian.shape != (n, n):
            raise ValueError("hessian / linear dimension mismatch")
        asym = np.linalg.norm(self.hessian - self.hessian.T)
        if asym > 1e-8 * max(1.0, np.linalg.norm(self.hessian)):
            raise ValueError("hessian must be symmetric")
        self.hessian = 0.5 * (self.hessian + self.hessian.T)
        w = np.linalg.eigvalsh(self.hessian)
        if w.size and w[0] < -1e-8 * max(1.0, abs(w[-1])):
            raise ValueError(f"hessian is not PSD (min eigenvalue {w[0]:.3e})")

    @property
    def n(self) -> int:
        return self.linear.size

    def stacked_rows(self):
        """Return (A, l, u) with inequality, equality and bound rows stacked."""
        n = self.n
        blocks, lows, ups = [], [], []
        if self.a_ineq is not None and len(self.a_ineq):
            a = np.atleast_2d(np.asarray(self.a_ineq, dtype=float))
            b = np.asarray(self.b_ineq, dtype=float).ravel()
            if a.shape != (b.size, n):
                raise ValueError("inequality block dimension mismatch")
            blocks.append(a)
            lows.append(np.full(b.size, -INF))
            ups.append(b)
        if self.a_eq is not None and len(self.a_eq):
            a = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
            b = np.asarray(self.b_eq, dtype=float).ravel()
            if a.shape != (b.size, n):
                raise ValueError("equality block dimension mismatch")
            blocks.append(a)
            lows.append(b)
            ups.append(b)
        if self.lower is not None or self.upper is not None:
            lo = np.full(n, -INF) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
            hi = np.full(n, INF) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
            lo = np.where(np.isfinite(lo), lo, -INF)
            hi = np.where(np.isfinite(hi), hi, INF)
            keep = (lo > -INF) | (hi < INF)
            if np.any(keep):
                eye = np.eye(n)[keep]
                blocks.append(eye)
                lows.append(lo[keep])
                ups.append(hi[keep])
        if not blocks:
            return np.zeros((0, n)), np.zeros(0), np.zeros(0)
        return np.vstack(blocks), np.concatenate(lows), np.concatenate(ups)

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.hessian @ x + self.linear @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: QpStatus
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class QpSettings:
    max_iter: int = 4000
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    eps_infeas: float = 1e-9
    alpha: float = 1.6          # over-relaxation
    sigma: float = 1e-6
    rho: float = 0.1
    rho_eq_scale: float = 1e3   # stiffer penalty on equality rows
    adapt_interval: int = 50
    polish: bool = True
    polish_reg: float = 1e-9


def _ruiz_equilibrate(h, q, a, iters=10):
    """Symmetric diagonal scaling of [[H, A'], [A, 0]] plus cost scaling."""
    n, m = h.shape[0], a.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    c = 1.0
    hs, qs, as_ = h.copy(), q.copy(), a.copy()
    for _ in range(iters):
        col = np.sqrt(np.maximum(
            np.maximum(np.abs(hs).max(axis=0, initial=0.0),
                       np.abs(as_).max(axis=0, initial=0.0)), 1e-8))
        row = np.sqrt(np.maximum(np.abs(as_).max(axis=1, initial=0.0), 1e-8)) if m else np.ones(0)
        dk = 1.0 / col
        ek = 1.0 / row if m else row
        hs = hs * dk[:, None] * dk[None, :]
        qs = qs * dk
        if m:
            as_ = as_ * ek[:, None] * dk[None, :]
        d *= dk
        e *= ek
        # cost scaling keeps the scaled Hessian near unit magnitude
        gamma = max(np.abs(hs).max(initial=0.0), np.abs(qs).max(initial=0.0), 1e-8)
        ck = 1.0 / gamma
        hs *= ck
        qs *= ck
        c *= ck
    return hs, qs, as_, d, e, c


def _polish(problem, a, l, u, x, y, settings):
    """Equality-constrained refinement on the active set detected from y."""
    n = problem.n
    finite = np.concatenate([l[l > -INF], u[u < INF]])
    tol = 1e-7 * (1.0 + (np.abs(finite).max() if finite.size else 0.0))
    z = a @ x if a.size else np.zeros(0)
    low_active = (y < 0) & (l > -INF) | ((np.abs(z - l) < tol) & (l > -INF))
    upp_active = (y > 0) & (u < INF) | ((np.abs(z - u) < tol) & (u < INF))
    upp_active &= ~low_active
    act = low_active | upp_active
    a_act = a[act]
    b_act = np.where(low_active[act], l[act], u[act])
    k = a_act.shape[0]
    reg = settings.polish_reg
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = problem.hessian + reg * np.eye(n)
    kkt[:n, n:] = a_act.T
    kkt[n:, :n] = a_act
    kkt[n:, n:] = -reg * np.eye(k)
    rhs = np.concatenate([-problem.linear, b_act])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    # a few rounds of iterative refinement against the unregularized KKT
    kkt0 = kkt.copy()
    kkt0[:n, :n] -= reg * np.eye(n)
    kkt0[n:, n:] += reg * np.eye(k)
    for _ in range(3):
        r = rhs - kkt0 @ sol
        try:
            sol += np.linalg.solve(kkt, r)
        except np.linalg.LinAlgError:
            break
    x_pol = sol[:n]
    y_pol = np.zeros(a.shape[0])
    y_pol[act] = sol[n:]
    return x_pol, y_pol


def _residuals(problem, a, l, u, x, y):
    z = a @ x if a.size else np.zeros(0)
    if a.size:
        r_prim = float(np.max(np.maximum(z - u, 0.0) + np.maximum(l - z, 0.0), initial=0.0))
    else:
        r_prim = 0.0
    dual_vec = problem.hessian @ x + problem.linear + (a.T @ y if a.size else 0.0)
    r_dual = float(np.abs(dual_vec).max(initial=0.0))
    # complementarity: multipliers only on their own side
    if a.size:
        slack_u = np.where(u < INF, u - z, np.inf)
        slack_l = np.where(l > -INF, z - l, np.inf)
        comp = np.maximum(np.where(y > 0, y * np.minimum(slack_u, INF), 0.0),
                          np.where(y < 0, -y * np.minimum(slack_l, INF), 0.0))
        r_comp = float(np.max(comp, initial=0.0))
    else:
        r_comp = 0.0
    scale_p = 1.0 + float(np.abs(z).max(initial=0.0))
    scale_d = 1.0 + float(np.abs(problem.hessian @ x).max(initial=0.0)) \
        + float(np.abs(problem.linear).max(initial=0.0))
    return r_prim / scale_p, r_dual / scale_d, r_comp / (scale_p * scale_d)


def solve_qp(problem: QpProblem, warm_start=None, settings: QpSettings | None = None) -> QpSolution:
    """Solve a convex QP.  Deterministic for fixed inputs.

    ``warm_start`` may be a pair (x0, y0) from a previous related solve.
    """
    settings = settings or QpSettings()
    a, l, u = problem.stacked_rows()
    n, m = problem.n, a.shape[0]

    if m == 0:
        # unconstrained: direct solve, falling back to a regularized one
        try:
            x = np.linalg.solve(problem.hessian, -problem.linear)
        except np.linalg.LinAlgError:
            x = np.linalg.solve(problem.hessian + settings.sigma * np.eye(n), -problem.linear)
        r = float(np.abs(problem.hessian @ x + problem.linear).max(initial=0.0))
        return QpSolution(x, problem.objective(x), r, 1, QpStatus.OPTIMAL)

    hs, qs, as_, d, e, c = _ruiz_equilibrate(problem.hessian, problem.linear, a)
    ls = e * l if m else l
    us = e * u if m else u
    ls = np.where(l <= -INF, -INF, ls)
    us = np.where(u >= INF, INF, us)

    eq_rows = (l == u)
    rho = np.full(m, settings.rho)
    rho[eq_rows] *= settings.rho_eq_scale

    if warm_start is not None:
        x = np.asarray(warm_start[0], dtype=float) / d
        y = c * np.asarray(warm_start[1], dtype=float) / e if len(warm_start) > 1 and warm_start[1] is not None else np.zeros(m)
    else:
        x = np.zeros(n)
        y = np.zeros(m)
    z = np.clip(as_ @ x, ls, us)

    def factor(rho_vec):
        return np.linalg.cholesky(hs + settings.sigma * np.eye(n) + (as_.T * rho_vec) @ as_)

    chol_f = factor(rho)
    alpha = settings.alpha
    sigma = settings.sigma
    status = QpStatus.MAX_ITER
    it = 0
    for it in range(1, settings.max_iter + 1):
        rhs = sigma * x - qs + as_.T @ (rho * z - y)
        x_t = np.linalg.solve(chol_f.T, np.linalg.solve(chol_f, rhs))
        z_t = as_ @ x_t
        x_new = alpha * x_t + (1 - alpha) * x
        z_relax = alpha * z_t + (1 - alpha) * z
        z_new = np.clip(z_relax + y / rho, ls, us)
        y_new = y + rho * (z_relax - z_new)

        dy = y_new - y
        dx = x_new - x
        x, z, y = x_new, z_new, y_new

        if it % 10 == 0 or it == settings.max_iter:
            r_p = float(np.abs(as_ @ x - z).max(initial=0.0))
            r_d = float(np.abs(hs @ x + qs + as_.T @ y).max(initial=0.0))
            s_p = 1.0 + max(float(np.abs(as_ @ x).max(initial=0.0)), float(np.abs(z).max(initial=0.0)))
            s_d = 1.0 + max(float(np.abs(hs @ x).max(initial=0.0)), float(np.abs(as_.T @ y).max(initial=0.0)),
                            float(np.abs(qs).max(initial=0.0)))
            if r_p <= settings.eps_abs + settings.eps_rel * s_p and \
               r_d <= settings.eps_abs + settings.eps_rel * s_d:
                status = QpStatus.OPTIMAL
                break
            # primal infeasibility certificate on the dual step direction
            ndy = float(np.abs(dy).max(initial=0.0))
            if ndy > 1e-14:
                at_dy = float(np.abs(as_.T @ dy).max(initial=0.0))
                support = float(np.where(dy > 0, np.where(us < INF, us, 0.0) * dy, 0.0).sum()
                                + np.where(dy < 0, np.where(ls > -INF, ls, 0.0) * dy, 0.0).sum())
                bounded = np.all((dy <= 1e-12) | (us < INF)) and np.all((dy >= -1e-12) | (ls > -INF))
                if bounded and at_dy <= settings.eps_infeas * ndy and support < -settings.eps_infeas * ndy:
                    status = QpStatus.INFEASIBLE
                    break
            if it % settings.adapt_interval == 0:
                ratio = np.sqrt((r_p / max(s_p, 1e-12)) / max(r_d / max(s_d, 1e-12), 1e-12))
                ratio = float(np.clip(ratio, 1e-3, 1e3))
                if ratio > 5.0 or ratio < 0.2:
                    rho = np.clip(rho * ratio, 1e-6, 1e6)
                    chol_f = factor(rho)

    # undo scaling
    x_u = d * x
    y_u = (e * y) / c

    if status is QpStatus.INFEASIBLE:
        return QpSolution(x_u, np.nan, np.inf, it, status, y_u)

    if settings.polish and status is QpStatus.OPTIMAL:
        polished = _polish(problem, a, l, u, x_u, y_u, settings)
        if polished is not None:
            x_p, y_p = polished
            if np.all(np.isfinite(x_p)):
                r_old = max(_residuals(problem, a, l, u, x_u, y_u))
                r_new = max(_residuals(problem, a, l, u, x_p, y_p))
                if r_new <= r_old:
                    x_u, y_u = x_p, y_p

    kkt = max(_residuals(problem, a, l, u, x_u, y_u))
    return QpSolution(x_u, problem.objective(x_u), kkt, it, status, y_u)


def active_set_oracle(problem: QpProblem):
    """Brute-force active-set enumeration for small strictly convex QPs.

    Solves the KKT system for every subset of inequality/bound rows taken
    active (equalities always active), keeps the best feasible candidate with
    nonnegative multipliers.  Test oracle only: cost grows as 2^m.
    """
    from itertools import combinations

    a, l, u = problem.stacked_rows()
    n, m = problem.n, a.shape[0]
    eq = np.where(l == u)[0]
    ineq = np.where(l != u)[0]
    # treat two-sided rows as two one-sided candidates
    candidates = []
    for idx in ineq:
        if u[idx] < INF:
            candidates.append((idx, u[idx], +1))
        if l[idx] > -INF:
            candidates.append((idx, l[idx], -1))
    best = None
    for k in range(len(candidates) + 1):
        for combo in combinations(range(len(candidates)), k):
            rows = list(eq) + [candidates[i][0] for i in combo]
            if len(set(rows)) != len(rows):
                continue
            a_act = a[rows]
            b_act = np.concatenate([l[eq], [candidates[i][1] for i in combo]])
            kkt = np.block([
                [problem.hessian, a_act.T],
                [a_act, np.zeros((len(rows), len(rows)))],
            ])
            rhs = np.concatenate([-problem.linear, b_act])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            lam = sol[n:]
            z = a @ x
            if np.any(z > u + 1e-7) or np.any(z < l - 1e-7):
                continue
            signs = np.array([1.0] * len(eq) + [candidates[i][2] for i in combo])
            if np.any(signs[len(eq):] * lam[len(eq):] < -1e-7):
                continue
            obj = problem.objective(x)
            if best is None or obj < best[1] - 1e-12:
                best = (x, obj)
    return best
