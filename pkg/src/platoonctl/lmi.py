"""Affine LMI feasibility / linear-objective solver.

Problems are stated over symmetric (and rectangular) matrix variables with
block constraints that must be negative definite or positive semidefinite.
Each constraint is supplied as a plain assembly callable; the solver compiles
it into the explicit affine form F(x) = F0 + sum_i x_i F_i by probing unit
vectors, validates affinity at a random point, and then runs a log-det
barrier interior-point method with eigenvalue-based step clipping.

Sizes here stay small (blocks up to ~70), so everything is dense numpy and
Hessians are assembled exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import eig_sym


class LmiStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"
    NUMERICAL = "numerical_breakdown"


class _Var:
    __slots__ = ("name", "kind", "shape", "offset", "size")

    def __init__(self, name, kind, shape, offset):
        self.name = name
        self.kind = kind
        self.shape = shape
        d = shape[0]
        self.size = d * (d + 1) // 2 if kind == "sym" else shape[0] * shape[1]
        self.offset = offset


class _Constraint:
    __slots__ = ("name", "size", "sense", "assemble", "f0", "fs", "idx", "eps")

    def __init__(self, name, size, sense, assemble):
        self.name = name
        self.size = size
        self.sense = sense
        self.assemble = assemble
        self.f0 = None
        self.fs = None
        self.idx = None
        self.eps = 0.0


@dataclass
class LmiSolution:
    values: dict
    objective: float
    margins: dict
    status: LmiStatus
    iterations: int
    phase1_margin: float = np.nan


@dataclass
class LmiSettings:
    eps_feas: float = 1e-7          # certificate tolerance on reported margins
    eps_strict_rel: float = 1e-6    # strict "< 0" becomes "<= -eps * scale"
    phase1_margin: float = 1e-6     # interior depth required before phase 2
    mu: float = 20.0                # barrier parameter growth
    gap_tol: float = 1e-7           # absolute objective gap target
    max_centerings: int = 60
    max_newton: int = 60
    newton_tol: float = 1e-9
    armijo: float = 0.01
    backtrack: float = 0.5
    feas_frac: float = 0.98         # fraction of the eigenvalue-clipped step
    max_phase1_iters: int = 400


class LmiProblem:
    """Container for matrix variables and affine definite constraints."""

    def __init__(self):
        self.variables: list[_Var] = []
        self._by_name: dict[str, _Var] = {}
        self.constraints: list[_Constraint] = []
        self.dim = 0
        self._compiled = False

    # -- variable layout ---------------------------------------------------

    def add_sym(self, name: str, d: int) -> str:
        return self._add(name, "sym", (d, d))

    def add_rect(self, name: str, rows: int, cols: int) -> str:
        return self._add(name, "rect", (rows, cols))

    def _add(self, name, kind, shape):
        if name in self._by_name:
            raise ValueError(f"duplicate variable {name!r}")
        var = _Var(name, kind, shape, self.dim)
        self.variables.append(var)
        self._by_name[name] = var
        self.dim += var.size
        self._compiled = False
        return name

    def add_constraint(self, name: str, size: int, sense: str, assemble) -> None:
        """Register a block constraint.

        ``sense`` is ``"neg_def"`` (block must be < 0, with a numerical
        margin) or ``"psd"`` (block must be >= 0).  ``assemble`` maps a dict
        of variable values to the (size x size) block and must be affine.
        """
        if sense not in ("neg_def", "psd"):
            raise ValueError(f"unknown sense {sense!r}")
        self.constraints.append(_Constraint(name, size, sense, assemble))
        self._compiled = False

    # -- value packing -----------------------------------------------------

    def zero_values(self) -> dict:
        return {v.name: np.zeros(v.shape) for v in self.variables}

    def pack(self, values: dict) -> np.ndarray:
        x = np.zeros(self.dim)
        for v in self.variables:
            m = np.asarray(values[v.name], dtype=float)
            if v.kind == "sym":
                iu = np.triu_indices(v.shape[0])
                x[v.offset:v.offset + v.size] = m[iu]
            else:
                x[v.offset:v.offset + v.size] = m.ravel()
        return x

    def unpack(self, x: np.ndarray) -> dict:
        out = {}
        for v in self.variables:
            seg = x[v.offset:v.offset + v.size]
            if v.kind == "sym":
                d = v.shape[0]
                m = np.zeros((d, d))
                iu = np.triu_indices(d)
                m[iu] = seg
                m = m + m.T - np.diag(np.diag(m))
                out[v.name] = m
            else:
                out[v.name] = seg.reshape(v.shape)
        return out

    def pack_linear(self, coeffs: dict) -> np.ndarray:
        """Pack a linear objective sum_v <C_v, V_v> into a scalar gradient."""
        c = np.zeros(self.dim)
        for name, cm in coeffs.items():
            v = self._by_name[name]
            cm = np.asarray(cm, dtype=float)
            if v.kind == "sym":
                cs = cm + cm.T
                iu = np.triu_indices(v.shape[0])
                vec = cs[iu].copy()
                diag_pos = np.flatnonzero(iu[0] == iu[1])
                vec[diag_pos] *= 0.5
                c[v.offset:v.offset + v.size] = vec
            else:
                c[v.offset:v.offset + v.size] = cm.ravel()
        return c

    # -- compilation to explicit affine form --------------------------------

    def compile(self, settings: LmiSettings | None = None) -> None:
        if self._compiled:
            return
        settings = settings or LmiSettings()
        zero = self.zero_values()
        rng = np.random.default_rng(0)
        x_probe = rng.normal(size=self.dim)
        probe_vals = self.unpack(x_probe)
        for con in self.constraints:
            f0 = np.asarray(con.assemble(zero), dtype=float)
            if f0.shape != (con.size, con.size):
                raise ValueError(f"constraint {con.name!r}: wrong block size {f0.shape}")
            cols = []
            idx = []
            basis = np.zeros(self.dim)
            for i in range(self.dim):
                basis[i] = 1.0
                fi = np.asarray(con.assemble(self.unpack(basis)), dtype=float) - f0
                basis[i] = 0.0
                if np.any(fi):
                    fi = 0.5 * (fi + fi.T)
                    cols.append(fi)
                    idx.append(i)
            con.f0 = 0.5 * (f0 + f0.T)
            con.fs = np.array(cols) if cols else np.zeros((0, con.size, con.size))
            con.idx = np.array(idx, dtype=int)
            # affinity validation at a random point
            ref = np.asarray(con.assemble(probe_vals), dtype=float)
            lin = con.f0 + np.tensordot(x_probe[con.idx], con.fs, axes=1)
            scale = 1.0 + np.abs(ref).max()
            if np.abs(0.5 * (ref + ref.T) - lin).max() > 1e-7 * scale:
                raise ValueError(f"constraint {con.name!r} is not affine in the variables")
            if con.sense == "neg_def":
                con.eps = settings.eps_strict_rel * max(1.0, np.linalg.norm(con.f0) / con.size)
            else:
                con.eps = 0.0
        self._compiled = True

    def recompile_constants(self, settings: LmiSettings | None = None) -> None:
        """Refresh the constant term of every compiled constraint.

        Cheap path for callers whose assembly closures capture a mutable
        scalar (e.g. a performance level) that does not touch the
        variable-dependent terms.
        """
        if not self._compiled:
            self.compile(settings)
            return
        settings = settings or LmiSettings()
        zero = self.zero_values()
        for con in self.constraints:
            f0 = np.asarray(con.assemble(zero), dtype=float)
            con.f0 = 0.5 * (f0 + f0.T)
            if con.sense == "neg_def":
                con.eps = settings.eps_strict_rel * max(1.0, np.linalg.norm(con.f0) / con.size)

    def evaluate(self, name: str, values: dict) -> np.ndarray:
        for con in self.constraints:
            if con.name == name:
                return np.asarray(con.assemble(values), dtype=float)
        raise KeyError(name)

    def margins(self, values: dict) -> dict:
        """Signed margin per constraint, via an independent eigenvalue check.

        neg_def blocks report lambda_max (certified when < -eps_feas); psd
        blocks report lambda_min (certified when > -eps_feas).
        """
        out = {}
        for con in self.constraints:
            block = np.asarray(con.assemble(values), dtype=float)
            w, _ = eig_sym(block)
            out[con.name] = float(w[-1]) if con.sense == "neg_def" else float(w[0])
        return out


class _Normalized:
    """Constraints in the uniform internal form G(x) <= 0."""

    def __init__(self, problem: LmiProblem, extra_slack: bool):
        self.blocks = []
        self.total_dim = 0
        p = problem.dim
        for con in problem.constraints:
            if con.sense == "neg_def":
                g0 = con.f0 + con.eps * np.eye(con.size)
                gs = con.fs
            else:
                g0 = -con.f0
                gs = -con.fs
            idx = con.idx
            if extra_slack:
                gs = np.concatenate([gs, -np.eye(con.size)[None]], axis=0)
                idx = np.concatenate([idx, [p]])
            self.blocks.append((idx, g0, gs, con.size))
            self.total_dim += con.size

    def eval_slabs(self, x):
        """Return the list of S = -G(x) blocks (must all be PD at x)."""
        return [-(g0 + np.tensordot(x[idx], gs, axes=1)) for idx, g0, gs, _ in self.blocks]

    def worst_margin(self, x) -> float:
        worst = -np.inf
        for s in self.eval_slabs(x):
            w = np.linalg.eigvalsh(0.5 * (s + s.T))
            worst = max(worst, -w[0])
        return worst  # max over blocks of lambda_max(G)


def _barrier_state(norm: _Normalized, x, dim):
    """Barrier value, gradient, Hessian; None if x is not strictly feasible."""
    val = 0.0
    grad = np.zeros(dim)
    hess = np.zeros((dim, dim))
    chols = []
    for (idx, g0, gs, m), s in zip(norm.blocks, norm.eval_slabs(x)):
        s = 0.5 * (s + s.T)
        try:
            ell = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            return None
        chols.append(ell)
        val -= 2.0 * np.sum(np.log(np.diag(ell)))
        if len(idx) == 0:
            continue
        s_inv = np.linalg.inv(s)
        g_mats = np.einsum("ab,kbc->kac", s_inv, gs)
        grad[idx] += np.einsum("kaa->k", g_mats)
        hess[np.ix_(idx, idx)] += np.einsum("iab,jba->ij", g_mats, g_mats)
    return val, grad, hess, chols


def _max_step(norm: _Normalized, chols, x, d):
    """Largest alpha with S(x + alpha d) > 0, from generalized eigenvalues."""
    alpha = np.inf
    for (idx, _, gs, _), ell in zip(norm.blocks, chols):
        if len(idx) == 0:
            continue
        dg = np.tensordot(d[idx], gs, axes=1)
        if not np.any(dg):
            continue
        w = np.linalg.solve(ell, np.linalg.solve(ell, dg).T)
        lam = np.linalg.eigvalsh(0.5 * (w + w.T))[-1]
        if lam > 0:
            alpha = min(alpha, 1.0 / lam)
    return alpha


def _center(norm, x, c, t, settings, max_newton, stop_when=None):
    """Newton centering of t * c.x + barrier(x).  Returns (x, n_iters, ok).

    ``stop_when`` lets phase 1 bail out as soon as strict feasibility is
    reached; without it the slack minimization can be unbounded below.
    """
    dim = x.size
    if stop_when is not None and stop_when(x):
        return x, 0, True
    for it in range(max_newton):
        state = _barrier_state(norm, x, dim)
        if state is None:
            return x, it, False
        val, grad, hess, chols = state
        g = t * c + grad
        reg = 1e-12 * (1.0 + np.trace(hess) / max(dim, 1))
        for _ in range(8):
            try:
                ell = np.linalg.cholesky(hess + reg * np.eye(dim))
                break
            except np.linalg.LinAlgError:
                reg *= 100.0
        else:
            return x, it, False
        d = -np.linalg.solve(ell.T, np.linalg.solve(ell, g))
        decrement = -0.5 * float(g @ d)
        if decrement <= settings.newton_tol * (1.0 + abs(t * float(c @ x))):
            return x, it, True
        alpha = min(1.0, settings.feas_frac * _max_step(norm, chols, x, d))
        f_cur = t * float(c @ x) + val
        slope = float(g @ d)
        ok_step = False
        for _ in range(50):
            x_try = x + alpha * d
            st = _barrier_state(norm, x_try, dim)
            if st is not None:
                f_try = t * float(c @ x_try) + st[0]
                if f_try <= f_cur + settings.armijo * alpha * slope:
                    ok_step = True
                    break
            alpha *= settings.backtrack
            if alpha < 1e-16:
                break
        if not ok_step:
            return x, it, True  # stalled at numerical accuracy: accept point
        x = x_try
        if stop_when is not None and stop_when(x):
            return x, it + 1, True
    return x, max_newton, True


def _phase1(problem, norm_plain, x0, settings):
    """Find a strictly feasible point by minimizing a uniform slack."""
    norm = _Normalized(problem, extra_slack=True)
    dim = problem.dim + 1
    margin0 = norm_plain.worst_margin(x0)
    x = np.concatenate([x0, [margin0 + 1.0 + 0.1 * abs(margin0)]])
    c = np.zeros(dim)
    c[-1] = 1.0
    t = 1.0
    total_iters = 0
    target = -max(settings.phase1_margin, 2.0 * settings.eps_feas)
    deep_enough = lambda z: norm_plain.worst_margin(z[:-1]) < target
    for _ in range(settings.max_centerings):
        x, iters, ok = _center(norm, x, c, t, settings, settings.max_newton,
                               stop_when=deep_enough)
        total_iters += iters
        if not ok:
            return None, total_iters, LmiStatus.NUMERICAL
        if deep_enough(x):
            return x[:-1], total_iters, LmiStatus.FEASIBLE
        if norm.total_dim / t < 0.25 * abs(target):
            # converged with nonnegative slack: no interior point exists
            return None, total_iters, LmiStatus.INFEASIBLE
        t *= settings.mu
        if total_iters > settings.max_phase1_iters:
            return None, total_iters, LmiStatus.MAX_ITER
    return None, total_iters, LmiStatus.MAX_ITER


def solve_lmi(problem: LmiProblem, objective: dict | None = None,
              warm_values: dict | None = None,
              settings: LmiSettings | None = None) -> LmiSolution:
    """Solve an LMI feasibility problem, optionally minimizing a linear objective.

    ``objective`` maps variable names to coefficient matrices C_v, the
    objective being sum_v <C_v, V_v>.  ``warm_values`` may carry a strictly
    feasible starting point (checked; phase 1 is skipped when it holds).
    """
    settings = settings or LmiSettings()
    problem.compile(settings)
    norm = _Normalized(problem, extra_slack=False)
    total_iters = 0

    x0 = problem.pack(warm_values) if warm_values is not None else np.zeros(problem.dim)
    if norm.worst_margin(x0) >= -2.0 * settings.eps_feas:
        x_feas, iters, status = _phase1(problem, norm, x0, settings)
        total_iters += iters
        if x_feas is None:
            empty = problem.unpack(x0)
            return LmiSolution(empty, np.nan, problem.margins(empty), status,
                               total_iters, phase1_margin=norm.worst_margin(x0))
        x = x_feas
    else:
        x = x0

    if objective is not None:
        c = problem.pack_linear(objective)
        t = max(1e-2, norm.total_dim / max(1.0, abs(float(c @ x))))
        for _ in range(settings.max_centerings):
            x, iters, ok = _center(norm, x, c, t, settings, settings.max_newton)
            total_iters += iters
            if not ok:
                vals = problem.unpack(x)
                return LmiSolution(vals, float(c @ x), problem.margins(vals),
                                   LmiStatus.NUMERICAL, total_iters)
            if norm.total_dim / t <= settings.gap_tol * (1.0 + abs(float(c @ x))):
                break
            t *= settings.mu
        else:
            vals = problem.unpack(x)
            return LmiSolution(vals, float(c @ x), problem.margins(vals),
                               LmiStatus.MAX_ITER, total_iters)
        obj_val = float(c @ x)
    else:
        obj_val = 0.0

    vals = problem.unpack(x)
    margins = problem.margins(vals)
    ok = all(
        (m < -settings.eps_feas) if con.sense == "neg_def" else (m > -settings.eps_feas)
        for con, m in zip(problem.constraints, margins.values())
    )
    status = LmiStatus.FEASIBLE if ok else LmiStatus.NUMERICAL
    return LmiSolution(vals, obj_val, margins, status, total_iters,
                       phase1_margin=norm.worst_margin(x))
