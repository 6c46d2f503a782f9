"""Geometric-programming dual of the Wyner-Ziv problem, in convex form.

The dual maximizes a linear objective subject to affine constraints and
log-sum-exp constraints; it is solved with a log-barrier Newton method. With
a strictly feasible start (Slater) the dual value is tight, so the solves
here return the rate-distortion value itself, not just a bound. The same
machinery generalizes to rate-limited encoder-state descriptions: a grid over
description kernels w(v1|s1) with one dual solve per admissible kernel.

Internally the programs are posed in nats; the rate-level wrappers report
bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ba import LN2, SolveReport, SolverOptions, SourceInstance, wz_primal
from .case2 import CurvePoint, _auto_epsilon, _map_indexed, monotone_post_pass
from .probability import (
    Alphabet,
    CondKernel,
    ProbabilityError,
    ZERO_TOL,
    chain,
    conditional_entropy,
    conditional_mutual_information,
    marginalize,
    simplex_grid,
)
from .strategies import StrategySpace, enumerate_strategies


class GpInfeasibleError(RuntimeError):
    """No strictly feasible point could be constructed."""


class GpNumericalError(RuntimeError):
    """Newton iteration failed to make progress."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


@dataclass
class GpProblem:
    """maximize c.z subject to A z + b <= 0, logsumexp(z[G]) <= 0, z_i >= 0.

    ``bounds`` lists optional per-variable upper bounds (handled by the
    barrier like the sign constraints, and not counted as affine rows).
    """

    c: np.ndarray
    a_mat: np.ndarray
    b_vec: np.ndarray
    lse_groups: list[np.ndarray]
    nonneg: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    bounds: list[tuple[int, float]] = field(default_factory=list)
    start: np.ndarray | None = None
    var_labels: list[str] | None = None

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.a_mat.shape[0] + len(self.lse_groups) + self.nonneg.size + len(self.bounds)

    def validate(self) -> None:
        n = self.num_vars
        if self.a_mat.shape[1] != n or self.b_vec.shape[0] != self.a_mat.shape[0]:
            raise ValueError("affine constraint shapes are inconsistent")
        for g in self.lse_groups:
            if len(g) == 0:
                raise ValueError("empty log-sum-exp group")
            if np.any(g < 0) or np.any(g >= n):
                raise ValueError("log-sum-exp index out of range")
        if self.nonneg.size and (self.nonneg.min() < 0 or self.nonneg.max() >= n):
            raise ValueError("nonneg index out of range")


@dataclass
class GpOptions:
    t0: float = 1.0
    mu: float = 20.0
    newton_tol: float = 1e-10  # on half the squared Newton decrement
    tol: float = 1e-9          # outer stop: m / t < tol
    max_newton: int = 200      # Newton steps per barrier stage
    max_backtracks: int = 60


@dataclass
class GpReport:
    value: float               # objective units of the problem (nats here)
    z_opt: np.ndarray
    barrier_iters: int
    newton_steps: int
    certified: bool
    slater_ok: bool
    gap_bound: float           # m / t at exit, same units
    trace: list[tuple[float, float]]        # (barrier t, objective) per Newton iterate
    stage_values: list[float]  # objective at the end of each barrier stage


def _canonical_rows(p: GpProblem):
    """All affine rows including sign constraints and upper bounds."""
    n = p.num_vars
    rows = [p.a_mat]
    consts = [p.b_vec]
    for i in p.nonneg:
        r = np.zeros(n)
        r[i] = -1.0
        rows.append(r[None, :])
        consts.append(np.zeros(1))
    for i, ub in p.bounds:
        r = np.zeros(n)
        r[i] = 1.0
        rows.append(r[None, :])
        consts.append(np.array([-ub]))
    return np.vstack(rows), np.concatenate(consts)


class _Barrier:
    """Barrier-function oracle for min -t c.z - sum log(-f_i)."""

    def __init__(self, c, a_mat, b_vec, lse):
        # lse entries: (index array, extra affine vector or None)
        self.c = c
        self.a = a_mat
        self.b = b_vec
        self.lse = lse
        self.m = a_mat.shape[0] + len(lse)

    def constraints(self, z):
        vals = [self.a @ z + self.b] if self.a.shape[0] else [np.zeros(0)]
        for g, extra in self.lse:
            zg = z[g]
            mx = zg.max()
            v = mx + math.log(np.exp(zg - mx).sum())
            if extra is not None:
                v += float(extra @ z)
            vals.append(np.array([v]))
        return np.concatenate(vals)

    def value(self, t, z):
        f = self.constraints(z)
        if f.max(initial=-np.inf) >= 0:
            return np.inf, f
        return -t * float(self.c @ z) + float(-np.log(-f).sum()), f

    def grad_hess(self, t, z):
        n = z.shape[0]
        grad = -t * self.c.copy()
        hess = np.zeros((n, n))
        if self.a.shape[0]:
            f_aff = self.a @ z + self.b
            inv = 1.0 / (-f_aff)
            grad += self.a.T @ inv
            hess += (self.a * (inv**2)[:, None]).T @ self.a
        for g, extra in self.lse:
            zg = z[g]
            mx = zg.max()
            e = np.exp(zg - mx)
            sigma = e / e.sum()
            f = mx + math.log(e.sum()) + (float(extra @ z) if extra is not None else 0.0)
            u = np.zeros(n)
            u[g] = sigma
            if extra is not None:
                u += extra
            grad += u / (-f)
            hess += np.outer(u, u) / f**2
            block = (np.diag(sigma) - np.outer(sigma, sigma)) / (-f)
            hess[np.ix_(g, g)] += block
        return grad, hess


def _newton_stages(
    barrier: _Barrier,
    z: np.ndarray,
    opts: GpOptions,
    trace: list,
    stage_values: list,
    stop_early=None,
):
    """Run the barrier path; returns (z, t_final, stages, newton_steps)."""
    t = opts.t0
    stages = 0
    steps = 0
    while True:
        for _ in range(opts.max_newton):
            grad, hess = barrier.grad_hess(t, z)
            ridge = 1e-12 * max(1.0, float(np.trace(hess)) / hess.shape[0])
            try:
                dz = np.linalg.solve(hess + ridge * np.eye(hess.shape[0]), -grad)
            except np.linalg.LinAlgError:
                dz = np.linalg.lstsq(hess + 1e-8 * np.eye(hess.shape[0]), -grad, rcond=None)[0]
            decrement = float(-grad @ dz)
            if decrement < 0:  # solve failed to produce a descent direction
                dz = -grad
                decrement = float(grad @ grad)
            val, _ = barrier.value(t, z)
            alpha = 1.0
            ok = False
            for _bt in range(opts.max_backtracks):
                cand = z + alpha * dz
                vnew, _ = barrier.value(t, cand)
                if vnew < val - 0.25 * alpha * decrement + 1e-14 * abs(val):
                    z = cand
                    ok = True
                    break
                alpha *= 0.5
            if not ok:
                if decrement / 2.0 <= max(opts.newton_tol, 1e-8):
                    break
                raise GpNumericalError(
                    f"line search failed at barrier t={t} (decrement {decrement})", trace
                )
            steps += 1
            trace.append((t, float(barrier.c @ z)))
            if decrement / 2.0 <= opts.newton_tol:
                break
        stages += 1
        stage_values.append(float(barrier.c @ z))
        if stop_early is not None and stop_early(z):
            return z, t, stages, steps
        if barrier.m / t < opts.tol:
            return z, t, stages, steps
        t *= opts.mu


def _phase_one(p: GpProblem, opts: GpOptions) -> np.ndarray:
    """Find a strictly feasible point by minimizing the worst violation."""
    a_all, b_all = _canonical_rows(p)
    n = p.num_vars
    z0 = np.zeros(n)
    base = _Barrier(np.zeros(n), a_all, b_all, [(g, None) for g in p.lse_groups])
    worst = float(base.constraints(z0).max())
    s0 = worst + 1.0
    # augmented problem over (z, s): minimize s with every f_i <= s
    c_aug = np.zeros(n + 1)
    c_aug[-1] = -1.0  # maximize -s
    a_aug = np.hstack([a_all, -np.ones((a_all.shape[0], 1))])
    lse_aug = []
    for g in p.lse_groups:
        extra = np.zeros(n + 1)
        extra[-1] = -1.0
        lse_aug.append((g, extra))
    barrier = _Barrier(c_aug, a_aug, b_all, lse_aug)
    z = np.concatenate([z0, [s0]])
    trace: list = []
    stage_values: list = []
    z, _, _, _ = _newton_stages(
        barrier, z, opts, trace, stage_values, stop_early=lambda zz: zz[-1] < -1e-7
    )
    if z[-1] >= 0:
        raise GpInfeasibleError(f"no strictly feasible point found (margin {z[-1]:.3e})")
    return z[:-1]


def solve_gp(p: GpProblem, opts: GpOptions | None = None) -> GpReport:
    """Maximize the linear objective by a log-barrier Newton method.

    Deterministic for fixed options: t grows geometrically from t0 by mu
    until m/t < tol, each stage centered by damped Newton with backtracking.
    """
    opts = opts or GpOptions()
    p.validate()
    a_all, b_all = _canonical_rows(p)
    barrier = _Barrier(p.c, a_all, b_all, [(g, None) for g in p.lse_groups])

    slater_ok = False
    z = None
    if p.start is not None:
        slack = -barrier.constraints(np.asarray(p.start, dtype=float))
        if slack.min() > 0:
            z = np.asarray(p.start, dtype=float).copy()
            slater_ok = bool(slack.min() >= 1e-8)
    if z is None:
        z = _phase_one(p, opts)
        slack = -barrier.constraints(z)
        slater_ok = bool(slack.min() >= 1e-8)

    trace: list = []
    stage_values: list = []
    z, t_final, stages, steps = _newton_stages(barrier, z, opts, trace, stage_values)
    gap = barrier.m / t_final
    return GpReport(
        value=float(p.c @ z),
        z_opt=z,
        barrier_iters=stages,
        newton_steps=steps,
        certified=bool(slater_ok and gap < opts.tol),
        slater_ok=slater_ok,
        gap_bound=gap,
        trace=trace,
        stage_values=stage_values,
    )


# ---------------------------------------------------------------------------
# Wyner-Ziv dual construction
# ---------------------------------------------------------------------------


def _gamma_cap(distortion: np.ndarray) -> float:
    positive = distortion[distortion > ZERO_TOL]
    return 400.0 / float(positive.min()) if positive.size else 1.0


def build_wz_gp(
    src: SourceInstance,
    d_target: float,
    strategies: StrategySpace | None = None,
) -> GpProblem:
    """Dual of the Wyner-Ziv problem at distortion D, as a convex program.

    Variables are ordered (alpha_x | gamma | y_{x,s,t}); one affine row per
    (x, t) and one log-sum-exp group per (s, t). Source symbols with zero
    probability are dropped. The program is posed in nats.
    """
    if d_target < 0:
        raise ValueError("distortion target must be >= 0")
    if src.s1.size != 1:
        raise ProbabilityError("build_wz_gp uses S2 as the side axis; merge S1 first")
    if strategies is None:
        strategies = enumerate_strategies((src.s2,), src.xhat)
    if strategies.domain_shape != (src.s2.size,):
        raise ProbabilityError("strategies must map the side alphabet to Xhat")

    p_xs = src.joint.probs.reshape(src.x.size, src.s2.size)
    p_x = p_xs.sum(axis=1)
    p_s = p_xs.sum(axis=0)
    xs_kept = [x for x in range(src.x.size) if p_x[x] > ZERO_TOL]
    ss_kept = [s for s in range(src.s2.size) if p_s[s] > ZERO_TOL]
    n_t = len(strategies)
    tbl = strategies.tables  # (T, S)

    alpha_idx = {x: i for i, x in enumerate(xs_kept)}
    gamma_idx = len(xs_kept)
    y_idx: dict[tuple[int, int, int], int] = {}
    labels = [f"alpha[{x}]" for x in xs_kept] + ["gamma"]
    for x in xs_kept:
        for s in ss_kept:
            if p_xs[x, s] <= ZERO_TOL:
                continue
            for t in range(n_t):
                y_idx[(x, s, t)] = len(labels)
                labels.append(f"y[{x},{s},{t}]")
    n = len(labels)

    p_s_given_x = p_xs / p_x[:, None]
    p_x_given_s = p_xs / p_s[None, :]

    rows = []
    consts = []
    for x in xs_kept:
        for t in range(n_t):
            row = np.zeros(n)
            row[alpha_idx[x]] = 1.0
            const = 0.0
            for s in ss_kept:
                w = p_s_given_x[x, s]
                if w <= ZERO_TOL:
                    continue
                const += w * math.log(p_x_given_s[x, s])
                row[gamma_idx] -= w * float(src.distortion[x, tbl[t, s]])
                row[y_idx[(x, s, t)]] = -w
            rows.append(row)
            consts.append(const)

    groups = []
    for s in ss_kept:
        for t in range(n_t):
            g = [y_idx[(x, s, t)] for x in xs_kept if (x, s, t) in y_idx]
            if g:
                groups.append(np.array(g, dtype=np.intp))

    c = np.zeros(n)
    for x in xs_kept:
        c[alpha_idx[x]] = p_x[x]
    c[gamma_idx] = -d_target

    cap = _gamma_cap(src.distortion)
    a_mat = np.vstack(rows)
    b_vec = np.asarray(consts)

    start = np.zeros(n)
    y0 = math.log(1.0 / len(xs_kept)) - 0.1
    for key, idx in y_idx.items():
        start[idx] = y0
    start[gamma_idx] = 0.1
    # alpha_x = -max_t(row residual) - 0.1, residual evaluated at (gamma0, y0)
    per_row = a_mat @ start + b_vec  # alpha coefficients hit zeros in start
    k = 0
    for x in xs_kept:
        worst = max(per_row[k : k + n_t])
        start[alpha_idx[x]] = -worst - 0.1
        k += n_t

    return GpProblem(
        c=c,
        a_mat=a_mat,
        b_vec=b_vec,
        lse_groups=groups,
        nonneg=np.array([gamma_idx], dtype=np.intp),
        bounds=[(gamma_idx, cap)],
        start=start,
        var_labels=labels,
    )


def wz_rate_via_gp(
    src: SourceInstance,
    d_target: float,
    opts: SolverOptions | None = None,
    gp_opts: GpOptions | None = None,
    strategies: StrategySpace | None = None,
    cross_check: bool = True,
    tight_tol: float = 1e-3,
) -> SolveReport:
    """Wyner-Ziv rate from the dual program, with an optional primal cross-check."""
    opts = opts or SolverOptions()
    problem = build_wz_gp(src, d_target, strategies)
    report = solve_gp(problem, gp_opts)
    value = max(report.value / LN2, 0.0)
    extras = {"gp_report": report, "certified": report.certified}
    status = "ok"
    if cross_check:
        primal = wz_primal(src, d_target, opts, strategies)
        extras["primal_value"] = primal.value
        extras["primal_report"] = primal
        extras["tight"] = abs(primal.value - value) <= tight_tol
    return SolveReport(
        value=value,
        gap=report.gap_bound / LN2,
        iterations=report.newton_steps,
        argopt=None,
        trace=[(v / LN2, v / LN2) for v in report.stage_values],
        status=status,
        extras=extras,
    )


# ---------------------------------------------------------------------------
# Rate-limited encoder-state description: the distortion-side curve
# ---------------------------------------------------------------------------


def build_case1_rd_gp(
    src: SourceInstance,
    w: CondKernel,
    d_target: float,
    strategies: StrategySpace | None = None,
) -> GpProblem:
    """Dual program for a fixed description kernel w(v1|s1).

    Variables (alpha_{x,s1,v1} | gamma | y_{x,s1,s2,v1,t}); one affine row per
    (x, s1, v1, t) and one log-sum-exp group per (s2, v1, t). Reconstruction
    strategies are maps S2 -> Xhat, applied per v1 (the joint map S2 x V1 ->
    Xhat decomposes across v1, giving an equivalent, smaller program). Cells
    of zero probability are dropped. With |V1| = 1 this reduces exactly to
    the plain Wyner-Ziv dual on the (X, S1) pair source.
    """
    if d_target < 0:
        raise ValueError("distortion target must be >= 0")
    if w.given_shape != (src.s1.size,):
        raise ProbabilityError("description kernel must condition on S1")
    if strategies is None:
        strategies = enumerate_strategies((src.s2,), src.xhat)
    if strategies.domain_shape != (src.s2.size,):
        raise ProbabilityError("strategies must map S2 to Xhat")

    n_x, n_s1, n_s2 = src.x.size, src.s1.size, src.s2.size
    n_v1 = w.out_axes[0].size
    n_t = len(strategies)
    tbl = strategies.tables  # (T, S2)

    p4 = chain(src.joint, w, bind=(1,)).probs  # (X, S1, S2, V1)
    p_xs1 = p4.sum(axis=(2, 3))
    p_xs1v1 = p4.sum(axis=2)
    p_s2v1 = p4.sum(axis=(0, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        p_s2_given_xs1 = np.where(
            p_xs1[:, :, None] > ZERO_TOL, p4.sum(axis=3) / p_xs1[:, :, None], 0.0
        )
        p_xs1_given_s2v1 = np.where(
            p_s2v1[None, None, :, :] > ZERO_TOL, p4 / p_s2v1[None, None, :, :], 0.0
        )

    alpha_cells = [
        (x, s1, v1)
        for x in range(n_x)
        for s1 in range(n_s1)
        for v1 in range(n_v1)
        if p_xs1v1[x, s1, v1] > ZERO_TOL
    ]
    alpha_idx = {cell: i for i, cell in enumerate(alpha_cells)}
    gamma_idx = len(alpha_cells)
    labels = [f"alpha[{x},{s1},{v1}]" for (x, s1, v1) in alpha_cells] + ["gamma"]
    y_idx: dict[tuple[int, int, int, int, int], int] = {}
    for x in range(n_x):
        for s1 in range(n_s1):
            for s2 in range(n_s2):
                for v1 in range(n_v1):
                    if p4[x, s1, s2, v1] <= ZERO_TOL:
                        continue
                    for t in range(n_t):
                        y_idx[(x, s1, s2, v1, t)] = len(labels)
                        labels.append(f"y[{x},{s1},{s2},{v1},{t}]")
    n = len(labels)

    rows = []
    consts = []
    for (x, s1, v1) in alpha_cells:
        for t in range(n_t):
            row = np.zeros(n)
            row[alpha_idx[(x, s1, v1)]] = 1.0
            const = 0.0
            for s2 in range(n_s2):
                weight = p_s2_given_xs1[x, s1, s2]
                if weight <= ZERO_TOL:
                    continue
                const += weight * math.log(p_xs1_given_s2v1[x, s1, s2, v1])
                row[gamma_idx] -= weight * float(src.distortion[x, tbl[t, s2]])
                row[y_idx[(x, s1, s2, v1, t)]] = -weight
            rows.append(row)
            consts.append(const)

    groups = []
    for s2 in range(n_s2):
        for v1 in range(n_v1):
            if p_s2v1[s2, v1] <= ZERO_TOL:
                continue
            for t in range(n_t):
                g = [
                    y_idx[(x, s1, s2, v1, t)]
                    for x in range(n_x)
                    for s1 in range(n_s1)
                    if (x, s1, s2, v1, t) in y_idx
                ]
                if g:
                    groups.append(np.array(g, dtype=np.intp))

    c = np.zeros(n)
    for cell in alpha_cells:
        c[alpha_idx[cell]] = p_xs1v1[cell]
    c[gamma_idx] = -d_target

    a_mat = np.vstack(rows)
    b_vec = np.asarray(consts)
    start = np.zeros(n)
    y0 = math.log(1.0 / (n_x * n_s1)) - 0.1
    for idx in y_idx.values():
        start[idx] = y0
    start[gamma_idx] = 0.1
    per_row = a_mat @ start + b_vec
    k = 0
    for cell in alpha_cells:
        worst = max(per_row[k : k + n_t])
        start[alpha_idx[cell]] = -worst - 0.1
        k += n_t

    return GpProblem(
        c=c,
        a_mat=a_mat,
        b_vec=b_vec,
        lse_groups=groups,
        nonneg=np.array([gamma_idx], dtype=np.intp),
        bounds=[(gamma_idx, _gamma_cap(src.distortion))],
        start=start,
        var_labels=labels,
    )


@dataclass
class Case1Options:
    """Grid controls for the distortion-side description sweep."""

    epsilon: float | None = None
    grid_step: float = 0.05
    v1_size: int = 2
    workers: int = 1
    gp: GpOptions = field(default_factory=GpOptions)


def description_rate_case1(src: SourceInstance, w: CondKernel) -> float:
    """I(V1;S1|S2) of a description kernel w(v1|s1), in bits."""
    p_s1s2 = marginalize(src.joint, (1, 2))
    joint = chain(p_s1s2, w, bind=(0,))  # (S1, S2, V1)
    return conditional_mutual_information(joint, (2,), (0,), (1,))


def rd_case1(
    src: SourceInstance,
    d_target: float,
    r_prime: float,
    opts: Case1Options | None = None,
) -> CurvePoint:
    """Rate-distortion at distortion D and encoder-description rate R'.

    R' is clamped to H(S1|S2); kernels w(v1|s1) whose I(V1;S1|S2) is
    eps-close to R' from below are admissible, each solved through the dual
    program, and the smallest rate wins (smallest grid index on ties).
    """
    opts = opts or Case1Options()
    if r_prime < 0:
        raise ValueError("r_prime must be >= 0")
    if d_target < 0:
        raise ValueError("distortion target must be >= 0")
    p_s1s2 = marginalize(src.joint, (1, 2))
    h_s1_given_s2 = conditional_entropy(p_s1s2, (0,), (1,))
    r_clamped = min(r_prime, h_s1_given_s2)
    v1 = Alphabet(opts.v1_size, "V1")
    strategies = enumerate_strategies((src.s2,), src.xhat)

    step = opts.grid_step
    for _attempt in range(2):
        grid = simplex_grid(src.s1.size, v1, step)
        rates = [description_rate_case1(src, w) for w in grid.points]
        eps = opts.epsilon if opts.epsilon is not None else _auto_epsilon(rates)
        feasible = [
            i for i, rw in enumerate(rates)
            if r_clamped - eps - 1e-12 <= rw <= r_clamped + 1e-12
        ]
        if feasible:
            break
        step /= 2.0
    if not feasible:
        return CurvePoint(r_prime, math.nan, math.nan, -1, "no-feasible-w")

    def solve_one(i: int):
        problem = build_case1_rd_gp(src, grid.points[i], d_target, strategies)
        report = solve_gp(problem, opts.gp)
        return max(report.value / LN2, 0.0), report.newton_steps, report.gap_bound / LN2, report

    results = _map_indexed(solve_one, feasible, opts.workers)
    best_idx = None
    best_val = math.inf
    for i, (val, _, _, _) in zip(feasible, results):
        if val < best_val - 1e-9 or (val < best_val + 1e-9 and best_idx is None):
            best_val = val
            best_idx = i
    value, steps, gap, report = results[feasible.index(best_idx)]
    return CurvePoint(
        r_prime=r_prime,
        value=value,
        raw_value=value,
        winning_w=best_idx,
        status="ok",
        iterations=steps,
        gap=gap,
        winning_kernel=grid.points[best_idx],
        winning_r_w=rates[best_idx],
        extras={
            "epsilon": eps,
            "grid_step": step,
            "clamped_r_prime": r_clamped,
            "gp_report": report,
            "d_target": d_target,
        },
    )


def rd_case1_sweep(
    src: SourceInstance,
    d_target: float,
    r_primes: Sequence[float],
    opts: Case1Options | None = None,
) -> list[CurvePoint]:
    """Solve an R' grid at fixed distortion, then enforce monotonicity (min)."""
    points = [rd_case1(src, d_target, rp, opts) for rp in r_primes]
    return monotone_post_pass(points, maximize=False)
