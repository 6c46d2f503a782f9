"""Semi-iterative capacity solver: rate-limited state description at the encoder.

The lower-bound capacity with a rate-R' description of the decoder state S2
at the encoder is computed by an outer grid search over description kernels
w(v2|s2) combined with an inner alternating maximization over distributions
q(t|s1,v2) on input strategies t: S1 x V2 -> X. A kernel w is admissible for
rate R' when its description rate R_w = I(V2;S2|S1) lies in [R' - eps, R'].
The causal variant constrains I(V2;S2) instead, and its inner problem splits
into one plain Blahut-Arimoto capacity per v2 over strategies S1 -> X.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ba import (
    ChannelInstance,
    SolveReport,
    SolverOptions,
    alternating_strategy_max,
    ba_capacity,
    strategy_bound,
)
from .probability import (
    Alphabet,
    CondKernel,
    JointPmf,
    ProbabilityError,
    SimplexGrid,
    ZERO_TOL,
    chain,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    mutual_information,
    simplex_grid,
)
from .strategies import StrategySpace, enumerate_strategies, lift_channel


@dataclass
class Case2Options:
    """Grid and termination controls for the semi-iterative solver.

    epsilon: half-width of the admissibility band on R_w; ``None`` selects
        max(0.02, coarsest gap between adjacent grid R_w values).
    delta: inner termination gap in bits.
    grid_step: spacing of the description-kernel grid.
    v2_size: description alphabet size.
    max_inner_iters: inner iteration cap.
    workers: grid points solved in parallel when > 1 (same results either way).
    """

    epsilon: float | None = None
    delta: float = 1e-6
    grid_step: float = 0.05
    v2_size: int = 2
    max_inner_iters: int = 5000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if not 0 < self.grid_step <= 1:
            raise ValueError("grid_step must be in (0, 1]")
        if self.v2_size < 1:
            raise ValueError("v2_size must be >= 1")


@dataclass
class CurvePoint:
    r_prime: float
    value: float
    raw_value: float
    winning_w: int
    status: str
    iterations: int = 0
    gap: float = 0.0
    winning_kernel: CondKernel | None = None
    winning_r_w: float = 0.0
    extras: dict = field(default_factory=dict)


def _state_v2_joint(ch: ChannelInstance, w: CondKernel) -> JointPmf:
    if w.given_shape != (ch.s2.size,):
        raise ProbabilityError("description kernel must condition on S2")
    return chain(ch.state_joint, w, bind=(1,))  # axes (S1, S2, V2)


def r_w(ch: ChannelInstance, w: CondKernel) -> float:
    """Description rate R_w = I(V2;S2) - I(V2;S1) of a kernel w(v2|s2), in bits.

    By construction V2 - S2 - S1 is a Markov chain, so this equals
    I(V2;S2|S1); both are computed and compared as an internal sanity check.
    """
    joint = _state_v2_joint(ch, w)
    direct = mutual_information(joint, (2,), (1,)) - mutual_information(joint, (2,), (0,))
    conditional = conditional_mutual_information(joint, (2,), (1,), (0,))
    if abs(direct - conditional) > 1e-10:
        raise ProbabilityError(
            f"R_w cross-check failed: {direct} vs {conditional}"
        )
    return conditional


def _inner_tables(ch: ChannelInstance, w: CondKernel, strategies: StrategySpace):
    """p(e) over (s1, v2) and p(o|t, e) over (y, s2, v2) for the inner solve."""
    joint3 = _state_v2_joint(ch, w).probs  # (S1, S2, V2)
    lifted = lift_channel(ch, strategies).probs  # (T, S1, S2, V2, Y)
    n_t = len(strategies)
    n_s1, n_s2 = ch.s1.size, ch.s2.size
    n_v2 = w.out_axes[0].size
    n_y = ch.y.size
    n_e = n_s1 * n_v2
    n_o = n_y * n_s2 * n_v2
    p_e = joint3.sum(axis=1).reshape(n_e)  # (S1, V2) flattened
    p_ote = np.zeros((n_t, n_e, n_o))
    for s1 in range(n_s1):
        for s2 in range(n_s2):
            for v2 in range(n_v2):
                mass = joint3[s1, s2, v2]
                if mass <= ZERO_TOL:
                    continue
                e_idx = s1 * n_v2 + v2
                o_base = np.arange(n_y) * (n_s2 * n_v2) + s2 * n_v2 + v2
                p_ote[:, e_idx, o_base] += mass * lifted[:, s1, s2, v2, :]
    sup = p_e > ZERO_TOL
    p_ote[:, sup, :] /= p_e[sup][None, :, None]
    p_ote[:, ~sup, :] = 0.0
    return p_e, p_ote


def inner_max(
    ch: ChannelInstance,
    w: CondKernel,
    opts: Case2Options | None = None,
    strategies: StrategySpace | None = None,
) -> SolveReport:
    """max over q(t|s1,v2) of I(T;Y,S2|V2) - I(T;S1|V2) for a fixed w(v2|s2).

    Alternates q <- q* (exponential update weighted by p(s2,y|t,s1,v2)) and
    Q <- Q* (posterior of t given the decoder view), starting from uniform Q,
    and stops once the dominance bound U(q) is within delta of J(q, Q).
    """
    opts = opts or Case2Options()
    v2_axis = w.out_axes[0]
    if strategies is None:
        strategies = enumerate_strategies((ch.s1, v2_axis), ch.x)
    p_e, p_ote = _inner_tables(ch, w, strategies)
    value, gap, iters, q, big_q, trace, ok = alternating_strategy_max(
        p_e, p_ote, opts.delta, opts.max_inner_iters
    )
    n_t = len(strategies)
    empty = big_q.sum(axis=0) <= 0  # unreachable decoder views: keep uniform
    big_q = big_q.copy()
    big_q[:, empty] = 1.0 / n_t
    arg = CondKernel(
        (ch.s1, v2_axis),
        (strategies.alphabet,),
        q.T.reshape(ch.s1.size, v2_axis.size, n_t),
    )
    posterior = CondKernel(
        (ch.y, ch.s2, v2_axis),
        (strategies.alphabet,),
        big_q.T.reshape(ch.y.size, ch.s2.size, v2_axis.size, n_t),
    )
    return SolveReport(
        value, gap, iters, arg, trace,
        status="ok" if ok else "inner-nonconverged",
        extras={"posterior": posterior, "strategies": strategies},
    )


def u_w_bound(
    ch: ChannelInstance,
    w: CondKernel,
    q: CondKernel,
    posterior: CondKernel,
    strategies: StrategySpace | None = None,
) -> float:
    """Dominance bound U(q) in bits for given q(t|s1,v2) and Q(t|y,s2,v2).

    Always at least J(q, Q*) and equal to the inner optimum at its fixed point.
    """
    v2_axis = w.out_axes[0]
    n_t = q.out_axes[0].size
    if strategies is None:
        strategies = enumerate_strategies((ch.s1, v2_axis), ch.x)
    if len(strategies) != n_t:
        raise ProbabilityError("strategy count does not match q's codomain")
    p_e, p_ote = _inner_tables(ch, w, strategies)
    q_te = q.probs.reshape(-1, n_t).T
    big_q = posterior.probs.reshape(-1, n_t).T
    return strategy_bound(p_e, p_ote, q_te, big_q)


def _auto_epsilon(rws: Sequence[float]) -> float:
    values = np.sort(np.unique(np.concatenate(([0.0], np.asarray(rws)))))
    gaps = np.diff(values)
    coarsest = float(gaps.max()) if gaps.size else 0.0
    return max(0.02, coarsest)


def _map_indexed(fn: Callable[[int], object], indices: Sequence[int], workers: int):
    if workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, indices))
    return [fn(i) for i in indices]


def default_workers() -> int:
    """Worker count from SIDEINFO_THREADS (0 or unset means sequential)."""
    raw = os.environ.get("SIDEINFO_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def _grid_sweep(
    rate_of_w: Callable[[CondKernel], float],
    solve_w: Callable[[int, CondKernel], tuple[float, int, float, str]],
    grid_factory: Callable[[float], SimplexGrid],
    r_prime: float,
    r_clamped: float,
    opts: Case2Options,
    maximize: bool,
) -> CurvePoint:
    step = opts.grid_step
    for attempt in range(2):
        grid = grid_factory(step)
        rws = [rate_of_w(w) for w in grid.points]
        eps = opts.epsilon if opts.epsilon is not None else _auto_epsilon(rws)
        feasible = [
            i for i, rw in enumerate(rws)
            if r_clamped - eps - 1e-12 <= rw <= r_clamped + 1e-12
        ]
        if feasible:
            break
        step /= 2.0  # refine once, then fail loudly
    else:
        return CurvePoint(r_prime, math.nan, math.nan, -1, "no-feasible-w")
    if not feasible:
        return CurvePoint(r_prime, math.nan, math.nan, -1, "no-feasible-w")

    results = _map_indexed(lambda i: solve_w(i, grid.points[i]), feasible, opts.workers)
    sign = 1.0 if maximize else -1.0
    best_idx = None
    best_val = -math.inf
    for i, (val, _, _, _) in zip(feasible, results):
        sval = sign * val
        if sval > best_val + 1e-9 or (sval > best_val - 1e-9 and best_idx is None):
            best_val = sval
            best_idx = i
    winner_pos = feasible.index(best_idx)
    value, iters, gap, status = results[winner_pos]
    return CurvePoint(
        r_prime=r_prime,
        value=value,
        raw_value=value,
        winning_w=best_idx,
        status=status,
        iterations=iters,
        gap=gap,
        winning_kernel=grid.points[best_idx],
        winning_r_w=rws[best_idx],
        extras={"epsilon": eps, "grid_step": step, "clamped_r_prime": r_clamped},
    )


def capacity_case2(
    ch: ChannelInstance,
    r_prime: float,
    opts: Case2Options | None = None,
) -> CurvePoint:
    """Lower-bound capacity at description rate R', noncausal encoder states.

    R' is clamped to H(S2|S1) (beyond which extra description of S2 is
    useless); the grid over w(v2|s2) keeps kernels whose R_w is eps-close to
    R' from below, and the best inner maximum wins (smallest grid index on
    ties within 1e-9).
    """
    opts = opts or Case2Options()
    if r_prime < 0:
        raise ValueError("r_prime must be >= 0")
    h_s2_given_s1 = conditional_entropy(ch.state_joint, (1,), (0,))
    r_clamped = min(r_prime, h_s2_given_s1)
    v2 = Alphabet(opts.v2_size, "V2")
    strategies = enumerate_strategies((ch.s1, v2), ch.x)

    def solve_w(_: int, w: CondKernel):
        rep = inner_max(ch, w, opts, strategies)
        return rep.value, rep.iterations, rep.gap, rep.status

    point = _grid_sweep(
        rate_of_w=lambda w: r_w(ch, w),
        solve_w=solve_w,
        grid_factory=lambda step: simplex_grid(ch.s2.size, v2, step),
        r_prime=r_prime,
        r_clamped=r_clamped,
        opts=opts,
        maximize=True,
    )
    point.extras["r_max"] = h_s2_given_s1
    return point


def _causal_rate(ch: ChannelInstance, w: CondKernel) -> float:
    joint = _state_v2_joint(ch, w)
    return mutual_information(joint, (2,), (1,))


def _causal_inner(
    ch: ChannelInstance,
    w: CondKernel,
    opts: Case2Options,
    strategies: StrategySpace,
) -> SolveReport:
    """max over p(u|v2) of I(U;Y,S2|V2), U ranging over strategies S1 -> X.

    Decomposes into one capacity computation per v2 with output (Y, S2),
    averaged by p(v2).
    """
    joint3 = _state_v2_joint(ch, w).probs  # (S1, S2, V2)
    n_v2 = w.out_axes[0].size
    n_t = len(strategies)
    n_y, n_s2 = ch.y.size, ch.s2.size
    p_v2 = joint3.sum(axis=(0, 1))
    ba_opts = SolverOptions(delta=opts.delta, max_iters=opts.max_inner_iters)
    total = 0.0
    total_gap = 0.0
    iters = 0
    dists = np.full((n_v2, n_t), 1.0 / n_t)
    converged = True
    trace = []
    for v2 in range(n_v2):
        if p_v2[v2] <= ZERO_TOL:
            continue
        cond = joint3[:, :, v2] / p_v2[v2]  # p(s1, s2 | v2)
        m = np.zeros((n_t, n_y * n_s2))
        for s1 in range(ch.s1.size):
            x_for_t = strategies.tables[:, s1]
            rows = ch.kernel.probs[x_for_t, s1, :, :]  # (T, S2, Y)
            for s2 in range(n_s2):
                if cond[s1, s2] <= ZERO_TOL:
                    continue
                cols = np.arange(n_y) * n_s2 + s2
                m[:, cols] += cond[s1, s2] * rows[:, s2, :]
        rep = ba_capacity(m, ba_opts)
        total += p_v2[v2] * rep.value
        total_gap += p_v2[v2] * rep.gap
        iters = max(iters, rep.iterations)
        dists[v2] = rep.argopt
        converged = converged and rep.converged
        trace.append((rep.value, rep.value + rep.gap))
    arg = CondKernel((w.out_axes[0],), (strategies.alphabet,), dists)
    return SolveReport(
        total, total_gap, iters, arg, trace,
        status="ok" if converged else "inner-nonconverged",
        extras={"strategies": strategies},
    )


def causal_inner_max(
    ch: ChannelInstance,
    w: CondKernel,
    opts: Case2Options | None = None,
    strategies: StrategySpace | None = None,
) -> SolveReport:
    opts = opts or Case2Options()
    if strategies is None:
        strategies = enumerate_strategies((ch.s1,), ch.x)
    return _causal_inner(ch, w, opts, strategies)


def capacity_case2_causal(
    ch: ChannelInstance,
    r_prime: float,
    opts: Case2Options | None = None,
) -> CurvePoint:
    """Capacity at description rate R' when the encoder state is causal.

    The admissibility band uses the unconditional rate I(V2;S2) (the causal
    description cannot be binned against S1), so R' is clamped to H(S2).
    """
    opts = opts or Case2Options()
    if r_prime < 0:
        raise ValueError("r_prime must be >= 0")
    h_s2 = entropy(JointPmf((ch.s2,), ch.state_joint.probs.sum(axis=0)))
    r_clamped = min(r_prime, h_s2)
    v2 = Alphabet(opts.v2_size, "V2")
    strategies = enumerate_strategies((ch.s1,), ch.x)

    def solve_w(_: int, w: CondKernel):
        rep = _causal_inner(ch, w, opts, strategies)
        return rep.value, rep.iterations, rep.gap, rep.status

    point = _grid_sweep(
        rate_of_w=lambda w: _causal_rate(ch, w),
        solve_w=solve_w,
        grid_factory=lambda step: simplex_grid(ch.s2.size, v2, step),
        r_prime=r_prime,
        r_clamped=r_clamped,
        opts=opts,
        maximize=True,
    )
    point.extras["r_max"] = h_s2
    return point


def monotone_post_pass(points: list[CurvePoint], maximize: bool = True) -> list[CurvePoint]:
    """Enforce curve monotonicity in R' by a running max (or min); raw kept.

    The true curves are monotone in R'; finite grids can violate that, so the
    post-pass restores it while ``raw_value`` retains the grid output.
    """
    ordered = sorted(range(len(points)), key=lambda i: points[i].r_prime)
    best = -math.inf if maximize else math.inf
    for i in ordered:
        pt = points[i]
        if pt.status != "ok" or math.isnan(pt.raw_value):
            continue
        best = max(best, pt.raw_value) if maximize else min(best, pt.raw_value)
        pt.value = best
    return points


def capacity_case2_sweep(
    ch: ChannelInstance,
    r_primes: Sequence[float],
    opts: Case2Options | None = None,
    causal: bool = False,
) -> list[CurvePoint]:
    """Solve a whole R' grid and apply the monotone post-pass."""
    solver = capacity_case2_causal if causal else capacity_case2
    points = [solver(ch, rp, opts) for rp in r_primes]
    return monotone_post_pass(points, maximize=True)
