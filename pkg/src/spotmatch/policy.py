"""Adoption-policy analysis: regimes, myopic rule, thresholds, and search.

The structure of the optimal adoption level turns on the sign of the
non-adoption growth benefit gamma - alpha + alpha_prime:

* AGD (adoption growth dominance, gamma <= alpha - alpha_prime): full
  adoption grows the volunteer pool at least as fast as one-time matching
  does, so z = 1 every period is optimal.
* AGN (non-dominance): one-time matches grow the pool faster.  No adoption
  is myopically optimal once the next-period donation thickness c*d_1
  clears a closed-form threshold, and it stays optimal forever inside the
  absorbing region computed by :func:`solve_mmt`.  Below that region, z = 0
  still earns at least an ``approx_factor`` share of the optimum.

``exhaustive_policy_search`` and ``arrow_field`` evaluate every candidate
policy with a vectorized batch rollout; results are deterministic and
independent of evaluation chunking.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dynamics import (
    FluidState,
    ModelParams,
    matches,
    objective,
    rollout,
    step,
)
from .errors import (
    BracketError,
    BudgetError,
    ConvergenceError,
    DomainError,
    RegimeError,
)
from .matching import log_expm1, mu

__all__ = [
    "Regime",
    "MMTSolution",
    "PolicySearchResult",
    "classify_regime",
    "myopic_decision",
    "m1_curve",
    "dm1_dz0",
    "solve_mmt",
    "approx_factor",
    "match_min_upper_bound",
    "realized_ratio",
    "exhaustive_policy_search",
    "myopic_switch_curve",
    "arrow_field",
]

DEFAULT_BUDGET = 1_000_000
_CHUNK = 8192


class Regime(enum.Enum):
    AGD = "AGD"
    AGN = "AGN"


def classify_regime(params: ModelParams) -> Regime:
    """AGD iff gamma <= alpha - alpha_prime; the boundary belongs to AGD."""
    if params.gamma <= params.alpha - params.alpha_prime:
        return Regime.AGD
    return Regime.AGN


def myopic_decision(state0: FluidState, params: ModelParams) -> int:
    """Adoption level in {0, 1} maximizing next-period matches m_1.

    Full adoption wins iff the regime is AGD or

        c*d_1 <= log( (e^{c(1-alpha+alpha')m_0} - 1)
                    / (e^{c(gamma-alpha+alpha')m_0} - 1) )

    where d_1 = (1-beta)d_0 + beta'*m_0 does not depend on the decision.
    When m_0 = 0 or the growth benefit vanishes the threshold is taken as
    +inf (its limiting branch), so the rule returns 1.
    """
    m0 = matches(state0, params)
    benefit = params.non_adoption_growth_benefit
    if params.gamma <= params.alpha - params.alpha_prime or benefit <= 0.0:
        return 1
    if m0 <= 0.0:
        return 1
    c = params.c
    threshold = log_expm1(c * (1.0 - params.alpha + params.alpha_prime) * m0)
    threshold -= log_expm1(c * benefit * m0)
    d1 = (1.0 - params.beta) * state0.d + params.beta_prime * m0
    return 1 if c * d1 <= threshold else 0


def _m1_of_z(state0: FluidState, params: ModelParams, zs: np.ndarray) -> np.ndarray:
    """Next-period match volume for an array of adoption levels."""
    m0 = matches(state0, params)
    d1 = (1.0 - params.beta) * state0.d + params.beta_prime * m0
    k1 = (1.0 - params.gamma) * zs * m0
    v1 = (
        (1.0 - params.alpha) * state0.v
        + (params.alpha_prime + params.gamma_prime) * m0
        - params.non_adoption_growth_benefit * zs * m0
    )
    a = np.maximum(d1 - k1, 0.0)
    b = np.maximum(v1 - k1, 0.0)
    return k1 + mu(a, b, params.c)


def m1_curve(
    state0: FluidState, params: ModelParams, z_grid: Iterable[float]
) -> list[tuple[float, float]]:
    """Tabulate z -> m_1(z) over a grid of adoption levels in [0, 1].

    The grid argmax always sits at an endpoint (m_1 is quasiconvex in z)
    and, comparing the two endpoints, agrees with ``myopic_decision``.
    """
    zs = np.asarray(list(z_grid), dtype=float)
    if zs.size == 0:
        raise DomainError("z_grid must be nonempty")
    if np.any(zs < 0.0) or np.any(zs > 1.0):
        raise DomainError("z_grid values must lie in [0, 1]")
    m1 = np.atleast_1d(_m1_of_z(state0, params, zs))
    return list(zip(zs.tolist(), m1.tolist()))


def dm1_dz0(state0: FluidState, params: ModelParams, z: float) -> float:
    """Closed-form derivative of next-period matches in the adoption level.

    d m_1/d z_0 = m_0 * ((alpha-alpha'-gamma) e^{c(d_1-k_1)} + (1+alpha'-alpha))
                      / (e^{c(d_1-k_1)} + e^{c(v_1-k_1)} - 1),

    evaluated with e^{max} factored out of numerator and denominator.
    """
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"adoption fraction z must lie in [0, 1], got {z}")
    m0 = matches(state0, params)
    if m0 <= 0.0:
        return 0.0
    s1 = step(state0, z, params)
    c = params.c
    x = c * (s1.d - s1.k)
    y = c * (s1.v - s1.k)
    m = max(x, y)
    num = -params.non_adoption_growth_benefit * math.exp(x - m) + (
        1.0 + params.alpha_prime - params.alpha
    ) * math.exp(-m)
    den = math.exp(x - m) + math.exp(y - m) - math.exp(-m)
    return num / den * m0


@dataclass(frozen=True)
class MMTSolution:
    """Smallest absorbing thresholds (d_bar, v_bar) for a no-adoption policy.

    constraint_slack holds the residuals (lhs - rhs) of the four program
    constraints at the solution; the volunteer-balance constraint (the
    fourth) is tight by construction, so its residual is ~0.
    """

    d_bar: float
    v_bar: float
    constraint_slack: tuple[float, float, float, float]


def _snap_dust(x: float, eps: float = 1e-9) -> float:
    return 0.0 if -eps < x < 0.0 else x


def solve_mmt(
    params: ModelParams,
    d_step: float = 1e-3,
    tol: float = 1e-8,
    d_max: float = 100.0,
) -> MMTSolution:
    """Minimize d over the absorbing-region feasibility program.

    For each candidate d the volunteer threshold v(d) is pinned by making
    the donation-balance constraint tight:

        c*v = log( (e^{cd} - 1) / (e^{cd(1 - beta/beta')} - 1) ).

    The scan starts at the constant lower bound

        d >= log((1 + alpha' - alpha) / (gamma + alpha' - alpha)) / (c(1-beta))

    and walks upward in steps of ``d_step`` until the other two constraints
    hold, then bisection refines the crossing to ``tol``.  Every
    constraint's right-hand side grows slower than its left-hand side, so
    the first feasible d is the unique minimum.
    """
    if classify_regime(params) is not Regime.AGN:
        raise RegimeError("solve_mmt is defined only in the AGN regime")
    if params.beta <= 0.0:
        raise DomainError("solve_mmt requires beta > 0")
    if params.alpha_prime + params.gamma_prime <= params.alpha:
        raise DomainError(
            "solve_mmt requires alpha < alpha_prime + gamma_prime so the "
            "volunteer-balance constraint is well posed"
        )
    if d_step <= 0.0 or tol <= 0.0 or d_max <= 0.0:
        raise DomainError("d_step, tol, and d_max must be positive")

    c = params.c
    al, alp = params.alpha, params.alpha_prime
    ga, gap_ = params.gamma, params.gamma_prime
    be, bep = params.beta, params.beta_prime

    rhs7 = math.log((1.0 + alp - al) / (ga + alp - al)) / (1.0 - be)
    d_lo = rhs7 / c

    def v_of(d: float) -> float:
        return (log_expm1(c * d) - log_expm1(c * d * (1.0 - be / bep))) / c

    def rhs8(d: float) -> float:
        grow = log_expm1(c * (1.0 + alp - al) * d) - log_expm1(c * (ga + alp - al) * d)
        return grow / (1.0 - be) - bep / (1.0 - be) * c * d

    def rhs9(v: float) -> float:
        return log_expm1(c * v) - log_expm1(c * v * (1.0 - al / (alp + gap_)))

    def feasible(d: float) -> bool:
        return c * d >= rhs8(d) and c * d >= rhs9(v_of(d))

    if feasible(d_lo):
        d_bar = d_lo
    else:
        lo = d_lo
        hi = d_lo
        while True:
            hi += d_step
            if hi > d_max:
                raise ConvergenceError(
                    f"no feasible d below the ceiling {d_max}; last tried {hi}"
                )
            if feasible(hi):
                break
            lo = hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        d_bar = hi

    v_bar = v_of(d_bar)
    slack = (
        _snap_dust(c * d_bar - rhs7),
        _snap_dust(c * d_bar - rhs8(d_bar)),
        _snap_dust(c * d_bar - rhs9(v_bar)),
        _snap_dust(c * v_bar - c * v_of(d_bar)),
    )
    return MMTSolution(d_bar, v_bar, slack)


def approx_factor(
    params: ModelParams, d0: float, v0: float, T: int
) -> float:
    """Guaranteed share of the optimum earned by never adopting (AGN).

    With r = delta * max(1-beta+beta', 1-alpha+alpha'+gamma') and
    A3 = max(beta', alpha'+gamma'), the policy z = 0 is (1-kappa)-optimal
    for kappa = min( (1/(1-r^T) + A3/(1-r)) * log 2 / (c*min(d0, v0)), 1 ).
    The bound improves with thickness and is vacuous (0) once r >= 1.
    """
    if classify_regime(params) is not Regime.AGN:
        raise RegimeError("approx_factor is defined only in the AGN regime")
    if d0 <= 0.0 or v0 <= 0.0:
        raise DomainError("approx_factor requires d0 > 0 and v0 > 0")
    if T < 1:
        raise DomainError("approx_factor requires T >= 1")
    r = params.delta * max(
        1.0 - params.beta + params.beta_prime,
        1.0 - params.alpha + params.alpha_prime + params.gamma_prime,
    )
    if r >= 1.0:
        return 0.0
    a3 = max(params.beta_prime, params.alpha_prime + params.gamma_prime)
    kappa = (1.0 / (1.0 - r**T) + a3 / (1.0 - r)) * math.log(2.0)
    kappa = min(kappa / (params.c * min(d0, v0)), 1.0)
    return 1.0 - kappa


def match_min_upper_bound(state0: FluidState, params: ModelParams, T: int) -> float:
    """Discounted matches under perfectly efficient matching, never adopting.

    Replaces the greedy match volume with min(d, v) each period.  The
    result upper-bounds the discounted matches of every policy under the
    greedy dynamics from the same start.
    """
    if T < 1:
        raise DomainError("match_min_upper_bound requires T >= 1")
    d, v = state0.d, state0.v
    m = min(d, v)
    total = 0.0
    for t in range(T):
        d = (1.0 - params.beta) * d + params.beta_prime * m
        v = (1.0 - params.alpha) * v + (params.alpha_prime + params.gamma_prime) * m
        m = min(d, v)
        total += params.delta**t * m
    return total


def realized_ratio(state0: FluidState, params: ModelParams, T: int) -> float:
    """Discounted matches of z = 0 divided by the match-min upper bound."""
    ub = match_min_upper_bound(state0, params, T)
    if ub <= 0.0:
        raise DomainError(
            "match-min upper bound is zero; the initial market is empty"
        )
    traj = rollout(state0, (0.0,) * T, params)
    return objective(traj, params.delta) / ub


@dataclass(frozen=True)
class PolicySearchResult:
    """Outcome of an exhaustive policy enumeration.

    best_value always equals objective(rollout(state0, best_policy), delta)
    recomputed through the scalar path.  all_or_nothing flags whether the
    maximizer uses only the extreme levels 0 and 1.
    """

    best_policy: tuple[float, ...]
    best_value: float
    all_or_nothing: bool
    evaluations: int


def _policy_chunk(
    cands: np.ndarray, T: int, start: int, stop: int
) -> np.ndarray:
    """Policies number start..stop-1 in lexicographic candidate order."""
    idx = np.arange(start, stop, dtype=np.int64)
    k = len(cands)
    cols = []
    for t in range(T):
        digit = (idx // k ** (T - 1 - t)) % k
        cols.append(cands[digit])
    return np.column_stack(cols)


def _batch_objective(
    state0: FluidState, policies: np.ndarray, params: ModelParams
) -> np.ndarray:
    """Discounted objective of each policy row, via a vectorized rollout."""
    n = policies.shape[0]
    d = np.full(n, state0.d)
    k = np.full(n, state0.k)
    v = np.full(n, state0.v)
    m = k + mu(np.maximum(d - k, 0.0), np.maximum(v - k, 0.0), params.c)
    benefit = params.non_adoption_growth_benefit
    val = np.zeros(n)
    for t in range(policies.shape[1]):
        z = policies[:, t]
        d2 = (1.0 - params.beta) * d + params.beta_prime * m
        k2 = (1.0 - params.gamma) * z * m
        v2 = (
            (1.0 - params.alpha) * v
            + (params.alpha_prime + params.gamma_prime) * m
            - benefit * z * m
        )
        d, k, v = d2, k2, v2
        m = k + mu(np.maximum(d - k, 0.0), np.maximum(v - k, 0.0), params.c)
        val += params.delta**t * m
    return val


def exhaustive_policy_search(
    state0: FluidState,
    params: ModelParams,
    T: int,
    candidate_set: Iterable[float],
    budget: int = DEFAULT_BUDGET,
) -> PolicySearchResult:
    """Maximize discounted matches over all policies in candidate_set^T.

    Ties break toward the lexicographically largest policy, i.e. toward
    adoption.  Enumeration happens in fixed lexicographic chunks, so the
    result does not depend on chunk size.
    """
    cands = np.asarray(sorted(set(float(z) for z in candidate_set)), dtype=float)
    if cands.size == 0:
        raise DomainError("candidate_set must be nonempty")
    if np.any(cands < 0.0) or np.any(cands > 1.0):
        raise DomainError("candidate adoption levels must lie in [0, 1]")
    if T < 1:
        raise DomainError("search horizon T must be >= 1")
    n_pol = len(cands) ** T
    if n_pol > budget:
        raise BudgetError(
            f"{len(cands)}^{T} = {n_pol} rollouts exceed the budget {budget}"
        )

    best_val = -math.inf
    best_policy: np.ndarray | None = None
    for start in range(0, n_pol, _CHUNK):
        chunk = _policy_chunk(cands, T, start, min(start + _CHUNK, n_pol))
        vals = _batch_objective(state0, chunk, params)
        top = float(vals.max())
        if top >= best_val:
            best_val = top
            # last index among exact ties = lexicographically largest
            best_policy = chunk[np.flatnonzero(vals == top)[-1]]
    assert best_policy is not None
    policy = tuple(float(z) for z in best_policy)
    value = objective(rollout(state0, policy, params), params.delta)
    all_or_nothing = all(z in (0.0, 1.0) for z in policy)
    return PolicySearchResult(policy, value, all_or_nothing, n_pol)


def myopic_switch_curve(
    params: ModelParams,
    v_grid: Iterable[float],
    d_lo: float,
    d_hi: float,
    tol: float = 1e-6,
) -> list[tuple[float, float]]:
    """Donation level d* where the myopic decision flips, per volunteer level.

    For each v the decision must be 1 at d_lo and 0 at d_hi (otherwise the
    bracket does not contain the flip and BracketError is raised); bisection
    then narrows the flip point to ``tol``.
    """
    vs = [float(v) for v in v_grid]
    if not vs:
        raise DomainError("v_grid must be nonempty")
    if any(v <= 0.0 for v in vs):
        raise DomainError("v_grid values must be positive")
    if not d_lo < d_hi:
        raise DomainError(f"need d_lo < d_hi, got {d_lo} >= {d_hi}")
    if d_lo < 0.0:
        raise DomainError("d_lo must be >= 0")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    out = []
    for v in vs:
        if myopic_decision(FluidState(d_lo, 0.0, v), params) != 1:
            raise BracketError(
                f"myopic decision is not 1 at d_lo={d_lo} for v={v}"
            )
        if myopic_decision(FluidState(d_hi, 0.0, v), params) != 0:
            raise BracketError(
                f"myopic decision is not 0 at d_hi={d_hi} for v={v}"
            )
        lo, hi = d_lo, d_hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if myopic_decision(FluidState(mid, 0.0, v), params) == 1:
                lo = mid
            else:
                hi = mid
        out.append((v, 0.5 * (lo + hi)))
    return out


def arrow_field(
    params: ModelParams,
    d_grid: Iterable[float],
    v_grid: Iterable[float],
    T: int,
    budget: int = DEFAULT_BUDGET,
) -> list[tuple[float, float, float, float, float]]:
    """First-period optimal decision and state drift on a (d, v) grid.

    Each grid point (d, v) seeds the state (d, 0, v); the optimal policy is
    searched over {0, 1}^T, its first action z0* is reported together with
    the one-step state change (d' - d, v' - v) under that action.
    """
    ds = [float(d) for d in d_grid]
    vs = [float(v) for v in v_grid]
    if not ds or not vs:
        raise DomainError("d_grid and v_grid must be nonempty")
    if any(x <= 0.0 for x in ds + vs):
        raise DomainError("grid values must be positive")
    rows = []
    for d in ds:
        for v in vs:
            state = FluidState(d, 0.0, v)
            res = exhaustive_policy_search(state, params, T, (0.0, 1.0), budget)
            z0 = res.best_policy[0]
            nxt = step(state, z0, params)
            rows.append((d, v, z0, nxt.d - d, nxt.v - v))
    return rows
