"""Finite-market Monte Carlo simulator of the greedy matching dynamics.

A market at scale n holds integer pools (D, K, V) with pairwise match
probability c/n.  Each period the spot market (D-K donations, V-K
volunteers) matches through the sequentially greedy process; the platform
designates a fraction z of all M matches as adopted, and every pool then
evolves by independent Bernoulli dropout/growth draws whose conditional
means reproduce the deterministic large-market dynamics.

Replications draw from counter-based Philox streams keyed by
(seed, replication index), so results are reproducible and independent of
evaluation order or parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams, validate_policy
from .errors import DomainError, IntegralityError
from .matching import mu

__all__ = [
    "IntState",
    "SimConfig",
    "replication_rng",
    "greedy_spot_match",
    "sim_step",
    "run_trajectory",
    "convergence_report",
    "simulated_m1_curve",
    "PAIRWISE_MAX_SIDE",
]

PAIRWISE_MAX_SIDE = 2000  # quadratic-cost guard for the pairwise oracle
_MATCH_MODES = ("aggregated", "pairwise")
_U64_MAX = 2**64


@dataclass(frozen=True)
class IntState:
    """Integer market state: donations D, adopted pairs K, volunteers V."""

    D: int
    K: int
    V: int

    def __post_init__(self):
        for name in ("D", "K", "V"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {value}")
        if self.K > min(self.D, self.V):
            raise DomainError(
                f"adopted pairs cannot exceed either pool: K={self.K}, "
                f"D={self.D}, V={self.V}"
            )


@dataclass(frozen=True)
class SimConfig:
    """Scale, seeding, and matching mode for a replication study."""

    n: int
    seed: int
    replications: int
    match_mode: str = "aggregated"

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.seed < _U64_MAX:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.replications < 1:
            raise DomainError(f"replications must be >= 1, got {self.replications}")
        if self.match_mode not in _MATCH_MODES:
            raise DomainError(
                f"match_mode must be one of {_MATCH_MODES}, got {self.match_mode!r}"
            )


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for one replication.

    Streams are keyed by (seed, index), never split or jumped, so
    replication r sees the same draws whether it runs alone, in a batch, or
    on another thread.
    """
    if not 0 <= seed < _U64_MAX:
        raise DomainError("seed must be a 64-bit unsigned integer")
    if not 0 <= index < _U64_MAX:
        raise DomainError("replication index must be a 64-bit unsigned integer")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _greedy_aggregated(n_don: int, n_vol: int, p: float, rng) -> int:
    # Waiting-time form of the volunteer-by-volunteer chain: with r
    # donations remaining, volunteers fail independently w.p. (1-p)^r, so
    # the number consumed per additional match is Geometric(1-(1-p)^r).
    # Distribution over counts is identical to iterating volunteers.
    m = min(n_don, n_vol)
    r = n_don - np.arange(m, dtype=np.int64)
    f = -np.expm1(r * np.log1p(-p))
    waits = rng.geometric(f)
    return int(np.searchsorted(np.cumsum(waits), n_vol, side="right"))


def _greedy_pairwise(n_don: int, n_vol: int, p: float, rng) -> int:
    if max(n_don, n_vol) > PAIRWISE_MAX_SIDE:
        raise DomainError(
            f"pairwise mode is limited to sides <= {PAIRWISE_MAX_SIDE}"
        )
    compat = rng.random((n_vol, n_don)) < p
    available = np.ones(n_don, dtype=bool)
    matched = 0
    for j in rng.permutation(n_vol):
        options = np.flatnonzero(compat[j] & available)
        if options.size:
            available[options[rng.integers(options.size)]] = False
            matched += 1
    return matched


def greedy_spot_match(
    n_don: int, n_vol: int, p: float, rng, mode: str = "aggregated"
) -> int:
    """Match count of one greedy spot market with match probability p.

    aggregated: volunteers arrive in sequence and match with probability
    1-(1-p)^{remaining donations}; sampled through an equivalent
    waiting-time decomposition whose cost is linear in the short side.

    pairwise: an explicit Bernoulli(p) compatibility draw per
    (volunteer, donation) pair, random arrival order, uniform choice among
    compatible remaining donations.  Quadratic cost; serves as a
    small-instance distributional oracle for the aggregated mode.
    """
    if n_don < 0 or n_vol < 0:
        raise DomainError("side sizes must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"match probability must lie in [0, 1], got {p}")
    if mode not in _MATCH_MODES:
        raise DomainError(f"mode must be one of {_MATCH_MODES}, got {mode!r}")
    if n_don == 0 or n_vol == 0 or p == 0.0:
        return 0
    if mode == "pairwise":
        return _greedy_pairwise(n_don, n_vol, p, rng)
    if p == 1.0:
        return min(n_don, n_vol)
    return _greedy_aggregated(n_don, n_vol, p, rng)


def _round_adoption(target: float, rng) -> int:
    # Randomized rounding keeps E[count] = target; values within 1e-9 of an
    # integer snap exactly so z-grids expressed in decimals stay integral.
    base = math.floor(target)
    frac = target - base
    if frac < 1e-9:
        return base
    if frac > 1.0 - 1e-9:
        return base + 1
    return base + (1 if rng.random() < frac else 0)


def sim_step(
    state: IntState,
    z: float,
    params: ModelParams,
    n: int,
    rng,
    mode: str = "aggregated",
) -> tuple[IntState, int]:
    """One simulated period; returns (next state, match count M).

    M = K + spot matches.  Z = round(z*M) matches are designated adopted;
    surviving adopters carry into K'.  A departing adopter's donation stays
    in D' and re-enters the next spot market.  Conditional means of
    (D', K', V') equal the deterministic dynamics at m = M/n.
    """
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"adoption fraction z must lie in [0, 1], got {z}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if params.c > n:
        raise DomainError(
            f"match probability c/n must be <= 1, got c={params.c}, n={n}"
        )
    if params.gamma_prime > 1.0:
        raise DomainError(
            "the finite-market simulator draws per-match volunteer growth as "
            f"Bernoulli(gamma_prime); gamma_prime={params.gamma_prime} > 1"
        )
    p = params.c / n
    spot = greedy_spot_match(state.D - state.K, state.V - state.K, p, rng, mode)
    M = state.K + spot
    Z = _round_adoption(z * M, rng)

    K2 = int(rng.binomial(Z, 1.0 - params.gamma))
    idle_d = state.D - M
    D2 = (
        idle_d
        - int(rng.binomial(idle_d, params.beta))
        + M
        + int(rng.binomial(M, params.beta_prime - params.beta))
    )
    idle_v = state.V - M
    V2 = (
        idle_v
        - int(rng.binomial(idle_v, params.alpha))
        + K2
        + int(rng.binomial(M - Z, 1.0 - (params.alpha - params.alpha_prime)))
        + int(rng.binomial(M, params.gamma_prime))
    )
    return IntState(D2, K2, V2), M


def run_trajectory(
    state0: IntState,
    policy,
    params: ModelParams,
    n: int,
    rng,
    mode: str = "aggregated",
) -> list[tuple[IntState, int]]:
    """Simulate a T-period policy, recording (state_t, M_t) for t = 0..T.

    The final entry needs one extra sim_step call whose population update
    is discarded; only its match count M_T is kept (the adoption level
    passed there cannot affect M_T).
    """
    zs = validate_policy(policy)
    out = []
    cur = state0
    for z in zs:
        nxt, M = sim_step(cur, z, params, n, rng, mode)
        out.append((cur, M))
        cur = nxt
    _, m_last = sim_step(cur, 0.0, params, n, rng, mode)
    out.append((cur, m_last))
    return out


def convergence_report(
    n_values,
    c: float,
    a: float,
    b: float,
    replications: int,
    seed: int,
) -> list[tuple[int, float, float]]:
    """Mean gap E[S/n] - mu(a, b, c) of one spot market, per scale n.

    Sides have size round(n*a) and round(n*b) with match probability c/n.
    Returns (n, mean_gap, stderr) rows; the gap is positive at every n and
    shrinks as n grows.
    """
    if a <= 0.0 or b <= 0.0:
        raise DomainError("side sizes a and b must be positive")
    if replications < 1:
        raise DomainError(f"replications must be >= 1, got {replications}")
    ns = [int(n) for n in n_values]
    if not ns:
        raise DomainError("n_values must be nonempty")
    mu_val = mu(a, b, c)
    rows = []
    for i, n in enumerate(ns):
        if n < 1:
            raise DomainError(f"n must be >= 1, got {n}")
        if c > n:
            raise DomainError(f"match probability c/n must be <= 1 (n={n}, c={c})")
        n_don = round(n * a)
        n_vol = round(n * b)
        samples = np.empty(replications)
        for rep in range(replications):
            rng = replication_rng(seed, i * replications + rep)
            samples[rep] = greedy_spot_match(n_don, n_vol, c / n, rng) / n
        gap = float(samples.mean()) - mu_val
        se = (
            float(samples.std(ddof=1)) / math.sqrt(replications)
            if replications > 1
            else 0.0
        )
        rows.append((n, gap, se))
    return rows


def simulated_m1_curve(
    state0: IntState,
    params: ModelParams,
    n: int,
    z_grid,
    replications: int,
    seed: int,
    mode: str = "aggregated",
    allow_rounding: bool = False,
) -> list[tuple[float, float, float]]:
    """Mean and stderr of next-period matches M_1/n per adoption level.

    With rounding disabled (the default), the period-0 spot market must be
    empty — a fully adopted start makes M_0 = K_0 deterministic — and every
    z*M_0 must be an integer, so the designated adopted count never needs
    randomized rounding at t = 0.
    """
    zs = [float(z) for z in z_grid]
    if not zs:
        raise DomainError("z_grid must be nonempty")
    if any(not 0.0 <= z <= 1.0 for z in zs):
        raise DomainError("z_grid values must lie in [0, 1]")
    if replications < 1:
        raise DomainError(f"replications must be >= 1, got {replications}")
    if not allow_rounding:
        if state0.D - state0.K != 0 and state0.V - state0.K != 0:
            raise IntegralityError(
                "period-0 spot market is nonempty so M_0 is random; start "
                "fully adopted or pass allow_rounding=True"
            )
        m0 = state0.K
        for z in zs:
            if abs(z * m0 - round(z * m0)) > 1e-9:
                raise IntegralityError(
                    f"z={z} would need rounding: z*M_0 = {z * m0} is not an "
                    "integer (pass allow_rounding=True to permit it)"
                )
    rows = []
    for iz, z in enumerate(zs):
        vals = np.empty(replications)
        for rep in range(replications):
            rng = replication_rng(seed, iz * replications + rep)
            traj = run_trajectory(state0, (z,), params, n, rng, mode)
            vals[rep] = traj[1][1] / n
        se = (
            float(vals.std(ddof=1)) / math.sqrt(replications)
            if replications > 1
            else 0.0
        )
        rows.append((z, float(vals.mean()), se))
    return rows
