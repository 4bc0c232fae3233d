"""Deterministic large-market dynamics under an adoption-level control.

State (d, k, v) holds the scaled number of donations, adopted pairs, and
volunteers.  Each period the market completes

    m = k + mu(d - k, v - k, c)

matches and transitions, given the adopted fraction z of those matches, to

    d' = (1 - beta) d + beta' m
    k' = (1 - gamma) z m
    v' = (1 - alpha) v + (alpha' + gamma') m - (gamma - alpha + alpha') z m

The planner's objective over a horizon T is sum_{t=1..T} delta^{t-1} m_t;
the period-0 match volume is recorded for diagnostics but never counted,
since the first decision cannot affect it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError
from .matching import mu

__all__ = [
    "ModelParams",
    "FluidState",
    "Trajectory",
    "matches",
    "step",
    "rollout",
    "objective",
    "validate_policy",
]

# Floating slack tolerated on state invariants.  Anything beyond this is a
# bug, not roundoff, and fails loudly instead of being projected away.
FEAS_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Behavioral probabilities, thickness constant, and discount factor.

    alpha        unmatched-volunteer dropout probability, in (0, 1)
    alpha_prime  dropout reduction for matched non-adopters, in [0, alpha]
    gamma        adopter dropout probability, in (0, 1)
    gamma_prime  volunteer growth per match, >= 0
    beta         unmatched-donation dropout probability, 0 <= beta < beta_prime
    beta_prime   donation growth coefficient, beta_prime - beta <= 1
    c            market thickness constant, > 0
    delta        per-period discount factor, in [0, 1]
    """

    alpha: float
    alpha_prime: float
    gamma: float
    gamma_prime: float
    beta: float
    beta_prime: float
    c: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.alpha_prime <= self.alpha:
            raise DomainError(
                f"alpha_prime must lie in [0, alpha], got {self.alpha_prime}"
            )
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.gamma_prime < 0.0:
            raise DomainError(f"gamma_prime must be >= 0, got {self.gamma_prime}")
        if not 0.0 <= self.beta < self.beta_prime:
            raise DomainError(
                f"need 0 <= beta < beta_prime, got beta={self.beta}, "
                f"beta_prime={self.beta_prime}"
            )
        if self.beta_prime - self.beta > 1.0:
            raise DomainError(
                "beta_prime - beta is the per-match new-donation probability "
                f"and must be <= 1, got {self.beta_prime - self.beta}"
            )
        if self.c <= 0.0:
            raise DomainError(f"c must be > 0, got {self.c}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")

    @property
    def non_adoption_growth_benefit(self) -> float:
        """Expected volunteer-pool gain from swapping one adopted match
        for a one-time match: gamma - alpha + alpha_prime."""
        return self.gamma - self.alpha + self.alpha_prime


@dataclass(frozen=True)
class FluidState:
    """Scaled pool sizes: donations d, adopted pairs k, volunteers v."""

    d: float
    k: float
    v: float

    def __post_init__(self):
        if self.d < -FEAS_TOL or self.v < -FEAS_TOL or self.k < -FEAS_TOL:
            raise DomainError(f"state components must be >= 0, got {self}")
        if self.k > min(self.d, self.v) + FEAS_TOL:
            raise DomainError(
                f"adopted pairs cannot exceed either pool: k={self.k}, "
                f"d={self.d}, v={self.v}"
            )


def matches(state: FluidState, params: ModelParams) -> float:
    """Period match volume m = k + mu(d - k, v - k, c)."""
    a = state.d - state.k
    b = state.v - state.k
    if a < -FEAS_TOL or b < -FEAS_TOL:
        raise DomainError(f"adopted pairs exceed a pool: {state}")
    return state.k + mu(max(a, 0.0), max(b, 0.0), params.c)


def _advance(state: FluidState, m: float, z: float, params: ModelParams) -> FluidState:
    d2 = (1.0 - params.beta) * state.d + params.beta_prime * m
    k2 = (1.0 - params.gamma) * z * m
    v2 = (
        (1.0 - params.alpha) * state.v
        + (params.alpha_prime + params.gamma_prime) * m
        - params.non_adoption_growth_benefit * z * m
    )
    # FluidState re-checks k2 <= min(d2, v2); provable from beta' > beta and
    # gamma' >= 0, so a failure here indicates a bug upstream.
    return FluidState(d2, k2, v2)


def step(state: FluidState, z: float, params: ModelParams) -> FluidState:
    """One period of the dynamics under adopted fraction z."""
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"adoption fraction z must lie in [0, 1], got {z}")
    return _advance(state, matches(state, params), z, params)


def validate_policy(policy: Sequence[float]) -> tuple[float, ...]:
    """Check every per-period adoption fraction lies in [0, 1]."""
    out = tuple(float(z) for z in policy)
    if not out:
        raise DomainError("policy must cover at least one period")
    for z in out:
        if not 0.0 <= z <= 1.0:
            raise DomainError(f"adoption fraction z must lie in [0, 1], got {z}")
    return out


@dataclass(frozen=True)
class Trajectory:
    """States and match volumes indexed t = 0..T for a T-period policy."""

    states: tuple[FluidState, ...]
    matches: tuple[float, ...]

    def __post_init__(self):
        if len(self.states) != len(self.matches) or len(self.states) < 2:
            raise DomainError("trajectory needs states and matches for t = 0..T")

    @property
    def horizon(self) -> int:
        return len(self.matches) - 1

    def discounted_terms(self, delta: float) -> tuple[float, ...]:
        """The objective components delta^{t-1} * m_t for t = 1..T."""
        return tuple(delta**t * m for t, m in enumerate(self.matches[1:]))


def rollout(
    state0: FluidState, policy: Sequence[float], params: ModelParams
) -> Trajectory:
    """Apply ``step`` once per policy entry, recording every m_t.

    m_0 is included in the trajectory for diagnostics even though the
    objective starts at t = 1.
    """
    zs = validate_policy(policy)
    states = [state0]
    ms = [matches(state0, params)]
    for z in zs:
        nxt = _advance(states[-1], ms[-1], z, params)
        states.append(nxt)
        ms.append(matches(nxt, params))
    return Trajectory(tuple(states), tuple(ms))


def objective(traj: Trajectory, delta: float) -> float:
    """Total discounted matches sum_{t=1..T} delta^{t-1} m_t.

    m_0 is excluded: the sum starts at t = 1.  delta = 0 returns m_1.
    """
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    total = 0.0
    for t, m in enumerate(traj.matches[1:]):
        total += delta**t * m
    return total
