"""Closed-form matching function for a random-compatibility spot market.

A spot market has two sides of scaled sizes ``a`` (donations) and ``b``
(volunteers).  Participants are pairwise compatible at random, with a
thickness constant ``c`` giving each user ``c`` times the other side's
scaled size as its expected number of compatible counterparts.  Under
sequentially greedy matching the scaled match count concentrates, in large
markets, around

    mu(a, b, c) = a + b - log(exp(c*a) + exp(c*b) - 1) / c

This module evaluates ``mu`` in a numerically stable form, together with
its partial derivatives and two comparator matching functions: the
Cobb-Douglas production form and the fully efficient min-side rule.

All functions accept scalars or numpy arrays (broadcasting applies) and
return a plain float for scalar input.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = ["mu", "mu_partials", "match_min", "cobb_douglas", "log_expm1"]

_LOG2 = 0.6931471805599453


def _as_float(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError(f"{name} must not be NaN")
    return arr


def _ret(out):
    return float(out) if np.ndim(out) == 0 else out


def log_expm1(x):
    """log(exp(x) - 1) for x > 0, without overflow or cancellation.

    Uses log(expm1(x)) below log 2 and x + log1p(-exp(-x)) above, so the
    result is accurate from denormal x up to x ~ 1e308.
    """
    x = _as_float(x, "x")
    if np.any(x <= 0.0):
        raise DomainError("log_expm1 requires x > 0")
    small = x < _LOG2
    return _ret(
        np.where(
            small,
            np.log(np.expm1(np.where(small, x, 1.0))),
            x + np.log1p(-np.exp(-np.where(small, 1.0, x))),
        )
    )


def mu(a, b, c):
    """Greedy match volume between spot sides of scaled sizes a and b.

    Evaluates a + b - log(e^{ca} + e^{cb} - 1)/c with max(ca, cb) factored
    out of the logarithm; the raw form overflows near ca ~ 710.  Folding
    a + b - max(a, b) into min(a, b) gives

        mu = min(a, b) - log1p(e^{lo-hi} - e^{-hi}) / c,

    with lo = c*min(a,b) and hi = c*max(a,b), which is exact at an empty
    side (mu(0, b, c) == 0.0) and never exceeds min(a, b).
    """
    a = _as_float(a, "a")
    b = _as_float(b, "b")
    c = _as_float(c, "c")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("mu requires a >= 0 and b >= 0")
    if np.any(c <= 0.0):
        raise DomainError("mu requires c > 0")
    x = c * a
    y = c * b
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    return _ret(np.minimum(a, b) - np.log1p(np.exp(lo - hi) - np.exp(-hi)) / c)


def mu_partials(a, b, c):
    """Partial derivatives (d mu/da, d mu/db); both lie in [0, 1].

    d mu/da = (e^{cb} - 1) / (e^{ca} + e^{cb} - 1), and symmetrically for
    b.  Numerator and denominator are both divided by e^{max(ca, cb)}
    before evaluating.
    """
    a = _as_float(a, "a")
    b = _as_float(b, "b")
    c = _as_float(c, "c")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("mu_partials requires a >= 0 and b >= 0")
    if np.any(c <= 0.0):
        raise DomainError("mu_partials requires c > 0")
    x = c * a
    y = c * b
    m = np.maximum(x, y)
    em = np.exp(-m)
    ex = np.exp(x - m)
    ey = np.exp(y - m)
    den = ex + ey - em
    return _ret((ey - em) / den), _ret((ex - em) / den)


def match_min(a, b):
    """Fully efficient comparator: every user on the short side matches."""
    a = _as_float(a, "a")
    b = _as_float(b, "b")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("match_min requires a >= 0 and b >= 0")
    return _ret(np.minimum(a, b))


def cobb_douglas(a, b, rho, omega):
    """Cobb-Douglas comparator a**rho * b**omega.

    With rho + omega > 1 it has increasing returns to scale but violates
    the physical cap min(a, b); ``mu`` satisfies both.
    """
    a = _as_float(a, "a")
    b = _as_float(b, "b")
    rho = _as_float(rho, "rho")
    omega = _as_float(omega, "omega")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("cobb_douglas requires a >= 0 and b >= 0")
    if np.any(rho < 0.0) or np.any(omega < 0.0):
        raise DomainError("cobb_douglas requires rho >= 0 and omega >= 0")
    return _ret(np.power(a, rho) * np.power(b, omega))
