"""Flat key = value experiment configuration files.

One key per line, ``#`` starts a comment, blank lines ignored.  Recognized
keys: the eight model parameters (alpha, alpha_prime, gamma, gamma_prime,
beta, beta_prime, c, delta), the horizon T, the initial state (d0, k0, v0),
simulation settings (n, seed, replications, match_mode), the policy spec z
(a scalar, a comma list, or the word "search"), and grids (z_grid, d_grid,
v_grid) written as lo:hi:step triples.  ``n`` may also be a comma list for
convergence studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dynamics import FluidState, ModelParams
from .errors import DomainError
from .simulate import IntState

__all__ = ["ExperimentConfig", "parse_config", "load_config", "parse_grid"]

ALLOWED_KEYS = frozenset(
    {
        "alpha",
        "alpha_prime",
        "gamma",
        "gamma_prime",
        "beta",
        "beta_prime",
        "c",
        "delta",
        "T",
        "d0",
        "k0",
        "v0",
        "n",
        "seed",
        "replications",
        "match_mode",
        "z",
        "z_grid",
        "d_grid",
        "v_grid",
    }
)

_PARAM_KEYS = (
    "alpha",
    "alpha_prime",
    "gamma",
    "gamma_prime",
    "beta",
    "beta_prime",
    "c",
    "delta",
)


def parse_config(text: str) -> dict[str, str]:
    """Parse config text into a raw key -> value string mapping."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key = value: {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in ALLOWED_KEYS:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise DomainError(f"config line {lineno}: duplicate key {key!r}")
        if not value:
            raise DomainError(f"config line {lineno}: empty value for {key!r}")
        values[key] = value
    return values


def load_config(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise DomainError(f"config key {key!r}: not a number: {value!r}") from None


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise DomainError(f"config key {key!r}: not an integer: {value!r}") from None


def parse_grid(spec: str, key: str = "grid") -> list[float]:
    """Expand a lo:hi:step triple into an inclusive list of values."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise DomainError(f"{key!r} must be a lo:hi:step triple, got {spec!r}")
    lo, hi, step_ = (_to_float(key, p) for p in parts)
    if step_ <= 0.0:
        raise DomainError(f"{key!r}: step must be positive, got {step_}")
    if hi < lo:
        raise DomainError(f"{key!r}: need hi >= lo, got {spec!r}")
    count = int((hi - lo) / step_ + 1e-9) + 1
    return [lo + i * step_ for i in range(count)]


@dataclass
class ExperimentConfig:
    """Typed view over a raw config mapping with per-key accessors."""

    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        return cls(load_config(path))

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls(parse_config(text))

    def has(self, key: str) -> bool:
        return key in self.values

    def _require(self, key: str) -> str:
        if key not in self.values:
            raise DomainError(f"missing required config key {key!r}")
        return self.values[key]

    def number(self, key: str) -> float:
        return _to_float(key, self._require(key))

    def integer(self, key: str) -> int:
        return _to_int(key, self._require(key))

    def params(self, delta_override: float | None = None) -> ModelParams:
        kwargs = {key: self.number(key) for key in _PARAM_KEYS if key != "delta"}
        if delta_override is not None:
            kwargs["delta"] = delta_override
        elif self.has("delta"):
            kwargs["delta"] = self.number("delta")
        else:
            raise DomainError("missing required config key 'delta'")
        return ModelParams(**kwargs)

    def fluid_state(self) -> FluidState:
        k0 = self.number("k0") if self.has("k0") else 0.0
        return FluidState(self.number("d0"), k0, self.number("v0"))

    def int_state(self, n: int) -> IntState:
        s = self.fluid_state()
        return IntState(round(n * s.d), round(n * s.k), round(n * s.v))

    def grid(self, key: str) -> list[float]:
        return parse_grid(self._require(key), key)

    def n_list(self) -> list[int]:
        """The n key as a list (comma list or single value)."""
        raw = self._require("n")
        return [_to_int("n", part.strip()) for part in raw.split(",")]

    def seed(self) -> int:
        value = self.integer("seed")
        if not 0 <= value < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {value}")
        return value

    def policy(self, T: int) -> list[float] | str:
        """The z key: "search", or a list of T levels (scalars broadcast)."""
        raw = self._require("z").strip()
        if raw == "search":
            return "search"
        parts = [p.strip() for p in raw.split(",")]
        levels = [_to_float("z", p) for p in parts]
        if len(levels) == 1:
            levels = levels * T
        if len(levels) != T:
            raise DomainError(
                f"policy 'z' has {len(levels)} entries but the horizon is {T}"
            )
        return levels
