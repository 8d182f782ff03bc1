"""Economic inputs and the price/time lattice shared by all engines."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigError, QubitBudgetError

DEFAULT_QUBIT_CAP = 24

PayoffKind = Literal["call", "put"]


def qubit_cap() -> int:
    """Simulator-wide qubit budget; QVAR_QUBIT_CAP overrides the default 24."""
    raw = os.environ.get("QVAR_QUBIT_CAP")
    if raw is None:
        return DEFAULT_QUBIT_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"QVAR_QUBIT_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ConfigError(f"QVAR_QUBIT_CAP must be positive, got {cap}")
    return cap


def _check_integer_multiple(num: float, den: float, what: str) -> int:
    k = num / den
    k_round = round(k)
    if abs(k - k_round) > 1e-9 * max(1.0, abs(k)):
        raise ConfigError(f"{what} = {num}/{den} is not an integer number of steps")
    return int(k_round)


@dataclass(frozen=True)
class MarketParams:
    """Market dynamics and discretization parameters.

    r      risk-free rate per unit time
    mu     real-world drift per unit time
    alpha  square-root local volatility coefficient (sigma(S) = alpha / sqrt(S))
    T      option expiry
    t_bar  risk horizon, 0 <= t_bar <= T
    dtau   timestep; both (T - t_bar)/dtau and t_bar/dtau must be integers
    """

    r: float
    mu: float
    alpha: float
    T: float
    t_bar: float
    dtau: float

    def __post_init__(self):
        if self.r < 0:
            raise ConfigError(f"r must be non-negative, got {self.r}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if not (0 <= self.t_bar <= self.T):
            raise ConfigError(f"need 0 <= t_bar <= T, got t_bar={self.t_bar}, T={self.T}")
        if self.dtau <= 0:
            raise ConfigError(f"dtau must be positive, got {self.dtau}")
        _check_integer_multiple(self.T - self.t_bar, self.dtau, "(T - t_bar)/dtau")
        _check_integer_multiple(self.t_bar, self.dtau, "t_bar/dtau")

    @property
    def pricing_steps(self) -> int:
        """Number of implicit backward steps from T to t_bar."""
        return _check_integer_multiple(self.T - self.t_bar, self.dtau, "(T - t_bar)/dtau")

    @property
    def horizon_steps(self) -> int:
        """Number of forward scenario steps from 0 to t_bar."""
        return _check_integer_multiple(self.t_bar, self.dtau, "t_bar/dtau")


@dataclass(frozen=True)
class PayoffSpec:
    kind: PayoffKind
    strike: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ConfigError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if self.strike < 0:
            raise ConfigError(f"strike must be non-negative, got {self.strike}")


class PriceGrid:
    """Strictly increasing price nodes S_0 < ... < S_{2^n - 1}."""

    def __init__(self, nodes, n: int):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size != 2**n:
            raise ConfigError(f"grid must have exactly 2^{n} nodes, got {nodes.size}")
        if nodes[0] < 0:
            raise ConfigError(f"S_0 must be non-negative, got {nodes[0]}")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigError("grid nodes must be strictly increasing")
        self.nodes = nodes
        self.nodes.setflags(write=False)
        self.n = n

    def __len__(self) -> int:
        return self.nodes.size

    def __repr__(self) -> str:
        return f"PriceGrid(n={self.n}, [{self.nodes[0]}, ..., {self.nodes[-1]}])"

    def nearest_index(self, price: float) -> int:
        """Index of the node closest to ``price``; ties round down."""
        d = np.abs(self.nodes - price)
        # argmin returns the first (lower) index on exact ties
        return int(np.argmin(d))


def payoff_vector(spec: PayoffSpec, grid: PriceGrid) -> np.ndarray:
    """Terminal option values on the grid: max(S-K, 0) or max(K-S, 0)."""
    if spec.kind == "call":
        return np.maximum(grid.nodes - spec.strike, 0.0)
    return np.maximum(spec.strike - grid.nodes, 0.0)


def build_grid(s_min: float, s_max: float, n: int, spacing: str = "uniform") -> PriceGrid:
    """Build a 2^n node grid on [s_min, s_max], uniform or geometric."""
    if not (0 <= s_min < s_max):
        raise ConfigError(f"need 0 <= s_min < s_max, got [{s_min}, {s_max}]")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    cap = qubit_cap()
    if n > cap:
        raise QubitBudgetError(f"grid register of {n} qubits exceeds the budget of {cap}")
    size = 2**n
    if spacing == "uniform":
        nodes = np.linspace(s_min, s_max, size)
    elif spacing == "geometric":
        if s_min <= 0:
            raise ConfigError("geometric spacing requires s_min > 0")
        nodes = np.geomspace(s_min, s_max, size)
        nodes[0], nodes[-1] = s_min, s_max
    else:
        raise ConfigError(f"spacing must be 'uniform' or 'geometric', got {spacing!r}")
    return PriceGrid(nodes, n)


def default_grid(spec: PayoffSpec, n: int) -> PriceGrid:
    """Uniform grid on [0, 4K]: covers the payoff kink and the far field."""
    if spec.strike <= 0:
        raise ConfigError("default grid needs a positive strike")
    return build_grid(0.0, 4.0 * spec.strike, n, "uniform")


_CONFIG_KEYS = {
    "r", "mu", "alpha", "T", "t_bar", "dtau",
    "kind", "strike", "s_min", "s_max", "n", "spacing",
}


def load_market_config(path_or_dict) -> tuple[MarketParams, PayoffSpec, PriceGrid]:
    """Read the JSON config (keys r, mu, alpha, T, t_bar, dtau, kind, strike,
    s_min, s_max, n, spacing) into validated domain objects."""
    if isinstance(path_or_dict, dict):
        doc = dict(path_or_dict)
    else:
        try:
            with open(path_or_dict) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path_or_dict}: {exc}") from exc
    missing = _CONFIG_KEYS - doc.keys()
    if missing:
        raise ConfigError(f"config missing keys: {sorted(missing)}")
    try:
        params = MarketParams(
            r=float(doc["r"]), mu=float(doc["mu"]), alpha=float(doc["alpha"]),
            T=float(doc["T"]), t_bar=float(doc["t_bar"]), dtau=float(doc["dtau"]),
        )
        spec = PayoffSpec(kind=doc["kind"], strike=float(doc["strike"]))
        grid = build_grid(float(doc["s_min"]), float(doc["s_max"]),
                          int(doc["n"]), doc["spacing"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return params, spec, grid
