"""Deterministic scenario generator: the classical twin of the parallel
Monte Carlo circuit.

Path j carries the logistic increment dZ_j = 4 (j/L)(1 - j/L), constant
across timesteps, and evolves under the explicit Euler map

    F(j, x) = (1 + mu dtau) x + alpha dZ_j sqrt(x).

Prices are re-quantized to m fractional bits after every step, mirroring
the width of the price register, so the classical and register contents
agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .market import MarketParams


@dataclass(frozen=True)
class FixedPointCode:
    """Unsigned fixed-point code with m fractional bits.

    Codes are integers k representing k / 2^m; the quantizer rounds to
    nearest with ties up, so |quantize(x) - x| <= 2^-m always holds.
    range_max is the largest representable value.
    """

    m: int
    range_max: float

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.range_max <= 0:
            raise ConfigError(f"range_max must be positive, got {self.range_max}")

    @property
    def max_code(self) -> int:
        return int(math.floor(self.range_max * 2**self.m + 0.5))

    @property
    def width(self) -> int:
        """Register width in bits needed to hold any representable code."""
        return max(1, self.max_code.bit_length())

    def encode(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise NumericalError("fixed-point codes are unsigned; negative value")
        code = np.floor(x * 2**self.m + 0.5).astype(np.int64)
        if np.any(code > self.max_code):
            bad = float(np.max(x))
            raise NumericalError(
                f"value {bad} overflows fixed-point range [0, {self.range_max}]")
        return code if code.ndim else int(code)

    def decode(self, code):
        return np.asarray(code, dtype=float) / 2**self.m

    def quantize(self, x):
        return self.decode(self.encode(x))


@dataclass(frozen=True)
class PathSet:
    """L quantized price paths at a common time t."""

    L: int
    t: float
    prices: np.ndarray
    code: FixedPointCode

    def __post_init__(self):
        if self.L < 1 or self.L & (self.L - 1):
            raise ConfigError(f"L must be a power of two, got {self.L}")
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", prices)
        if prices.shape != (self.L,):
            raise ConfigError("prices must have length L")
        if np.any(prices < 0):
            raise NumericalError("negative path price")
        # must already sit on the fixed-point lattice
        if np.any(self.code.encode(prices) / 2**self.code.m != prices):
            raise NumericalError("path prices are not m-bit representable")
        prices.setflags(write=False)

    @property
    def index_qubits(self) -> int:
        return self.L.bit_length() - 1


def logistic_increment(j: int, L: int) -> float:
    """dZ_j = 4 (j/L)(1 - j/L) for path index j in 1..L."""
    if not 1 <= j <= L:
        raise ConfigError(f"path index must satisfy 1 <= j <= L, got j={j}, L={L}")
    u = j / L
    return 4.0 * u * (1.0 - u)


def euler_forward(j: int, x: float, params: MarketParams, L: int) -> float:
    """F(j, x) = (1 + mu dtau) x + alpha dZ_j sqrt(x)."""
    if x < 0:
        raise NumericalError(f"price must be non-negative, got {x}")
    a = 1.0 + params.mu * params.dtau
    b = params.alpha * logistic_increment(j, L)
    return a * x + b * math.sqrt(x)


def euler_inverse(j: int, y: float, params: MarketParams, L: int) -> float:
    """Inverse of the Euler map: requires 1 + mu dtau > 0."""
    a = 1.0 + params.mu * params.dtau
    if a <= 0:
        raise NumericalError(f"inverse undefined: 1 + mu*dtau = {a} <= 0")
    if y < 0:
        raise NumericalError(f"price must be non-negative, got {y}")
    b = params.alpha * logistic_increment(j, L)
    root = math.sqrt((y + b * b / (4.0 * a)) / a) - b / (2.0 * a)
    return root * root


def simulate_paths(params: MarketParams, s0: float, L: int, m: int,
                   range_max: float | None = None) -> PathSet:
    """Evolve L paths from s0 to t_bar, quantizing to m bits each step."""
    if s0 < 0:
        raise NumericalError(f"s0 must be non-negative, got {s0}")
    a = 1.0 + params.mu * params.dtau
    j = np.arange(1, L + 1, dtype=float)
    b = params.alpha * 4.0 * (j / L) * (1.0 - j / L)
    if range_max is None:
        # dry pass sizes the register: next power of two above the peak
        peak = float(s0)
        probe = np.full(L, float(s0))
        for _ in range(params.horizon_steps):
            probe = np.maximum(a * probe + b * np.sqrt(np.maximum(probe, 0.0)), 0.0)
            peak = max(peak, float(probe.max()))
        range_max = float(2 ** math.ceil(math.log2(max(2.0 * peak + 1.0, 4.0))))
    code = FixedPointCode(m=m, range_max=range_max)
    prices = code.quantize(np.full(L, float(s0)))
    for _ in range(params.horizon_steps):
        prices = code.quantize(a * prices + b * np.sqrt(prices))
    return PathSet(L=L, t=params.t_bar, prices=prices, code=code)
