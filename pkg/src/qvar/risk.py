"""Tail-risk stage: comparator, bisection VaR, tail probability, swap-test
overlap and the CVaR reconstruction, plus the classical quantile oracle.

All quantum-path quantities operate on the m-bit half-scale value codes,
so the quantum-exact VaR code coincides with the classical empirical
quantile of the decoded codes.  CDF comparisons against the level q use a
1e-9 slack on both the quantum and classical sides: branch probabilities
are sums of floating squares, and the slack keeps exact ties (CDF == q)
deterministic without affecting any gap of size 1/L.

Value convention: values are portfolio values and the loss tail is the
lowest q-fraction, Pr(V <= VaR) >= q.  Registers carry values normalized
by the grid norm sqrt(sum V(S_j)^2); reports carry both the normalized
and the monetary figures via ``scale``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import ConfigError, NumericalError
from .qcore import StateVector, exact_distribution, flag_write, xor_write
from .qpca import decode_value

CDF_TOL = 1e-9

RiskMethod = Literal["classical", "quantum_exact", "quantum_sampled"]


@dataclass(frozen=True)
class RiskReport:
    """VaR/CVaR figures with provenance.

    var and cvar are monetary (scale applied); the normalized register
    values are var_normalized / cvar_normalized = monetary / scale.
    """

    level: float
    var: float
    cvar: float
    p0: float
    method: RiskMethod
    scale: float
    var_normalized: float
    cvar_normalized: float
    var_code: int | None = None

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "var": self.var,
            "cvar": self.cvar,
            "p0": self.p0,
            "method": self.method,
            "scale": self.scale,
            "var_normalized": self.var_normalized,
            "cvar_normalized": self.cvar_normalized,
            "var_code": self.var_code,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def comparator_ucc(state: StateVector, value_reg: str, threshold_code: int,
                   flag: str) -> StateVector:
    """Write the tail flag: 0 where the value code is <= the threshold code,
    1 otherwise (the flag qubit starts zeroed)."""
    width = state.layout.width_of(value_reg)
    if not 0 <= threshold_code < 2**width:
        raise ConfigError(f"threshold code {threshold_code} not representable "
                          f"in {width} bits")
    return flag_write(state, value_reg, flag,
                      lambda codes: (codes > threshold_code).astype(np.int64))


@dataclass(frozen=True)
class AmplitudeEstimate:
    value: float
    queries: int
    shots: int


def estimate_amplitude(prob: float, eps: float, rng) -> AmplitudeEstimate:
    """Amplitude-estimation-style measurement of a flag probability.

    Simulates the two-dimensional Grover rotation statistics exactly: at
    power k the marked outcome fires with probability sin^2((2k+1) theta),
    theta = arcsin(sqrt(p)).  The maximum-likelihood estimate over the
    doubling power schedule reaches additive error eps at a total query
    count sum_k shots (2k+1) = O(1/eps), which is the documented budget.
    """
    if not 0 < eps < 1:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    prob = min(1.0, max(0.0, prob))
    theta = math.asin(math.sqrt(prob))
    levels = max(1, math.ceil(math.log2(1.0 / eps)))
    powers = [0] + [2**j for j in range(levels)]
    shots = 96
    hits = []
    queries = 0
    for k in powers:
        p_k = math.sin((2 * k + 1) * theta) ** 2
        hits.append(rng.binomial(shots, p_k))
        queries += shots * (2 * k + 1)
    grid = np.linspace(0.0, np.pi / 2, 200_001)
    loglik = np.zeros_like(grid)
    for k, h in zip(powers, hits):
        pk = np.sin((2 * k + 1) * grid) ** 2
        pk = np.clip(pk, 1e-12, 1.0 - 1e-12)
        loglik += h * np.log(pk) + (shots - h) * np.log1p(-pk)
    best = grid[int(np.argmax(loglik))]
    return AmplitudeEstimate(value=float(np.sin(best) ** 2), queries=queries,
                             shots=shots * len(powers))


def tail_probability(state: StateVector, flag: str = "flag",
                     mode: str = "exact", eps: float = 0.01,
                     rng=None) -> tuple[float, int]:
    """Probability of flag = 0 (the tail mass); returns (p0, query count).

    Exact mode reads squared amplitudes (one query); sampled mode runs the
    amplitude-estimation simulation at additive error eps.
    """
    p0 = float(exact_distribution(state, flag)[0])
    if mode == "exact":
        return p0, 1
    if rng is None:
        raise ConfigError("sampled mode needs a seeded generator")
    est = estimate_amplitude(p0, eps, rng)
    return est.value, est.queries


def bisection_var(state_preparer: Callable[[], StateVector], q: float, m: int,
                  value_reg: str = "value", flag: str = "flag",
                  mode: str = "exact", eps: float = 0.01, rng=None):
    """Smallest m-bit code whose tail probability reaches q.

    Binary search over the code range; each probe prepares a fresh state,
    applies the comparator at the candidate threshold and measures the
    flag.  Terminates in at most m iterations.
    """
    if not 0 < q < 1:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    lo, hi = 0, 2**m - 1
    iterations = 0
    queries = 0
    while lo < hi:
        iterations += 1
        if iterations > m:
            raise NumericalError("bisection exceeded the m-iteration budget")
        mid = (lo + hi) // 2
        flagged = comparator_ucc(state_preparer(), value_reg, mid, flag)
        p0, used = tail_probability(flagged, flag, mode, eps, rng)
        queries += used
        if p0 >= q - CDF_TOL:
            hi = mid
        else:
            lo = mid + 1
    return lo, iterations, queries


def swap_test_overlap(state_a: StateVector, state_b: StateVector,
                      mode: str = "exact", eps: float = 0.01,
                      rng=None) -> tuple[float, int]:
    """|<a|b>| via direct contraction (exact) or the swap-test statistics
    fed through amplitude estimation (sampled), budget O(1/eps)."""
    if state_a.layout.items() != state_b.layout.items():
        raise ConfigError("swap test requires identical register shapes")
    overlap = abs(np.vdot(state_a.amplitudes, state_b.amplitudes))
    if mode == "exact":
        return float(overlap), 1
    if rng is None:
        raise ConfigError("sampled mode needs a seeded generator")
    est = estimate_amplitude(0.5 * (1.0 + overlap**2), eps, rng)
    return float(math.sqrt(max(0.0, 2.0 * est.value - 1.0))), est.queries


@dataclass(frozen=True)
class ClassicalRisk:
    var: float
    cvar: float
    p0: float


def classical_var_cvar(values, q: float) -> ClassicalRisk:
    """Empirical quantile oracle: smallest value with CDF >= q, and the
    mean over the closed tail {v <= VaR}."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigError("values must be nonempty")
    if not 0 < q < 1:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    ordered = np.sort(values)
    count = values.size
    cdf = np.arange(1, count + 1) / count
    idx = int(np.argmax(cdf >= q - CDF_TOL))
    var = float(ordered[idx])
    tail = values[values <= var]
    return ClassicalRisk(var=var, cvar=float(tail.mean()),
                         p0=float(tail.size / count))


@dataclass(frozen=True)
class CvarBreakdown:
    """CVaR reconstruction with the overlap bookkeeping made explicit.

    ``overlap_raw`` is |<psi_ref x 0|Phi3>| for the normalized reference;
    ``overlap`` folds back the reference norm and the achieved tail
    fraction (the factors the normalized-state algebra hides), so that
    cvar_normalized = overlap / (p0^{3/2} sqrt(L)) holds as an identity
    with the achieved p0 in place of the nominal level.
    """

    cvar: float
    cvar_normalized: float
    overlap: float
    overlap_raw: float
    p0: float
    level: float = field(default=0.05)  # nominal q, for provenance
    queries: int = field(default=1)


def cvar(state: StateVector, psi_ref: StateVector, ref_norm: float,
         threshold_code: int, q: float, L: int, scale: float,
         value_table: np.ndarray, value_reg: str = "value",
         flag: str = "flag", mode: str = "exact", eps: float = 0.01,
         rng=None) -> CvarBreakdown:
    """Tail mean from the flagged-and-uncomputed portfolio state.

    Applies the comparator at the VaR code, undoes the value write (the
    XOR lookup is self-inverse, standing in for the inverse QPCA/QFT
    pass), and contracts against the value-weighted reference state; the
    reconstruction divides by the achieved tail fraction.
    """
    flagged = comparator_ucc(state, value_reg, threshold_code, flag)
    p0, q_used = tail_probability(flagged, flag, mode, eps, rng)
    if p0 <= 0.0:
        raise NumericalError("empty tail set: no branch at or below the VaR code")
    phi3 = xor_write(flagged, "price", value_reg, value_table)
    raw, q_overlap = swap_test_overlap(psi_ref, phi3, mode, eps, rng)
    cvar_norm = raw * ref_norm / (p0 * math.sqrt(L))
    overlap_folded = raw * ref_norm * math.sqrt(p0)
    return CvarBreakdown(cvar=cvar_norm * scale, cvar_normalized=cvar_norm,
                         overlap=overlap_folded, overlap_raw=raw, p0=p0,
                         level=q, queries=q_used + q_overlap)


def make_reference_state(phi_layout, node_index, grid_code_list, value_table,
                         m: int) -> tuple[StateVector, float]:
    """Value-weighted reference over (path, price) with zeroed value and
    flag registers; returns the state and the weight norm W needed by the
    reconstruction."""
    codes = np.asarray(grid_code_list, dtype=np.int64)[np.asarray(node_index)]
    weights = decode_value(np.asarray(value_table)[codes], m)
    w_norm = float(np.linalg.norm(weights))
    if w_norm == 0.0:
        raise NumericalError("all branch values are zero; reference undefined")
    amps = np.zeros(2**phi_layout.total_qubits, dtype=complex)
    path_shift = phi_layout.shift_of("path")
    price_shift = phi_layout.shift_of("price")
    for k, (c, w) in enumerate(zip(codes, weights)):
        amps[(k << path_shift) | (int(c) << price_shift)] = w / w_norm
    return StateVector(amps, phi_layout), w_norm
