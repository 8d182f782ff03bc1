"""Desk-scale statevector simulator with named fixed-point registers.

Amplitude ordering convention: register 0 (the first register in the
layout) is most significant.  A register at qubit offset ``o`` with width
``w`` in a ``q``-qubit layout reads value ``(i >> (q - o - w)) & (2^w - 1)``
from basis index ``i``.  This convention is fixed here and used everywhere.

Two readout modes exist for every measurement: ``exact_distribution``
returns squared marginal amplitudes, ``measure_register`` draws seeded
i.i.d. samples from them.  Acceptance-style checks use the exact mode so
algorithmic error is never confounded with shot noise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, QubitBudgetError
from .market import qubit_cap

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10


class RegisterLayout:
    """Ordered, disjoint named registers covering all qubits.

    Built from (name, width) pairs; offsets are assigned in order, so the
    first register occupies the most significant qubits.
    """

    def __init__(self, registers):
        regs = list(registers)
        if not regs:
            raise ConfigError("layout needs at least one register")
        self._offsets: dict[str, tuple[int, int]] = {}
        offset = 0
        for name, width in regs:
            if name in self._offsets:
                raise ConfigError(f"duplicate register name {name!r}")
            if width < 1:
                raise ConfigError(f"register {name!r} must have width >= 1")
            self._offsets[name] = (offset, width)
            offset += width
        self.total_qubits = offset
        cap = qubit_cap()
        if self.total_qubits > cap:
            raise QubitBudgetError(
                f"layout needs {self.total_qubits} qubits, budget is {cap}")

    @property
    def names(self) -> list[str]:
        return list(self._offsets)

    def width_of(self, name: str) -> int:
        return self._offsets[name][1]

    def offset_of(self, name: str) -> int:
        return self._offsets[name][0]

    def shift_of(self, name: str) -> int:
        """Bit position of the register's least significant qubit."""
        offset, width = self._offsets[name]
        return self.total_qubits - offset - width

    def axes_of(self, name: str) -> list[int]:
        """Tensor axes of the register when amplitudes are reshaped to [2]*q."""
        offset, width = self._offsets[name]
        return list(range(offset, offset + width))

    def values(self, name: str) -> np.ndarray:
        """Register value for every basis index, vectorized."""
        _, width = self._offsets[name]
        idx = np.arange(2**self.total_qubits, dtype=np.int64)
        return (idx >> self.shift_of(name)) & ((1 << width) - 1)

    def __contains__(self, name: str) -> bool:
        return name in self._offsets

    def __eq__(self, other) -> bool:
        return isinstance(other, RegisterLayout) and self._offsets == other._offsets

    def __repr__(self) -> str:
        parts = ", ".join(f"{n}:{w}" for n, (_, w) in self._offsets.items())
        return f"RegisterLayout({parts})"

    def items(self):
        return [(n, w) for n, (_, w) in self._offsets.items()]


@dataclass
class StateVector:
    """Complex amplitudes over 2^q basis states with a named layout."""

    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        self.amplitudes = amps
        if amps.ndim != 1 or amps.size != 2**self.layout.total_qubits:
            raise ConfigError(
                f"amplitude vector must have length 2^{self.layout.total_qubits}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise NumericalError(f"state norm {norm} deviates from 1 beyond {NORM_TOL}")

    @property
    def num_qubits(self) -> int:
        return self.layout.total_qubits

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape([2] * self.num_qubits)


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix over 2^p basis states."""

    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        self.entries = rho
        dim = rho.shape[0]
        if rho.ndim != 2 or rho.shape != (dim, dim) or dim & (dim - 1):
            raise ConfigError("density matrix must be square with power-of-two dim")
        if np.abs(rho - rho.conj().T).max() > 1e-10:
            raise NumericalError("density matrix is not Hermitian within 1e-10")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise NumericalError("density matrix trace deviates from 1 beyond 1e-10")
        if np.linalg.eigvalsh(rho).min() < -1e-8:
            raise NumericalError("density matrix has eigenvalue below -1e-8")

    @property
    def num_qubits(self) -> int:
        return int(np.log2(self.entries.shape[0]))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def basis_state(layout: RegisterLayout, index: int = 0) -> StateVector:
    amps = np.zeros(2**layout.total_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, layout)


def _resolve_registers(layout: RegisterLayout, registers) -> list[str]:
    if isinstance(registers, str):
        registers = [registers]
    names = list(registers)
    for name in names:
        if name not in layout:
            raise ConfigError(f"unknown register {name!r}")
    if len(set(names)) != len(names):
        raise ConfigError("register subset contains duplicates")
    return names


def apply_unitary(state: StateVector, u: np.ndarray, registers,
                  check: bool = True) -> StateVector:
    """Apply a dense unitary to the named registers (first name = most
    significant factor of u's index)."""
    names = _resolve_registers(state.layout, registers)
    axes = [ax for name in names for ax in state.layout.axes_of(name)]
    k = len(axes)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2**k, 2**k):
        raise ConfigError(f"unitary must be {2**k} x {2**k} for {k} qubits")
    if check:
        err = np.abs(u @ u.conj().T - np.eye(2**k)).max()
        if err > UNITARY_TOL:
            raise NumericalError(f"matrix is not unitary: deviation {err:.3e}")
    tensor = state.tensor()
    moved = np.moveaxis(tensor, axes, range(k))
    shape = moved.shape
    out = (u @ moved.reshape(2**k, -1)).reshape(shape)
    out = np.moveaxis(out, range(k), axes)
    return StateVector(out.reshape(-1), state.layout)


def qft_matrix(width: int) -> np.ndarray:
    size = 2**width
    j = np.arange(size)
    return np.exp(2j * np.pi * np.outer(j, j) / size) / np.sqrt(size)


def qft(state: StateVector, register: str) -> StateVector:
    """Discrete Fourier transform of the amplitudes on one register."""
    return apply_unitary(state, qft_matrix(state.layout.width_of(register)),
                         register, check=False)


def inverse_qft(state: StateVector, register: str) -> StateVector:
    return apply_unitary(state, qft_matrix(state.layout.width_of(register)).conj().T,
                         register, check=False)


def partial_trace(state: StateVector, keep) -> DensityMatrix:
    """Reduced density matrix over the kept registers (in layout order)."""
    names = _resolve_registers(state.layout, keep)
    keep_axes = [ax for name in names for ax in state.layout.axes_of(name)]
    drop_axes = [ax for ax in range(state.num_qubits) if ax not in keep_axes]
    tensor = state.tensor()
    moved = np.transpose(tensor, keep_axes + drop_axes)
    mat = moved.reshape(2 ** len(keep_axes), -1)
    return DensityMatrix(mat @ mat.conj().T)


def grover_rudolph_prepare(v, layout: RegisterLayout | None = None) -> StateVector:
    """State with amplitudes v / ||v||_2 for a non-negative vector v.

    Stands in for amplitude-encoding state preparation; the simulator
    constructs the resulting state directly.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size & (v.size - 1):
        raise ConfigError("input must be a 1-d vector of power-of-two length")
    if np.any(v < 0):
        raise ConfigError("amplitude-encoded vector must be non-negative")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigError("cannot prepare the zero vector")
    if layout is None:
        layout = RegisterLayout([("data", int(np.log2(v.size)))])
    if 2**layout.total_qubits != v.size:
        raise ConfigError("layout size does not match vector length")
    return StateVector(v / norm + 0j, layout)


def exact_distribution(state: StateVector, register: str) -> np.ndarray:
    """Squared marginal amplitudes of one register (exact readout mode)."""
    width = state.layout.width_of(register)
    values = state.layout.values(register)
    probs = np.abs(state.amplitudes) ** 2
    return np.bincount(values, weights=probs, minlength=2**width)


def measure_register(state: StateVector, register: str, shots: int,
                     seed: int | None = None) -> dict[int, int]:
    """Seeded sampling readout: histogram of i.i.d. outcomes."""
    if shots < 1:
        raise ConfigError(f"shots must be >= 1, got {shots}")
    probs = exact_distribution(state, register)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    return {int(v): int(c) for v, c in enumerate(counts) if c > 0}


def xor_write(state: StateVector, source: str, target: str, table) -> StateVector:
    """|a>_src |z>_tgt -> |a>_src |z XOR f(a)>_tgt for a code table f.

    A controlled permutation, manifestly unitary and self-inverse; the
    standard reversible-lookup construction used by all register loads.
    """
    layout = state.layout
    src_vals = layout.values(source)
    table = np.asarray(table, dtype=np.int64)
    if table.size != 2**layout.width_of(source):
        raise ConfigError("lookup table must cover the source register")
    tgt_width = layout.width_of(target)
    if np.any(table < 0) or np.any(table >= 2**tgt_width):
        raise NumericalError("lookup value exceeds the target register range")
    shift = layout.shift_of(target)
    perm = np.arange(state.amplitudes.size, dtype=np.int64) ^ (table[src_vals] << shift)
    out = np.empty_like(state.amplitudes)
    out[perm] = state.amplitudes
    return StateVector(out, layout)


def flag_write(state: StateVector, source: str, flag: str, predicate) -> StateVector:
    """Flip the 1-qubit flag register on basis states where predicate(source
    value) holds; the flag must be zeroed beforehand by convention."""
    layout = state.layout
    if layout.width_of(flag) != 1:
        raise ConfigError(f"flag register {flag!r} must be one qubit")
    src_vals = layout.values(source)
    bits = np.asarray(predicate(src_vals), dtype=np.int64)
    shift = layout.shift_of(flag)
    perm = np.arange(state.amplitudes.size, dtype=np.int64) ^ (bits << shift)
    out = np.empty_like(state.amplitudes)
    out[perm] = state.amplitudes
    return StateVector(out, layout)


_MAGIC = b"QVSV"


def save_statevector(state: StateVector, path: str) -> None:
    """Flat binary format: header (q, layout), body of interleaved
    real/imag float64 amplitudes, little-endian."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", state.num_qubits, len(state.layout.names)))
        for name, width in state.layout.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<HI", len(raw), width))
            fh.write(raw)
        body = np.empty(2 * state.amplitudes.size)
        body[0::2] = state.amplitudes.real
        body[1::2] = state.amplitudes.imag
        fh.write(body.astype("<f8").tobytes())


def load_statevector(path: str) -> StateVector:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ConfigError(f"{path} is not a statevector file")
        q, nregs = struct.unpack("<II", fh.read(8))
        regs = []
        for _ in range(nregs):
            nlen, width = struct.unpack("<HI", fh.read(6))
            regs.append((fh.read(nlen).decode("utf-8"), width))
        layout = RegisterLayout(regs)
        if layout.total_qubits != q:
            raise ConfigError("header qubit count does not match layout")
        body = np.frombuffer(fh.read(), dtype="<f8")
        if body.size != 2 ** (q + 1):
            raise ConfigError("amplitude body has the wrong length")
        return StateVector(body[0::2] + 1j * body[1::2], layout)
