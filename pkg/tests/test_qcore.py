import numpy as np
import pytest

from qvar.errors import ConfigError, NumericalError, QubitBudgetError
from qvar.qcore import (DensityMatrix, RegisterLayout, StateVector, apply_unitary,
                        basis_state, exact_distribution, flag_write,
                        grover_rudolph_prepare, inverse_qft, load_statevector,
                        measure_register, partial_trace, qft, qft_matrix,
                        save_statevector, xor_write)


def haar_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, layout):
    amps = rng.normal(size=2**layout.total_qubits) \
        + 1j * rng.normal(size=2**layout.total_qubits)
    return StateVector(amps / np.linalg.norm(amps), layout)


def test_layout_metadata():
    layout = RegisterLayout([("a", 2), ("b", 3), ("c", 1)])
    assert layout.total_qubits == 6
    assert layout.offset_of("b") == 2
    assert layout.shift_of("c") == 0
    assert layout.shift_of("a") == 4
    vals = layout.values("b")
    assert vals[0b010110] == 0b011
    assert vals[0b001010] == 0b101


def test_layout_rejects_budget(monkeypatch):
    monkeypatch.setenv("QVAR_QUBIT_CAP", "4")
    with pytest.raises(QubitBudgetError):
        RegisterLayout([("a", 5)])


def test_identity_leaves_state(rng):
    layout = RegisterLayout([("a", 2), ("b", 1)])
    state = random_state(rng, layout)
    out = apply_unitary(state, np.eye(4), ["a"])
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-14)


def test_x_gate_flips_single_qubit():
    layout = RegisterLayout([("q", 1)])
    state = basis_state(layout, 0)
    out = apply_unitary(state, np.array([[0, 1], [1, 0]]), "q")
    assert np.allclose(out.amplitudes, [0, 1], atol=1e-14)


def test_unitary_round_trip(rng):
    layout = RegisterLayout([("a", 2), ("b", 2)])
    state = random_state(rng, layout)
    u = haar_unitary(rng, 4)
    fwd = apply_unitary(state, u, ["a"])
    back = apply_unitary(fwd, u.conj().T, ["a"])
    assert np.abs(back.amplitudes - state.amplitudes).max() < 1e-12


def test_norm_preserved_under_gates(rng):
    layout = RegisterLayout([("a", 3), ("b", 2)])
    state = random_state(rng, layout)
    for _ in range(5):
        state = apply_unitary(state, haar_unitary(rng, 4), ["b", "a"][:1])
        assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-10


def test_non_unitary_rejected(rng):
    layout = RegisterLayout([("a", 1)])
    state = basis_state(layout)
    with pytest.raises(NumericalError, match="unitary"):
        apply_unitary(state, np.array([[1.0, 0.0], [0.0, 2.0]]), "a")


def test_qft_of_zero_is_uniform():
    layout = RegisterLayout([("r", 3)])
    out = qft(basis_state(layout), "r")
    assert np.allclose(out.amplitudes, np.full(8, 1 / np.sqrt(8)), atol=1e-12)


def test_qft_inverse_round_trip(rng):
    layout = RegisterLayout([("r", 3), ("s", 2)])
    state = random_state(rng, layout)
    out = inverse_qft(qft(state, "r"), "r")
    assert np.abs(out.amplitudes - state.amplitudes).max() < 1e-12


def test_qft_matches_dense_dft_on_basis_states():
    layout = RegisterLayout([("r", 3)])
    for j in range(8):
        out = qft(basis_state(layout, j), "r")
        k = np.arange(8)
        expected = np.exp(2j * np.pi * j * k / 8) / np.sqrt(8)
        assert np.abs(out.amplitudes - expected).max() < 1e-12


@pytest.mark.parametrize("width", range(1, 9))
def test_qft_matrix_unitary(width):
    f = qft_matrix(width)
    assert np.abs(f @ f.conj().T - np.eye(2**width)).max() < 1e-12


def test_partial_trace_product_state(rng):
    layout = RegisterLayout([("a", 1), ("b", 2)])
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    b = rng.normal(size=4) + 1j * rng.normal(size=4)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    state = StateVector(np.kron(a, b), layout)
    rho = partial_trace(state, "b")
    assert np.abs(rho.entries - np.outer(b, b.conj())).max() < 1e-12


def test_partial_trace_bell_state():
    layout = RegisterLayout([("a", 1), ("b", 1)])
    bell = StateVector(np.array([1, 0, 0, 1]) / np.sqrt(2), layout)
    rho = partial_trace(bell, "a")
    assert np.abs(rho.entries - np.eye(2) / 2).max() < 1e-12


def contraction_oracle(amps, keep_axes, q):
    """Explicit double-sum index contraction, independent of partial_trace."""
    dim_keep = 2 ** len(keep_axes)
    rho = np.zeros((dim_keep, dim_keep), dtype=complex)
    drop_axes = [ax for ax in range(q) if ax not in keep_axes]
    for i in range(2**q):
        for ip in range(2**q):
            bits_i = [(i >> (q - 1 - ax)) & 1 for ax in range(q)]
            bits_ip = [(ip >> (q - 1 - ax)) & 1 for ax in range(q)]
            if any(bits_i[ax] != bits_ip[ax] for ax in drop_axes):
                continue
            ki = int("".join(str(bits_i[ax]) for ax in keep_axes) or "0", 2)
            kip = int("".join(str(bits_ip[ax]) for ax in keep_axes) or "0", 2)
            rho[ki, kip] += amps[i] * np.conj(amps[ip])
    return rho


def test_partial_trace_matches_contraction_oracle(rng):
    layout = RegisterLayout([("a", 1), ("b", 1), ("c", 1)])
    state = random_state(rng, layout)
    rho = partial_trace(state, ["a", "c"])
    oracle = contraction_oracle(state.amplitudes, [0, 2], 3)
    assert np.abs(rho.entries - oracle).max() < 1e-12


def test_partial_trace_full_keep_is_projector(rng):
    layout = RegisterLayout([("a", 2), ("b", 1)])
    state = random_state(rng, layout)
    rho = partial_trace(state, ["a", "b"])
    proj = np.outer(state.amplitudes, state.amplitudes.conj())
    assert np.abs(rho.entries - proj).max() < 1e-12


def test_grover_rudolph_examples():
    uniform = grover_rudolph_prepare(np.ones(4))
    assert np.allclose(uniform.amplitudes, 0.5, atol=1e-14)
    e0 = grover_rudolph_prepare(np.array([1.0, 0, 0, 0]))
    assert np.allclose(e0.amplitudes, [1, 0, 0, 0], atol=1e-14)
    v = grover_rudolph_prepare(np.array([1.0, 2.0, 2.0, 4.0]))
    assert np.allclose(v.amplitudes, [0.2, 0.4, 0.4, 0.8], atol=1e-14)


def test_grover_rudolph_rejects_bad_input():
    with pytest.raises(ConfigError):
        grover_rudolph_prepare(np.zeros(4))
    with pytest.raises(ConfigError):
        grover_rudolph_prepare(np.array([1.0, -1.0]))


def test_exact_distribution_examples():
    layout = RegisterLayout([("q", 1)])
    assert exact_distribution(basis_state(layout, 0), "q").tolist() == [1.0, 0.0]
    layout2 = RegisterLayout([("q", 2)])
    uniform = StateVector(np.full(4, 0.5), layout2)
    assert np.allclose(exact_distribution(uniform, "q"), 0.25, atol=1e-15)


def test_measure_register_binomial_bound():
    layout = RegisterLayout([("q", 1)])
    state = StateVector(np.array([np.sqrt(0.3), np.sqrt(0.7)]), layout)
    counts = measure_register(state, "q", shots=10**5, seed=99)
    freq = counts[0] / 10**5
    assert abs(freq - 0.3) < 0.01


def test_measure_register_is_seed_deterministic():
    layout = RegisterLayout([("q", 2)])
    state = StateVector(np.full(4, 0.5), layout)
    assert measure_register(state, "q", 1000, seed=5) == \
        measure_register(state, "q", 1000, seed=5)


def test_xor_write_is_self_inverse(rng):
    layout = RegisterLayout([("src", 2), ("dst", 3)])
    state = random_state(rng, layout)
    table = np.array([3, 5, 0, 6])
    once = xor_write(state, "src", "dst", table)
    twice = xor_write(once, "src", "dst", table)
    assert np.abs(twice.amplitudes - state.amplitudes).max() < 1e-15


def test_flag_write_marks_predicate():
    layout = RegisterLayout([("v", 2), ("flag", 1)])
    amps = np.zeros(8, dtype=complex)
    amps[[0b000, 0b010, 0b100, 0b110]] = 0.5  # v = 0..3, flag 0
    state = StateVector(amps, layout)
    out = flag_write(state, "v", "flag", lambda v: (v >= 2).astype(np.int64))
    probs = exact_distribution(out, "flag")
    assert probs[0] == pytest.approx(0.5, abs=1e-12)


def test_serialization_round_trip(tmp_path, rng):
    layout = RegisterLayout([("a", 2), ("b", 1)])
    state = random_state(rng, layout)
    path = tmp_path / "state.qvsv"
    save_statevector(state, str(path))
    loaded = load_statevector(str(path))
    assert loaded.layout == state.layout
    assert np.array_equal(loaded.amplitudes, state.amplitudes)


def test_state_norm_validated():
    layout = RegisterLayout([("a", 1)])
    with pytest.raises(NumericalError, match="norm"):
        StateVector(np.array([1.0, 1.0]), layout)


def test_density_matrix_validation(rng):
    good = DensityMatrix(np.diag([0.5, 0.5]))
    assert good.num_qubits == 1
    with pytest.raises(NumericalError):
        DensityMatrix(np.diag([0.7, 0.7]))
    with pytest.raises(NumericalError):
        DensityMatrix(np.array([[0.5, 0.3], [0.1, 0.5]]))
