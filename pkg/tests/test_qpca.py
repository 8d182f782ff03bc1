import numpy as np
import pytest

from qvar.errors import ConfigError
from qvar.market import build_grid, payoff_vector
from qvar.mc import FixedPointCode, PathSet
from qvar.qcore import (DensityMatrix, RegisterLayout, StateVector, basis_state,
                        exact_distribution, grover_rudolph_prepare, partial_trace)
from qvar.qpca import (PcaJob, assemble_portfolio_state, decode_value,
                       encode_value, evolve_exp_rho, grid_codes,
                       load_grid_register, perturb_state, prepare_path_state,
                       price_register_width, qpe_branch_distributions,
                       qpe_modal_estimates, qpe_write_eigenvalues, reduced_rho,
                       snap_paths, sqrt_code_table, sqrt_register,
                       trotter_slice)


def make_value_state(values, n):
    return grover_rudolph_prepare(np.asarray(values, float),
                                  RegisterLayout([("grid", n)]))


def make_paths(prices, m=6, range_max=8.0):
    prices = np.asarray(prices, dtype=float)
    code = FixedPointCode(m=m, range_max=range_max)
    return PathSet(L=prices.size, t=0.0, prices=code.quantize(prices), code=code)


@pytest.fixture
def grid4():
    return build_grid(0.0, 4.0, 4, "uniform")


def test_grid_codes_distinct_and_width(grid4):
    codes = grid_codes(grid4, 6)
    assert len(set(codes.tolist())) == 16
    assert price_register_width(grid4, 6) == 9


def test_grid_codes_collision_rejected():
    grid = build_grid(0.0, 4.0, 6, "uniform")
    with pytest.raises(ConfigError, match="collide"):
        grid_codes(grid, 2)


def test_load_grid_register_zero_node(grid4):
    layout = RegisterLayout([("grid", 4), ("price", 9)])
    state = load_grid_register(basis_state(layout, 0), grid4, 6)
    # node 0 sits at S = 0: price register reads the zero code
    probs = exact_distribution(state, "price")
    assert probs[0] == pytest.approx(1.0, abs=1e-14)


def test_load_grid_register_schmidt_rank(grid4):
    layout = RegisterLayout([("grid", 4), ("price", 9)])
    amps = np.zeros(2**13, dtype=complex)
    amps[np.arange(16) << 9] = 0.25  # uniform over grid indices
    state = load_grid_register(StateVector(amps, layout), grid4, 6)
    rho = partial_trace(state, "grid")
    rank = int(np.sum(rho.eigenvalues() > 1e-12))
    assert rank == len(set(grid_codes(grid4, 6).tolist()))


def test_load_grid_register_round_trip(grid4, rng):
    layout = RegisterLayout([("grid", 4), ("price", 9)])
    amps = np.zeros(2**13, dtype=complex)
    amps[np.arange(16) << 9] = rng.normal(size=16) + 1j * rng.normal(size=16)
    amps /= np.linalg.norm(amps)
    state = StateVector(amps, layout)
    twice = load_grid_register(load_grid_register(state, grid4, 6), grid4, 6)
    assert np.abs(twice.amplitudes - state.amplitudes).max() < 1e-12


def test_reduced_rho_pure_case(grid4):
    values = np.zeros(16)
    values[3] = 2.5
    rho = reduced_rho(make_value_state(values, 4), grid4, 6)
    code = grid_codes(grid4, 6)[3]
    assert rho.entries[code, code].real == pytest.approx(1.0, abs=1e-12)


def test_reduced_rho_two_equal_values(grid4):
    values = np.zeros(16)
    values[[2, 9]] = 1.0
    rho = reduced_rho(make_value_state(values, 4), grid4, 6)
    eigs = np.sort(rho.eigenvalues())[::-1]
    assert eigs[0] == pytest.approx(0.5, abs=1e-12)
    assert eigs[1] == pytest.approx(0.5, abs=1e-12)


def test_reduced_rho_matches_normalization_oracle(grid4, rng):
    values = rng.uniform(0.0, 1.0, size=16)
    rho = reduced_rho(make_value_state(values, 4), grid4, 6)
    expected = np.sort(values**2 / np.sum(values**2))[::-1]
    got = np.sort(rho.eigenvalues())[::-1]
    assert np.abs(got[:16] - expected).max() < 1e-12


def random_density(rng, dim, diagonal=False):
    if diagonal:
        p = rng.uniform(0.1, 1.0, size=dim)
        return DensityMatrix(np.diag(p / p.sum()))
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = z @ z.conj().T
    return DensityMatrix(h / np.trace(h).real)


def test_evolve_zero_time_is_identity(rng):
    rho = random_density(rng, 8, diagonal=True)
    sigma = random_density(rng, 8)
    for mode in ("exact_exponential", "trotterized"):
        job = PcaJob(m=3, n_trotter=4, mode=mode)
        out = evolve_exp_rho(sigma, rho, 0.0, job)
        assert np.abs(out.entries - sigma.entries).max() < 1e-12


def test_evolve_commuting_case(rng):
    rho = random_density(rng, 8, diagonal=True)
    sigma = random_density(rng, 8, diagonal=True)
    job = PcaJob(m=3, mode="exact_exponential")
    out = evolve_exp_rho(sigma, rho, 1.7, job)
    assert np.abs(out.entries - sigma.entries).max() < 1e-12


def test_trotter_slice_second_order(rng):
    # per-slice deviation from the exact exponential is O(dt^2): the
    # distance shrinks ~4x when the slice halves
    rho = random_density(rng, 8, diagonal=True)
    sigma = random_density(rng, 8)
    dists = []
    for n_slices in (8, 16, 32):
        dt = 1.0 / n_slices
        exact = evolve_exp_rho(sigma, rho, dt, PcaJob(m=3, mode="exact_exponential"))
        approx = trotter_slice(rho, sigma, dt)
        dists.append(np.linalg.norm(approx.entries - exact.entries, 2))
    ratios = [dists[i] / dists[i + 1] for i in range(2)]
    slopes = [np.log2(r) for r in ratios]
    assert all(abs(s - 2.0) <= 0.2 for s in slopes)


def test_trotter_accumulated_error_bounded(rng):
    rho = random_density(rng, 8, diagonal=True)
    sigma = random_density(rng, 8)
    tau = 1.0
    exact = evolve_exp_rho(sigma, rho, tau, PcaJob(m=3, mode="exact_exponential"))
    for n in (8, 16, 32):
        approx = evolve_exp_rho(sigma, rho, tau, PcaJob(m=3, n_trotter=n,
                                                        mode="trotterized"))
        dist = np.linalg.norm(approx.entries - exact.entries, 2)
        assert dist <= 4.0 * n * (tau / n) ** 2  # C * N_trotter * delta_t^2


def qpe_state(grid, values, paths, m):
    vstate = make_value_state(values, grid.n)
    rho = reduced_rho(vstate, grid, m)
    state = prepare_path_state(paths, grid, m)
    return qpe_write_eigenvalues(state, rho, PcaJob(m=m)), rho


def test_qpe_pure_rho_reads_one(grid4):
    values = np.zeros(16)
    values[5] = 1.0
    paths = make_paths(np.full(8, grid4.nodes[5]))
    out, _ = qpe_state(grid4, values, paths, 6)
    estimates = qpe_modal_estimates(out)
    code = grid_codes(grid4, 6)[5]
    assert estimates[code] == pytest.approx(1.0, abs=1e-12)


def test_qpe_two_equal_nodes_read_half(grid4):
    values = np.zeros(16)
    values[[4, 11]] = 1.0
    paths = make_paths(np.concatenate([np.full(4, grid4.nodes[4]),
                                       np.full(4, grid4.nodes[11])]))
    out, _ = qpe_state(grid4, values, paths, 6)
    codes = grid_codes(grid4, 6)
    estimates = qpe_modal_estimates(out)
    assert estimates[codes[4]] == pytest.approx(0.5, abs=2**-6)
    assert estimates[codes[11]] == pytest.approx(0.5, abs=2**-6)


def test_qpe_generic_instance_within_resolution(grid4, rng):
    values = rng.uniform(0.1, 1.0, size=16)
    paths = make_paths(grid4.nodes[rng.integers(0, 16, size=8)])
    out, rho = qpe_state(grid4, values, paths, 6)
    codes = grid_codes(grid4, 6)
    p = np.diag(rho.entries).real
    estimates = qpe_modal_estimates(out)
    for code, lam_hat in estimates.items():
        assert abs(lam_hat - p[code]) <= 2**-6


def test_qpe_requires_zeroed_phase_register(grid4):
    values = np.ones(16)
    paths = make_paths(grid4.nodes[:8])
    vstate = make_value_state(values, 4)
    rho = reduced_rho(vstate, grid4, 6)
    state = prepare_path_state(paths, grid4, 6)
    amps = np.roll(state.amplitudes, 1)  # value register no longer zeroed
    with pytest.raises(ConfigError, match="zeroed"):
        qpe_write_eigenvalues(StateVector(amps, state.layout), rho, PcaJob(m=6))


def test_sqrt_code_examples():
    m = 6
    table = sqrt_code_table(m)
    assert table[0] == 0
    assert decode_value(table[encode_value(1.0, m)], m) == pytest.approx(1.0)
    assert decode_value(table[encode_value(0.25, m)], m) == pytest.approx(0.5)


def test_sqrt_register_xor_write(grid4):
    layout = RegisterLayout([("value", 6), ("aux", 6)])
    state = basis_state(layout, encode_value(0.25, 6) << 6)
    out = sqrt_register(state, "value", "aux")
    probs = exact_distribution(out, "aux")
    assert probs[encode_value(0.5, 6)] == pytest.approx(1.0, abs=1e-14)


def test_assemble_constant_surface(grid4):
    values = np.ones(16)
    paths = make_paths(grid4.nodes[[1, 3, 5, 7, 9, 11, 13, 15]])
    res = assemble_portfolio_state(paths, make_value_state(values, 4), grid4,
                                   PcaJob(m=6))
    vals = {row.value for row in res.branches}
    assert len(vals) == 1
    assert res.branches[0].value == pytest.approx(0.25, abs=2**-6)


def test_assemble_payoff_at_expiry(grid4, call_spec):
    payoff = payoff_vector(call_spec, grid4)
    paths = make_paths(grid4.nodes[[2, 4, 6, 8, 10, 12, 14, 15]])
    res = assemble_portfolio_state(paths, make_value_state(payoff, 4), grid4,
                                   PcaJob(m=6))
    normalized = payoff / np.linalg.norm(payoff)
    idx = snap_paths(paths, grid4)
    for row, j in zip(res.branches, idx):
        assert abs(row.value - normalized[j]) <= 2**-6


def test_assemble_full_pipeline_lookup(grid4, rng):
    values = rng.uniform(0.0, 1.0, size=16)
    paths = make_paths(grid4.nodes[rng.integers(0, 16, size=8)])
    res = assemble_portfolio_state(paths, make_value_state(values, 4), grid4,
                                   PcaJob(m=6))
    assert res.state is not None
    normalized = values / np.linalg.norm(values)
    for row, j in zip(res.branches, res.node_index):
        assert abs(row.value - normalized[j]) <= 2**-6
        assert row.error <= 2**-6
    # value register content in the state matches the table
    layout = res.state.layout
    probs = np.abs(res.state.amplitudes) ** 2
    vvals = layout.values("value")
    pvals = layout.values("price")
    table = res.value_table
    populated = probs > 1e-14
    assert np.all(vvals[populated] == table[pvals[populated]])


def test_assemble_trotter_mode_matches_exact_modal_codes(grid4, rng):
    values = rng.uniform(0.2, 1.0, size=16)
    paths = make_paths(grid4.nodes[rng.integers(0, 16, size=8)])
    vstate = make_value_state(values, 4)
    job = PcaJob(m=4, n_trotter=64, mode="trotterized")
    res = assemble_portfolio_state(paths, vstate, grid4, job)
    assert res.state is None
    assert res.trotter_distance is not None
    for row in res.branches:
        assert abs(row.value - row.oracle) <= 2**-4 + res.trotter_distance


def test_qpe_branch_distributions_exact_matches_statevector(grid4, rng):
    values = rng.uniform(0.1, 1.0, size=16)
    m = 4
    paths = make_paths(grid4.nodes[[0, 2, 4, 6, 8, 10, 12, 14]], m=m)
    vstate = make_value_state(values, 4)
    rho = reduced_rho(vstate, grid4, m)
    state = prepare_path_state(paths, grid4, m)
    out = qpe_write_eigenvalues(state, rho, PcaJob(m=m))
    codes = grid_codes(grid4, m)[snap_paths(paths, grid4)]
    dists = qpe_branch_distributions(codes, rho, PcaJob(m=m))
    layout = out.layout
    probs = np.abs(out.amplitudes) ** 2
    pvals = layout.values("price")
    vvals = layout.values("value")
    for code in np.unique(codes):
        mask = pvals == code
        hist = np.bincount(vvals[mask], weights=probs[mask], minlength=2**m)
        branch_mass = hist.sum()
        assert np.abs(hist / branch_mass - dists[int(code)]).max() < 1e-10


def test_error_propagation_bound(grid4, rng):
    for eps in (1e-3, 1e-2, 1e-1):
        for _ in range(10):
            values = rng.uniform(0.05, 1.0, size=16)
            vstate = make_value_state(values, 4)
            rho = reduced_rho(vstate, grid4, 6)
            perturbed = perturb_state(vstate, eps, rng)
            rho_p = reduced_rho(perturbed, grid4, 6)
            spectral = np.abs(np.sort(rho_p.eigenvalues())
                              - np.sort(rho.eigenvalues())).max()
            assert spectral <= 4.0 * eps


def test_perturb_state_distance_exact(grid4, rng):
    vstate = make_value_state(np.arange(1.0, 17.0), 4)
    out = perturb_state(vstate, 0.05, rng)
    assert np.linalg.norm(out.amplitudes - vstate.amplitudes) == pytest.approx(0.05, abs=1e-12)
