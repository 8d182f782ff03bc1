import math

import numpy as np
import pytest

from qvar.errors import ConfigError, NumericalError
from qvar.market import MarketParams
from qvar.mc import (FixedPointCode, euler_forward, euler_inverse,
                     logistic_increment, simulate_paths)


def make_params(mu=0.1, alpha=1.0, dtau=1.0, t_bar=1.0, T=2.0):
    return MarketParams(r=0.0, mu=mu, alpha=alpha, T=T, t_bar=t_bar, dtau=dtau)


def test_logistic_increment_examples():
    assert logistic_increment(8, 8) == 0.0
    assert logistic_increment(4, 8) == 1.0
    assert logistic_increment(2, 8) == 0.75


def test_logistic_increment_bounds():
    with pytest.raises(ConfigError):
        logistic_increment(0, 8)
    with pytest.raises(ConfigError):
        logistic_increment(9, 8)


def test_euler_forward_examples():
    params = make_params(mu=0.1, alpha=1.0, dtau=1.0)
    assert euler_forward(4, 0.0, params, 8) == 0.0
    # dZ = 0 at j = L: drift only
    assert euler_forward(8, 2.0, params, 8) == pytest.approx(2.2, abs=1e-15)
    # x=4, mu*dtau=0.1, alpha=1, dZ=1: 1.1*4 + 2 = 6.4
    assert euler_forward(4, 4.0, params, 8) == pytest.approx(6.4, abs=1e-14)


def test_euler_inverse_examples():
    params = make_params(mu=0.1, alpha=1.0, dtau=1.0)
    assert euler_inverse(4, 0.0, params, 8) == pytest.approx(0.0, abs=1e-15)
    # dZ = 0: linear inverse
    assert euler_inverse(8, 2.2, params, 8) == pytest.approx(2.0, abs=1e-14)
    # invert the forward example
    assert euler_inverse(4, 6.4, params, 8) == pytest.approx(4.0, abs=1e-12)


def test_euler_inverse_rejects_negative_drift_regime():
    params = make_params(mu=-2.0, dtau=1.0)
    with pytest.raises(NumericalError):
        euler_inverse(4, 1.0, params, 8)


@pytest.mark.parametrize("j", [1, 3, 5, 8])
def test_round_trip_before_quantization(j):
    params = make_params(mu=0.07, alpha=0.4, dtau=0.5)
    for x in (0.3, 1.7, 42.0):
        y = euler_forward(j, x, params, 8)
        assert euler_inverse(j, y, params, 8) == pytest.approx(x, abs=1e-12)


def test_quantized_round_trip_bounded_by_lipschitz_constant():
    params = make_params(mu=0.07, alpha=0.4, dtau=0.5)
    m = 8
    code = FixedPointCode(m=m, range_max=64.0)
    for j in (1, 3, 6):
        a = 1.0 + params.mu * params.dtau
        b = params.alpha * logistic_increment(j, 8)
        for x in (0.5, 2.0, 7.3):
            y = code.quantize(euler_forward(j, x, params, 8))
            back = euler_inverse(j, float(y), params, 8)
            # |dF^-1/dy| = 1 / (a + b / (2 sqrt(x)))
            lipschitz = 1.0 / (a + b / (2.0 * math.sqrt(x)))
            assert abs(back - x) <= 1.25 * lipschitz * 2.0 ** (-m)


def test_simulate_paths_zero_horizon():
    params = make_params(t_bar=0.0, T=1.0, dtau=0.5)
    paths = simulate_paths(params, 1.5, 8, 6)
    assert np.allclose(paths.prices, np.full(8, 1.5), atol=2**-6)
    assert paths.t == 0.0


def test_simulate_paths_identity_dynamics():
    params = make_params(mu=0.0, alpha=0.0, t_bar=1.0, T=2.0, dtau=0.25)
    paths = simulate_paths(params, 2.0, 8, 6)
    assert np.array_equal(paths.prices, np.full(8, 2.0))


def test_simulate_paths_single_step_matches_scalar_recomputation():
    params = make_params(mu=0.1, alpha=1.0, dtau=1.0, t_bar=1.0, T=1.0)
    m = 10
    paths = simulate_paths(params, 4.0, 8, m)
    code = FixedPointCode(m=m, range_max=paths.code.range_max)
    expected = [code.quantize(euler_forward(j, 4.0, params, 8)) for j in range(1, 9)]
    assert np.allclose(paths.prices, expected, atol=0)


def test_simulate_paths_deterministic():
    params = make_params(mu=0.03, alpha=0.6, dtau=0.25, t_bar=2.0, T=2.0)
    a = simulate_paths(params, 1.0, 16, 12)
    b = simulate_paths(params, 1.0, 16, 12)
    assert np.array_equal(a.prices, b.prices)


def test_simulate_paths_overflow():
    params = make_params(mu=0.5, alpha=0.0, dtau=1.0, t_bar=4.0, T=4.0)
    with pytest.raises(NumericalError, match="overflow"):
        simulate_paths(params, 3.0, 4, 6, range_max=8.0)


def test_fixed_point_code_properties():
    code = FixedPointCode(m=6, range_max=4.0)
    assert code.max_code == 256
    assert code.width == 9
    x = 1.2345
    assert abs(code.quantize(x) - x) <= 2.0**-6
    with pytest.raises(NumericalError):
        code.encode(5.0)
    with pytest.raises(NumericalError):
        code.encode(-0.25)
