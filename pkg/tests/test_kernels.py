import numpy as np
import pytest

from evauction import kernels


def _random_call(rng, evse_count=3, width=6):
    cable_cap = float(rng.integers(1, 5))
    rate_cap = float(rng.integers(1, 3))
    cable_load = rng.integers(0, cable_cap + 1, size=(evse_count, width)).astype(float)
    energy_load = rng.integers(0, rate_cap + 1, size=(evse_count, width)).astype(float)
    pool_cap = rng.uniform(0.0, 10.0, size=width)
    pool_load = np.minimum(rng.uniform(0.0, 10.0, size=width), pool_cap)
    cable_req = (rng.random(width) < 0.7).astype(float)
    energy_req = cable_req * rng.integers(0, 2, size=width).astype(float)
    grid_price = rng.uniform(0.0, 0.2, size=width)
    args = (
        cable_load, energy_load, pool_load, cable_req, energy_req,
        cable_cap, rate_cap, pool_cap, grid_price,
        30.0, 0.02, 9.0, 0.25, 9.0, 0.25, 9.0,
    )
    return args


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
    assert "python" in kernels.available_backends()


def test_backends_agree_bitwise():
    backends = kernels.available_backends()
    if "compiled" not in backends:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(99)
    for _ in range(200):
        args = _random_call(rng)
        pay_a = np.empty((3, 3))
        ok_a = np.zeros(3, dtype=np.uint8)
        pay_b = np.empty((3, 3))
        ok_b = np.zeros(3, dtype=np.uint8)
        backends["python"](*args, pay_a, ok_a)
        backends["compiled"](*args, pay_b, ok_b)
        assert np.array_equal(ok_a, ok_b)
        assert np.array_equal(pay_a[ok_a == 1], pay_b[ok_b == 1])


def test_kernel_marks_overflow_infeasible():
    fn = kernels.quote_options
    width = 2
    cable_load = np.array([[1.0, 1.0], [0.0, 0.0]])
    energy_load = np.zeros((2, width))
    pool_load = np.zeros(width)
    cable_req = np.ones(width)
    energy_req = np.array([1.0, 0.0])
    pay = np.empty((2, 3))
    ok = np.zeros(2, dtype=np.uint8)
    fn(
        cable_load, energy_load, pool_load, cable_req, energy_req,
        1.0, 1.0, np.full(width, 5.0), np.full(width, 0.1),
        30.0, 0.02, 9.0, 0.25, 9.0, 0.25, 9.0,
        pay, ok,
    )
    assert list(ok) == [0, 1]


def test_kernel_zero_capacity_slot_is_infeasible():
    fn = kernels.quote_options
    pay = np.empty((1, 3))
    ok = np.zeros(1, dtype=np.uint8)
    fn(
        np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1),
        np.ones(1), np.ones(1),
        4.0, 1.0, np.zeros(1), np.full(1, 0.1),
        30.0, 0.02, 9.0, 0.25, 9.0, 0.25, 9.0,
        pay, ok,
    )
    assert ok[0] == 0
