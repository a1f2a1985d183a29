import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from oracles import kernel_integral

from densityjump.errors import DegenerateTruncationError, DomainError
from densityjump.kernels import (
    KernelParams,
    gamma_kernel,
    log_gamma_kernel,
    trunc_kernel_minus,
    trunc_kernel_plus,
    truncation_weights,
)

GAMMA_3_2 = 2.0 - 10.0 * math.exp(-2.0)  # lower incomplete gamma(3, 2)
UPPER_3_2 = 2.0 - GAMMA_3_2


def test_params_validation():
    KernelParams(0.0, 0.1)
    for x, b, c in [(-1.0, 0.1, None), (1.0, 0.0, None), (1.0, -1.0, None), (1.0, 0.1, 0.0), (math.inf, 0.1, None)]:
        with pytest.raises(DomainError):
            KernelParams(x, b, c)
    assert KernelParams(2.0, 0.5).shape == 5.0
    with pytest.raises(DomainError):
        KernelParams(1.0, 0.1).require_cutoff()


def test_gamma_kernel_examples():
    assert gamma_kernel(KernelParams(0.0, 1.0), 0.0) == 1.0
    assert gamma_kernel(KernelParams(2.0, 1.0), 1.0) == pytest.approx(math.exp(-1.0) / 2.0, rel=1e-14)
    assert gamma_kernel(KernelParams(2.0, 1.0), 0.0) == 0.0


def test_gamma_kernel_mode_at_design_point():
    params = KernelParams(3.0, 0.1)
    res = optimize.minimize_scalar(lambda u: -gamma_kernel(params, u), bounds=(0.5, 8.0), method="bounded", options={"xatol": 1e-10})
    assert res.x == pytest.approx(3.0, abs=1e-6)


def test_gamma_kernel_rejects_negative_argument():
    with pytest.raises(DomainError):
        gamma_kernel(KernelParams(1.0, 1.0), -0.1)


def test_gamma_kernel_huge_shape_is_finite():
    params = KernelParams(1e4, 0.01)  # shape 1e6
    v = gamma_kernel(params, 1e4)
    assert math.isfinite(v) and v > 0


def test_truncated_examples():
    p = KernelParams(2.0, 1.0, 2.0)
    assert trunc_kernel_minus(p, 2.5) == 0.0
    assert trunc_kernel_minus(p, 2.0) == 0.0
    assert trunc_kernel_minus(p, 1.0) == pytest.approx(math.exp(-1.0) / GAMMA_3_2, rel=1e-13)
    assert trunc_kernel_minus(p, 1.0) == pytest.approx(0.568905, abs=3e-6)
    assert trunc_kernel_plus(p, 1.0) == 0.0
    assert trunc_kernel_plus(p, 3.0) == pytest.approx(9.0 * math.exp(-3.0) / UPPER_3_2, rel=1e-13)
    assert trunc_kernel_plus(p, 3.0) == pytest.approx(0.331092, abs=1e-6)
    # the cutoff itself belongs to the right side
    assert trunc_kernel_plus(p, 2.0) > 0.0


def test_truncation_weights_closed_form():
    P, Q = truncation_weights(KernelParams(2.0, 1.0, 2.0))
    assert P == pytest.approx(GAMMA_3_2 / 2.0, rel=1e-14)
    assert Q == pytest.approx(UPPER_3_2 / 2.0, rel=1e-14)


NORM_GRID = [
    (1.0, 0.05, 2.0),
    (5.0, 0.1, 2.0),
    (2.0, 1.0, 2.0),
    (0.0, 0.3, 0.5),
    (1.7057, 0.02, 1.7057),
    (100.0, 0.01, 100.0),  # x/b = 1e4
    (100.0, 0.01, 99.5),
]


@pytest.mark.parametrize("x, b, c", NORM_GRID)
def test_normalization(x, b, c):
    params = KernelParams(x, b, c)
    width = math.sqrt(x * b + b * b)
    far = max(c, x) + 80 * width + 50 * b
    total = kernel_integral(lambda u: gamma_kernel(params, u), 0.0, far, x, width)
    left = kernel_integral(lambda u: trunc_kernel_minus(params, u), 0.0, c, x, width)
    right = kernel_integral(lambda u: trunc_kernel_plus(params, u), c, far, x, width)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert left == pytest.approx(1.0, abs=1e-8)
    assert right == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("x, b, c", NORM_GRID)
def test_decomposition_identity(x, b, c):
    params = KernelParams(x, b, c)
    P, Q = truncation_weights(params)
    width = math.sqrt(x * b + b * b)
    u = np.concatenate([np.linspace(0.0, x + 8 * width, 401), [c]])
    lhs = P * trunc_kernel_minus(params, u) + Q * trunc_kernel_plus(params, u)
    rhs = gamma_kernel(params, u)
    mask = rhs > 0
    assert np.all(np.abs(lhs[mask] / rhs[mask] - 1.0) <= 1e-12)
    assert np.all(lhs[~mask] == 0.0)


def test_degenerate_side_is_finite_in_log_space():
    # P underflows to 0 but the log normalizer is still finite
    params = KernelParams(50.0, 0.005, 30.0)
    assert truncation_weights(params)[0] == 0.0
    v = trunc_kernel_minus(params, 29.99)
    assert math.isfinite(v) and v > 0


def test_degenerate_truncation_raised_when_mass_vanishes(monkeypatch):
    import densityjump.kernels as kernels

    monkeypatch.setattr(kernels, "log_reg_upper_gamma", lambda a, z: -math.inf)
    with pytest.raises(DegenerateTruncationError):
        kernels.trunc_kernel_plus(KernelParams(1.0, 0.1, 2.0), 3.0)


def test_vector_arguments():
    params = KernelParams(1.5, 0.2, 1.5)
    u = np.array([0.0, 0.5, 1.5, 3.0])
    out = trunc_kernel_minus(params, u)
    assert out.shape == (4,)
    assert out[2] == 0.0 and out[3] == 0.0
    assert np.allclose(np.exp(log_gamma_kernel(1.5, 0.2, u)), gamma_kernel(params, u))


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(0.0, 50.0),
    b=st.floats(0.005, 2.0),
    c=st.floats(0.05, 50.0),
    u=st.floats(0.0, 100.0),
)
def test_property_nonnegative_and_decomposes(x, b, c, u):
    params = KernelParams(x, b, c)
    P, Q = truncation_weights(params)
    km, kp, kg = trunc_kernel_minus(params, u), trunc_kernel_plus(params, u), gamma_kernel(params, u)
    assert km >= 0 and kp >= 0 and kg >= 0
    assert km == 0.0 or kp == 0.0
    lhs = (P * km if P > 0 else 0.0) + (Q * kp if Q > 0 else 0.0)
    if kg > 1e-290 and lhs > 0:
        assert lhs == pytest.approx(kg, rel=1e-12)
