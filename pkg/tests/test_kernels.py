"""Kernel evaluation, analytic derivatives vs finite differences, bandwidth."""

import numpy as np
import pytest

from steinperturb import InputError, KernelSpec, median_heuristic
from steinperturb import kernels

SPECS = [
    KernelSpec(family="imq", bandwidth=1.0),
    KernelSpec(family="imq", bandwidth=2.7, imq_beta=-0.3),
    KernelSpec(family="imq", bandwidth=0.5, imq_beta=-0.9),
    KernelSpec(family="rbf", bandwidth=1.0),
    KernelSpec(family="rbf", bandwidth=3.1),
]


def fd_grad_x(k, x, y, h=1e-6):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (kernels.eval(k, x + e, y) - kernels.eval(k, x - e, y)) / (2 * h)
    return g


def fd_cross_trace(k, x, y, h=1e-4):
    """Central second differences of k in x_i and y_i, summed over i."""
    total = 0.0
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        total += (
            kernels.eval(k, x + e, y + e)
            - kernels.eval(k, x + e, y - e)
            - kernels.eval(k, x - e, y + e)
            + kernels.eval(k, x - e, y - e)
        ) / (4 * h * h)
    return total


@pytest.mark.parametrize("k", SPECS)
@pytest.mark.parametrize("d", [1, 3, 7])
def test_gradients_match_finite_differences(k, d):
    rng = np.random.default_rng([17, d])
    for _ in range(20):
        x = rng.normal(0, 2, d)
        y = rng.normal(0, 2, d)
        gx = kernels.grad_x(k, x, y)
        gy = kernels.grad_y(k, x, y)
        fx = fd_grad_x(k, x, y)
        np.testing.assert_allclose(gx, fx, rtol=1e-6, atol=1e-9)
        # symmetry of k implies grad_y(x, y) = grad_x(y, x)
        np.testing.assert_allclose(gy, kernels.grad_x(k, y, x), rtol=1e-12)


@pytest.mark.parametrize("k", SPECS)
@pytest.mark.parametrize("d", [1, 3])
def test_cross_trace_matches_finite_differences(k, d):
    rng = np.random.default_rng([18, d])
    for _ in range(20):
        x = rng.normal(0, 2, d)
        y = rng.normal(0, 2, d)
        ct = kernels.cross_grad_trace(k, x, y)
        fd = fd_cross_trace(k, x, y)
        np.testing.assert_allclose(ct, fd, rtol=1e-6, atol=1e-7)


def test_cross_trace_forced_value():
    # IMQ beta=-1/2, bandwidth 1, d=1, x=y: trace = -2*beta/bw = 1
    k = KernelSpec(family="imq", bandwidth=1.0)
    x = np.array([0.3])
    assert kernels.cross_grad_trace(k, x, x) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("k", SPECS)
def test_eval_properties(k):
    rng = np.random.default_rng(5)
    x = rng.normal(size=4)
    y = rng.normal(size=4)
    assert kernels.eval(k, x, x) == pytest.approx(1.0)
    assert kernels.eval(k, x, y) == pytest.approx(kernels.eval(k, y, x))
    assert 0.0 < kernels.eval(k, x, y) <= 1.0


@pytest.mark.parametrize("k", SPECS)
def test_gram_positive_semidefinite(k):
    rng = np.random.default_rng(6)
    X = rng.normal(0, 3, (40, 2))
    G = np.array([[kernels.eval(k, a, b) for b in X] for a in X])
    assert np.linalg.eigvalsh(G).min() >= -1e-10


@pytest.mark.parametrize("k", SPECS)
def test_fused_coefficients_match_individual(k):
    r2 = np.abs(np.random.default_rng(7).normal(0, 5, (30,)))
    K, g, c = k._coeffs_r2(r2, 4)
    np.testing.assert_allclose(K, k._eval_r2(r2), rtol=1e-14)
    np.testing.assert_allclose(g, k._gcoef_r2(r2), rtol=1e-14)
    np.testing.assert_allclose(c, k._cross_trace_r2(r2, 4), rtol=1e-14)


def test_median_heuristic_examples():
    # points 0, 1, 3: squared distances {1, 9, 4}, median 4
    assert median_heuristic([[0.0], [1.0], [3.0]]) == pytest.approx(4.0)
    # two points 0, 2: single distance 4
    assert median_heuristic([[0.0], [2.0]]) == pytest.approx(4.0)
    # 2D: (0,0), (1,0), (0,1): squared distances {1, 1, 2}, median 1
    assert median_heuristic([[0, 0], [1, 0], [0, 1]]) == pytest.approx(1.0)


def test_median_heuristic_degenerate():
    with pytest.warns(UserWarning):
        assert median_heuristic([[1.0], [1.0], [1.0]]) == 1.0
    with pytest.raises(InputError):
        median_heuristic([[1.0]])


def test_kernel_spec_validation():
    with pytest.raises(InputError):
        KernelSpec(family="poly", bandwidth=1.0)
    with pytest.raises(InputError):
        KernelSpec(family="imq", bandwidth=0.0)
    with pytest.raises(InputError):
        KernelSpec(family="imq", bandwidth=1.0, imq_beta=-1.5)
    with pytest.raises(InputError):
        KernelSpec(family="imq", bandwidth=1.0, imq_beta=0.0)


def test_mismatched_shapes_rejected():
    k = SPECS[0]
    with pytest.raises(InputError):
        kernels.eval(k, np.zeros(2), np.zeros(3))
