import math

import numpy as np
import pytest

from cintlab.kernels import (GaussKernelParams, gauss_blur, kernel_K,
                             kernel_single, kernel_matrix, hermite_table,
                             hermite_value, closed_eigenpair,
                             composite_spectrum,
                             gaussian_window_identity_residual,
                             hermite_window_identity_residual, noise_kernel)

H0, h0 = 11.36, 1.0


@pytest.fixture(scope="module")
def params_single():
    return GaussKernelParams(H=H0, h=h0, reflectors=((0.0, 1.0),))


@pytest.fixture(scope="module")
def table():
    return hermite_table(10, H0, h0)


# ----------------------------- kernel values ------------------------------

def test_kernel_symmetry():
    p = GaussKernelParams(H=5.0, h=1.0,
                          reflectors=((0.0, 1.0), (12.0, -2.0), (30.0, 0.5)))
    rng = np.random.default_rng(0)
    y = rng.uniform(-10, 40, 50)
    yp = rng.uniform(-10, 40, 50)
    assert np.allclose(kernel_K(y, yp, p), kernel_K(yp, y, p), rtol=1e-13)


def test_kernel_peak_value(params_single):
    # K_H(0) K_h(0) = 1 / (2 pi H h).
    got = kernel_K(0.0, 0.0, params_single)
    assert math.isclose(float(got), 1.0 / (2 * math.pi * H0 * h0), rel_tol=1e-13)


def test_kernel_zero_reflectivity():
    p = GaussKernelParams(H=5.0, h=1.0, reflectors=())
    assert kernel_K(1.0, 2.0, p) == 0.0


def test_kernel_single_vs_full(params_single):
    y = np.linspace(-5, 5, 11)
    a = kernel_single(y, y[::-1], 0.0, 1.0, params_single)
    b = kernel_K(y, y[::-1], params_single)
    assert np.allclose(a, b, rtol=1e-13)


def test_widths_validated():
    with pytest.raises(ValueError):
        GaussKernelParams(H=0.4, h=1.0, reflectors=())


def test_noise_kernel_shape():
    v = noise_kernel(0.0, 0.0, h=1.0, hpar=10.0, k0=2 * math.pi)
    assert v == pytest.approx(1.0)
    v2 = noise_kernel(3.0, 0.0, h=1.0, hpar=10.0, k0=2 * math.pi)
    assert abs(v2) == pytest.approx(math.exp(-4.5))


# ----------------------------- Hermite tables -----------------------------

def test_hermite_he2(table):
    # He2(x) = x^2 - 1 from the recurrence (the printed closed form with a
    # missing 2^m factor would give x^2 - 2).
    assert np.allclose(table.Theta[2, :3], [-1.0, 0.0, 1.0])
    assert np.allclose(hermite_value(2, np.array([0.0, 1.0, 2.0])),
                       [-1.0, 0.0, 3.0])


def test_theta_inverse(table):
    n = table.n_max + 1
    ident = table.Theta @ table.ThetaInv
    assert np.max(np.abs(ident - np.eye(n))) < 1e-12 * np.max(np.abs(table.Theta))


def test_hermite_orthogonality_quadrature():
    # int He_n He_m e^{-x^2/2} = sqrt(2 pi) n! delta_{nm}; use the exact
    # Gauss rule for the probabilists' weight.
    from numpy.polynomial.hermite_e import hermegauss
    x, w = hermegauss(40)
    for n in range(9):
        for m in range(9):
            val = float(np.sum(w * hermite_value(n, x) * hermite_value(m, x)))
            expected = math.sqrt(2 * math.pi) * math.factorial(n) if n == m else 0.0
            scale = math.sqrt(2 * math.pi) * math.factorial(max(n, m))
            assert abs(val - expected) / scale < 1e-8


def test_eigen_polynomials_low_order(table):
    xi = np.linspace(-3, 3, 7)
    assert np.allclose(table.eigen_poly(0, xi), 1.0)
    assert np.allclose(table.eigen_poly(1, xi), xi, atol=1e-14)
    assert np.allclose(np.diag(table.Gamma), 1.0)


def test_degenerate_widths_rejected():
    with pytest.raises(ValueError):
        hermite_table(5, 0.5, 1.0)


# --------------------------- closed-form spectrum --------------------------

def test_eigenvalue_ratio(params_single, table):
    lam0, _ = closed_eigenpair(0, 0, params_single, table)
    lam1, _ = closed_eigenpair(0, 1, params_single, table)
    assert math.isclose(lam1 / lam0, 0.91568, rel_tol=1e-4)
    # Ratio constant in n to 1e-6.
    lams = [closed_eigenpair(0, n, params_single, table)[0] for n in range(6)]
    ratios = [lams[n + 1] / lams[n] for n in range(5)]
    assert max(abs(r - ratios[0]) for r in ratios) < 1e-6 * ratios[0]


def test_leading_eigenfunction_gaussian(params_single, table):
    _, f = closed_eigenpair(0, 0, params_single, table)
    y = np.linspace(-30, 30, 4001)
    v = f(y)
    # Unit L2 norm.
    assert abs(np.trapezoid(v ** 2, y) - 1.0) < 1e-10
    # Gaussian of width sqrt(H h) = 3.3705: check the 1/e point.
    s_fit = math.sqrt(-0.5 * 25.0 / math.log(f(5.0) / f(0.0)))
    assert abs(s_fit - 3.3705) < 1e-3


def test_eigenfunction_orthogonality(params_single, table):
    _, f0 = closed_eigenpair(0, 0, params_single, table)
    _, f2 = closed_eigenpair(0, 2, params_single, table)
    y = np.linspace(-40, 40, 8001)
    inner = np.trapezoid(f0(y) * f2(y), y)
    assert abs(inner) < 1e-8


def test_dense_oracle_single_reflector(params_single, table):
    grid = np.arange(-8 * H0, 8 * H0 + 1e-9, h0 / 4)
    dy = h0 / 4
    w, V = np.linalg.eigh(kernel_matrix(params_single, grid) * dy)
    w = w[::-1]
    V = V[:, ::-1]
    for n in range(5):
        lam, f = closed_eigenpair(0, n, params_single, table)
        assert abs(w[n] - lam) / lam < 1e-3
        vn = f(grid)
        vn /= np.linalg.norm(vn)
        assert abs(V[:, n] @ vn) >= 0.999


def test_discretized_kernel_positive():
    rng = np.random.default_rng(3)
    rho = rng.uniform(-2, 2, 3)
    p = GaussKernelParams(H=6.0, h=1.0,
                          reflectors=tuple((z, r) for z, r in
                                           zip((0.0, 15.0, 40.0), rho)))
    grid = np.linspace(-30, 70, 401)
    w = np.linalg.eigvalsh(kernel_matrix(p, grid) * (grid[1] - grid[0]))
    assert w.min() >= -1e-8 * w.max()


# ----------------------------- identity checks -----------------------------

def test_window_identity_point():
    assert gaussian_window_identity_residual(2.0, 0.5, 0.0, 0.0, 0.0, 1.0) < 1e-8


def test_window_identity_zero_offset_case():
    # eta = z_j' and y = z_j: the shifted-center factor collapses.
    r = gaussian_window_identity_residual(4.0, 0.8, 1.5, -2.0, -2.0, 1.5)
    assert r < 1e-8


def test_window_identity_scaling():
    # All lengths doubled: both sides scale by 1/2; the identity persists.
    r = gaussian_window_identity_residual(4.0, 1.0, 0.0, 2.0, 1.0, 0.5)
    r2 = gaussian_window_identity_residual(8.0, 2.0, 0.0, 4.0, 2.0, 1.0)
    assert r < 1e-8 and r2 < 1e-8


def test_hermite_identity_reduces_to_gaussian():
    a = hermite_window_identity_residual(0, 3.0, 0.7, 0.5, -0.5, 0.2, 1.0)
    b = gaussian_window_identity_residual(3.0, 0.7, 0.5, -0.5, 0.2, 1.0)
    assert abs(a - b) < 1e-12


def test_hermite_identity_order_three():
    assert hermite_window_identity_residual(3, 5.0, 1.0, 0.0, 0.0, 0.0, 0.7) < 1e-7


def test_hermite_identity_pinned_case():
    assert hermite_window_identity_residual(1, 5.0, 1.0, 2.0, -1.0, -1.0, 2.0) < 1e-7


def test_identity_random_sample():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(20):
        H = rng.uniform(2, 15)
        h = rng.uniform(0.3, 1.2)
        zj, zjp, eta, y = rng.uniform(-3, 3, 4)
        worst = max(worst, gaussian_window_identity_residual(H, h, zj, zjp, eta, y))
        n = int(rng.integers(1, 6))
        worst = max(worst, hermite_window_identity_residual(n, H, h, zj, zjp, eta, y))
    assert worst < 1e-7


# ----------------------------- composite spectrum --------------------------

def test_composite_single_reduces_to_closed(params_single, table):
    lams, evals_ = composite_spectrum(params_single, table, 3)
    for n in range(3):
        lam, f = closed_eigenpair(0, n, params_single, table)
        assert math.isclose(lams[n], lam, rel_tol=1e-14)
        y = np.linspace(-20, 20, 101)
        a, b = evals_[n](y), f(y)
        sgn = np.sign(np.sum(a * b))
        assert np.allclose(a, sgn * b, atol=1e-6)


def test_composite_two_equal_reflectors_scale(table):
    sep = 3.5 * H0
    p = GaussKernelParams(H=H0, h=h0,
                          reflectors=((-sep / 2, 1.0), (sep / 2, 1.0)))
    lams, _ = composite_spectrum(p, hermite_table(4, H0, h0), 1)
    grid = np.arange(-sep / 2 - 8 * H0, sep / 2 + 8 * H0 + 1e-9, h0 / 4)
    w = np.linalg.eigvalsh(kernel_matrix(p, grid) * h0 / 4)
    zeta = p.zeta()
    assert zeta > 1.0
    bound = math.exp(-9 * zeta ** 2 / 2)
    assert abs(w[-1] - lams[0]) / lams[0] <= bound


def test_composite_signed_eigenvector_changes_sign(table):
    sep = 3.5 * H0
    p = GaussKernelParams(H=H0, h=h0,
                          reflectors=((-sep / 2, 1.0), (sep / 2, -1.0)))
    grid = np.arange(-sep / 2 - 8 * H0, sep / 2 + 8 * H0 + 1e-9, h0 / 4)
    w, V = np.linalg.eigh(kernel_matrix(p, grid) * h0 / 4)
    v0 = V[:, -1]
    i1 = int(np.argmin(np.abs(grid + sep / 2)))
    i2 = int(np.argmin(np.abs(grid - sep / 2)))
    assert v0[i1] * v0[i2] < 0
    # The composite evaluator carries the same sign structure.
    lams, evals_ = composite_spectrum(p, table, 1)
    vals = evals_[0](grid[[i1, i2]])
    assert vals[0] * vals[1] < 0


def test_composite_warns_when_close():
    p = GaussKernelParams(H=H0, h=h0, reflectors=((0.0, 1.0), (10.0, 1.0)))
    with pytest.warns(UserWarning, match="zeta"):
        composite_spectrum(p, hermite_table(2, H0, h0), 1)
