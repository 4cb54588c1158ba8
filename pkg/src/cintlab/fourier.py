"""Fourier cross-products of the two-point matrix and phase estimation.

The 2-D transform of the two-point matrix factorizes, after dividing out
a Gaussian envelope, into products rho_hat(u) conj(rho_hat(v)) of the
reflectivity spectrum at pairs of wavenumbers with |u - v| limited by the
center-point blur. The spectrum's modulus comes from the diagonal pairs;
its phase is recovered either by the marching recursion or by minimizing
the phase-only least-squares misfit over all products.

Wavenumber phases are referenced to the midpoint of the image grid
(bulk linear phase removed); conversions back to absolute coordinates
add the center shift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal.windows import tukey

from .scene import Scene, Scales, display_grid
from .cint import TwoPointMatrix, ImageProfile

__all__ = [
    "FourierProducts",
    "PhaseEstimate",
    "OptimizeSettings",
    "fourier_products",
    "recursive_estimate",
    "optimize_phase",
    "op_image",
    "modulus_spectrum",
    "rho_hat_model",
]


def rho_hat_model(reflectors, u, center: float = 0.0) -> np.ndarray:
    """Closed-form spectrum of point reflectors relative to `center`."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape, dtype=complex)
    for z, rho in reflectors:
        out += rho * np.exp(-1j * u * (z - center))
    return out


def _transform_pairs(M: TwoPointMatrix, u: np.ndarray, center: float) -> np.ndarray:
    """Mhat[i, j] = dy^2 sum_pq e^{-i u_i y_p} M_pq e^{+i u_j y_q}.

    Equals rho_hat(u_i) conj(rho_hat(u_j)) times the Gaussian envelope for
    the model kernel. Uses the factored form when available (then the
    result is a Gram matrix, Hermitian PSD).
    """
    yc = M.grid - center
    E = np.exp(1j * np.outer(yc, u))                     # (G, n_u)
    dy2 = M.spacing ** 2
    if M.factors is not None:
        C = M.factors @ E                                # (K, n_u)
        return dy2 * (C.conj().T @ C)
    return dy2 * (E.conj().T @ M.to_dense() @ E)


@dataclass
class FourierProducts:
    """Spectrum products on a uniform wavenumber grid.

    `P` is the (kappa, kappa_tilde) product matrix of the contract; the
    full pairwise matrix over the extended node grid `u` (all integer
    spans, which the estimation actually consumes) is kept alongside.
    """

    kappa: np.ndarray          # core grid over S = [-3/h_est, 3/h_est]
    kappa_tilde: np.ndarray    # spacing 2*du, |kt| <= 3/H
    P: np.ndarray              # (len(kappa), len(kappa_tilde))
    u: np.ndarray              # extended node grid, spacing du
    pairs: np.ndarray          # (n_u, n_u) products, NaN where invalid
    valid: np.ndarray          # bool mask of usable pairs
    modulus: np.ndarray        # |rho_hat| estimate on u
    du: float
    span_max: int              # pair span limit in du units (= kt_max/du)
    center: float
    h: float
    H: float
    h_est: float
    n_core: int = 0            # imaging-band half-width in du units
    envelope_corrected: bool = True

    @property
    def core_index(self) -> np.ndarray:
        i0 = len(self.u) // 2
        return np.arange(i0 - self.n_core, i0 + self.n_core + 1)

    def product_at(self, i: int, j: int) -> complex:
        return self.pairs[i, j]


def fourier_products(M: TwoPointMatrix, scales: Scales, h_est: float,
                     center: float | None = None) -> FourierProducts:
    """Extract spectrum products from a two-point matrix.

    The node spacing is the FFT-natural du = 2 pi / (G dy) of the matrix
    grid. Pairs are kept for |u - v| <= 3/H and |(u+v)/2| <= 3/h (the
    envelope correction is unreliable beyond the +-3 bound and requests
    past it are clipped with a warning).
    """
    H, h = scales.H, scales.h
    if not (H > h_est > h):
        warnings.warn(f"h_est={h_est} outside H >> h_est >> h "
                      f"(H={H:.3g}, h={h:.3g})", stacklevel=2)
    G = M.n_points
    dy = M.spacing
    du = 2.0 * math.pi / (G * dy)
    if center is None:
        center = 0.5 * float(M.grid[0] + M.grid[-1])

    kt_max = 3.0 / H
    # Band for resolution h_est, by the same +-3 convention that ties the
    # ideal resolution h to the products domain (-3/h, 3/h).
    core_max = 3.0 / h_est
    if core_max > 3.0 / h:
        warnings.warn("requested band exceeds the +-3 envelope bound; clipped",
                      stacklevel=2)
        core_max = 3.0 / h
    n_core = int(math.floor(core_max / du + 1e-12))
    J = max(1, int(math.floor(kt_max / (2.0 * du) + 1e-12)))
    span_max = int(math.floor(kt_max / du + 1e-12))
    # Nodes never extend past the +-3/h envelope bound: beyond it their
    # own diagonal product (the modulus) is unavailable.
    n_side = min(n_core + J, int(math.floor(3.0 / h / du + 1e-12)))
    n_core = min(n_core, n_side)
    u = du * np.arange(-n_side, n_side + 1)

    mhat = _transform_pairs(M, u, center)
    ui, uj = np.meshgrid(u, u, indexing="ij")
    kap = (ui + uj) / 2.0
    ktil = ui - uj
    valid = (np.abs(ktil) <= kt_max + 1e-12) & (np.abs(kap) <= 3.0 / h + 1e-12)
    env = np.exp((np.minimum(np.abs(kap), 3.0 / h) ** 2 * h ** 2
                  + np.minimum(np.abs(ktil), kt_max) ** 2 * H ** 2) / 2.0)
    pairs = np.where(valid, env * mhat, np.nan + 0j)

    i0 = n_side
    modulus = np.sqrt(np.clip(np.real(np.diagonal(pairs)), 0.0, None))

    # The stored rectangle is the largest fully populated block.
    n_store = max(n_side - J, 0)
    kappa = du * np.arange(-n_store, n_store + 1)
    kappa_tilde = 2.0 * du * np.arange(-J, J + 1)
    P = np.empty((len(kappa), len(kappa_tilde)), dtype=complex)
    for col, jj in enumerate(range(-J, J + 1)):
        rows = np.arange(-n_store, n_store + 1) + i0
        P[:, col] = pairs[rows + jj, rows - jj]

    return FourierProducts(kappa=kappa, kappa_tilde=kappa_tilde, P=P,
                           u=u, pairs=pairs, valid=valid, modulus=modulus,
                           du=du, span_max=span_max, center=center,
                           h=h, H=H, h_est=h_est, n_core=n_core)


def modulus_spectrum(M: TwoPointMatrix, scales: Scales, kappa: np.ndarray,
                     center: float | None = None) -> np.ndarray:
    """|rho_hat(kappa)| estimate from diagonal products at arbitrary kappa."""
    if center is None:
        center = 0.5 * float(M.grid[0] + M.grid[-1])
    yc = M.grid - center
    E = np.exp(1j * np.outer(yc, np.asarray(kappa, dtype=float)))
    dy2 = M.spacing ** 2
    if M.factors is not None:
        C = M.factors @ E
        quad = dy2 * np.sum(np.abs(C) ** 2, axis=0)
    else:
        quad = dy2 * np.real(np.einsum("pi,pq,qi->i", E.conj(),
                                       M.to_dense(), E))
    env = np.exp(np.asarray(kappa) ** 2 * scales.h ** 2 / 2.0)
    return np.sqrt(np.clip(env * quad, 0.0, None))


def recursive_estimate(fp: FourierProducts, floor_rel: float = 1e-6) -> np.ndarray:
    """March the spectrum out of the products by successive divisions.

    Anchored at u = 0 with the real-positive gauge rho_hat(0) =
    sqrt(P(0,0)); marches outward in steps of ~1/H reusing previously
    estimated pivots, shifting an anchor to a nearby node when its
    modulus falls below floor_rel times the largest modulus.
    """
    n_u = len(fp.u)
    i0 = n_u // 2
    rho = np.full(n_u, np.nan + 0j)
    known = np.zeros(n_u, dtype=bool)
    ref = float(fp.modulus.max())
    if ref == 0.0:
        return np.zeros(n_u, dtype=complex)

    def best_anchor(i_want: int) -> int:
        lo = max(0, i_want - fp.span_max // 2)
        hi = min(n_u, i_want + fp.span_max // 2 + 1)
        cand = [i for i in range(lo, hi) if known[i]]
        if not cand:
            raise RuntimeError("no known pivot near requested anchor")
        i_best = max(cand, key=lambda i: abs(rho[i]))
        if abs(rho[i_best]) < floor_rel * ref:
            raise RuntimeError("no viable division pivot: spectrum too small "
                               "near the requested anchor")
        return i_best

    # Gauge anchor at (or near) u = 0.
    a0 = i0
    if fp.modulus[a0] < floor_rel * ref:
        window = np.arange(max(0, i0 - fp.span_max // 2),
                           min(n_u, i0 + fp.span_max // 2 + 1))
        a0 = int(window[np.argmax(fp.modulus[window])])
        if fp.modulus[a0] < floor_rel * ref:
            raise RuntimeError("spectrum modulus below floor near u=0")
    rho[a0] = fp.modulus[a0]
    known[a0] = True
    for i in range(max(0, a0 - fp.span_max), min(n_u, a0 + fp.span_max + 1)):
        if i != a0 and fp.valid[i, a0]:
            rho[i] = fp.pairs[i, a0] / np.conj(rho[a0])
            known[i] = True

    step = max(1, int(round((1.0 / fp.H) / fp.du)))
    max_q = n_u // step + 2
    for sign in (+1, -1):
        for q in range(1, max_q + 1):
            a_want = a0 + sign * q * step
            if a_want < 0 or a_want >= n_u:
                break
            a = best_anchor(a_want)
            lo = max(0, a - fp.span_max)
            hi = min(n_u, a + fp.span_max + 1)
            for i in range(lo, hi):
                if not known[i] and fp.valid[i, a]:
                    rho[i] = fp.pairs[i, a] / np.conj(rho[a])
                    known[i] = True
        if known.all():
            break
    if not known.all():
        missing = np.where(~known)[0]
        raise RuntimeError(f"recursion left {len(missing)} nodes unestimated")
    return rho


@dataclass
class PhaseEstimate:
    """Phase of the spectrum over the node grid, gauge theta(0) = 0."""

    theta: np.ndarray
    gauge_index: int
    objective: float
    history: list = field(default_factory=list)
    converged: bool = True
    message: str = ""


@dataclass
class OptimizeSettings:
    maxiter: int = 2000
    gtol: float = 1e-12
    continuation: tuple | None = (2, None)   # span limits per stage; None = all
    restarts: int = 2                        # extra warm-started solver passes
    weighted: bool = False                   # inverse-envelope-squared LS weights


def _pair_lists(fp: FourierProducts, span_limit: int | None):
    """Index lists of usable unordered pairs with model weights and the
    inverse-envelope-squared least-squares weights.

    The envelope correction amplifies the fluctuations of the raw
    transform by its factor, so weighting each residual by the inverse
    squared amplification makes the misfit homoscedastic: the fit is
    anchored by the statistically stable low-wavenumber products.
    """
    n_u = len(fp.u)
    ii, jj = [], []
    limit = fp.span_max if span_limit is None else min(span_limit, fp.span_max)
    for s in range(1, limit + 1):
        i = np.arange(s, n_u)
        j = i - s
        ok = fp.valid[i, j]
        ii.append(i[ok])
        jj.append(j[ok])
    i_idx = np.concatenate(ii)
    j_idx = np.concatenate(jj)
    kap = (fp.u[i_idx] + fp.u[j_idx]) / 2.0
    ktil = fp.u[i_idx] - fp.u[j_idx]
    env = np.exp((kap ** 2 * fp.h ** 2 + ktil ** 2 * fp.H ** 2) / 2.0)
    return (i_idx, j_idx, fp.pairs[i_idx, j_idx],
            fp.modulus[i_idx] * fp.modulus[j_idx], env ** -2)


def optimize_phase(fp: FourierProducts, init: PhaseEstimate | None = None,
                   settings: OptimizeSettings | None = None) -> PhaseEstimate:
    """Minimize the phase-only misfit to the products.

    Objective (discrete, unordered pairs):
        sum_{(i,j)} |P_ij - m_i m_j exp(i(theta_i - theta_j))|^2
    with the analytic gradient, quasi-Newton (L-BFGS-B) steps and the
    gauge theta(u=0) = 0 enforced by elimination. theta is unconstrained;
    only exp(i theta) enters. A short span-continuation schedule (part of
    the optimizer, not the initialization) keeps the default theta = 0
    start out of wrap-around local minima.
    """
    settings = settings or OptimizeSettings()
    n_u = len(fp.u)
    i0 = n_u // 2
    theta = np.zeros(n_u) if init is None else np.array(init.theta, dtype=float)
    theta = theta - theta[i0]

    free = np.ones(n_u, dtype=bool)
    free[i0] = False
    history: list[float] = []

    stages = settings.continuation or (None,)
    full = _pair_lists(fp, None)

    def make_objective(i_idx, j_idx, target, weight, wls):
        if not settings.weighted:
            wls = np.ones_like(wls)
        def fg(x_free):
            th = theta_template.copy()
            th[free] = x_free
            phase = np.exp(1j * (th[i_idx] - th[j_idx]))
            model = weight * phase
            diff = target - model
            f = float(np.sum(wls * np.abs(diff) ** 2))
            dphi = 2.0 * wls * weight * np.imag(np.conj(target) * phase)
            grad = np.zeros(n_u)
            np.add.at(grad, i_idx, dphi)
            np.add.at(grad, j_idx, -dphi)
            return f, grad[free]
        return fg

    theta_template = np.zeros(n_u)
    converged = True
    message = ""
    final_stage = len(stages) - 1
    for stage_no, span_limit in enumerate(stages):
        lists = full if span_limit is None else _pair_lists(fp, span_limit)
        fg = make_objective(*lists)

        callback = None
        if stage_no == final_stage:
            def callback(x_free):
                history.append(fg(x_free)[0])

        last = math.inf
        for _ in range(1 + settings.restarts):
            res = minimize(fg, theta[free], jac=True, method="L-BFGS-B",
                           callback=callback,
                           options={"maxiter": settings.maxiter,
                                    "ftol": 2.0e-16, "gtol": settings.gtol,
                                    "maxcor": 30})
            theta = theta_template.copy()
            theta[free] = res.x
            if stage_no == final_stage:
                history.append(float(res.fun))
            stalled = last - res.fun <= 1e-14 * max(1.0, abs(last))
            if stage_no == final_stage and stalled:
                # A line-search breakdown is a reportable failure; running
                # out of iterations while stalled at a minimum is not.
                if "ABNORMAL" in str(res.message).upper():
                    converged = False
                    message = str(res.message)
            if stalled:
                break
            last = float(res.fun)

    fg_full = make_objective(*full)
    f_final, _ = fg_full(theta[free])
    return PhaseEstimate(theta=theta, gauge_index=i0, objective=f_final,
                         history=history, converged=converged, message=message)


def telescope_phase(fp: FourierProducts) -> np.ndarray:
    """Phase by integrating the adjacent-node product phases.

    Each increment is the wrapped phase of a span-one product, so the
    accumulated phase is the minimal-winding interpretation of the data;
    it cannot lock in spurious 2 pi slips as long as the scene sits
    inside the sampled domain (true increments below pi).
    """
    n = len(fp.u)
    inc = np.zeros(n)
    for k in range(1, n):
        if fp.valid[k, k - 1]:
            inc[k] = float(np.angle(fp.pairs[k, k - 1]))
    theta = np.cumsum(inc)
    return theta - theta[n // 2]


def best_phase_estimate(fp: FourierProducts,
                        settings: OptimizeSettings | None = None) -> PhaseEstimate:
    """Robust phase estimation for measured products.

    Runs the weighted (inverse-envelope) optimization from the telescoped
    phase, from theta = 0, and, when the marching recursion succeeds,
    from its phase. For noisy products many near-tied local minima exist
    and the misfit alone does not identify the physical one; the
    telescoped start is preferred (minimal-winding solution) unless its
    misfit is far off the best candidate.
    """
    if settings is None:
        settings = OptimizeSettings(weighted=True)
    i0 = len(fp.u) // 2

    def from_theta(theta):
        init = PhaseEstimate(theta=theta, gauge_index=i0, objective=math.inf)
        return optimize_phase(fp, init=init, settings=settings)

    tel = from_theta(telescope_phase(fp))
    candidates = [tel, optimize_phase(fp, settings=settings)]
    try:
        rho = recursive_estimate(fp)
    except RuntimeError:
        rho = None
    if rho is not None:
        candidates.append(from_theta(np.unwrap(np.angle(rho))))
    best = min(candidates, key=lambda e: e.objective)
    if tel.objective <= 3.0 * best.objective:
        return tel
    return best


def op_image(fp: FourierProducts, phase: PhaseEstimate, scene: Scene,
             grid: np.ndarray | None = None,
             taper: float = 0.25) -> ImageProfile:
    """Band-limited inverse transform of modulus * exp(i theta).

    A Tukey taper over the estimation band suppresses truncation ripple;
    the real part is taken and the image normalized.
    """
    if grid is None:
        grid = display_grid(scene)
    core = fp.core_index
    u = fp.u[core]
    spec = fp.modulus[core] * np.exp(1j * phase.theta[core])
    win = tukey(len(core), alpha=taper)
    weighted = spec * win * fp.du / (2.0 * math.pi)
    phase_mat = np.exp(1j * np.outer(np.asarray(grid) - fp.center, u))
    values = np.real(phase_mat @ weighted)
    return ImageProfile.normalized(grid, values, "OP",
                                   metrics={"objective": phase.objective,
                                            "h_est": fp.h_est})
