"""Spectral image: leading eigenvector of the two-point matrix.

The matrix is Hermitian PSD, so power iteration on the factored form
(apply A then A^H per step) converges to the top eigenpair whenever the
top of the spectrum is non-degenerate; near-degenerate spectra are
reported as non-convergence instead of returning an arbitrary mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import Scene, display_grid
from .cint import TwoPointMatrix, ImageProfile, sinc_interpolate

__all__ = ["EigenResult", "power_leading", "sp_image", "fix_global_phase"]


@dataclass
class EigenResult:
    """Converged (or not) leading eigenpair of a Hermitian PSD matrix."""

    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool
    tol: float


def power_leading(M: TwoPointMatrix, tol: float = 1e-8, max_iter: int = 5000,
                  seed: int = 0) -> EigenResult:
    """Power iteration for the dominant eigenpair.

    Residual is ||Mv - lambda v|| / ||Mv||; the start vector is drawn
    from the given seed, so the result is deterministic.
    """
    n = M.n_points
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 5)))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        w = M.apply(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return EigenResult(value=0.0, vector=v, iterations=it,
                               residual=0.0, converged=True, tol=tol)
        lam = float(np.real(np.vdot(v, w)))
        residual = float(np.linalg.norm(w - lam * v) / nw)
        v = w / nw
        if residual <= tol:
            return EigenResult(value=lam, vector=v, iterations=it,
                               residual=residual, converged=True, tol=tol)
    return EigenResult(value=lam, vector=v, iterations=max_iter,
                       residual=residual, converged=False, tol=tol)


def fix_global_phase(v: np.ndarray) -> np.ndarray:
    """Rotate an eigenvector to maximize its real energy, then fix the sign.

    The maximizer of ||Re(e^{-i phi} v)|| is phi = arg(sum v_j^2) / 2 in
    closed form; the remaining two-fold sign ambiguity is resolved by
    making the entry of largest magnitude positive.
    """
    s = np.sum(v ** 2)
    phi = 0.5 * np.angle(s) if s != 0 else 0.0
    w = np.real(v * np.exp(-1j * phi))
    k = int(np.argmax(np.abs(w)))
    if w[k] < 0:
        w = -w
    return w


def sp_image(eig: EigenResult, scene: Scene,
             matrix_grid_points: np.ndarray,
             grid: np.ndarray | None = None) -> ImageProfile:
    """Real spectral image from a converged leading eigenvector.

    Interpolates from the matrix grid to the display grid (band-limited)
    and normalizes to unit peak magnitude.
    """
    if not eig.converged:
        raise RuntimeError(
            f"power iteration did not converge (residual {eig.residual:.3e}); "
            "near-degenerate top eigenvalues")
    w = fix_global_phase(eig.vector)
    if grid is None:
        grid = display_grid(scene)
    values = sinc_interpolate(matrix_grid_points, w, grid)
    return ImageProfile.normalized(grid, values, "SP",
                                   metrics={"eigenvalue": eig.value,
                                            "iterations": eig.iterations,
                                            "residual": eig.residual})
