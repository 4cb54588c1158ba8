"""Gaussian travel-time screen over the sensor track.

The random medium enters the time-harmonic data only through one
travel-time perturbation per sensor; the screen samples the Gaussian
process omega0*tau_n directly from its covariance along the aperture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .scene import Scene, sensor_positions

__all__ = [
    "TravelTimeScreen",
    "tau_covariance",
    "screen_covariance_matrix",
    "sample_screen",
    "coherence_check",
    "CoherenceReport",
    "realization_seed",
]


@dataclass(frozen=True)
class TravelTimeScreen:
    """One realization of omega0*tau per sensor (dimensionless phases)."""

    tau: np.ndarray
    seed: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.tau)):
            raise ValueError("screen contains non-finite entries")


def realization_seed(master_seed: int, index: int, stream: int = 0) -> np.random.SeedSequence:
    """Deterministic per-realization seed derivation."""
    return np.random.SeedSequence((int(master_seed), int(index), int(stream)))


def tau_covariance(dx: float, scene: Scene) -> float:
    """Covariance of the sensor phases omega0*tau at cross-range offset dx.

    Cov = sigma_tau^2 * int_0^1 exp(-(dx*s)^2 / (2 ell^2)) ds, evaluated
    by adaptive quadrature to 1e-10 relative tolerance.
    """
    st2 = scene.sigma_tau ** 2
    if st2 == 0.0 or dx == 0.0:
        return st2
    q = abs(dx) / scene.ell

    def integrand(s):
        return math.exp(-0.5 * (q * s) ** 2)

    # For dx >> ell the integrand collapses to a boundary layer at s=0;
    # breakpoints at its scale keep the adaptive rule from missing it.
    pts = sorted({min(1.0, k / q) for k in (1.0, 2.0, 4.0, 8.0)} - {1.0})
    val, _ = quad(integrand, 0.0, 1.0, points=pts or None,
                  epsabs=1e-14, epsrel=1e-10, limit=200)
    return st2 * val


def screen_covariance_matrix(scene: Scene) -> np.ndarray:
    """Dense covariance matrix of omega0*tau over the sensor positions."""
    x = sensor_positions(scene)
    n = len(x)
    # Uniform sensor spacing: only n distinct offsets occur.
    cache: dict[float, float] = {}
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            dx = round(abs(x[i] - x[j]), 12)
            if dx not in cache:
                cache[dx] = tau_covariance(dx, scene)
            cov[i, j] = cov[j, i] = cache[dx]
    return cov


@lru_cache(maxsize=8)
def _screen_factor(scene: Scene) -> np.ndarray:
    """Cholesky factor of the screen covariance, with one jitter retry."""
    cov = screen_covariance_matrix(scene)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * scene.sigma_tau ** 2
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(scene.N))
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("screen covariance factorization failed") from exc


def sample_screen(scene: Scene, seed: int) -> TravelTimeScreen:
    """Draw one screen realization; deterministic given the seed.

    Requires N <= 1e4 (dense covariance factorization).
    """
    if scene.N > 10_000:
        raise ValueError("dense covariance factorization limited to N <= 1e4")
    if scene.sigma_tau == 0.0:
        return TravelTimeScreen(tau=np.zeros(scene.N), seed=int(seed))
    rng = np.random.default_rng(realization_seed(seed, 0, stream=1))
    xi = rng.standard_normal(scene.N)
    return TravelTimeScreen(tau=_screen_factor(scene) @ xi, seed=int(seed))


def sample_screen_batch(scene: Scene, n_realizations: int, seed: int) -> np.ndarray:
    """Matrix of screen realizations, one per row; deterministic given seed.

    Row i equals sample_screen(scene, ...) drawn from the per-realization
    seed (seed, i); reductions over rows are reproducible in index order.
    """
    out = np.empty((n_realizations, scene.N))
    if scene.sigma_tau == 0.0:
        out[:] = 0.0
        return out
    chol = _screen_factor(scene)
    for i in range(n_realizations):
        rng = np.random.default_rng(realization_seed(seed, i, stream=1))
        out[i] = chol @ rng.standard_normal(scene.N)
    return out


@dataclass(frozen=True)
class CoherenceReport:
    """Monte Carlo second-moment check against the Gaussian predictions."""

    offsets: np.ndarray          # actual sensor offsets used
    empirical: np.ndarray        # Re E[exp(2i(tau_n - tau_n'))]
    predicted: np.ndarray        # exp(-dx^2 / (2 Xd^2))
    mc_stderr: np.ndarray        # standard error of the empirical column
    mean_phase_mod: float        # |E[exp(i tau)]|
    mean_phase_predicted: float  # exp(-sigma_tau^2 / 2)
    sample_variance: float       # pooled variance of the phases
    n_realizations: int

    def rows(self):
        return list(zip(self.offsets, self.empirical, self.predicted))


def coherence_check(scene: Scene, n_realizations: int, seed: int,
                    offsets=None) -> CoherenceReport:
    """Estimate coherence moments over screen realizations.

    Offsets are snapped to the sensor lattice; predictions are evaluated
    at the snapped values. Requires n_realizations >= 1e3.
    """
    if n_realizations < 1_000:
        raise ValueError("need at least 1e3 realizations")
    x = sensor_positions(scene)
    dx_sensor = x[1] - x[0]
    if scene.sigma_tau > 0:
        Xd = math.sqrt(3.0) * scene.ell / (2.0 * scene.sigma_tau)
    else:
        Xd = math.inf
    if offsets is None:
        offsets = [0.0, Xd / 2.0, Xd, 2.0 * Xd] if math.isfinite(Xd) else [0.0, dx_sensor]
    lags = sorted({int(round(o / dx_sensor)) for o in offsets})
    lags = [l for l in lags if l < scene.N]

    taus = sample_screen_batch(scene, n_realizations, seed)
    phases = np.exp(1j * taus)
    mean_phase_mod = abs(phases.mean())
    sample_variance = float(np.mean(taus ** 2))

    emp, stderr = [], []
    for l in lags:
        if l == 0:
            emp.append(1.0)
            stderr.append(0.0)
            continue
        # Per-realization average over all sensor pairs at this lag.
        v = np.exp(2j * (taus[:, :-l] - taus[:, l:])).mean(axis=1).real
        emp.append(float(v.mean()))
        stderr.append(float(v.std(ddof=1) / math.sqrt(n_realizations)))
    dx_used = np.array([l * dx_sensor for l in lags])
    pred = np.exp(-dx_used ** 2 / (2.0 * Xd ** 2)) if math.isfinite(Xd) \
        else np.ones_like(dx_used)
    return CoherenceReport(
        offsets=dx_used,
        empirical=np.array(emp),
        predicted=pred,
        mc_stderr=np.array(stderr),
        mean_phase_mod=float(mean_phase_mod),
        mean_phase_predicted=math.exp(-scene.sigma_tau ** 2 / 2.0),
        sample_variance=sample_variance,
        n_realizations=n_realizations,
    )
