"""Time-harmonic sensor records under the Born approximation.

Geometry: reflectors sit at (z_j, 0) in (cross-range, range) coordinates
and the sensors at (x_n, L). Records are the complex analytic samples at
the central frequency; a travel-time screen multiplies each reflector
contribution by exp(2i*omega0*tau_n) (round trip) and circular complex
Gaussian noise is added at a level calibrated to the noiseless maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import Scene, sensor_positions
from .medium import TravelTimeScreen, realization_seed

__all__ = ["Record", "greens_ref", "reference_field", "reference_matrix",
           "synthesize_record"]


@dataclass(frozen=True)
class Record:
    """Complex time-harmonic samples, one per sensor."""

    r: np.ndarray
    screen_seed: int
    noise_seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.r.view(float))):
            raise ValueError("record contains non-finite entries")


def greens_ref(z, x_sensor, k: float):
    """Far-field reference Green's function exp(i(kr + pi/4)) / sqrt(8 pi k r).

    z and x_sensor are 2-point-like (cross-range, range); either may hold
    arrays for vectorized evaluation. Raises on zero separation.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x_sensor, dtype=float)
    dy = z[..., 0] - x[..., 0]
    dr = z[..., 1] - x[..., 1]
    r = np.hypot(dy, dr)
    if np.any(r == 0):
        raise ValueError("Green's function evaluated at zero separation")
    return np.exp(1j * (k * r + math.pi / 4.0)) / np.sqrt(8.0 * math.pi * k * r)


def _greens_sq(y, x_n: np.ndarray, L: float, k: float) -> np.ndarray:
    """Squared Green's function from (y, 0) to each sensor (x_n, L)."""
    r = np.hypot(np.subtract.outer(np.atleast_1d(y), x_n), L)
    return np.exp(2j * (k * r + math.pi / 4.0)) / (8.0 * math.pi * k * r)


def reference_field(y: float, scene: Scene) -> np.ndarray:
    """Apodized matched field F_n(y) for one image point: length-N complex.

    F_n(y) = G_o^2((y,0),(x_n,L)) * exp(-x_n^2 / a^2); the signal spectrum
    and k^2 factors are absorbed into the global normalization.
    """
    x = sensor_positions(scene)
    apod = np.exp(-x ** 2 / scene.a ** 2)
    return _greens_sq(y, x, scene.L, scene.k0)[0] * apod


def reference_matrix(scene: Scene, grid: np.ndarray) -> np.ndarray:
    """Matched fields for a grid of image points, shape (N, G)."""
    x = sensor_positions(scene)
    apod = np.exp(-x ** 2 / scene.a ** 2)
    return (_greens_sq(grid, x, scene.L, scene.k0) * apod).T


def synthesize_record(scene: Scene, screen: TravelTimeScreen,
                      noise_seed: int) -> Record:
    """Born-model record r_n = sum_j rho_j G_o^2(z_j, x_n) e^{2i tau_n} + W_n.

    The additive noise W_n is i.i.d. circular complex Gaussian with
    std sigma_W * max_n |signal_n| computed on the noiseless signal;
    deterministic given (screen, noise_seed).
    """
    if len(screen.tau) != scene.N:
        raise ValueError("screen length does not match sensor count")
    x = sensor_positions(scene)
    signal = np.zeros(scene.N, dtype=complex)
    for z_j, rho_j in scene.reflectors:
        signal += rho_j * _greens_sq(z_j, x, scene.L, scene.k0)[0]
    signal = signal * np.exp(2j * screen.tau)

    sigma_abs = scene.sigma_W * (np.abs(signal).max() if len(scene.reflectors) else 0.0)
    noise = np.zeros(scene.N, dtype=complex)
    if sigma_abs > 0:
        rng = np.random.default_rng(realization_seed(noise_seed, 0, stream=3))
        noise = sigma_abs / math.sqrt(2.0) * (
            rng.standard_normal(scene.N) + 1j * rng.standard_normal(scene.N))
    meta = {
        "sigma_W_abs": float(sigma_abs),
        "scene": scene.to_dict(),
    }
    return Record(r=signal + noise, screen_seed=screen.seed,
                  noise_seed=int(noise_seed), meta=meta)
