"""Imaging scene definition and derived resolution / decoherence scales.

All lengths are stored in units of the reference wavelength (lambda0 = 1
internally), which is how every quantity in this package is reported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "Scene",
    "Scales",
    "derive_scales",
    "separation_zeta",
    "sensor_positions",
    "display_grid",
    "matrix_grid",
    "load_scene",
    "scene_from_dict",
]

# Fields accepted in a scene configuration file, in spec order.
_SCENE_FIELDS = (
    "lambda0",
    "L",
    "a",
    "N",
    "ell",
    "sigma_tau",
    "sigma_W",
    "reflectors",
    "domain",
    "grid_dy",
    "seed",
)


@dataclass(frozen=True)
class Scene:
    """Scene geometry, reflectivity and medium/noise statistics.

    Attributes
    ----------
    lambda0 : float
        Reference wavelength; the internal length unit (default 1).
    L : float
        Range distance from the scene to the sensor track [lambda0].
    a : float
        Aperture length [lambda0].
    N : int
        Number of sensor positions along the aperture.
    ell : float
        Correlation length of the medium fluctuations [lambda0].
    sigma_tau : float
        Standard deviation of the travel-time phase (dimensionless,
        i.e. of omega0 * tau).
    sigma_W : float
        Additive-noise level as a fraction of the maximum noiseless
        signal amplitude.
    reflectors : tuple of (z, rho)
        Point reflectors: cross-range position [lambda0] and real
        amplitude.
    domain : (float, float)
        Cross-range imaging interval [lambda0].
    grid_dy : float
        Display-grid spacing [lambda0].
    seed : int
        Master RNG seed.
    """

    L: float
    a: float
    N: int
    ell: float
    sigma_tau: float
    sigma_W: float
    reflectors: tuple[tuple[float, float], ...]
    domain: tuple[float, float]
    grid_dy: float
    lambda0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        vals = [self.lambda0, self.L, self.a, self.ell, self.sigma_tau,
                self.sigma_W, self.grid_dy, *self.domain]
        vals += [v for zr in self.reflectors for v in zr]
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError("scene parameters must be finite")
        if self.a <= 0 or self.L <= 0 or self.lambda0 <= 0:
            raise ValueError("lambda0, L and a must be positive")
        if self.N < 2:
            raise ValueError("need at least 2 sensors")
        if self.grid_dy <= 0:
            raise ValueError("grid_dy must be positive")
        if not self.domain[1] > self.domain[0]:
            raise ValueError("domain must be a nonempty interval")
        if self.sigma_tau < 0 or self.sigma_W < 0:
            raise ValueError("sigma_tau and sigma_W must be nonnegative")
        if self.ell <= 0:
            raise ValueError("ell must be positive")
        object.__setattr__(self, "reflectors",
                           tuple((float(z), float(r)) for z, r in self.reflectors))
        object.__setattr__(self, "domain",
                           (float(self.domain[0]), float(self.domain[1])))

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.lambda0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reflectors"] = [list(zr) for zr in self.reflectors]
        d["domain"] = list(self.domain)
        return d


@dataclass(frozen=True)
class Scales:
    """Resolution and decoherence scales derived from a scene.

    Cross-range quantities are always present; range-direction ones
    (Hpar, hpar, Omega_d, Omega, B, c) are only filled in when broadband
    parameters are supplied and are informational in the 1-D pipeline.
    """

    k0: float
    Xd: float          # decoherence length [lambda0]
    X: float           # sensor-offset threshold actually used [lambda0]
    H: float           # center-point cross-range resolution [lambda0]
    h: float           # offset cross-range resolution [lambda0]
    zeta: float        # min reflector gap / (3 H)
    min_gap_over_H: float  # min reflector gap / H (the raw gap measure)
    Hpar: float | None = None
    hpar: float | None = None
    Omega_d: float | None = None
    Omega: float | None = None
    B: float | None = None
    c: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


# The sensor track extends past the nominal aperture so that the Gaussian
# taper exp(-x^2/a^2), which defines the effective aperture of length a,
# is sampled to where it is negligible (e^-4 at the track ends). A track
# cut at +-a/2 truncates the taper at e^-1/4 and turns the point spread
# into a sinc with 18% sidelobes, contradicting the Gaussian blur model.
TRACK_SPAN_FACTOR = 4.0


def sensor_positions(scene: Scene) -> np.ndarray:
    """Uniform sensor cross-range positions over the centered track."""
    half = TRACK_SPAN_FACTOR * scene.a / 2.0
    return np.linspace(-half, half, scene.N)


def display_grid(scene: Scene) -> np.ndarray:
    """Fine image grid over the domain with spacing grid_dy."""
    y0, y1 = scene.domain
    n = int(math.floor((y1 - y0) / scene.grid_dy + 1e-9)) + 1
    return y0 + scene.grid_dy * np.arange(n)


def matrix_grid(scene: Scene, scales: "Scales", spacing: float | None = None) -> np.ndarray:
    """Coarser grid for the two-point matrix (default spacing h/3)."""
    if spacing is None:
        spacing = scales.h / 3.0
    y0, y1 = scene.domain
    n = int(math.floor((y1 - y0) / spacing + 1e-9)) + 1
    return y0 + spacing * np.arange(n)


def cross_range_resolution(L: float, k0: float, X: float, Xd: float, a: float) -> float:
    """Blurred center-point resolution from threshold, decoherence and aperture."""
    s = 1.0 / a ** 2
    if math.isfinite(X):
        s += 1.0 / X ** 2
    if math.isfinite(Xd):
        s += 1.0 / Xd ** 2
    return L / (2.0 * k0) * math.sqrt(s)


def separation_zeta(scene: Scene, scales: "Scales") -> float:
    """Reflector separation measure: min pairwise gap over 3H.

    Returns +inf for fewer than two reflectors (separation tests then
    pass vacuously).
    """
    if len(scene.reflectors) == 0:
        raise ValueError("scene has no reflectors")
    z = np.array([zr[0] for zr in scene.reflectors])
    if len(z) < 2:
        return math.inf
    gaps = [abs(z[i] - z[j]) for i in range(len(z)) for j in range(i + 1, len(z))]
    return min(gaps) / (3.0 * scales.H)


def derive_scales(
    scene: Scene,
    x_override: float | None = None,
    bandwidth: float | None = None,
    wave_speed: float | None = None,
    omega_threshold: float | None = None,
) -> Scales:
    """Derive all resolution/decoherence scales from the scene.

    Parameters
    ----------
    x_override : float, optional
        Use this sensor-offset threshold instead of min(a, Xd/3).
        May be inf to disable thresholding.
    bandwidth, wave_speed, omega_threshold : float, optional
        Broadband parameters (B, c, Omega). When bandwidth and
        wave_speed are both given, the range-direction scales are
        computed as well; otherwise they are reported as None.
    """
    k0 = scene.k0
    if scene.sigma_tau > 0:
        Xd = math.sqrt(3.0) * scene.ell / (2.0 * scene.sigma_tau)
    else:
        Xd = math.inf
    X = min(scene.a, Xd / 3.0) if x_override is None else float(x_override)
    if not X > 0:
        raise ValueError("offset threshold X must be positive")
    H = cross_range_resolution(scene.L, k0, X, Xd, scene.a)
    h = scene.L / (k0 * scene.a)

    Hpar = hpar = Omega_d = Omega = None
    if bandwidth is not None and wave_speed is not None:
        omega0 = k0 * wave_speed
        Omega_d = omega0 / (2.0 * scene.sigma_tau) if scene.sigma_tau > 0 else math.inf
        Omega = min(bandwidth, Omega_d / 3.0) if omega_threshold is None else float(omega_threshold)
        s = 1.0 / bandwidth ** 2
        if math.isfinite(Omega):
            s += 1.0 / Omega ** 2
        if math.isfinite(Omega_d):
            s += 1.0 / Omega_d ** 2
        Hpar = wave_speed / 2.0 * math.sqrt(s)
        hpar = wave_speed / bandwidth

    z = [zr[0] for zr in scene.reflectors]
    if len(z) < 2:
        zeta = math.inf
        min_gap_over_H = math.inf
    else:
        gap = min(abs(z[i] - z[j]) for i in range(len(z)) for j in range(i + 1, len(z)))
        zeta = gap / (3.0 * H)
        min_gap_over_H = gap / H

    return Scales(k0=k0, Xd=Xd, X=X, H=H, h=h, zeta=zeta,
                  min_gap_over_H=min_gap_over_H,
                  Hpar=Hpar, hpar=hpar, Omega_d=Omega_d, Omega=Omega,
                  B=bandwidth, c=wave_speed)


def scene_from_dict(cfg: dict) -> Scene:
    """Build a Scene from a configuration mapping, rejecting unknown fields."""
    for key in cfg:
        if key not in _SCENE_FIELDS:
            raise ValueError(f"unknown scene field: {key!r}")
    required = ("L", "a", "N", "ell", "sigma_tau", "sigma_W",
                "reflectors", "domain", "grid_dy")
    for key in required:
        if key not in cfg:
            raise ValueError(f"missing scene field: {key!r}")
    return Scene(
        L=float(cfg["L"]),
        a=float(cfg["a"]),
        N=int(cfg["N"]),
        ell=float(cfg["ell"]),
        sigma_tau=float(cfg["sigma_tau"]),
        sigma_W=float(cfg["sigma_W"]),
        reflectors=tuple((float(z), float(r)) for z, r in cfg["reflectors"]),
        domain=(float(cfg["domain"][0]), float(cfg["domain"][1])),
        grid_dy=float(cfg["grid_dy"]),
        lambda0=float(cfg.get("lambda0", 1.0)),
        seed=int(cfg.get("seed", 0)),
    )


def load_scene(path) -> Scene:
    """Read a scene from a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    return scene_from_dict(cfg)
