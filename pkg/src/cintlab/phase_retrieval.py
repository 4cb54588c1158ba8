"""Baseline reconstruction from the spectrum modulus alone.

Alternating error-reduction projections: replace the Fourier modulus by
the measured one inside a band, zero it outside, then clamp the image to
be nonnegative. The result is intrinsically ambiguous to a circular
shift and a reflection, so scoring happens after exhaustive alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cint import ImageProfile, TwoPointMatrix
from .scene import Scales
from .fourier import modulus_spectrum

__all__ = [
    "FourierModulus",
    "PRSettings",
    "PRState",
    "pr_modulus_from_twopoint",
    "pr_reconstruct",
    "align_for_scoring",
]


@dataclass(frozen=True)
class FourierModulus:
    """Target modulus on the display FFT grid with its band mask."""

    values: np.ndarray      # modulus samples, zero outside the band
    band: np.ndarray        # bool mask: |kappa| < 3/h
    kappa: np.ndarray       # FFT frequencies (angular)

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("modulus must be nonnegative")


@dataclass
class PRSettings:
    n_iter: int = 2000


@dataclass
class PRState:
    """Reconstruction plus residual history.

    rho is the positivity-projected iterate with the smallest modulus
    residual; rho_band is its band-limited pre-projection companion (the
    two constraints cannot hold simultaneously for point scenes).
    """

    rho: np.ndarray
    rho_band: np.ndarray
    residuals: np.ndarray
    best_iteration: int
    seed: int


def pr_modulus_from_twopoint(M: TwoPointMatrix, scales: Scales,
                             grid: np.ndarray) -> FourierModulus:
    """Band-limited |rho_hat| target sampled on the FFT grid of `grid`."""
    n = len(grid)
    dy = float(grid[1] - grid[0])
    kappa = 2.0 * math.pi * np.fft.fftfreq(n, d=dy)
    band = np.abs(kappa) < 3.0 / scales.h
    values = np.zeros(n)
    values[band] = modulus_spectrum(M, scales, kappa[band])
    return FourierModulus(values=values, band=band, kappa=kappa)


def pr_reconstruct(modulus: FourierModulus, settings: PRSettings | None = None,
                   seed: int = 0) -> PRState:
    """Error-reduction loop with positivity, fixed iteration count.

    Per iteration: forward FFT; replace the modulus by the target inside
    the band and zero it outside; inverse FFT; keep the real part and
    clamp negatives to zero. Starts from a seeded nonnegative uniform
    field and returns the iterate with the smallest modulus residual.
    """
    settings = settings or PRSettings()
    target = modulus.values
    band = modulus.band
    norm_t = np.linalg.norm(target[band])
    if norm_t == 0.0:
        n = len(target)
        z = np.zeros(n)
        return PRState(rho=z, rho_band=z.copy(), residuals=np.zeros(settings.n_iter),
                       best_iteration=0, seed=int(seed))

    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 7)))
    rho = rng.uniform(0.0, 1.0, size=len(target))
    residuals = np.empty(settings.n_iter)
    best = (math.inf, None, None, -1)
    for it in range(settings.n_iter):
        spec = np.fft.fft(rho)
        res = np.linalg.norm(np.abs(spec[band]) - target[band]) / norm_t
        residuals[it] = res
        phase = np.where(np.abs(spec) > 0, spec / np.maximum(np.abs(spec), 1e-300), 1.0)
        spec_proj = np.where(band, target * phase, 0.0)
        w = np.fft.ifft(spec_proj).real
        if res < best[0]:
            best = (res, rho.copy(), w.copy(), it)
        rho = np.clip(w, 0.0, None)
    return PRState(rho=best[1], rho_band=best[2], residuals=residuals,
                   best_iteration=best[3], seed=int(seed))


def pr_image(state: PRState, grid: np.ndarray) -> ImageProfile:
    return ImageProfile.normalized(grid, state.rho, "PR",
                                   metrics={"residual": float(state.residuals.min()),
                                            "best_iteration": state.best_iteration})


@dataclass
class Alignment:
    shift: int
    reflected: bool
    score: float


def align_for_scoring(candidate: ImageProfile, reference: ImageProfile):
    """Best circular shift x reflection alignment against a reference.

    Scores normalized cross-correlation over all alignments and returns
    (aligned candidate, Alignment). Needed because modulus-only
    reconstructions carry a rigid shift / reflection ambiguity.
    """
    c = np.asarray(candidate.values, dtype=float)
    r = np.asarray(reference.values, dtype=float)
    if len(c) != len(r):
        raise ValueError("candidate and reference must share a grid")
    nc = np.linalg.norm(c)
    nr = np.linalg.norm(r)
    if nc == 0 or nr == 0:
        aligned = ImageProfile(grid=reference.grid, values=c, method=candidate.method,
                               metrics={"alignment_score": 0.0})
        return aligned, Alignment(shift=0, reflected=False, score=0.0)

    R = np.fft.fft(r)
    best = None
    for reflected, cc in ((False, c), (True, c[::-1])):
        corr = np.fft.ifft(np.conj(np.fft.fft(cc)) * R).real / (nc * nr)
        k = int(np.argmax(corr))
        if best is None or corr[k] > best[0]:
            best = (float(corr[k]), k, reflected, cc)
    score, shift, reflected, cc = best
    aligned_values = np.roll(cc, shift)
    aligned = ImageProfile(grid=reference.grid, values=aligned_values,
                           method=candidate.method, norm=candidate.norm,
                           metrics={**candidate.metrics,
                                    "alignment_score": score,
                                    "alignment_shift": shift,
                                    "alignment_reflected": reflected})
    return aligned, Alignment(shift=shift, reflected=reflected, score=score)
