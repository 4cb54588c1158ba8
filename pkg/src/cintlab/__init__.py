"""cintlab: synthetic-aperture imaging through random media.

Simulates time-harmonic SAR records distorted by a Gaussian travel-time
screen, computes the thresholded two-point correlation matrix of the
backprojected data, and reconstructs the reflectivity with five methods:
conventional matched-field imaging (SAR), the square-root correlation
diagonal (CI), the leading-eigenvector image (SP), Fourier-product phase
optimization (OP), and a phase-retrieval baseline (PR).
"""

from .scene import Scene, Scales, derive_scales, separation_zeta, load_scene
from .medium import TravelTimeScreen, tau_covariance, sample_screen, coherence_check
from .synth import Record, greens_ref, reference_field, synthesize_record
from .cint import (ImageProfile, TwoPointMatrix, sar_image, two_point_cint,
                   cint_image, stability_sweep)
from .kernels import GaussKernelParams, HermiteTable, hermite_table, kernel_K, \
    closed_eigenpair, composite_spectrum
from .spectral import EigenResult, power_leading, sp_image
from .fourier import (FourierProducts, PhaseEstimate, fourier_products,
                      recursive_estimate, optimize_phase, op_image)
from .phase_retrieval import pr_reconstruct, align_for_scoring
from .metrics import find_peaks, sign_at, cov_statistic
from .experiment import run_scenario, builtin_scenario, validate, sweep

__version__ = "0.1.0"
