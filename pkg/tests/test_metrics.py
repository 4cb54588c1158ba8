import math

import numpy as np
import pytest

from cintlab.cint import ImageProfile
from cintlab.metrics import find_peaks, find_peaks_2d, sign_at, cov_statistic


def gaussian_image(grid, centers, amps, std):
    v = np.zeros(len(grid))
    for c, a in zip(centers, amps):
        v += a * np.exp(-(grid - c) ** 2 / (2 * std ** 2))
    return ImageProfile.normalized(grid, v, "SAR")


def test_single_gaussian_fit():
    grid = np.arange(0.0, 100.0, 0.05)
    img = gaussian_image(grid, [47.3], [2.0], 1.7)
    rep = find_peaks(img, rel_threshold=0.1)
    assert len(rep.peaks) == 1
    p = rep.peaks[0]
    assert abs(p.location - 47.3) < 0.05
    assert abs(p.std - 1.7) / 1.7 < 0.02


def test_three_bumps_sorted_by_value():
    grid = np.arange(0.0, 245.0, 0.03)
    img = gaussian_image(grid, [123.0, 133.0, 143.0], [1.3, 2.2, 0.8], 0.7)
    rep = find_peaks(img, rel_threshold=0.1)
    assert len(rep.peaks) == 3
    assert [round(p.location) for p in rep.peaks] == [133, 123, 143]
    for p, z in zip(rep.peaks, (133.0, 123.0, 143.0)):
        assert abs(p.location - z) < 0.5


def test_flat_zero_image_empty():
    grid = np.arange(0.0, 10.0, 0.1)
    img = ImageProfile(grid=grid, values=np.zeros(len(grid)), method="CI")
    assert find_peaks(img).peaks == []


def test_scaling_invariance():
    grid = np.arange(0.0, 50.0, 0.05)
    v = np.exp(-(grid - 20.0) ** 2 / 3.0) + 0.4 * np.exp(-(grid - 35.0) ** 2 / 5.0)
    r1 = find_peaks(ImageProfile(grid=grid, values=v, method="SAR"), 0.1)
    r2 = find_peaks(ImageProfile(grid=grid, values=7.7 * v, method="SAR"), 0.1)
    assert np.allclose(r1.locations(), r2.locations())


def test_grid_refinement_stability():
    coarse = np.arange(0.0, 60.0, 0.12)
    fine = np.arange(0.0, 60.0, 0.06)
    f = lambda g: 1.0 * np.exp(-(g - 31.07) ** 2 / (2 * 1.3 ** 2))
    pc = find_peaks(ImageProfile.normalized(coarse, f(coarse), "SAR"), 0.1)
    pf = find_peaks(ImageProfile.normalized(fine, f(fine), "SAR"), 0.1)
    assert abs(pc.peaks[0].location - pf.peaks[0].location) < 0.12 / 4


def test_peak_refinement_subgrid():
    grid = np.arange(0.0, 20.0, 0.25)
    img = gaussian_image(grid, [10.13], [1.0], 1.0)
    rep = find_peaks(img, 0.5)
    assert abs(rep.peaks[0].location - 10.13) < 0.05


def test_sign_at_basic():
    grid = np.arange(0.0, 200.0, 0.5)
    v = (2.0 * np.exp(-(grid - 93.7) ** 2 / 20.0)
         - 1.0 * np.exp(-(grid - 123.0) ** 2 / 20.0)
         + 1.5 * np.exp(-(grid - 152.0) ** 2 / 20.0))
    img = ImageProfile.normalized(grid, v, "SP")
    assert sign_at(img, [93.7, 123.0, 152.0]) == [1, -1, 1]


def test_sign_at_zero_image():
    grid = np.arange(0.0, 10.0, 0.5)
    img = ImageProfile(grid=grid, values=np.zeros(len(grid)), method="SP")
    assert sign_at(img, [1.0, 5.0]) == [0, 0]


def test_sign_at_rejects_complex():
    grid = np.arange(0.0, 10.0, 0.5)
    img = ImageProfile(grid=grid, values=np.zeros(len(grid), dtype=complex),
                       method="SAR")
    with pytest.raises(ValueError):
        sign_at(img, [1.0])


def test_cov_identical_samples():
    assert cov_statistic(np.ones(10) * (2 + 1j)) == 0.0


def test_cov_zero_mean_flag():
    assert cov_statistic(np.array([1.0, -1.0])) == math.inf


def test_cov_monte_carlo():
    rng = np.random.default_rng(7)
    m = 3.0 - 2.0j
    s = 0.7
    z = m + s / math.sqrt(2) * (rng.standard_normal(10_000)
                                + 1j * rng.standard_normal(10_000))
    got = cov_statistic(z)
    assert abs(got - s / abs(m)) / (s / abs(m)) < 0.05


def test_cov_requires_two_samples():
    with pytest.raises(ValueError):
        cov_statistic(np.array([1.0]))


def test_find_peaks_2d_grid_of_bumps():
    x = np.arange(0, 60, 0.5)
    X, Y = np.meshgrid(x, x, indexing="ij")
    v = np.zeros_like(X)
    for cx in (15, 30, 45):
        for cy in (15, 30, 45):
            v += np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / 4.0)
    assert len(find_peaks_2d(v, 0.1)) == 9
    assert find_peaks_2d(np.zeros((5, 5))) == []
