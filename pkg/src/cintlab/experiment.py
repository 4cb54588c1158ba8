"""End-to-end scenario runs, validation suites, and parameter sweeps.

A scenario locks a scene (the built-in ones reproduce the published
desk-scale setups), synthesizes one medium + noise realization, computes
the requested images, and writes CSVs, the two-point binary, and a JSON
manifest with the derived scales, exact seeds, and per-method peak
reports.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import io as cio
from .scene import (Scene, Scales, scene_from_dict, derive_scales,
                    display_grid, matrix_grid, sensor_positions)
from .medium import sample_screen, coherence_check, tau_covariance, realization_seed
from .synth import synthesize_record
from .cint import (two_point_cint, sar_image, cint_image, stability_sweep,
                   dense_two_point, ImageProfile, TwoPointMatrix)
from .spectral import power_leading, sp_image
from .fourier import (fourier_products, optimize_phase, op_image,
                      recursive_estimate, rho_hat_model, best_phase_estimate)
from .phase_retrieval import (pr_modulus_from_twopoint, pr_reconstruct,
                              pr_image, align_for_scoring)
from .metrics import find_peaks, find_peaks_2d, sign_at, cov_statistic
from . import kernels

__all__ = ["ScenarioSpec", "StageError", "builtin_scenario", "scenario_names",
           "run_scenario", "validate", "sweep", "ALL_METHODS"]

ALL_METHODS = ("sar", "ci", "sp", "op", "pr")

_BASE = dict(
    lambda0=1.0,
    L=2.0e4,
    a=2.0e4 / (2.0 * math.pi),
    N=400,
    ell=2.0e4 / (4.0 * math.pi),
    sigma_W=0.0,
    sigma_tau=0.0,
    domain=(0.0, 245.0),
    grid_dy=0.03,
    seed=0,
)

_REFL_THREE = ((133.0, 2.2), (123.0, 1.3), (143.0, 0.8))
_REFL_FIVE = ((93.7, 2.0), (101.0, 2.0), (130.0, 3.0), (159.0, 1.5), (196.0, 2.0))
_REFL_SIGNED = ((93.7, 2.0), (123.0, -1.0), (152.0, 1.5))

_SCENARIOS = {
    "fig1": dict(reflectors=_REFL_THREE, sigma_tau=0.0, sigma_W=0.0),
    "fig2": dict(reflectors=_REFL_THREE, sigma_tau=3.1, sigma_W=0.1),
    "fig3": dict(reflectors=_REFL_FIVE, sigma_tau=3.1, sigma_W=0.1),
    "fig4": dict(reflectors=_REFL_SIGNED, sigma_tau=4.0, sigma_W=0.1),
}

# Band half-width used by the optimization image: the ideal offset
# resolution in the clean scenario, a stabilized 2 lambda0 otherwise.
_H_EST = {"fig1": 1.0, "fig2": 2.0, "fig3": 2.0, "fig4": 2.0}


class StageError(RuntimeError):
    """An error in a named stage of a scenario run."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ScenarioSpec:
    name: str
    scene: Scene
    methods: tuple = ALL_METHODS
    seed: int | None = None
    h_est: float | None = None
    out_dir: str = "out"


def scenario_names() -> tuple:
    return tuple(_SCENARIOS)


def builtin_scenario(name: str, out_dir: str = "out", seed: int | None = None,
                     methods: tuple = ALL_METHODS,
                     overrides: dict | None = None) -> ScenarioSpec:
    if name not in _SCENARIOS:
        raise ValueError(f"unknown scenario name: {name!r} "
                         f"(expected one of {', '.join(_SCENARIOS)})")
    cfg = dict(_BASE)
    cfg.update(_SCENARIOS[name])
    if overrides:
        cfg.update(overrides)
    scene = scene_from_dict(cfg)
    return ScenarioSpec(name=name, scene=scene, methods=tuple(methods),
                        seed=seed, h_est=_H_EST.get(name), out_dir=out_dir)


def _stage(name):
    class _Ctx:
        def __enter__(self):
            return None

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False

    return _Ctx()


def default_h_est(scales: Scales) -> float:
    """2 lambda0 in distorted/noisy regimes, h when thresholding is idle."""
    return scales.h if not math.isfinite(scales.Xd) else 2.0 * scales.h


def run_scenario(spec: ScenarioSpec) -> dict:
    """Synthesize one realization and image it with the requested methods.

    Writes <out>/<name>/{manifest.json, image_<m>.csv, twopoint.bin,
    products.csv, screen.csv, record.json, record.bin} and returns the
    manifest dict.
    """
    scene = spec.scene
    seed = scene.seed if spec.seed is None else int(spec.seed)
    out = os.path.join(spec.out_dir, spec.name)
    os.makedirs(out, exist_ok=True)

    with _stage("derive-scales"):
        scales = derive_scales(scene)
        grid_d = display_grid(scene)
        grid_m = matrix_grid(scene, scales)
        h_est = spec.h_est if spec.h_est is not None else default_h_est(scales)

    with _stage("medium"):
        screen = sample_screen(scene, seed)
        cio.write_screen_csv(os.path.join(out, "screen.csv"),
                             sensor_positions(scene), screen.tau)

    with _stage("synthesize"):
        record = synthesize_record(scene, screen, noise_seed=seed)
        cio.write_record(out, record)

    with _stage("two-point"):
        M = two_point_cint(record, scene, scales, grid=grid_m)
        cio.write_twopoint_bin(os.path.join(out, "twopoint.bin"), M)
        surface_peaks = find_peaks_2d(M.to_dense(), rel_threshold=0.1)

    manifest: dict = {
        "scenario": spec.name,
        "scene": scene.to_dict(),
        "scales": scales.to_dict(),
        "seeds": {"screen": seed, "noise": seed, "power": seed, "pr": seed},
        "grids": {"display_dy": scene.grid_dy,
                  "matrix_dy": float(grid_m[1] - grid_m[0]),
                  "display_points": len(grid_d),
                  "matrix_points": len(grid_m)},
        "h_est": h_est,
        "X_used": M.x_used,
        "two_point_surface_peaks": len(surface_peaks),
        "methods": {},
        "files": {"twopoint": "twopoint.bin", "screen": "screen.csv",
                  "record": "record.json"},
    }

    images: dict[str, ImageProfile] = {}
    truth = [z for z, _ in scene.reflectors]

    if "sar" in spec.methods:
        with _stage("image-sar"):
            img = sar_image(record, scene, grid=grid_d)
            images["sar"] = img
    if "ci" in spec.methods:
        with _stage("image-ci"):
            M_disp = two_point_cint(record, scene, scales, grid=grid_d)
            img = cint_image(M_disp)
            images["ci"] = img
    if "sp" in spec.methods:
        with _stage("image-sp"):
            eig = power_leading(M, seed=seed)
            img = sp_image(eig, scene, grid_m, grid=grid_d)
            images["sp"] = img
    if "op" in spec.methods:
        with _stage("image-op"):
            fp = fourier_products(M, scales, h_est)
            phase = best_phase_estimate(fp)
            img = op_image(fp, phase, scene, grid=grid_d)
            images["op"] = img
            cio.write_products_csv(os.path.join(out, "products.csv"),
                                   fp.kappa, fp.kappa_tilde, fp.P)
            manifest["files"]["products"] = "products.csv"
    if "pr" in spec.methods:
        with _stage("image-pr"):
            modulus = pr_modulus_from_twopoint(M, scales, grid_d)
            state = pr_reconstruct(modulus, seed=seed)
            img = pr_image(state, grid_d)
            ref = _truth_reference(scene, grid_d, scales)
            aligned, alignment = align_for_scoring(img, ref)
            images["pr"] = aligned
            manifest["methods"]["pr_alignment"] = {
                "shift": alignment.shift, "reflected": alignment.reflected,
                "score": alignment.score,
                "residual": float(state.residuals.min())}

    with _stage("metrics"):
        for name, img in images.items():
            cio.write_image_csv(os.path.join(out, f"image_{name}.csv"),
                                img.grid, img.values)
            manifest["files"][f"image_{name}"] = f"image_{name}.csv"
            report = find_peaks(img, rel_threshold=0.1)
            entry = {"peaks": report.to_dict()["peaks"][:8]}
            if not np.iscomplexobj(img.values):
                entry["signs_at_truth"] = sign_at(img, truth)
            entry["peak_errors"] = _peak_errors(report, truth)
            manifest["methods"][name] = entry

    with _stage("manifest"):
        cio.write_json(os.path.join(out, "manifest.json"), manifest)
    return manifest


def _truth_reference(scene: Scene, grid: np.ndarray, scales: Scales) -> ImageProfile:
    """Bump map at the true reflector locations, for alignment scoring."""
    width = scales.h / math.sqrt(2.0)
    vals = np.zeros(len(grid))
    for z, rho in scene.reflectors:
        vals += abs(rho) * np.exp(-(grid - z) ** 2 / (2.0 * width ** 2))
    return ImageProfile.normalized(grid, vals, "REF")


def _peak_errors(report, truth) -> dict:
    """Distance from each true location to the nearest reported peak."""
    locs = report.locations()
    if len(locs) == 0:
        return {"max": None, "per_reflector": [None] * len(truth)}
    errs = [float(np.min(np.abs(locs - z))) for z in truth]
    return {"max": max(errs), "per_reflector": errs}


# ---------------------------------------------------------------------------
# Validation suites
# ---------------------------------------------------------------------------

def _check(name, value, threshold, ok) -> dict:
    return {"name": name, "value": value, "threshold": threshold,
            "passed": bool(ok)}


def _suite_moments(seed: int) -> list[dict]:
    cfg = dict(_BASE)
    cfg.update(_SCENARIOS["fig2"])
    scene = scene_from_dict(cfg)
    st2 = scene.sigma_tau ** 2
    rep = coherence_check(scene, 10_000, seed)
    checks = [
        _check("screen-variance", rep.sample_variance,
               [0.95 * st2, 1.05 * st2],
               abs(rep.sample_variance - st2) <= 0.05 * st2),
        _check("mean-phase-suppression", rep.mean_phase_mod, 0.05,
               rep.mean_phase_mod < 0.05),
    ]
    Xd = math.sqrt(3.0) * scene.ell / (2.0 * scene.sigma_tau)
    idx = int(np.argmin(np.abs(rep.offsets - Xd)))
    coh_err = abs(rep.empirical[idx] - math.exp(-0.5))
    checks.append(_check("coherence-at-Xd", rep.empirical[idx],
                         [math.exp(-0.5) - 0.03, math.exp(-0.5) + 0.03],
                         coh_err <= 0.03))
    for k, (dx, emp, pred) in enumerate(rep.rows()):
        se = max(rep.mc_stderr[k], 1e-4)
        checks.append(_check(f"coherence-decay-{k}", emp,
                             [pred - 3 * se - 0.01, pred + 3 * se + 0.01],
                             abs(emp - pred) <= 3 * se + 0.01))
    # Covariance evenness and monotonicity.
    dxs = np.linspace(0, 3 * scene.ell, 13)
    vals = [tau_covariance(d, scene) for d in dxs]
    mono = all(vals[i] >= vals[i + 1] - 1e-12 for i in range(len(vals) - 1))
    even = all(abs(tau_covariance(-d, scene) - tau_covariance(d, scene)) < 1e-12
               for d in dxs[1:4])
    checks.append(_check("covariance-monotone", None, None, mono))
    checks.append(_check("covariance-even", None, None, even))
    return checks


def _suite_spectral(seed: int) -> list[dict]:
    H, h = 11.36, 1.0
    params = kernels.GaussKernelParams(H=H, h=h, reflectors=((0.0, 1.0),))
    grid = np.arange(-8 * H, 8 * H + 1e-9, h / 4)
    dy = h / 4
    Kd = kernels.kernel_matrix(params, grid) * dy
    w, V = np.linalg.eigh(Kd)
    w = w[::-1]
    V = V[:, ::-1]
    lam0 = 1.0 / (math.sqrt(2.0 * math.pi) * (H + h / 2.0))
    closed = lam0 * params.ratio ** np.arange(5)
    rel = float(np.max(np.abs(w[:5] - closed) / closed))
    v0 = np.exp(-grid ** 2 / (2 * H * h))
    v0 /= np.linalg.norm(v0)
    overlap = float(abs(V[:, 0] @ v0))
    checks = [
        _check("ladder-eigenvalues", rel, 1e-3, rel <= 1e-3),
        _check("leading-eigenvector-overlap", overlap, 0.999, overlap >= 0.999),
    ]
    rng = np.random.default_rng(np.random.SeedSequence((seed, 11)))
    worst = 0.0
    for _ in range(20):
        Hr = rng.uniform(2.0, 15.0)
        hr = rng.uniform(0.3, 1.2)
        zj, zjp, eta, y = rng.uniform(-3.0, 3.0, size=4)
        worst = max(worst, kernels.gaussian_window_identity_residual(
            Hr, hr, zj, zjp, eta, y))
        n = int(rng.integers(1, 6))
        worst = max(worst, kernels.hermite_window_identity_residual(
            n, Hr, hr, zj, zjp, eta, y))
    checks.append(_check("window-identities", worst, 1e-7, worst < 1e-7))
    # Composite spectrum at 3.5H separation: paper's interaction scale.
    sep = 3.5 * H
    params2 = kernels.GaussKernelParams(H=H, h=h,
                                        reflectors=((-sep / 2, 1.0), (sep / 2, 1.0)))
    grid2 = np.arange(-sep / 2 - 8 * H, sep / 2 + 8 * H + 1e-9, h / 4)
    w2 = np.linalg.eigvalsh(kernels.kernel_matrix(params2, grid2) * dy)
    lam0_comp = 2.0 * lam0
    zeta = params2.zeta()
    bound = math.exp(-9.0 * zeta ** 2 / 2.0)
    rel2 = abs(w2[-1] - lam0_comp) / lam0_comp
    checks.append(_check("composite-eigenvalue-scale", rel2, bound, rel2 <= bound))
    return checks


def _suite_fourier(seed: int) -> list[dict]:
    scene = scene_from_dict({**_BASE, **_SCENARIOS["fig2"]})
    scales = derive_scales(scene)
    grid = matrix_grid(scene, scales)
    params = kernels.GaussKernelParams(H=scales.H, h=scales.h,
                                       reflectors=scene.reflectors)
    M = TwoPointMatrix.from_dense(grid, kernels.kernel_matrix(params, grid),
                                  x_used=scales.X)
    fp = fourier_products(M, scales, h_est=2.0)
    model = rho_hat_model(scene.reflectors, fp.u, fp.center)
    p0 = fp.modulus ** 2
    rel = float(np.max(np.abs(p0 - np.abs(model) ** 2)) / np.max(np.abs(model) ** 2))
    checks = [_check("diagonal-products", rel, 1e-6, rel <= 1e-6)]

    rho = recursive_estimate(fp)
    good = np.abs(model) > 1e-3 * np.abs(model).max()
    dphi = np.angle(rho[good] / model[good])
    dphi -= dphi[len(dphi) // 2]
    err = float(np.max(np.abs(np.angle(np.exp(1j * dphi)))))
    checks.append(_check("recursion-phase", err, 1e-3, err <= 1e-3))

    phase = optimize_phase(fp)
    _, _, target, _, _ = _fp_pairs_all(fp)
    total = float(np.sum(np.abs(target) ** 2))
    checks.append(_check("optimize-from-zero", phase.objective, 1e-10 * total,
                         phase.objective <= 1e-10 * total))
    # Absolute position identifiability: a linear tilt must cost.
    for alpha in (-1.0, -0.5, 0.5, 1.0):
        tilted = phase.theta + alpha * fp.u
        f_tilt = _fp_objective(fp, tilted)
        checks.append(_check(f"linear-phase-tilt-{alpha}", f_tilt,
                             phase.objective, f_tilt > phase.objective))
    return checks


def _fp_pairs_all(fp):
    from .fourier import _pair_lists
    return _pair_lists(fp, None)


def _fp_objective(fp, theta) -> float:
    i, j, target, weight, _ = _fp_pairs_all(fp)
    model = weight * np.exp(1j * (theta[i] - theta[j]))
    return float(np.sum(np.abs(target - model) ** 2))


def _suite_stability(seed: int) -> list[dict]:
    scene = scene_from_dict({**_BASE, **_SCENARIOS["fig2"],
                             "seed": seed, "sigma_W": 0.0})
    scales = derive_scales(scene)
    table = stability_sweep(scene, scales, n_realizations=24,
                            X_values=[scene.a, scales.Xd, scales.Xd / 3,
                                      scales.Xd / 10], seed=seed)
    checks = []
    for k in range(len(table) - 1):
        a, b = table[k], table[k + 1]
        se = (a["cov"] + b["cov"]) / math.sqrt(2 * (24 - 1))
        ok = b["cov"] <= a["cov"] + 2 * se
        checks.append(_check(f"cov-monotone-{k}",
                             [a["cov"], b["cov"]], None, ok))
    checks.append(_check("cov-at-Xd-over-3", table[2]["cov"], 0.5,
                         table[2]["cov"] < 0.5))
    return checks


_SUITES = {
    "moments": _suite_moments,
    "spectral": _suite_spectral,
    "fourier": _suite_fourier,
    "stability": _suite_stability,
}


def validate(suite: str, seed: int = 0) -> dict:
    """Run a named validation suite with fixed seeds; pass/fail report."""
    if suite not in _SUITES:
        raise ValueError(f"unknown validation suite: {suite!r} "
                         f"(expected one of {', '.join(_SUITES)})")
    checks = _SUITES[suite](seed)
    return {"suite": suite, "seed": seed,
            "passed": all(c["passed"] for c in checks),
            "checks": checks}


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

def sweep(scene: Scene, axis: str, values, n_realizations: int,
          seed: int | None = None, methods: tuple = ("sar", "ci", "sp")) -> list[dict]:
    """Ensemble sweep along X, sigma_tau, or sigma_W.

    Per value: coefficient of variation of the two-point peak over
    realizations, plus per-method statistics of the worst peak-location
    error against the true reflectors.
    """
    if axis not in ("X", "sigma_tau", "sigma_W"):
        raise ValueError(f"unknown sweep axis: {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("empty sweep values")
    if n_realizations < 2:
        raise ValueError("need at least 2 realizations")
    if seed is None:
        seed = scene.seed
    truth = [z for z, _ in scene.reflectors]
    rows = []
    for v in values:
        cfg = scene.to_dict()
        x_thresh = None
        if axis == "X":
            x_thresh = float(v)
        else:
            cfg[axis] = float(v)
        sc = scene_from_dict(cfg)
        scales = derive_scales(sc)
        grid_m = matrix_grid(sc, scales)
        peak_vals = []
        errors = {m: [] for m in methods}
        diags = np.empty((n_realizations, len(grid_m)))
        for i in range(n_realizations):
            s_i = int(realization_seed(seed, i, stream=6).generate_state(1)[0])
            screen = sample_screen(sc, s_i)
            rec = synthesize_record(sc, screen, noise_seed=s_i)
            M = two_point_cint(rec, sc, scales, grid=grid_m,
                               x_threshold=x_thresh)
            diags[i] = M.diagonal()
            for m in methods:
                if m == "sar":
                    img = sar_image(rec, sc, grid=grid_m)
                elif m == "ci":
                    img = cint_image(M)
                elif m == "sp":
                    eig = power_leading(M, seed=s_i, max_iter=2000, tol=1e-6)
                    if not eig.converged:
                        errors[m].append(math.nan)
                        continue
                    img = sp_image(eig, sc, grid_m, grid=grid_m)
                else:
                    raise ValueError(f"sweep does not support method {m!r}")
                rep = find_peaks(img, rel_threshold=0.1)
                errors[m].append(_peak_errors(rep, truth)["max"])
        p_star = int(np.argmax(diags.mean(axis=0)))
        row = {
            "axis": axis,
            "value": float(v),
            "cov": cov_statistic(diags[:, p_star]),
            "n_realizations": n_realizations,
        }
        for m in methods:
            errs = np.array([e for e in errors[m] if e is not None], dtype=float)
            errs = errs[np.isfinite(errs)]
            row[f"{m}_peak_err_mean"] = float(errs.mean()) if errs.size else math.nan
            row[f"{m}_peak_err_std"] = float(errs.std(ddof=1)) if errs.size > 1 else math.nan
        rows.append(row)
    return rows


def sweep_to_csv(rows: list[dict]) -> str:
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("%.17g" % r[c] if isinstance(r[c], float)
                              else str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"
