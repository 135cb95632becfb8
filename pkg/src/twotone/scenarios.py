"""Scenario orchestration: run the bundled experiments end to end.

Each scenario builds drive configurations, evaluates the linear model,
synthesizes noisy spectra, runs the inference pipeline and emits plain data
tables (CSV) plus fit records (JSON). Plotting is left to the consumer. All
floating-point output is serialized with 17 significant digits and every
random draw is keyed by (seed, point index), so a rerun with the same
configuration and seed reproduces the data artifacts byte for byte. The run
manifest records timings and is therefore excluded from that guarantee.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import quadrature_variances, variance_of_phase
from .config import Scenario
from .dynamics import (
    build_linear_model,
    driven_response,
    effective_linewidth,
    output_spectrum,
    spectrum_grid,
    transparency_window_fwhm,
    write_spectrum_csv,
)
from .errors import ConfigError
from .inference import (
    FIT_RECORD_UNITS,
    backaction_evasion_report,
    backaction_line_fit,
    fit_lorentzian,
    occupancy_from_sidebands,
    squeezing_metrics,
    tomography_sweep,
    write_fit_records,
)
from .synthesis import NoiseModel, synthesize, write_noisy_csv
from .sysmodel import LOWER, UPPER, Drive, DriveSet, SystemConfig, drive_pair

TWO_PI = 2.0 * math.pi


@dataclass
class RunManifest:
    """Record of one scenario run: inputs, artifacts, timings, status."""

    toolkit_version: str
    scenario: str
    seed: int
    config_digest: str
    artifacts: list[str] = field(default_factory=list)
    timings_s: dict = field(default_factory=dict)
    status: str = "complete"
    failure: str | None = None
    failure_point: str | None = None

    def write(self, out_dir: Path) -> Path:
        """Atomically serialize the manifest at the end of the run."""
        path = out_dir / "manifest.json"
        tmp = out_dir / "manifest.json.tmp"
        payload = {
            "toolkit_version": self.toolkit_version,
            "scenario": self.scenario,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "artifacts": sorted(self.artifacts),
            "timings_s": self.timings_s,
            "status": self.status,
            "failure": self.failure,
            "failure_point": self.failure_point,
        }
        with open(tmp, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_table(path: Path, header: list[str], rows: list[list[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _require_drive(ds: DriveSet, cavity: int, sideband: str, scenario: str) -> Drive:
    d = ds.get(cavity, sideband)
    if d is None:
        raise ConfigError(
            f"scenario {scenario} requires a {sideband}-sideband drive on cavity {cavity}"
        )
    return d


def _reject_drives(ds: DriveSet, cavity: int, scenario: str) -> None:
    if any(d.cavity_index == cavity for d in ds.drives):
        raise ConfigError(
            f"scenario {scenario} constructs the cavity-{cavity} drives itself; "
            "remove them from the drives list"
        )


def _fit_variance(cfg, ds, gamma_meas, noise, stream, points, out_dir, tag, artifacts):
    """Spectrum of the measurement cavity, synthesized and fitted.

    The fit linewidth is pinned to the calibrated total damping, as the
    driven-response calibration provides it; this keeps weak-peak areas
    unbiased. Returns (variance, error) with variance = fitted area /
    gamma_meas.
    """
    model = build_linear_model(cfg, ds)
    spectrum = output_spectrum(model, 1, spectrum_grid(cfg, ds, points=points))
    noisy = synthesize(spectrum, noise, stream=stream)
    fit = fit_lorentzian(noisy, fixed={"fwhm": effective_linewidth(cfg, ds)})
    csv_path = out_dir / f"{tag}.csv"
    write_noisy_csv(noisy, csv_path)
    fit_path = out_dir / f"{tag}_fit.json"
    write_fit_records(fit.to_record(), fit_path)
    artifacts += [csv_path.name, fit_path.name]
    return fit.area / gamma_meas, fit.area_err / gamma_meas


def run_scenario(
    cfg: SystemConfig,
    ds: DriveSet,
    scenario: Scenario,
    out_dir,
    *,
    seed: int | None = None,
    config_digest: str = "unspecified",
) -> RunManifest:
    """Execute a scenario and write its artifacts under ``out_dir``.

    A failure at any sweep point still writes the manifest, with the failed
    point identified in ``failure_point``, before the error propagates;
    artifacts of the completed points are preserved.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise = scenario.noise if seed is None else NoiseModel(
        floor=scenario.noise.floor, averages=scenario.noise.averages, seed=seed
    )
    manifest = RunManifest(
        toolkit_version=__version__,
        scenario=scenario.name,
        seed=noise.seed,
        config_digest=config_digest,
    )
    runner = _RUNNERS[scenario.name]
    start = time.perf_counter()
    try:
        runner(cfg, ds, scenario, noise, out_dir, manifest)
        manifest.failure_point = None
    except Exception as exc:
        manifest.status = "failed"
        manifest.failure = f"{type(exc).__name__}: {exc}"
        manifest.timings_s["total"] = time.perf_counter() - start
        manifest.write(out_dir)
        raise
    manifest.timings_s["total"] = time.perf_counter() - start
    write_fit_records(FIT_RECORD_UNITS, out_dir / "fit_units.json")
    manifest.artifacts.append("fit_units.json")
    manifest.write(out_dir)
    return manifest


def _run_backaction_sweep(cfg, ds, scenario, noise, out_dir, manifest):
    """Measurement-strength sweep with balanced pairs, by frequency placement.

    Per point: the pair detuned symmetrically off its sidebands measures both
    quadratures (its two thermomechanical sidebands are fitted separately),
    the on-sideband pair measures the single quadrature X1, and the cooling
    cavity's sideband provides the total occupancy in the latter case.
    """
    cooling = _require_drive(ds, 2, LOWER, scenario.name)
    if ds.get(2, UPPER) is not None:
        raise ConfigError("backaction_sweep runs against a pure cooling drive")
    _reject_drives(ds, 1, scenario.name)
    delta = scenario.params["pair_detuning"]
    points = scenario.params["points"]
    rows = []
    per_point = []
    for k, ratio in enumerate(scenario.params["ratios"]):
        t0 = time.perf_counter()
        gamma_meas = ratio * cooling.rate
        tag = f"point_{k:02d}"
        manifest.failure_point = f"{tag} (gamma_ratio {ratio:g})"

        # detuned (both-quadrature) case: two sidebands at -/+ delta
        ds_nonqnd = DriveSet(
            (cooling,) + drive_pair(1, gamma_meas, gamma_meas, detuning=delta)
        )
        model = build_linear_model(cfg, ds_nonqnd)
        width = effective_linewidth(cfg, ds_nonqnd)
        span = delta + 10.0 * width
        spectrum = output_spectrum(model, 1, np.linspace(-span, span, points))
        noisy = synthesize(spectrum, noise, stream=3 * k)
        write_noisy_csv(noisy, out_dir / f"{tag}_nonqnd.csv")
        manifest.artifacts.append(f"{tag}_nonqnd.csv")
        window = min(0.85 * delta, span - delta)
        anti = fit_lorentzian(
            noisy.windowed(np.abs(noisy.freq + delta) < window),
            init={"center": -delta},
            fixed={"fwhm": width},
        )
        stokes = fit_lorentzian(
            noisy.windowed(np.abs(noisy.freq - delta) < window),
            init={"center": delta},
            fixed={"fwhm": width},
        )
        n_anti, n_stokes, calibration = occupancy_from_sidebands(
            anti, stokes, gamma_meas, gamma_meas
        )
        calibration_err = calibration * math.hypot(
            anti.area_err / anti.area, stokes.area_err / stokes.area
        )
        err_anti = anti.area_err / gamma_meas
        err_stokes = stokes.area_err / gamma_meas
        w_anti, w_stokes = err_anti**-2, err_stokes**-2
        n_nonqnd = (w_anti * n_anti + w_stokes * n_stokes) / (w_anti + w_stokes)
        n_nonqnd_err = (w_anti + w_stokes) ** -0.5
        write_fit_records(
            {
                "anti_stokes": anti.to_record(),
                "stokes": stokes.to_record(),
                "calibration_factor": calibration,
            },
            out_dir / f"{tag}_nonqnd_fit.json",
        )
        manifest.artifacts.append(f"{tag}_nonqnd_fit.json")

        # on-sideband (single-quadrature) case: X1 from cavity 1, total
        # occupancy from the cooling cavity's sideband
        ds_qnd = DriveSet((cooling,) + drive_pair(1, gamma_meas, gamma_meas))
        v1_qnd, v1_err = _fit_variance(
            cfg, ds_qnd, gamma_meas, noise, 3 * k + 1, points, out_dir,
            f"{tag}_qnd_cav1", manifest.artifacts,
        )
        model_q = build_linear_model(cfg, ds_qnd)
        spec2 = output_spectrum(model_q, 2, spectrum_grid(cfg, ds_qnd, points=points))
        noisy2 = synthesize(spec2, noise, stream=3 * k + 2)
        fit2 = fit_lorentzian(noisy2, fixed={"fwhm": effective_linewidth(cfg, ds_qnd)})
        write_noisy_csv(noisy2, out_dir / f"{tag}_qnd_cav2.csv")
        write_fit_records(fit2.to_record(), out_dir / f"{tag}_qnd_cav2_fit.json")
        manifest.artifacts += [f"{tag}_qnd_cav2.csv", f"{tag}_qnd_cav2_fit.json"]
        n_qnd = fit2.area / cooling.rate
        n_qnd_err = fit2.area_err / cooling.rate

        rows.append([ratio, n_qnd, n_qnd_err, n_nonqnd, n_nonqnd_err, v1_qnd, v1_err])
        per_point.append(
            {
                "gamma_ratio": ratio,
                "calibration_factor": calibration,
                "calibration_factor_err": calibration_err,
                "asymmetry_expected": n_nonqnd / (n_nonqnd + 1.0),
            }
        )
        manifest.timings_s[tag] = time.perf_counter() - t0

    _write_table(
        out_dir / "backaction.csv",
        ["gamma_ratio", "n_tot_qnd", "n_tot_qnd_err", "n_tot_nonqnd", "n_tot_nonqnd_err", "v1_qnd", "v1_qnd_err"],
        rows,
    )
    manifest.artifacts.append("backaction.csv")

    data = np.array(rows)
    line = backaction_line_fit(data[:, 0], data[:, 3], data[:, 4])
    top = int(np.argmax(data[:, 0]))
    evasion = backaction_evasion_report(
        qnd_v1=float(data[top, 5]),
        qnd_v1_err=float(data[top, 6]),
        nonqnd_occupancies=[(r[0], r[3], r[4]) for r in rows],
        gamma_ratio=float(data[top, 0]),
    )
    summary = {
        "line_fit": {
            "slope": line.slope,
            "slope_err": line.slope_err,
            "intercept": line.intercept,
            "intercept_err": line.intercept_err,
            "chi2_dof": line.chi2_dof,
        },
        "evasion": evasion.to_record(),
        "asymmetry": per_point,
    }
    write_fit_records(summary, out_dir / "summary.json")
    manifest.artifacts.append("summary.json")


def _run_squeeze_sweep(cfg, ds, scenario, noise, out_dir, manifest):
    """Squeezed and anti-squeezed variances against the drive-rate ratio.

    Per ratio the control pair sets the engineered bath and the balanced
    measurement pair reads X1 (angle 0) and X2 (angle pi/2) in separate
    acquisitions. Theory columns come from the closed-form moments of the
    same drive sets.
    """
    cooling = _require_drive(ds, 2, LOWER, scenario.name)
    if ds.get(2, UPPER) is not None:
        raise ConfigError(
            "squeeze_sweep constructs the upper control tone per point; "
            "remove it from the drives list"
        )
    _reject_drives(ds, 1, scenario.name)
    gamma_meas = scenario.params["measurement_ratio"] * cooling.rate
    points = scenario.params["points"]
    rows = []
    for k, ratio in enumerate(scenario.params["ratios"]):
        t0 = time.perf_counter()
        tag = f"point_{k:02d}"
        manifest.failure_point = f"{tag} (squeeze_ratio {ratio:g})"
        control = drive_pair(2, cooling.rate, ratio * cooling.rate)
        values = {}
        for sub, angle in enumerate((0.0, math.pi / 2.0)):
            ds_phi = DriveSet(control + drive_pair(1, gamma_meas, gamma_meas, angle=angle))
            v, err = _fit_variance(
                cfg, ds_phi, gamma_meas, noise, 2 * k + sub, points, out_dir,
                f"{tag}_angle{sub}", manifest.artifacts,
            )
            theory = quadrature_variances(cfg.mech, ds_phi)
            values[sub] = (v, err, variance_of_phase(theory, angle))
        rows.append(
            [
                ratio,
                values[0][0], values[0][1],
                values[1][0], values[1][1],
                values[0][2], values[1][2],
            ]
        )
        manifest.timings_s[tag] = time.perf_counter() - t0
    _write_table(
        out_dir / "squeeze.csv",
        ["squeeze_ratio", "v1", "v1_err", "v2", "v2_err", "v1_theory", "v2_theory"],
        rows,
    )
    manifest.artifacts.append("squeeze.csv")
    data = np.array(rows)
    below = (1.0 - data[:, 1]) / data[:, 2]
    summary = {
        "min_v1_theory": float(np.min(data[:, 5])),
        "subvacuum_significance": {
            _fmt(r): float(s) for r, s in zip(data[:, 0], below)
        },
    }
    write_fit_records(summary, out_dir / "summary.json")
    manifest.artifacts.append("summary.json")


def _run_tomography(cfg, ds, scenario, noise, out_dir, manifest):
    """Variance of the measured quadrature versus measurement phase.

    The control drives come from the configuration (cooling only gives the
    isotropic state, an asymmetric pair a squeezed one); the balanced pair's
    angle is swept over [0, pi].
    """
    cooling = _require_drive(ds, 2, LOWER, scenario.name)
    _reject_drives(ds, 1, scenario.name)
    gamma_meas = scenario.params["measurement_ratio"] * cooling.rate
    points = scenario.params["points"]
    phases = np.linspace(0.0, math.pi, scenario.params["n_phases"])
    rows = []
    for k, phi in enumerate(phases):
        t0 = time.perf_counter()
        manifest.failure_point = f"point_{k:02d} (phi {phi:g})"
        ds_phi = DriveSet(ds.drives + drive_pair(1, gamma_meas, gamma_meas, angle=phi))
        v, err = _fit_variance(
            cfg, ds_phi, gamma_meas, noise, k, points, out_dir,
            f"point_{k:02d}", manifest.artifacts,
        )
        theory = variance_of_phase(quadrature_variances(cfg.mech, ds_phi), phi)
        rows.append([phi, v, err, theory])
        manifest.timings_s[f"point_{k:02d}"] = time.perf_counter() - t0
    _write_table(
        out_dir / "tomogram.csv", ["phi_rad", "v_measured", "v_err", "v_theory"], rows
    )
    manifest.artifacts.append("tomogram.csv")
    data = np.array(rows)
    fit = tomography_sweep(data[:, 0], data[:, 1], data[:, 2])
    metrics = squeezing_metrics(fit)
    occupancy = (fit.v1 + fit.v2 - 2.0) / 4.0
    occupancy_err = math.sqrt(fit.cov[0, 0] + fit.cov[1, 1] + 2.0 * fit.cov[0, 1]) / 4.0
    write_fit_records(
        {
            "tomogram": fit.to_record(),
            "metrics": metrics.to_record(),
            "occupancy": occupancy,
            "occupancy_err": occupancy_err,
        },
        out_dir / "summary.json",
    )
    manifest.artifacts.append("summary.json")


def _run_driven_response(cfg, ds, scenario, noise, out_dir, manifest):
    """Complex reflection of a weak probe across the transparency window."""
    cavity = scenario.params["cavity"]
    points = scenario.params["points"]
    span = scenario.params.get("span")
    if span is None:
        span = 6.0 * abs(effective_linewidth(cfg, ds))
    grid = np.linspace(-span, span, points)
    s11 = driven_response(cfg, ds, cavity, grid)
    _write_table(
        out_dir / "response.csv",
        ["offset_hz", "re_s11", "im_s11"],
        [[f / TWO_PI, v.real, v.imag] for f, v in zip(grid, s11)],
    )
    manifest.artifacts.append("response.csv")
    fwhm = transparency_window_fwhm(cfg, ds, cavity)
    write_fit_records(
        {
            "window_fwhm_hz": fwhm / TWO_PI,
            "damping_sum_hz": effective_linewidth(cfg, ds) / TWO_PI,
        },
        out_dir / "summary.json",
    )
    manifest.artifacts.append("summary.json")


def _run_single_spectrum(cfg, ds, scenario, noise, out_dir, manifest):
    """One ideal spectrum of the configured drive set, plus a measurement."""
    cavity = scenario.params["cavity"]
    points = scenario.params["points"]
    span = scenario.params.get("span")
    grid = spectrum_grid(cfg, ds, points=points, span=span)
    model = build_linear_model(cfg, ds)
    spectrum = output_spectrum(model, cavity, grid)
    write_spectrum_csv(spectrum, out_dir / "spectrum.csv")
    noisy = synthesize(spectrum, noise, stream=0)
    write_noisy_csv(noisy, out_dir / "noisy.csv")
    manifest.artifacts += ["spectrum.csv", "noisy.csv"]
    fit = fit_lorentzian(noisy)
    write_fit_records(fit.to_record(), out_dir / "fit.json")
    manifest.artifacts.append("fit.json")
    write_fit_records(
        {"integrated_flux": spectrum.integrated_flux()}, out_dir / "summary.json"
    )
    manifest.artifacts.append("summary.json")


_RUNNERS = {
    "backaction_sweep": _run_backaction_sweep,
    "squeeze_sweep": _run_squeeze_sweep,
    "tomography": _run_tomography,
    "driven_response": _run_driven_response,
    "single_spectrum": _run_single_spectrum,
}
