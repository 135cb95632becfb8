"""Measurement analysis: peak fitting, thermometry, tomography, squeezing.

Occupancies are extracted from fitted Lorentzian areas rather than peak
heights because areas are independent of the effective linewidth, which
varies across drive sweeps. With spectra in scattered-photon units a
sideband's area divided by its scattering rate is the emitting quadrature
moment directly: anti-Stokes area / gamma_minus = n, Stokes area /
gamma_plus = n + 1, and the area ratio n / (n + 1) is the primary,
calibration-free thermometer.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import DomainError, FitError
from .synthesis import NoisySpectrum


@dataclass(frozen=True)
class LorentzianFit:
    """Weighted least-squares fit of one spectral peak.

    ``area`` integrates the peak as int flux domega / 2 pi; ``center`` and
    ``fwhm`` are in rad/s on the spectrum's offset axis. ``zero_area`` marks
    peakless data fitted by a flat background.
    """

    center: float
    fwhm: float
    area: float
    background: float
    center_err: float
    fwhm_err: float
    area_err: float
    background_err: float
    chi2_dof: float
    converged: bool
    zero_area: bool = False

    def to_record(self) -> dict:
        return {
            "center_hz": self.center / (2.0 * math.pi),
            "fwhm_hz": self.fwhm / (2.0 * math.pi),
            "area": self.area,
            "background": self.background,
            "center_err_hz": self.center_err / (2.0 * math.pi),
            "fwhm_err_hz": self.fwhm_err / (2.0 * math.pi),
            "area_err": self.area_err,
            "background_err": self.background_err,
            "chi2_dof": self.chi2_dof,
            "converged": self.converged,
            "zero_area": self.zero_area,
        }


FIT_RECORD_UNITS = {
    "center_hz": "Hz offset from the analysis cavity resonance",
    "fwhm_hz": "Hz",
    "area": "photons/s (scattered-photon units)",
    "background": "photons/s/Hz",
    "center_err_hz": "Hz",
    "fwhm_err_hz": "Hz",
    "area_err": "photons/s",
    "background_err": "photons/s/Hz",
    "chi2_dof": "dimensionless",
    "converged": "boolean",
    "zero_area": "boolean",
}


def lorentzian(freq: NDArray, center: float, fwhm: float, area: float, background: float):
    """Lorentzian with unit-normalized area: int L domega / 2 pi = area."""
    return background + area * fwhm / ((freq - center) ** 2 + fwhm**2 / 4.0)


def _flat_background_fit(freq, y, err) -> LorentzianFit:
    weights = 1.0 / err**2
    flat = float(np.sum(weights * y) / np.sum(weights))
    flat_err = float(1.0 / math.sqrt(np.sum(weights)))
    chi2 = float(np.sum(((y - flat) / err) ** 2) / max(len(y) - 1, 1))
    return LorentzianFit(
        center=float(freq[int(np.argmax(y))]),
        fwhm=0.0,
        area=0.0,
        background=flat,
        center_err=math.inf,
        fwhm_err=math.inf,
        area_err=flat_err * float(freq[-1] - freq[0]) / (2.0 * math.pi),
        background_err=flat_err,
        chi2_dof=chi2,
        converged=True,
        zero_area=True,
    )


def _smoothed(y: NDArray, window: int) -> NDArray:
    kernel = np.ones(window) / window
    return np.convolve(y, kernel, mode="same")


_PARAM_ORDER = ("center", "fwhm", "area", "background")


def fit_lorentzian(
    ns: NoisySpectrum,
    init: dict | None = None,
    *,
    fixed: dict | None = None,
) -> LorentzianFit:
    """Fit one Lorentzian peak on a flat background, weighted by std_err.

    Initial parameters come from a lightly smoothed copy of the data so that
    single-bin noise spikes do not seed the peak position. Parameters named
    in ``fixed`` are held at the given values instead of floated; pinning
    the linewidth to its driven-response calibration value removes the
    area-width correlation that otherwise biases weak peaks. Data whose
    fitted area is not significant at one standard error falls back to a
    flat-background fit flagged ``zero_area``.

    Raises
    ------
    FitError
        If the least-squares iteration does not converge on data that does
        carry a peak.
    """
    freq = ns.freq
    y = ns.flux_measured
    err = ns.std_err
    if np.any(err <= 0):
        raise DomainError("per-bin standard errors must be positive")
    fixed = dict(fixed or {})
    if set(fixed) - set(_PARAM_ORDER):
        raise DomainError(f"unknown fixed parameters {set(fixed) - set(_PARAM_ORDER)}")

    smooth = _smoothed(y, max(3, len(y) // 100))
    background0 = float(np.median(smooth))
    center0 = float(freq[int(np.argmax(smooth))])
    prominence = float(np.max(smooth) - background0)
    above = smooth - background0 > prominence / 2.0
    fwhm0 = float(max(np.count_nonzero(above), 3) * (freq[1] - freq[0]))
    start = {
        "center": center0,
        "fwhm": fwhm0,
        "area": prominence * fwhm0 / 4.0,
        "background": background0,
    }
    start.update(init or {})
    start.update(fixed)

    free = [name for name in _PARAM_ORDER if name not in fixed]
    if not free:
        raise DomainError("at least one parameter must float")

    def model(f, *theta):
        params = dict(fixed)
        params.update(zip(free, theta))
        return lorentzian(f, *(params[name] for name in _PARAM_ORDER))

    try:
        with warnings.catch_warnings():
            # a singular covariance on peakless data is handled by the
            # flat-background fallback below
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(
                model,
                freq,
                y,
                p0=[start[name] for name in free],
                sigma=err,
                absolute_sigma=True,
                xtol=1e-12,
                ftol=1e-12,
                maxfev=20000,
            )
    except RuntimeError as exc:
        flat = _flat_background_fit(freq, y, err)
        if flat.chi2_dof < 2.0:
            return flat
        raise FitError(f"Lorentzian fit did not converge: {exc}") from exc
    values = dict(fixed)
    values.update(zip(free, popt))
    errors = dict.fromkeys(_PARAM_ORDER, 0.0)
    errors.update(zip(free, np.sqrt(np.diag(pcov))))
    if not all(np.isfinite(errors[name]) for name in free) or (
        "area" in free and abs(values["area"]) <= errors["area"]
    ):
        return _flat_background_fit(freq, y, err)
    resid = (lorentzian(freq, *(values[name] for name in _PARAM_ORDER)) - y) / err
    chi2 = float(np.sum(resid**2) / max(len(y) - len(free), 1))
    return LorentzianFit(
        center=float(values["center"]),
        # a negative-width minimum is the same curve; report the canonical sign
        fwhm=float(abs(values["fwhm"])),
        area=float(values["area"]),
        background=float(values["background"]),
        center_err=float(errors["center"]),
        fwhm_err=float(errors["fwhm"]),
        area_err=float(errors["area"]),
        background_err=float(errors["background"]),
        chi2_dof=chi2,
        converged=True,
    )


def occupancy_from_sidebands(
    anti_stokes: LorentzianFit,
    stokes: LorentzianFit,
    gamma_minus: float,
    gamma_plus: float,
) -> tuple[float, float, float]:
    """Occupancies and the asymmetry calibration factor from two sidebands.

    Returns (n_anti, n_stokes, calibration_factor) with n_anti =
    area_minus / gamma_minus, n_stokes = area_plus / gamma_plus - 1 and
    calibration_factor = (area_minus / area_plus)(gamma_plus / gamma_minus),
    to be compared against n / (n + 1).
    """
    if not (anti_stokes.converged and stokes.converged):
        raise DomainError("both sideband fits must have converged")
    if gamma_minus <= 0:
        raise DomainError("anti-Stokes scattering rate must be positive")
    if gamma_plus <= 0:
        raise DomainError(
            "a Stokes fit was supplied but the Stokes scattering rate is zero"
        )
    n_anti = anti_stokes.area / gamma_minus
    n_stokes = stokes.area / gamma_plus - 1.0
    calibration = anti_stokes.area / stokes.area * (gamma_plus / gamma_minus)
    return n_anti, n_stokes, calibration


@dataclass(frozen=True)
class TomogramFit:
    """Reconstructed mechanical second moments from a phase sweep.

    ``angle`` is the phase of minimum variance; ``cov`` the 3x3 covariance
    of (v1, v2, v12) from the weighted fit.
    """

    v1: float
    v2: float
    v12: float
    angle: float
    cov: NDArray[np.float64]
    chi2_dof: float

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        cov.flags.writeable = False
        object.__setattr__(self, "cov", cov)
        moment = np.array([[self.v1, self.v12], [self.v12, self.v2]])
        if np.linalg.eigvalsh(moment).min() < 0.0:
            raise DomainError("fitted variance model is negative at some phase")

    @property
    def v1_err(self) -> float:
        return float(np.sqrt(self.cov[0, 0]))

    @property
    def v2_err(self) -> float:
        return float(np.sqrt(self.cov[1, 1]))

    @property
    def v12_err(self) -> float:
        return float(np.sqrt(self.cov[2, 2]))

    def to_record(self) -> dict:
        return {
            "v1": self.v1,
            "v2": self.v2,
            "v12": self.v12,
            "angle_rad": self.angle,
            "v1_err": self.v1_err,
            "v2_err": self.v2_err,
            "v12_err": self.v12_err,
            "chi2_dof": self.chi2_dof,
        }


def tomography_sweep(
    phases: NDArray,
    variances: NDArray,
    errors: NDArray,
) -> TomogramFit:
    """Weighted fit of v(phi) = v1 cos^2 + v2 sin^2 + v12 sin(2 phi).

    Needs at least five distinct phases spanning at least pi. Requesting all
    three moments from phases that are all multiples of pi/2 leaves v12
    unconstrained and raises a degenerate-design error.
    """
    phases = np.asarray(phases, dtype=float)
    variances = np.asarray(variances, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if phases.shape != variances.shape or phases.shape != errors.shape:
        raise DomainError("phases, variances and errors must have equal lengths")
    if len(np.unique(phases)) < 5:
        raise DomainError("tomography needs at least 5 distinct phases")
    if phases.max() - phases.min() < math.pi - 1e-9:
        raise DomainError("tomography phases must span at least pi")
    if np.any(errors <= 0):
        raise DomainError("variance errors must be positive")

    design = np.column_stack(
        [np.cos(phases) ** 2, np.sin(phases) ** 2, np.sin(2.0 * phases)]
    )
    w = 1.0 / errors
    a = design * w[:, None]
    b = variances * w
    gram = a.T @ a
    if np.linalg.matrix_rank(gram, tol=1e-10 * np.trace(gram)) < 3:
        raise DomainError(
            "degenerate tomography design: phases do not constrain all moments"
        )
    beta = np.linalg.solve(gram, a.T @ b)
    cov = np.linalg.inv(gram)
    resid = (design @ beta - variances) / errors
    chi2 = float(np.sum(resid**2) / max(len(phases) - 3, 1))

    v1, v2, v12 = (float(x) for x in beta)
    # v(phi) = mean + R cos(2 phi - psi): the minimum lies at (psi + pi) / 2
    psi = math.atan2(v12, (v1 - v2) / 2.0)
    angle = ((psi + math.pi) / 2.0) % math.pi
    return TomogramFit(v1=v1, v2=v2, v12=v12, angle=angle, cov=cov, chi2_dof=chi2)


@dataclass(frozen=True)
class SqueezingMetrics:
    """Squeezing level, state purity and the uncertainty-relation flag."""

    squeezing_db: float
    purity: float
    heisenberg_ok: bool
    v_min: float
    v_max: float

    def to_record(self) -> dict:
        return {
            "squeezing_db": self.squeezing_db,
            "purity": self.purity,
            "heisenberg_ok": self.heisenberg_ok,
            "v_min": self.v_min,
            "v_max": self.v_max,
        }


def squeezing_metrics(t: TomogramFit) -> SqueezingMetrics:
    """Metrics of the fitted moment matrix.

    v_min is its smaller eigenvalue, squeezing_db = 10 log10(1 / v_min),
    purity = 1 / sqrt(v1 v2 - v12^2). A determinant below 1 by more than
    three propagated standard deviations clears ``heisenberg_ok``; the
    metrics are still returned.
    """
    mean = (t.v1 + t.v2) / 2.0
    radius = math.hypot((t.v1 - t.v2) / 2.0, t.v12)
    v_min = mean - radius
    v_max = mean + radius
    det = t.v1 * t.v2 - t.v12**2
    if v_min <= 0 or det <= 0:
        raise DomainError("fitted moments are not positive definite")
    grad = np.array([t.v2, t.v1, -2.0 * t.v12])
    det_err = float(np.sqrt(grad @ t.cov @ grad))
    return SqueezingMetrics(
        squeezing_db=10.0 * math.log10(1.0 / v_min),
        purity=1.0 / math.sqrt(det),
        heisenberg_ok=bool(det >= 1.0 - 3.0 * det_err),
        v_min=float(v_min),
        v_max=float(v_max),
    )


@dataclass(frozen=True)
class LineFit:
    """Weighted straight-line fit y = slope x + intercept."""

    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    chi2_dof: float


def backaction_line_fit(ratios, values, sigmas) -> LineFit:
    """Weighted linear fit of total occupancy against measurement strength.

    The intercept extrapolates the occupancy without measurement backaction;
    the slope should be one when the added occupancy equals the strength
    ratio.
    """
    x = np.asarray(ratios, dtype=float)
    y = np.asarray(values, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if x.size < 2:
        raise DomainError("line fit needs at least two points")
    if np.any(s <= 0):
        raise DomainError("sigmas must be positive")
    design = np.column_stack([x, np.ones_like(x)])
    a = design / s[:, None]
    b = y / s
    gram = a.T @ a
    beta = np.linalg.solve(gram, a.T @ b)
    cov = np.linalg.inv(gram)
    resid = (design @ beta - y) / s
    chi2 = float(np.sum(resid**2) / max(x.size - 2, 1))
    return LineFit(
        slope=float(beta[0]),
        intercept=float(beta[1]),
        slope_err=float(np.sqrt(cov[0, 0])),
        intercept_err=float(np.sqrt(cov[1, 1])),
        chi2_dof=chi2,
    )


@dataclass(frozen=True)
class EvasionReport:
    """How far the measured quadrature sits below the injected backaction."""

    evasion_db: float
    is_lower_bound: bool
    n_ba: float
    delta_v1: float
    delta_v1_err: float
    v1_reference: float

    def to_record(self) -> dict:
        return {
            "evasion_db": self.evasion_db,
            "is_lower_bound": self.is_lower_bound,
            "n_ba": self.n_ba,
            "delta_v1": self.delta_v1,
            "delta_v1_err": self.delta_v1_err,
            "v1_reference": self.v1_reference,
        }


def backaction_evasion_report(
    qnd_v1: float,
    qnd_v1_err: float,
    nonqnd_occupancies,
    gamma_ratio: float,
) -> EvasionReport:
    """Backaction evasion in dB at one measurement strength.

    The reference variance without measurement, 2 n_m + 1, comes from the
    zero-strength intercept of the swept occupancies (rows of
    (gamma_ratio, n_tot, sigma)). The injected backaction is n_ba =
    gamma_ratio, which would raise the variance by 2 n_ba if not evaded;
    evasion_db = 10 log10(2 n_ba / max(delta_v1, its uncertainty)), reported
    as a lower bound whenever the excess is consistent with zero.
    """
    if gamma_ratio <= 0:
        raise DomainError("evasion is undefined at zero measurement strength")
    rows = list(nonqnd_occupancies)
    if len(rows) < 2:
        raise DomainError(
            "the zero-strength reference requires at least two swept occupancies"
        )
    line = backaction_line_fit(
        [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows]
    )
    v1_reference = 2.0 * line.intercept + 1.0
    delta_v1 = qnd_v1 - v1_reference
    delta_err = math.sqrt(qnd_v1_err**2 + (2.0 * line.intercept_err) ** 2)
    n_ba = gamma_ratio
    denominator = max(delta_v1, delta_err)
    if denominator <= 0:
        raise DomainError("evasion denominator must be positive")
    return EvasionReport(
        evasion_db=10.0 * math.log10(2.0 * n_ba / denominator),
        is_lower_bound=bool(delta_v1 <= delta_err),
        n_ba=n_ba,
        delta_v1=delta_v1,
        delta_v1_err=delta_err,
        v1_reference=v1_reference,
    )


def write_fit_records(records: dict, path, units: dict | None = None) -> None:
    """Emit fit results as a JSON record with a units sidecar."""
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if units is not None:
        sidecar = str(path) + ".units.json"
        with open(sidecar, "w") as fh:
            json.dump(units, fh, indent=2, sort_keys=True)
            fh.write("\n")
