"""Exact linearized dynamics of the driven two-cavity electromechanical system.

Within the rotating-wave approximation each sideband tone contributes a
beam-splitter (lower sideband) or two-mode-squeezing (upper sideband)
coupling of strength g = sqrt(gamma kappa) / 2 between its cavity and the
mechanics. The six quadratures (X_a1, P_a1, X_a2, P_a2, X_b, P_b) then obey
linear Langevin equations du/dt = A u + noise; the steady-state covariance
solves the Lyapunov equation A V + V A^T + D = 0 and emitted spectra follow
from input-output theory on the frequency-domain transfer matrix.

Tone detunings are absorbed into a co-rotating frame: the mechanical frame
may shift by s_b and each cavity frame by s_j, which turns symmetric pair
detunings (-delta, +delta) and common offsets into static detuning blocks.
Drive sets whose detunings admit no such frame are rejected.

Spectra are reported as emitted photon-flux spectral density (normally
ordered with respect to the output field, so an undriven cavity reports
exactly zero and no separate floor subtraction is needed) in
scattered-photon units: the external-port flux divided by the collection
efficiency kappa_ext / kappa, so that a sideband's integrated flux equals
its scattering rate times the emitting quadrature moment. Photon ordering,
rather than a symmetrized quadrature spectrum, is what carries the
anti-Stokes / Stokes asymmetry between n and n + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_continuous_lyapunov

from .analytic import QuadratureMoments
from .errors import DomainError, InstabilityError, NumericalError
from .sysmodel import LOWER, UPPER, DriveSet, SystemConfig

BASIS = ("X_a1", "P_a1", "X_a2", "P_a2", "X_b", "P_b")

_LYAPUNOV_RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class InputChannel:
    """One white-noise port: label, target mode, coupling rate, occupancy."""

    label: str
    mode: int  # 0 = cavity 1, 1 = cavity 2, 2 = mechanics
    rate: float
    occupancy: float

    @property
    def variance(self) -> float:
        return 2.0 * self.occupancy + 1.0


@dataclass(frozen=True)
class LinearModel:
    """Drift/diffusion description of the linearized system.

    ``drift`` and ``diffusion`` are the 6x6 real matrices of the quadrature
    Langevin equations; ``complex_drift`` is the same generator in the
    (a1, a1+, a2, a2+, b, b+) basis, used for the driven response.
    ``frame_shifts`` records the rotating-frame offsets (s_cav1, s_cav2,
    s_mech) relative to the cavity resonances and the mechanical sideband,
    needed to map internal frequencies onto laboratory offsets.
    """

    drift: NDArray[np.float64]
    diffusion: NDArray[np.float64]
    basis: tuple[str, ...]
    channels: tuple[InputChannel, ...]
    complex_drift: NDArray[np.complex128]
    frame_shifts: tuple[float, float, float]
    cfg: SystemConfig
    ds: DriveSet

    def __post_init__(self):
        for name in ("drift", "diffusion", "complex_drift"):
            getattr(self, name).flags.writeable = False

    def eigenvalues(self) -> NDArray[np.complex128]:
        return np.linalg.eigvals(self.drift)

    @property
    def max_real_eigenvalue(self) -> float:
        return float(np.max(self.eigenvalues().real))

    @property
    def is_stable(self) -> bool:
        return self.max_real_eigenvalue < 0.0

    def noise_input_matrix(self) -> NDArray[np.float64]:
        """6 x 2 n_ch input coupling matrix with sqrt(rate) per channel.

        The same block structure serves both bases: in the quadrature basis
        column pairs are (X_in, P_in), in the complex-mode basis they are
        (a_in, a_in+) feeding the mode's (a, a+) rows.
        """
        b = np.zeros((6, 2 * len(self.channels)))
        for k, ch in enumerate(self.channels):
            r = np.sqrt(ch.rate)
            b[2 * ch.mode, 2 * k] = r
            b[2 * ch.mode + 1, 2 * k + 1] = r
        return b


@dataclass(frozen=True)
class CovarianceMatrix:
    """6x6 symmetrized quadrature covariance, vacuum-normalized."""

    v: NDArray[np.float64]

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (6, 6):
            raise DomainError(f"covariance must be 6x6, got {v.shape}")
        v = 0.5 * (v + v.T)
        v.flags.writeable = False
        object.__setattr__(self, "v", v)

    def block(self, mode: int) -> NDArray[np.float64]:
        i = 2 * mode
        return self.v[i : i + 2, i : i + 2]

    def is_physical(self, tol: float = 1e-9) -> bool:
        """Check V + i J >= 0 for the commutator convention [X, P] = 2i."""
        j2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
        j = np.kron(np.eye(3), j2)
        eig = np.linalg.eigvalsh(self.v + 1j * j)
        return bool(eig.min() > -tol)


@dataclass(frozen=True)
class Spectrum:
    """Output photon-flux spectral density on a laboratory frequency grid.

    ``freq`` holds offsets from the analysis cavity's resonance (rad/s),
    ``flux`` the vacuum-floor-subtracted flux density (photons/s/Hz) in
    scattered-photon units. ``meta`` carries the cavity index, drive digest,
    units and any validity warnings.
    """

    freq: NDArray[np.float64]
    flux: NDArray[np.float64]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        flux = np.asarray(self.flux, dtype=float)
        if freq.ndim != 1 or freq.shape != flux.shape:
            raise DomainError("freq and flux must be matching 1-d arrays")
        if np.any(np.diff(freq) <= 0):
            raise DomainError("frequency grid must be strictly increasing")
        if np.any(flux < 0):
            raise DomainError("flux density must be non-negative")
        freq.flags.writeable = False
        flux.flags.writeable = False
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "flux", flux)

    def integrated_flux(self) -> float:
        """Total emitted photon rate: integral of flux over the grid / 2 pi."""
        return float(np.trapezoid(self.flux, self.freq) / (2.0 * np.pi))


def _solve_frame_shifts(ds: DriveSet) -> tuple[float, float, float]:
    """Rotating-frame offsets (s_cav1, s_cav2, s_mech) absorbing detunings.

    A lower-sideband tone detuned by d is static iff d = s_j - s_b, an
    upper-sideband tone iff d = s_j + s_b. A cavity driven on both sidebands
    fixes s_b = (d_up - d_lo) / 2; two such cavities must agree.
    """
    s_b: float | None = None
    fixed_by: int | None = None
    for j in (1, 2):
        lo, up = ds.get(j, LOWER), ds.get(j, UPPER)
        if lo is not None and up is not None:
            candidate = 0.5 * (up.detuning - lo.detuning)
            if s_b is None:
                s_b, fixed_by = candidate, j
            elif abs(candidate - s_b) > 1e-9 * max(1.0, abs(s_b)):
                raise DomainError(
                    "sideband detunings admit no time-independent frame: "
                    f"cavity {fixed_by} requires a mechanical frame shift of "
                    f"{s_b:.6g} rad/s but cavity {j} requires {candidate:.6g}"
                )
    if s_b is None:
        s_b = 0.0
    shifts = []
    for j in (1, 2):
        lo, up = ds.get(j, LOWER), ds.get(j, UPPER)
        if lo is not None:
            shifts.append(lo.detuning + s_b)
        elif up is not None:
            shifts.append(up.detuning - s_b)
        else:
            shifts.append(0.0)
    return shifts[0], shifts[1], s_b


def _rotation_block(detuning: float, half_width: float) -> NDArray[np.float64]:
    return np.array([[-half_width, detuning], [-detuning, -half_width]])


def build_linear_model(
    cfg: SystemConfig,
    ds: DriveSet,
    *,
    port_occupancies: dict[str, float] | None = None,
) -> LinearModel:
    """Assemble the drift and diffusion matrices for a drive configuration.

    Couplings are g_j_pm = sqrt(gamma_j_pm kappa_j) / 2 exp(i phase).
    Each cavity decays through its external port and an internal loss port,
    both at the cavity's thermal occupancy unless overridden through
    ``port_occupancies`` (keys like ``"cav1_ext"``, ``"cav2_int"``,
    ``"mech"``). Unstable models are allowed here; the steady-state solver
    rejects them.

    Raises
    ------
    DomainError
        If a cavity is outside the resolved-sideband regime or the drive
        detunings admit no time-independent rotating frame.
    """
    for i in (1, 2):
        if cfg.mech.omega / cfg.cavity(i).kappa <= 5.0:
            raise DomainError(
                f"cavity {i} violates the resolved-sideband condition; the "
                "rotating-wave model does not apply"
            )
    occ = port_occupancies or {}
    s1, s2, s_b = _solve_frame_shifts(ds)

    a = np.zeros((6, 6))
    c = np.zeros((6, 6), dtype=complex)
    # mode detunings relative to the shifted frames
    for mode, (shift, half) in enumerate(
        [
            (s1, cfg.cavity(1).kappa / 2.0),
            (s2, cfg.cavity(2).kappa / 2.0),
            (s_b, cfg.mech.gamma / 2.0),
        ]
    ):
        delta = -shift
        i = 2 * mode
        a[i : i + 2, i : i + 2] = _rotation_block(delta, half)
        c[i, i] = -1j * delta - half
        c[i + 1, i + 1] = +1j * delta - half

    for j in (1, 2):
        cav = cfg.cavity(j)
        lo, up = ds.get(j, LOWER), ds.get(j, UPPER)
        g_lo = np.sqrt(ds.rate(j, LOWER) * cav.kappa) / 2.0 * np.exp(1j * (lo.phase if lo else 0.0))
        g_up = np.sqrt(ds.rate(j, UPPER) * cav.kappa) / 2.0 * np.exp(1j * (up.phase if up else 0.0))
        if g_lo == 0 and g_up == 0:
            continue
        i = 2 * (j - 1)
        # cavity quadratures driven by the mechanics and vice versa
        a[i : i + 2, 4:6] = np.array(
            [
                [g_lo.imag + g_up.imag, g_lo.real - g_up.real],
                [-(g_lo.real + g_up.real), g_lo.imag - g_up.imag],
            ]
        )
        a[4:6, i : i + 2] = np.array(
            [
                [-g_lo.imag + g_up.imag, g_lo.real - g_up.real],
                [-(g_lo.real + g_up.real), -g_lo.imag - g_up.imag],
            ]
        )
        # complex-mode couplings: da/dt = -i(g_lo b + g_up b+), etc.
        c[i, 4] += -1j * g_lo
        c[i, 5] += -1j * g_up
        c[i + 1, 5] += 1j * np.conj(g_lo)
        c[i + 1, 4] += 1j * np.conj(g_up)
        c[4, i] += -1j * np.conj(g_lo)
        c[4, i + 1] += -1j * g_up
        c[5, i + 1] += 1j * g_lo
        c[5, i] += 1j * np.conj(g_up)

    channels = []
    for j in (1, 2):
        cav = cfg.cavity(j)
        channels.append(
            InputChannel(f"cav{j}_ext", j - 1, cav.kappa_ext, occ.get(f"cav{j}_ext", cav.n_thermal))
        )
        if cav.kappa_int > 0:
            channels.append(
                InputChannel(f"cav{j}_int", j - 1, cav.kappa_int, occ.get(f"cav{j}_int", cav.n_thermal))
            )
    channels.append(InputChannel("mech", 2, cfg.mech.gamma, occ.get("mech", cfg.mech.n_thermal)))

    d = np.zeros((6, 6))
    for ch in channels:
        i = 2 * ch.mode
        d[i : i + 2, i : i + 2] += ch.rate * ch.variance * np.eye(2)

    return LinearModel(
        drift=a,
        diffusion=d,
        basis=BASIS,
        channels=tuple(channels),
        complex_drift=c,
        frame_shifts=(s1, s2, s_b),
        cfg=cfg,
        ds=ds,
    )


def steady_covariance(m: LinearModel) -> CovarianceMatrix:
    """Solve A V + V A^T + D = 0 for the steady-state covariance.

    Raises
    ------
    InstabilityError
        If the drift matrix has an eigenvalue with non-negative real part.
    NumericalError
        If the solver fails or the residual exceeds 1e-10 ||D||.
    """
    max_re = m.max_real_eigenvalue
    if max_re >= 0.0:
        raise InstabilityError(
            f"drift matrix is not stable (max Re eigenvalue {max_re:.4g} rad/s)"
        )
    try:
        v = solve_continuous_lyapunov(m.drift, -m.diffusion)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(m.drift)
        raise NumericalError(f"Lyapunov solve failed (cond(A) = {cond:.3g})") from exc
    v = 0.5 * (v + v.T)
    residual = np.linalg.norm(m.drift @ v + v @ m.drift.T + m.diffusion)
    bound = _LYAPUNOV_RESIDUAL_RTOL * np.linalg.norm(m.diffusion)
    if residual > bound:
        raise NumericalError(
            f"Lyapunov residual {residual:.3g} exceeds {bound:.3g} "
            f"(cond(A) = {np.linalg.cond(m.drift):.3g})"
        )
    return CovarianceMatrix(v)


def mechanical_marginal(v: CovarianceMatrix) -> QuadratureMoments:
    """Mechanical 2x2 block of the covariance as (v1, v2, v12)."""
    blk = v.block(2)
    return QuadratureMoments(v1=float(blk[0, 0]), v2=float(blk[1, 1]), v12=float(blk[0, 1]))


def effective_linewidth(cfg: SystemConfig, ds: DriveSet) -> float:
    """Total mechanical damping gamma_m + sum(gamma_minus - gamma_plus)."""
    rate = cfg.mech.gamma
    for j in (1, 2):
        rate += ds.rate(j, LOWER) - ds.rate(j, UPPER)
    return rate


def spectrum_grid(
    cfg: SystemConfig,
    ds: DriveSet,
    *,
    points: int = 2001,
    span: float | None = None,
) -> NDArray[np.float64]:
    """Symmetric laboratory-offset grid covering the mechanical features.

    The default span is ten effective mechanical linewidths beyond the
    outermost sideband feature (set by the mechanical frame shift when the
    measurement pair is detuned).
    """
    if span is None:
        width = abs(effective_linewidth(cfg, ds))
        _, _, s_b = _solve_frame_shifts(ds)
        span = 10.0 * width + 2.0 * abs(s_b)
    return np.linspace(-span, span, points)


def output_spectrum(
    m: LinearModel,
    cavity_index: int,
    grid: NDArray[np.float64] | None = None,
    *,
    points: int = 2001,
) -> Spectrum:
    """Emitted photon-flux spectral density of one cavity.

    The output field is sqrt(kappa_ext) a - a_in. Writing it in terms of all
    input channels through the complex-mode transfer matrix,
    a_out(w) = sum_c [A_c(w) a_c,in(w) + B_c(w) a_c,in+(w)], the emitted
    photon flux density is sum_c |A_c|^2 n_c + |B_c|^2 (n_c + 1). Vacuum
    inputs through the direct coefficients contribute nothing, so an
    undriven cavity reports exactly zero; the anomalous coefficients carry
    the Stokes-scattered (n + 1) flux and hence the sideband asymmetry. The
    result is divided by kappa_ext / kappa so integrated sideband fluxes
    equal scattering rates times quadrature moments.

    Parameters
    ----------
    m:
        Linear model from :func:`build_linear_model`.
    cavity_index:
        Cavity whose output is analyzed (1 or 2).
    grid:
        Laboratory frequency offsets from that cavity's resonance (rad/s).
        Defaults to :func:`spectrum_grid`.
    """
    if cavity_index not in (1, 2):
        raise DomainError(f"cavity index must be 1 or 2, got {cavity_index}")
    if not m.is_stable:
        raise InstabilityError("cannot evaluate the spectrum of an unstable model")
    if grid is None:
        grid = spectrum_grid(m.cfg, m.ds, points=points)
    grid = np.asarray(grid, dtype=float)

    cav = m.cfg.cavity(cavity_index)
    shift = m.frame_shifts[cavity_index - 1]
    warnings: list[str] = []
    if np.max(np.abs(grid)) > cav.kappa / 2.0:
        warnings.append(
            "grid extends beyond half the cavity linewidth where the "
            "rotating-wave model loses accuracy"
        )

    b = m.noise_input_matrix()
    occ = np.array([ch.occupancy for ch in m.channels])
    ext_col = next(
        2 * k for k, ch in enumerate(m.channels) if ch.label == f"cav{cavity_index}_ext"
    )
    out_row = 2 * (cavity_index - 1)
    sqrt_ext = np.sqrt(cav.kappa_ext)
    eye = np.eye(6, dtype=complex)
    unit = np.zeros(6, dtype=complex)
    unit[out_row] = 1.0

    flux = np.empty_like(grid)
    for i, w_lab in enumerate(grid):
        w = w_lab - shift
        # row of the resolvent reaching the output mode: solve the adjoint
        row = np.linalg.solve((-1j * w * eye - m.complex_drift).T, unit)
        r = sqrt_ext * (row @ b)
        r[ext_col] -= 1.0
        direct = np.abs(r[0::2]) ** 2
        anomalous = np.abs(r[1::2]) ** 2
        flux[i] = float(direct @ occ + anomalous @ (occ + 1.0))

    meta = {
        "cavity": cavity_index,
        "drives": m.ds.digest(),
        "units": "offset rad/s; flux photons/s/Hz emitted, scattered-photon units",
        "collection_efficiency": cav.external_fraction,
        "frame_shift": shift,
        "warnings": tuple(warnings),
    }
    return Spectrum(freq=grid, flux=flux / cav.external_fraction, meta=meta)


def driven_response(
    cfg: SystemConfig,
    ds: DriveSet,
    probe_cavity: int,
    probe_grid: NDArray[np.float64],
) -> NDArray[np.complex128]:
    """Reflection coefficient S11 of a weak probe on one cavity.

    S11(w) = 1 - kappa_ext chi_eff(w), where chi_eff is the probe-frequency
    diagonal of the dressed resolvent (-i w I - C)^-1 in the complex-mode
    basis, including the optomechanical self-energy from all drives. A
    transparency window of width gamma_m + sum(gamma_minus - gamma_plus)
    opens at the sideband condition.

    ``probe_grid`` holds laboratory offsets from the probe cavity resonance.
    """
    if probe_cavity not in (1, 2):
        raise DomainError(f"cavity index must be 1 or 2, got {probe_cavity}")
    m = build_linear_model(cfg, ds)
    if not m.is_stable:
        raise InstabilityError("cannot evaluate the driven response of an unstable model")
    shift = m.frame_shifts[probe_cavity - 1]
    cav = cfg.cavity(probe_cavity)
    idx = 2 * (probe_cavity - 1)
    eye = np.eye(6, dtype=complex)
    unit = np.zeros(6, dtype=complex)
    unit[idx] = 1.0

    grid = np.asarray(probe_grid, dtype=float)
    s11 = np.empty(grid.shape, dtype=complex)
    for i, w_lab in enumerate(grid):
        w = w_lab - shift
        green = np.linalg.solve(-1j * w * eye - m.complex_drift, unit)
        s11[i] = 1.0 - cav.kappa_ext * green[idx]
    return s11


def transparency_window_fwhm(
    cfg: SystemConfig,
    ds: DriveSet,
    probe_cavity: int,
    *,
    points: int = 801,
    span_factor: float = 6.0,
) -> float:
    """Fitted full width at half maximum of the transparency window.

    Samples the complex reflection across the mechanically induced
    interference feature and fits a single complex pole on a linear
    background, S(w) = c0 + c1 w + D / (-i (w - w0) + fwhm / 2). The fitted
    pole width is the window's FWHM; in the weak-coupling limit it equals
    the total mechanical damping gamma_m + sum(gamma_minus - gamma_plus).
    """
    from scipy.optimize import least_squares

    width_guess = abs(effective_linewidth(cfg, ds))
    grid = np.linspace(-span_factor * width_guess, span_factor * width_guess, points)
    s11 = driven_response(cfg, ds, probe_cavity, grid)

    edge = 0.5 * (s11[0] + s11[-1])
    peak = int(np.argmax(np.abs(s11 - edge)))
    d0 = (s11[peak] - edge) * width_guess / 2.0
    p0 = np.array(
        [edge.real, edge.imag, 0.0, 0.0, d0.real, d0.imag, grid[peak], width_guess]
    )

    def residuals(p):
        c0 = p[0] + 1j * p[1]
        c1 = p[2] + 1j * p[3]
        d = p[4] + 1j * p[5]
        model = c0 + c1 * grid + d / (-1j * (grid - p[6]) + p[7] / 2.0)
        diff = model - s11
        return np.concatenate([diff.real, diff.imag])

    sol = least_squares(residuals, p0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not sol.success or sol.x[7] <= 0:
        raise NumericalError("transparency window fit did not converge")
    return float(sol.x[7])


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    """Serialize a spectrum as CSV with `# key: value` metadata comments."""
    lines = []
    for key, value in spectrum.meta.items():
        if key == "warnings":
            for w in value:
                lines.append(f"# warning: {w}")
        else:
            lines.append(f"# {key}: {value}")
    lines.append("offset_hz,flux")
    for f, s in zip(spectrum.freq, spectrum.flux):
        lines.append(f"{f / (2.0 * np.pi):.17g},{s:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
