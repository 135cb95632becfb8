"""Independent brute-force validator: truncated-Fock-space master equation.

After adiabatic elimination of the cavities, each sideband tone pair acts on
the mechanical mode as a single collapse operator
c = sqrt(gamma_minus) e^{i theta_minus} b + sqrt(gamma_plus) e^{i theta_plus} b+,
the engineered squeezed bath, while the thermal environment contributes the
usual pair of operators sqrt(gamma_m (n_th + 1)) b and sqrt(gamma_m n_th) b+.
The steady state is found by a direct linear solve for the null vector of
the Liouvillian on a finite Fock space, with explicit truncation checks, and
provides variances against which the closed-form and Lyapunov routes are
validated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericalError, TruncationError
from .sysmodel import LOWER, UPPER, DriveSet, MechanicalMode

TAIL_THRESHOLD = 1e-6
_TRACE_TOL = 1e-10
_EIGENVALUE_TOL = 1e-10


@dataclass(frozen=True)
class EffectiveDissipators:
    """Collapse operators of the reduced mechanical master equation.

    ``engineered`` holds one (c_minus, c_plus) coefficient pair per tone
    pair, meaning the single operator c_minus b + c_plus b+ with complex
    coefficients in sqrt(rad/s). The thermal pair derived from ``gamma_m``
    and ``n_thermal`` acts as two separate operators and is always present.
    """

    gamma_m: float
    n_thermal: float
    engineered: tuple[tuple[complex, complex], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.gamma_m <= 0:
            raise DomainError("thermal relaxation rate must be positive")
        if self.n_thermal < 0:
            raise DomainError("thermal occupancy must be non-negative")
        object.__setattr__(self, "engineered", tuple(
            (complex(cm), complex(cp)) for cm, cp in self.engineered
        ))

    @classmethod
    def from_drives(cls, mech: MechanicalMode, ds: DriveSet) -> "EffectiveDissipators":
        """Engineered operators for a resonant drive set, one per cavity."""
        pairs = []
        for j in ds.driven_cavities():
            lo, up = ds.get(j, LOWER), ds.get(j, UPPER)
            for d in (lo, up):
                if d is not None and d.detuning != 0.0:
                    raise DomainError("adiabatic reduction requires resonant drives")
            cm = np.sqrt(lo.rate) * np.exp(1j * lo.phase) if lo else 0.0
            cp = np.sqrt(up.rate) * np.exp(1j * up.phase) if up else 0.0
            pairs.append((cm, cp))
        return cls(gamma_m=mech.gamma, n_thermal=mech.n_thermal, engineered=tuple(pairs))

    def collapse_coefficients(self) -> tuple[tuple[complex, complex], ...]:
        """All collapse operators as (coefficient of b, coefficient of b+)."""
        ops = [
            (complex(np.sqrt(self.gamma_m * (self.n_thermal + 1.0))), 0.0 + 0.0j),
            (0.0 + 0.0j, complex(np.sqrt(self.gamma_m * self.n_thermal))),
        ]
        ops.extend(self.engineered)
        return tuple(ops)


@dataclass(frozen=True)
class TruncatedState:
    """Density matrix on a Fock space of dimension ``n_trunc``.

    Valid states are Hermitian, unit trace within 1e-10, have eigenvalues
    above -1e-10, and for a converged result the top-level population must
    stay below 1e-6.
    """

    rho: NDArray[np.complex128]
    n_trunc: int

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (self.n_trunc, self.n_trunc):
            raise DomainError("density matrix shape does not match truncation")
        if abs(np.trace(rho).real - 1.0) > _TRACE_TOL or abs(np.trace(rho).imag) > _TRACE_TOL:
            raise NumericalError(f"state trace {np.trace(rho):.12g} differs from 1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
            raise NumericalError("state is not Hermitian")
        eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if eig.min() < -_EIGENVALUE_TOL:
            raise NumericalError(f"state has negative eigenvalue {eig.min():.3g}")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @property
    def populations(self) -> NDArray[np.float64]:
        return np.diag(self.rho).real

    @property
    def tail_population(self) -> float:
        return float(self.rho[-1, -1].real)


def _lowering(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n)), offsets=1, format="csr", dtype=complex)


def build_liouvillian(d: EffectiveDissipators, n_trunc: int) -> sp.csr_matrix:
    """Matrix of the Lindblad generator on the truncated space.

    Returns the N^2 x N^2 sparse matrix acting on column-stacked density
    matrices: L[rho] = sum_k (c_k rho c_k+ - {c_k+ c_k, rho} / 2). The
    representation is exact on the truncated space.
    """
    if n_trunc < 2:
        raise DomainError("truncation must be at least 2 to represent the mode")
    b = _lowering(n_trunc)
    bdag = b.conj().T
    eye = sp.identity(n_trunc, dtype=complex, format="csr")
    lv = sp.csr_matrix((n_trunc**2, n_trunc**2), dtype=complex)
    for cm, cp in d.collapse_coefficients():
        if cm == 0 and cp == 0:
            continue
        c = (cm * b + cp * bdag).tocsr()
        cdc = (c.conj().T @ c).tocsr()
        lv = lv + sp.kron(c.conj(), c) - 0.5 * sp.kron(eye, cdc) - 0.5 * sp.kron(cdc.T, eye)
    return lv.tocsr()


def _trace_row(n: int) -> NDArray[np.float64]:
    row = np.zeros(n * n)
    row[np.arange(n) * (n + 1)] = 1.0
    return row


def steady_state(lv: sp.spmatrix, *, tail_threshold: float = TAIL_THRESHOLD) -> TruncatedState:
    """Normalized kernel vector of the Liouvillian as a density matrix.

    Solves the trace-constrained linear system obtained by replacing one row
    of L with the trace functional. Kernel uniqueness is checked by solving
    a second system with a different replaced row: a degenerate kernel
    yields inconsistent solutions.

    Raises
    ------
    NumericalError
        If the kernel is degenerate or the solve fails.
    TruncationError
        If the top-level population exceeds ``tail_threshold``.
    """
    size = lv.shape[0]
    n = int(round(np.sqrt(size)))
    if n * n != size:
        raise DomainError("Liouvillian size is not a perfect square")
    trace = _trace_row(n)

    def solve_with_replaced_row(row_index: int) -> NDArray[np.complex128]:
        mat = lv.tolil(copy=True)
        mat[row_index, :] = trace
        rhs = np.zeros(size, dtype=complex)
        rhs[row_index] = 1.0
        try:
            return splu(mat.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise NumericalError(f"steady-state solve failed: {exc}") from exc

    x1 = solve_with_replaced_row(0)
    x2 = solve_with_replaced_row(size - 1)
    if np.max(np.abs(x1 - x2)) > 1e-8 * max(1.0, np.max(np.abs(x1))):
        raise NumericalError(
            "Liouvillian kernel is degenerate: steady state depends on the "
            "imposed constraint row"
        )
    residual = np.linalg.norm(lv @ x1)
    scale = sp.linalg.norm(lv) * np.linalg.norm(x1)
    if residual > 1e-9 * max(scale, 1.0):
        raise NumericalError(f"steady-state residual {residual:.3g} too large")

    rho = x1.reshape((n, n), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    state = TruncatedState(rho=rho, n_trunc=n)
    if state.tail_population > tail_threshold:
        raise TruncationError(
            f"top-level population {state.tail_population:.3g} exceeds "
            f"{tail_threshold:.1g}; increase the truncation"
        )
    return state


def quad_variance(s: TruncatedState, phi: float) -> float:
    """Variance of X_phi = b e^{-i phi} + b+ e^{i phi} in the state."""
    b = _lowering(s.n_trunc).toarray()
    x = b * np.exp(-1j * phi) + b.conj().T * np.exp(1j * phi)
    mean = np.trace(s.rho @ x).real
    second = np.trace(s.rho @ x @ x).real
    return float(second - mean * mean)


def number_occupancy(s: TruncatedState) -> float:
    """Mean phonon number sum_k k p_k."""
    return float(np.arange(s.n_trunc) @ s.populations)


def required_truncation(v1: float, v2: float, *, tail: float = TAIL_THRESHOLD) -> int:
    """Estimate of the Fock truncation needed for a Gaussian steady state.

    The number distribution of a zero-mean Gaussian state falls off
    geometrically with per-pair ratio (v_max - 1) / (v_max + 1) along its
    widest quadrature; the estimate inverts that tail with a safety margin.
    """
    v_max = max(v1, v2, 1.0 + 1e-12)
    ratio = (v_max - 1.0) / (v_max + 1.0)
    if ratio <= 0.0:
        return 8
    levels = 2.0 * np.log(tail / 30.0) / np.log(ratio)
    return int(max(8, np.ceil(levels + 10)))


def converged_steady_state(
    d: EffectiveDissipators,
    *,
    n_start: int = 8,
    n_max: int = 120,
    tail_threshold: float = TAIL_THRESHOLD,
) -> TruncatedState:
    """Steady state at an automatically increased truncation.

    Grows the Fock space by half-steps until the top-level population falls
    below the threshold.
    """
    n = n_start
    while True:
        try:
            return steady_state(build_liouvillian(d, n), tail_threshold=tail_threshold)
        except TruncationError:
            if n >= n_max:
                raise
            n = min(n_max, int(np.ceil(1.5 * n)))
