"""Unconditional steady state of the Lindblad generator and semiclassical analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateSteadyStateError, ConvergenceError, SolverError
from .fock import annihilation, number, project_to_density
from .model import (
    KAPPA,
    SystemParams,
    build_liouvillian,
    jump_weight_operator,
    unvec,
    vec,
)

__all__ = [
    "SteadyStateResult",
    "FixedPoint",
    "steady_state",
    "jump_rate",
    "semiclassical_fixed_points",
]


@dataclass
class SteadyStateResult:
    """Steady state of the unconditional master equation.

    Attributes
    ----------
    rho_ss : numpy.ndarray
        Density matrix (Hermitian, unit trace, positive within repair tolerance).
    gamma_jump : float
        Steady click rate of the ideal counter, ``2 Tr(M rho_ss)``.
    mean_a : complex
        Field amplitude ``Tr(a rho_ss)``.
    mean_n : float
        Photon number ``Tr(a^dag a rho_ss)``.
    converged : bool
        Whether the headline photon number drifted less than ``rtol`` when the
        cutoff was raised by 10.
    dim : int
        Fock cutoff actually used.
    cutoff_drift : float
        Absolute drift of ``mean_n`` under the cutoff increase (nan when the
        convergence re-run was skipped).
    residual : float
        Norm of the Liouvillian applied to the returned state.
    """

    rho_ss: np.ndarray
    gamma_jump: float
    mean_a: complex
    mean_n: float
    converged: bool
    dim: int
    cutoff_drift: float = float("nan")
    residual: float = float("nan")


def _null_vector_lu(liou: np.ndarray, dim: int) -> np.ndarray:
    """Trace-normalized null vector of a trace-preserving generator.

    Replaces the redundant last diagonal row with the trace functional and
    solves the bordered system with two rounds of iterative refinement.
    """
    n2 = liou.shape[0]
    trace_row = np.zeros(n2, dtype=complex)
    trace_row[:: dim + 1] = 1.0
    a_mat = liou.copy()
    a_mat[-1, :] = trace_row
    b = np.zeros(n2, dtype=complex)
    b[-1] = 1.0
    lu, piv = sla.lu_factor(a_mat)
    x = sla.lu_solve((lu, piv), b)
    for _ in range(2):
        x += sla.lu_solve((lu, piv), b - a_mat @ x)
    return x


def _null_vector_eig(liou: np.ndarray) -> np.ndarray:
    """Null vector from the eigenvalue of smallest magnitude (diagnostic path)."""
    w, v = sla.eig(liou)
    return v[:, int(np.argmin(np.abs(w)))]


def steady_state(
    params: SystemParams,
    dim: int | None = None,
    *,
    method: str = "lu",
    check_unique: bool = True,
    check_convergence: bool = True,
    rtol: float = 1e-6,
    residual_tol: float = 1e-9,
    drift_tol: float = 1e-3,
) -> SteadyStateResult:
    """Solve ``L rho_ss = 0`` on the truncated space.

    Parameters
    ----------
    method : {"lu", "eig"}
        Null-space extraction: bordered LU solve with iterative refinement
        (default; fast and residual-exact) or dense eigendecomposition.
    check_unique : bool
        Verify the null space is one dimensional via the two smallest singular
        values of ``L`` (second smallest must exceed ``1e-8`` of the largest).
    check_convergence : bool
        Re-run at ``dim + 10`` and compare ``mean_n``; drift beyond
        ``drift_tol * max(1, mean_n)`` raises :class:`ConvergenceError`, drift
        beyond ``rtol * max(1, mean_n)`` only clears the ``converged`` flag.
    """
    d = params.dim() if dim is None else int(dim)
    liou = build_liouvillian(params, d)

    if check_unique:
        svals = sla.svdvals(liou)
        if svals[-2] <= 1e-8 * svals[0]:
            raise DegenerateSteadyStateError(
                f"second-smallest singular value {svals[-2]:.3e} vs largest {svals[0]:.3e}: "
                "null space is not one dimensional"
            )

    if method == "lu":
        x = _null_vector_lu(liou, d)
    elif method == "eig":
        x = _null_vector_eig(liou)
    else:
        raise ValueError(f"unknown method {method!r}")

    rho = project_to_density(unvec(x), clip_tol=1e-8)
    residual = float(np.linalg.norm(liou @ vec(rho)))
    if residual > residual_tol:
        # One fallback: SVD null vector, then re-check.
        _, _, vh = sla.svd(liou)
        rho = project_to_density(unvec(vh[-1].conj()), clip_tol=1e-8)
        residual = float(np.linalg.norm(liou @ vec(rho)))
        if residual > residual_tol:
            raise SolverError(
                f"steady-state residual {residual:.3e} above {residual_tol:.1e}"
            )

    mean_n = float(np.real(np.trace(number(d) @ rho)))
    mean_a = complex(np.trace(annihilation(d) @ rho))
    gamma = jump_rate(rho, jump_weight_operator(params, d))

    converged = True
    drift = float("nan")
    if check_convergence:
        bigger = steady_state(
            params,
            d + 10,
            method=method,
            check_unique=False,
            check_convergence=False,
            residual_tol=residual_tol,
        )
        drift = abs(bigger.mean_n - mean_n)
        scale = max(1.0, abs(mean_n))
        if drift > drift_tol * scale:
            raise ConvergenceError(
                f"mean photon number drifts by {drift:.3e} when the cutoff grows "
                f"from {d} to {d + 10}"
            )
        converged = drift <= rtol * scale

    return SteadyStateResult(
        rho_ss=rho,
        gamma_jump=gamma,
        mean_a=mean_a,
        mean_n=mean_n,
        converged=converged,
        dim=d,
        cutoff_drift=drift,
        residual=residual,
    )


def jump_rate(rho: np.ndarray, weight: np.ndarray) -> float:
    """Ideal-counter click rate ``2 Tr(weight rho)`` for the no-click weight ``M``."""
    return float(2.0 * np.real(np.trace(weight @ rho)))


@dataclass
class FixedPoint:
    """Semiclassical stationary field amplitude and its linear stability."""

    amplitude: complex
    photon_number: float
    stable: bool


def semiclassical_fixed_points(params: SystemParams) -> list[FixedPoint]:
    """Stationary points of the mean-field equation for the single-photon drive.

    Photon numbers solve
    ``4 K^2 n^3 - 4 K delta n^2 + (delta^2 + kappa^2/4) n = |alpha1|^2``
    and amplitudes follow from
    ``alpha = i alpha1 / (i delta - kappa/2 - 2 i K n)``. Stability comes from
    the eigenvalues ``-kappa/2 +- sqrt(|B|^2 - Im(A)^2)`` of the linearization
    with ``A = i delta - kappa/2 - 4 i K n`` and ``B = -2 i K alpha^2``.

    Returns fixed points sorted by photon number. The two-photon drive is not
    part of this reduction; ``alpha2`` is ignored here.
    """
    a1sq = abs(params.alpha1) ** 2
    coeffs = np.array(
        [
            4.0 * params.kerr ** 2,
            -4.0 * params.kerr * params.delta,
            params.delta ** 2 + KAPPA ** 2 / 4.0,
            -a1sq,
        ]
    )
    # np.roots drops leading zeros, which handles the K = 0 linear cavity.
    roots = np.roots(coeffs) if np.any(coeffs[:-1] != 0) else np.array([])
    points: list[FixedPoint] = []
    for r in np.atleast_1d(roots):
        if abs(r.imag) > 1e-9 * (1.0 + abs(r.real)):
            continue
        n = float(r.real)
        if n < -1e-12:
            continue
        n = max(n, 0.0)
        denom = 1j * params.delta - KAPPA / 2.0 - 2j * params.kerr * n
        if denom == 0:
            continue
        alpha = 1j * params.alpha1 / denom
        a_lin = 1j * params.delta - KAPPA / 2.0 - 4j * params.kerr * n
        b_lin = -2j * params.kerr * alpha ** 2
        shift = np.sqrt(max(abs(b_lin) ** 2 - a_lin.imag ** 2, 0.0))
        stable = bool(-KAPPA / 2.0 + shift < -1e-12)
        points.append(FixedPoint(amplitude=complex(alpha), photon_number=n, stable=stable))
    points.sort(key=lambda p: p.photon_number)
    return points
