"""Dense linear algebra on a truncated Fock space.

All operators are dense complex ``numpy`` arrays of shape ``(dim, dim)``;
pure states are complex vectors of shape ``(dim,)`` and density matrices are
``(dim, dim)`` arrays. ``dim`` is the Fock cutoff: levels ``0 .. dim-1`` are
kept.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    NotPositiveSemidefiniteError,
    TruncationWarning,
    UndefinedStateError,
)

__all__ = [
    "annihilation",
    "creation",
    "number",
    "parity",
    "displacement",
    "fock_state",
    "coherent_state",
    "cat_state",
    "normalize",
    "expectation",
    "hermitize",
    "trace_distance",
    "state_fidelity",
    "project_to_density",
    "check_density_matrix",
]


def _check_dim(dim: int) -> int:
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidDimensionError(f"Fock cutoff must be an integer >= 2, got {dim!r}")
    return int(dim)


def _warn_truncation(dim: int, alpha: complex, where: str) -> None:
    # Soft guard: a coherent amplitude with |alpha|^2 beyond a quarter of the
    # cutoff starts to populate the discarded tail.
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            f"{where}: |alpha|^2 = {abs(alpha)**2:.3g} exceeds dim/4 = {dim / 4:.3g}; "
            "results may be truncation limited",
            TruncationWarning,
            stacklevel=3,
        )


def annihilation(dim: int) -> np.ndarray:
    """Annihilation operator ``a`` with ``<n-1|a|n> = sqrt(n)``."""
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation(dim: int) -> np.ndarray:
    """Creation operator ``a^dag``."""
    return annihilation(dim).conj().T


def number(dim: int) -> np.ndarray:
    """Photon-number operator ``a^dag a`` (diagonal ``0 .. dim-1``)."""
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def parity(dim: int) -> np.ndarray:
    """Photon-number parity operator ``exp(i pi a^dag a)`` (diagonal +-1)."""
    dim = _check_dim(dim)
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def displacement(dim: int, alpha: complex) -> np.ndarray:
    """Displacement operator ``D(alpha) = exp(alpha a^dag - alpha* a)``.

    Computed with a dense matrix exponential, which is unitary on the kept
    levels up to truncation leakage. A :class:`TruncationWarning` is issued
    when ``|alpha|^2 > dim / 4``.
    """
    dim = _check_dim(dim)
    alpha = complex(alpha)
    _warn_truncation(dim, alpha, "displacement")
    a = annihilation(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def fock_state(dim: int, n: int) -> np.ndarray:
    """Number state ``|n>``."""
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock index {n} outside cutoff {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def coherent_state(dim: int, alpha: complex) -> np.ndarray:
    """Coherent state ``|alpha>``, renormalized on the truncated space.

    Amplitudes are generated by the stable recurrence
    ``c_{n+1} = c_n alpha / sqrt(n+1)`` starting from ``c_0 = exp(-|alpha|^2/2)``.
    """
    dim = _check_dim(dim)
    alpha = complex(alpha)
    _warn_truncation(dim, alpha, "coherent_state")
    c = np.empty(dim, dtype=complex)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(dim - 1):
        c[n + 1] = c[n] * alpha / np.sqrt(n + 1.0)
    return normalize(c)


def cat_state(dim: int, alpha: complex, sign: int = +1) -> np.ndarray:
    """Even (``sign=+1``) or odd (``sign=-1``) cat state ``|alpha> + sign |-alpha>``.

    The returned vector is normalized. An odd cat at ``alpha = 0`` vanishes
    identically and raises :class:`UndefinedStateError`.
    """
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    alpha = complex(alpha)
    if sign == -1 and alpha == 0:
        raise UndefinedStateError("odd cat state is undefined at alpha = 0")
    psi = coherent_state(dim, alpha) + sign * coherent_state(dim, -alpha)
    return normalize(psi)


def normalize(psi: np.ndarray) -> np.ndarray:
    """Return ``psi / ||psi||``."""
    nrm = float(np.linalg.norm(psi))
    if nrm == 0.0:
        raise UndefinedStateError("cannot normalize the zero vector")
    return psi / nrm


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """Expectation value of ``op`` in a pure state (1-D) or density matrix (2-D)."""
    if state.ndim == 1:
        if op.shape[0] != state.shape[0]:
            raise DimensionMismatchError(
                f"operator dim {op.shape[0]} vs state dim {state.shape[0]}"
            )
        return complex(np.vdot(state, op @ state))
    if op.shape != state.shape:
        raise DimensionMismatchError(f"operator shape {op.shape} vs state shape {state.shape}")
    return complex(np.trace(op @ state))


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part ``(m + m^dag) / 2``."""
    return 0.5 * (m + m.conj().T)


def _as_density(state: np.ndarray) -> np.ndarray:
    return np.outer(state, state.conj()) if state.ndim == 1 else state


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance ``0.5 ||a - b||_1`` between two states.

    Accepts pure states (1-D) and density matrices (2-D) in any combination;
    for two pure states the closed form ``sqrt(1 - |<a|b>|^2)`` is used.
    """
    if a.ndim == 1 and b.ndim == 1:
        if a.shape != b.shape:
            raise DimensionMismatchError(f"state dims differ: {a.shape} vs {b.shape}")
        ov = abs(np.vdot(normalize(a), normalize(b))) ** 2
        return float(np.sqrt(max(0.0, 1.0 - ov)))
    ra, rb = _as_density(a), _as_density(b)
    if ra.shape != rb.shape:
        raise DimensionMismatchError(f"state dims differ: {ra.shape} vs {rb.shape}")
    diff = hermitize(ra - rb)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity ``F(a, b)`` in [0, 1]; ``|<a|b>|^2`` for two pure states."""
    if a.ndim == 1 and b.ndim == 1:
        return float(abs(np.vdot(normalize(a), normalize(b))) ** 2)
    if a.ndim == 1:
        return float(np.real(np.vdot(a, _as_density(b) @ a)))
    if b.ndim == 1:
        return float(np.real(np.vdot(b, _as_density(a) @ b)))
    # General mixed-mixed case via the eigenbasis of one factor.
    w, v = np.linalg.eigh(hermitize(a))
    w = np.clip(w, 0.0, None)
    sqrt_a = (v * np.sqrt(w)) @ v.conj().T
    inner = sqrt_a @ _as_density(b) @ sqrt_a
    s = np.clip(np.linalg.eigvalsh(hermitize(inner)), 0.0, None)
    return float(np.sum(np.sqrt(s)) ** 2)


def project_to_density(rho: np.ndarray, clip_tol: float = 1e-8) -> np.ndarray:
    """Repair a numerically almost-positive matrix into a density matrix.

    The input is hermitized and unit-trace normalized. Eigenvalues in
    ``[-clip_tol, 0)`` are clipped to zero (followed by renormalization);
    anything below ``-clip_tol`` raises
    :class:`NotPositiveSemidefiniteError`.
    """
    rho = hermitize(rho)
    tr = np.trace(rho).real
    if tr <= 0:
        raise NotPositiveSemidefiniteError(f"candidate state has trace {tr:.3e}")
    rho = rho / tr
    w, v = np.linalg.eigh(rho)
    if w.min() >= 0.0:
        return rho
    if w.min() < -clip_tol:
        raise NotPositiveSemidefiniteError(
            f"minimum eigenvalue {w.min():.3e} below -{clip_tol:.1e}"
        )
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    """Assert Hermiticity, unit trace and positivity of ``rho`` within ``atol``."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatchError(f"density matrix must be square, got {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > atol:
        raise NotPositiveSemidefiniteError(f"not Hermitian: max deviation {herm:.3e}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > max(atol, 1e-8):
        raise NotPositiveSemidefiniteError(f"trace {tr:.6f} differs from 1")
    wmin = float(np.linalg.eigvalsh(hermitize(rho)).min())
    if wmin < -max(atol, 1e-8):
        raise NotPositiveSemidefiniteError(f"minimum eigenvalue {wmin:.3e}")
