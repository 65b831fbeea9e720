"""Exact and adaptive propagators for linear flows ``dx/dt = G x``.

The eigendecomposition-based propagator evaluates ``x(t) = V exp(w t) V^-1 x0``
at arbitrary times with no step-size restriction, which keeps stiff Kerr
diagonals (``~K dim^2``) from throttling trajectory ensembles. An adaptive
Runge-Kutta fallback integrates the same flow for cross-validation.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import SolverError

__all__ = ["EigenPropagator", "rk45_segment"]


class EigenPropagator:
    """Closed-form propagator of ``dx/dt = G x`` for a diagonalizable ``G``.

    Parameters
    ----------
    generator : numpy.ndarray
        Square complex matrix ``G``.
    cond_warn : float
        Warn when the eigenvector basis condition number exceeds this value;
        propagation error scales with it.
    """

    def __init__(self, generator: np.ndarray, cond_warn: float = 1e9):
        self.generator = np.asarray(generator, dtype=complex)
        w, v = sla.eig(self.generator)
        self.eigenvalues = w
        self.basis = v
        try:
            self.basis_inv = sla.inv(v)
        except sla.LinAlgError as exc:  # pragma: no cover - defective basis
            raise SolverError("generator eigenbasis is singular") from exc
        self.condition_number = float(np.linalg.cond(v))
        if self.condition_number > cond_warn:
            warnings.warn(
                f"eigenbasis condition number {self.condition_number:.2e}; "
                "propagation may lose accuracy",
                stacklevel=2,
            )

    def coefficients(self, x0: np.ndarray) -> np.ndarray:
        """Expansion coefficients of ``x0`` in the eigenbasis."""
        return self.basis_inv @ x0

    def at(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        """State at time ``t`` given eigenbasis coefficients of the t=0 state."""
        return self.basis @ (np.exp(self.eigenvalues * t) * coeffs)

    def at_many(self, coeffs: np.ndarray, times: np.ndarray) -> np.ndarray:
        """States at several times, stacked as columns of shape ``(n, len(times))``."""
        phases = np.exp(np.multiply.outer(self.eigenvalues, np.asarray(times, dtype=float)))
        return self.basis @ (phases * coeffs[:, None])

    def propagate(self, x0: np.ndarray, t: float) -> np.ndarray:
        """Convenience wrapper ``x(t)`` from ``x(0) = x0``."""
        return self.at(self.coefficients(x0), t)


def rk45_segment(
    generator: np.ndarray,
    x0: np.ndarray,
    t_span: tuple[float, float],
    t_eval: np.ndarray | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-12,
):
    """Integrate ``dx/dt = G x`` with adaptive RK45 and dense output.

    Returns the ``solve_ivp`` result object (``.sol`` interpolates inside the
    span). Used as a cross-validation path for the exact propagator.
    """
    gen = np.asarray(generator, dtype=complex)

    def rhs(_t, y):
        return gen @ y

    sol = solve_ivp(
        rhs,
        t_span,
        np.asarray(x0, dtype=complex),
        method="RK45",
        t_eval=t_eval,
        dense_output=True,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:  # pragma: no cover - scipy failure path
        raise SolverError(f"RK45 integration failed: {sol.message}")
    return sol
