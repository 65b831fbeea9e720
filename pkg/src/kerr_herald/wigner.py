"""Wigner quasi-probability maps and negativity extraction.

Convention: ``W(alpha) = Tr[rho D(alpha) Pi D(alpha)^dag] / pi``, the
displaced-parity expectation, so the vacuum peaks at ``1/pi`` and the plane
integral of ``2 W`` equals the trace. The production evaluator computes the
same quantity analytically through a Laguerre recurrence on displacement
matrix elements; an ``expm``-based oracle is kept for cross-validation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import TruncationDomainError, TruncationWarning
from .fock import displacement, hermitize, parity
from .model import SystemParams  # noqa: F401  (re-exported for type context)

__all__ = [
    "WignerGrid",
    "NegativityReport",
    "wigner",
    "wigner_displaced_parity",
    "negativity",
]


@dataclass
class WignerGrid:
    """Wigner function sampled on a square phase-space grid.

    ``values[i, j]`` corresponds to ``alpha = re_axis[j] + 1j * im_axis[i]``.
    """

    center: complex
    half_width: float
    resolution: int
    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray
    min_value: float
    argmin: complex

    def integral(self) -> float:
        """Plain grid integral ``sum(W) * cell_area`` (equals Tr(rho)/2 when wide)."""
        dre = self.re_axis[1] - self.re_axis[0] if self.resolution > 1 else 0.0
        dim_ = self.im_axis[1] - self.im_axis[0] if self.resolution > 1 else 0.0
        return float(np.sum(self.values) * dre * dim_)


@dataclass
class NegativityReport:
    """Refined Wigner negativity ``max(0, -min W)`` of a state.

    A refined minimum above ``-1e-9`` reports exactly zero. ``dim`` is the
    (possibly zero-padded) cutoff used for evaluation.
    """

    negativity: float
    min_value: float
    argmin: complex
    center: complex
    half_width: float
    resolution: int
    refine_levels: int
    dim: int


def _as_density(state: np.ndarray) -> np.ndarray:
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return np.asarray(state, dtype=complex)


def _wigner_values(rho: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Displaced-parity Wigner values via the Laguerre recurrence.

    Uses ``W = Tr[rho D(2 alpha) Pi] / pi`` with matrix elements
    ``<n+d|D(A)|n> = sqrt(n! / (n+d)!) A^d e^{-|A|^2/2} L_n^{(d)}(|A|^2)``,
    accumulating one diagonal ``d`` of ``rho`` at a time. All factors are
    arranged to stay O(1), so the recurrence is overflow-free for
    ``|A|^2 = 4 |alpha|^2`` up to the enforced truncation domain.
    """
    rho = hermitize(rho)
    d_dim = rho.shape[0]
    a_big = 2.0 * alphas.ravel().astype(complex)
    x = np.abs(a_big) ** 2

    scale = float(np.max(np.abs(rho))) or 1.0
    total = np.zeros(a_big.size, dtype=float)
    g = np.exp(-0.5 * x).astype(complex)  # A^d e^{-x/2} / sqrt(d!), at d = 0

    for d_off in range(d_dim):
        diag = np.diagonal(rho, offset=d_off)
        signs = (-1.0) ** np.arange(diag.size)
        coeff = diag * signs
        sig = np.abs(coeff) > 1e-17 * scale
        if np.any(sig):
            n_top = int(np.max(np.flatnonzero(sig)))
            # binomial-suppressed prefactor sqrt(n! d! / (n+d)!)
            s = 1.0
            acc = np.zeros(a_big.size, dtype=complex)
            l_prev = np.ones(a_big.size)
            if abs(coeff[0]) > 1e-17 * scale:
                acc += coeff[0] * l_prev
            if n_top >= 1:
                l_cur = 1.0 + d_off - x
                s *= np.sqrt(1.0 / (1.0 + d_off))
                if abs(coeff[1]) > 1e-17 * scale:
                    acc += (coeff[1] * s) * l_cur
                for n in range(1, n_top):
                    l_prev, l_cur = l_cur, ((2 * n + 1 + d_off - x) * l_cur - (n + d_off) * l_prev) / (
                        n + 1
                    )
                    s *= np.sqrt((n + 1.0) / (n + 1.0 + d_off))
                    cn = coeff[n + 1] * s
                    if abs(cn) > 1e-17 * scale:
                        acc += cn * l_cur
            contrib = acc * g
            total += contrib.real if d_off == 0 else 2.0 * contrib.real
        if d_off + 1 < d_dim:
            g = g * a_big / np.sqrt(d_off + 1.0)

    return (total / np.pi).reshape(alphas.shape)


def _check_domain(dim: int, alphas: np.ndarray) -> None:
    worst = float(np.max(np.abs(alphas)) ** 2)
    if worst > dim / 8.0:
        raise TruncationDomainError(
            f"grid reaches |alpha|^2 = {worst:.3g}, beyond dim/8 = {dim / 8.0:.3g}; "
            "enlarge the cutoff (zero-padding suffices for converged states)"
        )


def wigner(
    state: np.ndarray,
    *,
    center: complex = 0.0 + 0.0j,
    half_width: float = 3.0,
    resolution: int = 101,
) -> WignerGrid:
    """Evaluate the Wigner function on a square grid around ``center``.

    The grid must satisfy ``max |alpha|^2 <= dim / 8`` so the displaced state
    stays representable on the cutoff; :class:`TruncationDomainError` is
    raised otherwise.
    """
    rho = _as_density(state)
    dim = rho.shape[0]
    center = complex(center)
    re_axis = center.real + np.linspace(-half_width, half_width, resolution)
    im_axis = center.imag + np.linspace(-half_width, half_width, resolution)
    alphas = re_axis[None, :] + 1j * im_axis[:, None]
    _check_domain(dim, alphas)
    values = _wigner_values(rho, alphas)
    k = int(np.argmin(values))
    return WignerGrid(
        center=center,
        half_width=float(half_width),
        resolution=int(resolution),
        re_axis=re_axis,
        im_axis=im_axis,
        values=values,
        min_value=float(values.ravel()[k]),
        argmin=complex(alphas.ravel()[k]),
    )


def wigner_displaced_parity(state: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Slow reference evaluator: per-point ``Tr[rho D Pi D^dag] / pi`` via expm.

    Cross-validation oracle for :func:`wigner`; cost grows as ``dim^3`` per
    grid point.
    """
    rho = _as_density(state)
    dim = rho.shape[0]
    pi_op = parity(dim)
    flat = np.asarray(alphas, dtype=complex).ravel()
    out = np.empty(flat.size, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        for i, al in enumerate(flat):
            dop = displacement(dim, al)
            val = np.trace(rho @ dop @ pi_op @ dop.conj().T) / np.pi
            out[i] = val.real
    return out.reshape(np.shape(alphas))


def _pad_density(rho: np.ndarray, new_dim: int) -> np.ndarray:
    d = rho.shape[0]
    if new_dim <= d:
        return rho
    out = np.zeros((new_dim, new_dim), dtype=complex)
    out[:d, :d] = rho
    return out


def negativity(
    state: np.ndarray,
    *,
    center: complex | None = None,
    half_width: float | None = None,
    resolution: int = 101,
    refine_levels: int = 3,
    refine_factor: float = 5.0,
    refine_resolution: int = 41,
    zero_threshold: float = 1e-9,
) -> NegativityReport:
    """Wigner negativity ``max(0, -min W)`` with nested grid refinement.

    A coarse scan (default 101 x 101) centered on the field amplitude with a
    spread-derived half-width is followed by ``refine_levels`` nested grids,
    each shrunk by ``refine_factor`` around the running minimum. The state is
    zero-padded so the scan satisfies the cutoff-domain precondition; a
    :class:`TruncationWarning` flags states that still occupy the top levels.
    """
    rho = _as_density(state)
    dim = rho.shape[0]

    pops = np.real(np.diagonal(rho))
    tail = float(np.sum(np.abs(pops[max(0, dim - 3):])))
    if tail > 1e-8:
        warnings.warn(
            f"top-level population {tail:.2e}; negativity may be truncation limited",
            TruncationWarning,
            stacklevel=2,
        )

    nvec = np.arange(dim)
    mean_a = complex(np.sum(np.sqrt(nvec[1:]) * np.diagonal(rho, offset=-1)))
    if center is None:
        center = mean_a
    center = complex(center)
    if half_width is None:
        mean_n = float(nvec @ pops)
        mean_n2 = float((nvec ** 2) @ pops)
        var_n = max(mean_n2 - mean_n ** 2, 0.0)
        half_width = 2.0 + 2.0 * var_n ** 0.25
    half_width = float(half_width)

    # Zero-padding keeps the displaced-parity domain check honest for states
    # that are converged well below their cutoff.
    reach = (abs(center) + np.sqrt(2.0) * half_width) ** 2
    need = int(np.ceil(8.0 * reach)) + 2
    rho_eval = _pad_density(rho, max(dim, need))

    best_min = np.inf
    best_arg = center
    hw = half_width
    ctr = center
    for level in range(refine_levels + 1):
        res = resolution if level == 0 else refine_resolution
        grid = wigner(rho_eval, center=ctr, half_width=hw, resolution=res)
        if grid.min_value < best_min:
            best_min = grid.min_value
            best_arg = grid.argmin
        ctr = best_arg
        hw = hw / refine_factor

    neg = -best_min if best_min < -zero_threshold else 0.0
    return NegativityReport(
        negativity=float(neg),
        min_value=float(best_min),
        argmin=complex(best_arg),
        center=center,
        half_width=half_width,
        resolution=int(resolution),
        refine_levels=int(refine_levels),
        dim=rho_eval.shape[0],
    )
