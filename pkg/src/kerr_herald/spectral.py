"""Spectral analysis of the no-click generators.

Pure path: eigenpairs of the non-Hermitian no-click generator ``H_eff``; the
eigenvector with the largest imaginary eigenvalue part is the pseudo-steady
state of the ideal photon counter, and imaginary gaps are conditional
relaxation rates.

Mixed path: eigenmatrices of the trace-decaying generator ``L + N`` for finite
detection efficiency, thermal occupation, or a displaced detection frame; real
parts order lifetimes and the dominant Hermitian normalizable eigenmatrix is
the pseudo-steady density matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateTopError,
    ExceptionalPointError,
    InsufficientDecayError,
    MissingParityStructureError,
    NonNormalizableError,
)
from .fock import hermitize, normalize, parity, project_to_density, trace_distance
from .model import unvec, vec
from .propagate import EigenPropagator

__all__ = [
    "PureSpectrum",
    "MixedSpectrum",
    "RateReport",
    "FlowCheckResult",
    "pure_spectrum",
    "stable_pseudo_state",
    "parity_rates",
    "mixed_spectrum",
    "mixed_pseudo_state",
    "stability_flow_check",
    "spectrum_to_dict",
]


@dataclass
class RateReport:
    """Rates attached to a pseudo-steady state (units of kappa).

    ``gamma_rel`` is the conditional relaxation rate (imaginary or real
    spectral gap), ``gamma_asy`` the slow parity-sector asymmetry rate (nan
    when parity is not resolved), ``gamma_jump`` the click rate that ends the
    no-click interval (nan when the caller did not supply it), and ``e_psi``
    the energy expectation of the selected state.
    """

    gamma_rel: float
    gamma_asy: float = float("nan")
    gamma_jump: float = float("nan")
    e_psi: float = float("nan")
    stable_index: int = -1

    def to_dict(self) -> dict:
        return {
            "gamma_rel": self.gamma_rel,
            "gamma_asy": self.gamma_asy,
            "gamma_jump": self.gamma_jump,
            "e_psi": self.e_psi,
            "stable_index": self.stable_index,
        }


@dataclass
class PureSpectrum:
    """Eigensystem of the non-Hermitian no-click generator.

    Eigenvalues are sorted by descending imaginary part (longest lived first);
    ``right_vectors`` columns are unit norm with the largest-magnitude
    component rotated to the positive real axis. ``parity_labels`` holds
    'even' / 'odd' / 'none' per eigenvector.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    parity_labels: tuple[str, ...]
    stable_index: int
    condition_number: float
    generator: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def sector_indices(self, label: str) -> list[int]:
        """Positions (in sorted order) of the eigenpairs with a given parity label."""
        return [i for i, lab in enumerate(self.parity_labels) if lab == label]


@dataclass
class MixedSpectrum:
    """Eigensystem of the trace-decaying generator ``L + N``.

    Eigenvalues sorted by descending real part. ``right_matrices[k]`` and
    ``left_matrices[k]`` form a biorthonormal family:
    ``Tr(left[j]^dag right[k]) = delta_jk``. ``hermitian_flags[k]`` marks
    eigenmatrices that are Hermitian up to a global phase (the candidates for
    conditional density matrices).
    """

    eigenvalues: np.ndarray
    right_matrices: np.ndarray
    left_matrices: np.ndarray
    hermitian_flags: np.ndarray
    condition_number: float
    dim: int
    generator: np.ndarray = field(repr=False)


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Normalize columns and rotate the largest-magnitude entry to be real positive."""
    out = vectors / np.linalg.norm(vectors, axis=0, keepdims=True)
    idx = np.argmax(np.abs(out), axis=0)
    picks = out[idx, np.arange(out.shape[1])]
    phases = picks / np.abs(picks)
    return out / phases[None, :]


def pure_spectrum(
    h_eff: np.ndarray,
    *,
    parity_threshold: float = 0.99,
    cond_limit: float = 1e10,
    residual_tol: float = 1e-8,
) -> PureSpectrum:
    """Diagonalize the no-click generator and label parity sectors.

    Raises :class:`ExceptionalPointError` when the eigenvector basis condition
    number exceeds ``cond_limit`` (coalescing eigenvectors), and verifies each
    eigenpair residual against ``residual_tol * ||H_eff||``.
    """
    h_eff = np.asarray(h_eff, dtype=complex)
    w, v = sla.eig(h_eff)
    order = np.lexsort((w.real, -w.imag))
    w = w[order]
    v = _fix_phases(v[:, order])

    cond = float(np.linalg.cond(v))
    if cond > cond_limit:
        raise ExceptionalPointError(
            f"eigenvector condition number {cond:.3e} exceeds {cond_limit:.1e}; "
            "spectrum is near an exceptional point"
        )

    scale = float(np.linalg.norm(h_eff, 2))
    res = np.linalg.norm(h_eff @ v - v * w[None, :], axis=0)
    if np.any(res > residual_tol * scale):
        raise ExceptionalPointError(
            f"eigenpair residual {res.max():.3e} above {residual_tol:.1e} * ||H||"
        )

    d = h_eff.shape[0]
    pi_op = parity(d)
    commutes = float(np.max(np.abs(h_eff @ pi_op - pi_op @ h_eff))) <= 1e-10 * max(
        1.0, float(np.max(np.abs(h_eff)))
    )
    labels = []
    if commutes:
        pvals = np.real(np.einsum("ij,jk,ki->i", v.conj().T, pi_op, v))
        for p in pvals:
            if p > parity_threshold:
                labels.append("even")
            elif p < -parity_threshold:
                labels.append("odd")
            else:
                labels.append("none")
    else:
        labels = ["none"] * d

    return PureSpectrum(
        eigenvalues=w,
        right_vectors=v,
        parity_labels=tuple(labels),
        stable_index=0,
        condition_number=cond,
        generator=h_eff,
    )


def _degenerate_members(values: np.ndarray, ref: complex, tol: float) -> np.ndarray:
    return np.flatnonzero(np.abs(values - ref) < tol)


def stable_pseudo_state(
    spectrum: PureSpectrum,
    *,
    gamma_jump: float = float("nan"),
    degeneracy_tol: float | None = None,
) -> tuple[np.ndarray, RateReport]:
    """Pseudo-steady state of the ideal counter: the slowest-decaying eigenvector.

    Selection maximizes the imaginary part of the eigenvalue. A tie within the
    degeneracy tolerance raises :class:`DegenerateTopError` carrying the
    eigenvalue and the offending subspace. ``gamma_rel`` in the report is the
    imaginary gap to the next eigenvalue; ``e_psi`` is the real part of the
    selected eigenvalue, which equals the energy expectation of the state in
    the Hermitian part of the generator.
    """
    w = spectrum.eigenvalues
    radius = float(np.max(np.abs(w))) if w.size else 0.0
    tol = degeneracy_tol if degeneracy_tol is not None else max(1e-9 * radius, 1e-12)

    top_im = w[0].imag
    near = np.flatnonzero(np.abs(w.imag - top_im) < max(tol, 1e-10))
    if near.size > 1:
        raise DegenerateTopError(
            f"{near.size} eigenvalues share the maximal imaginary part within {tol:.1e}",
            eigenvalue=w[0],
            subspace=spectrum.right_vectors[:, near],
        )

    psi = spectrum.right_vectors[:, 0]
    gamma_rel = float(top_im - w[1].imag) if w.size > 1 else float("nan")
    report = RateReport(
        gamma_rel=gamma_rel,
        gamma_jump=float(gamma_jump),
        e_psi=float(w[0].real),
        stable_index=0,
    )
    return psi, report


def parity_rates(spectrum: PureSpectrum, *, gamma_jump: float = float("nan")) -> RateReport:
    """Parity-resolved rates for generators that commute with photon parity.

    Both parity-sector tops are conditionally stable; the slow asymmetry rate
    ``gamma_asy`` is the imaginary gap between them, and ``gamma_rel`` is the
    smallest within-sector imaginary gap (the rate at which a jump's parity
    flip relaxes back onto the new sector top).
    """
    even = spectrum.sector_indices("even")
    odd = spectrum.sector_indices("odd")
    if not even or not odd:
        raise MissingParityStructureError(
            "spectrum carries no two-sector parity labeling; "
            "parity rates are undefined"
        )
    w = spectrum.eigenvalues
    top_e, top_o = even[0], odd[0]
    gamma_asy = float(abs(w[top_e].imag - w[top_o].imag))
    gaps = []
    for sector in (even, odd):
        if len(sector) > 1:
            gaps.append(float(w[sector[0]].imag - w[sector[1]].imag))
    if not gaps:
        raise MissingParityStructureError("parity sectors too small for a within-sector gap")
    global_top = top_e if w[top_e].imag >= w[top_o].imag else top_o
    return RateReport(
        gamma_rel=float(min(gaps)),
        gamma_asy=gamma_asy,
        gamma_jump=float(gamma_jump),
        e_psi=float(w[global_top].real),
        stable_index=int(global_top),
    )


def mixed_spectrum(
    liou: np.ndarray,
    weight: np.ndarray,
    *,
    cond_limit: float = 1e10,
    hermitian_tol: float = 1e-6,
) -> MixedSpectrum:
    """Diagonalize ``L + N`` into a biorthonormal eigenmatrix family.

    Right eigenmatrices are Frobenius normalized with fixed phases; left
    eigenmatrices are the dual basis built from the inverse eigenvector
    matrix, so biorthonormality holds to solver precision by construction.
    An eigenmatrix is flagged Hermitian-sector when it is Hermitian up to a
    global phase, i.e. ``|Tr(r r)| / Tr(r^dag r)`` is within
    ``hermitian_tol`` of 1, and its eigenvalue is real at the same scale.
    """
    gen = np.asarray(liou, dtype=complex) + np.asarray(weight, dtype=complex)
    w, v = sla.eig(gen)
    order = np.lexsort((w.imag, -w.real))
    w = w[order]
    v = _fix_phases(v[:, order])
    cond = float(np.linalg.cond(v))
    if cond > cond_limit:
        raise ExceptionalPointError(
            f"eigenmatrix basis condition number {cond:.3e} exceeds {cond_limit:.1e}"
        )
    v_inv = sla.inv(v)

    n2 = gen.shape[0]
    d = int(round(np.sqrt(n2)))
    rights = np.empty((n2, d, d), dtype=complex)
    lefts = np.empty((n2, d, d), dtype=complex)
    flags = np.zeros(n2, dtype=bool)
    radius = float(np.max(np.abs(w)))
    for k in range(n2):
        r = unvec(v[:, k])
        rights[k] = r
        lefts[k] = unvec(v_inv[k, :].conj())
        z = np.trace(r @ r) / np.trace(r.conj().T @ r)
        flags[k] = abs(abs(z) - 1.0) < hermitian_tol and abs(w[k].imag) < max(
            1e-9 * radius, 1e-12
        )
    return MixedSpectrum(
        eigenvalues=w,
        right_matrices=rights,
        left_matrices=lefts,
        hermitian_flags=flags,
        condition_number=cond,
        dim=d,
        generator=gen,
    )


def mixed_pseudo_state(
    spectrum: MixedSpectrum,
    *,
    h0: np.ndarray | None = None,
    trace_tol: float = 1e-10,
    clip_tol: float = 1e-6,
    degeneracy_tol: float | None = None,
) -> tuple[np.ndarray, RateReport]:
    """Pseudo-steady density matrix: dominant Hermitian normalizable eigenmatrix.

    Candidates are Hermitian-sector eigenmatrices with non-negligible trace;
    the one with the largest real eigenvalue part is phase-rotated onto the
    Hermitian axis, positivity-repaired (eigenvalue clip tolerance
    ``-clip_tol``), and unit-trace normalized. ``gamma_rel`` is the real gap
    from the selected eigenvalue to the rest of the spectrum.
    """
    w = spectrum.eigenvalues
    radius = float(np.max(np.abs(w)))
    tol = degeneracy_tol if degeneracy_tol is not None else max(1e-9 * radius, 1e-12)

    candidates = [
        k
        for k in range(w.size)
        if spectrum.hermitian_flags[k]
        and abs(np.trace(spectrum.right_matrices[k])) > trace_tol
    ]
    if not candidates:
        raise NonNormalizableError(
            "no Hermitian eigenmatrix with non-negligible trace; "
            "the conditional evolution has no normalizable pseudo-steady state"
        )
    sel = candidates[0]  # eigenvalues sorted by descending real part
    ties = [k for k in candidates[1:] if abs(w[k] - w[sel]) < tol]
    if ties:
        raise DegenerateTopError(
            "dominant Hermitian eigenvalue is degenerate",
            eigenvalue=w[sel],
            subspace=np.stack([spectrum.right_matrices[k] for k in [sel, *ties]]),
        )

    r = spectrum.right_matrices[sel]
    z = np.trace(r @ r) / np.trace(r.conj().T @ r)
    r = r * np.exp(-0.5j * np.angle(z))
    r = hermitize(r)
    if np.trace(r).real < 0:
        r = -r
    rho = project_to_density(r, clip_tol=clip_tol)

    others = np.abs(w - w[sel]) >= tol
    gamma_rel = float(w[sel].real - np.max(w[others].real)) if np.any(others) else float("nan")
    e_psi = float(np.real(np.trace(h0 @ rho))) if h0 is not None else float("nan")
    report = RateReport(gamma_rel=gamma_rel, e_psi=e_psi, stable_index=int(sel))
    return rho, report


@dataclass
class FlowCheckResult:
    """Outcome of a normalized no-click flow started from a perturbed state."""

    rate: float
    r_squared: float
    diverged: bool
    times: np.ndarray
    distances: np.ndarray


def _fit_loglinear(times: np.ndarray, dists: np.ndarray) -> tuple[float, float]:
    mask = dists > 0
    t, y = times[mask], np.log(dists[mask])
    if t.size < 5:
        raise InsufficientDecayError("fewer than 5 usable points for a log-linear fit")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return float(-slope), float(r2)


def stability_flow_check(
    generator: np.ndarray,
    reference: np.ndarray,
    *,
    expected_rate: float,
    eps: float = 1e-3,
    n_times: int = 120,
    horizon: float = 8.0,
    seed: int = 0,
) -> FlowCheckResult:
    """Perturb a candidate stable state and fit the decay rate of the return flow.

    ``generator`` is the pure no-click generator (``dim x dim``, flow
    ``dpsi/dt = -i H_eff psi``) when ``reference`` is a vector, or the
    vectorized ``L + N`` (``dim^2 x dim^2``) when ``reference`` is a density
    matrix. The flow is renormalized at every sample; the distance to the
    reference is fitted log-linearly over its clean decay window. A growing
    distance marks the state unstable (``diverged``) instead of raising.
    """
    rng = np.random.default_rng(seed)
    t_final = horizon / expected_rate
    times = np.linspace(0.0, t_final, n_times)

    pure = reference.ndim == 1
    if pure:
        gen = -1j * np.asarray(generator, dtype=complex)
        ref = normalize(reference)
        delta = rng.standard_normal(ref.size) + 1j * rng.standard_normal(ref.size)
        delta -= np.vdot(ref, delta) * ref
        x0 = normalize(ref + eps * normalize(delta))
    else:
        gen = np.asarray(generator, dtype=complex)
        ref = reference
        d = ref.shape[0]
        raw = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        pert = hermitize(raw)
        pert -= np.trace(pert).real / d * np.eye(d)
        pert /= np.linalg.norm(pert)
        x0 = vec(project_to_density(ref + eps * pert, clip_tol=1.0))

    prop = EigenPropagator(gen)
    coeffs = prop.coefficients(x0 if not pure else x0)
    states = prop.at_many(coeffs, times)

    dists = np.empty(n_times)
    for i in range(n_times):
        col = states[:, i]
        if pure:
            dists[i] = trace_distance(normalize(col), ref)
        else:
            rho = unvec(col)
            rho = hermitize(rho) / np.trace(rho).real
            dists[i] = trace_distance(rho, ref)

    d0 = dists[0]
    diverged = bool(np.max(dists) > 10.0 * d0 + 1e-12)
    if diverged:
        return FlowCheckResult(float("nan"), 0.0, True, times, dists)

    floor = max(float(dists[-5:].mean()), 1e-14)
    lo, hi = max(30.0 * floor, 1e-13), 0.5 * d0
    window = (dists < hi) & (dists > lo)
    if np.count_nonzero(window) < 5:
        # Distance never cleanly decays inside the horizon.
        raise InsufficientDecayError(
            f"only {np.count_nonzero(window)} samples between floor {floor:.2e} "
            f"and half the initial distance {d0:.2e}"
        )
    rate, r2 = _fit_loglinear(times[window], dists[window])
    return FlowCheckResult(rate, r2, False, times, dists)


def spectrum_to_dict(
    spectrum: PureSpectrum | MixedSpectrum, rates: RateReport | None = None
) -> dict:
    """JSON-compatible view of a spectrum (complex numbers as [re, im] pairs)."""
    w = spectrum.eigenvalues
    out: dict = {
        "kind": "pure" if isinstance(spectrum, PureSpectrum) else "mixed",
        "dim": spectrum.dim,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in w],
        "condition_number": spectrum.condition_number,
    }
    if isinstance(spectrum, PureSpectrum):
        out["parity_labels"] = list(spectrum.parity_labels)
        out["stable_index"] = spectrum.stable_index
    else:
        out["hermitian_flags"] = [bool(f) for f in spectrum.hermitian_flags]
    if rates is not None:
        out["rates"] = rates.to_dict()
    return out
