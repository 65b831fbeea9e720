"""Driven Kerr oscillator: parameters, Hamiltonians, and Liouville-space builders.

Units: the single-photon loss rate ``kappa`` is fixed to 1, so every frequency
and rate in :class:`SystemParams` is quoted in units of kappa and times are in
units of 1/kappa.

Superoperators act on density matrices vectorized column by column
(``rho.reshape(-1, order="F")``), so ``vec(A rho B) = kron(B.T, A) vec(rho)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError
from .fock import annihilation, displacement, number

__all__ = [
    "KAPPA",
    "SystemParams",
    "default_fock_dim",
    "mean_photon_estimate",
    "build_hamiltonian",
    "jump_weight_operator",
    "effective_nonhermitian",
    "displaced_hamiltonian",
    "build_liouvillian",
    "build_conditioned_generators",
    "click_rate",
    "vec",
    "unvec",
    "spre",
    "spost",
    "sandwich",
    "dissipator",
]

# Loss rate; the unit of every other rate in the package.
KAPPA = 1.0

# Dense superoperators above this cutoff get expensive (dim^2 x dim^2 storage
# and O(dim^6) eigendecompositions); warn rather than fail.
MAX_FAST_SUPEROP_DIM = 40


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the driven Kerr oscillator and its detection chain.

    Parameters
    ----------
    delta : float
        Drive-frame detuning (coefficient of ``-delta a^dag a``).
    kerr : float
        Kerr coefficient ``K >= 0`` (coefficient of ``K a^dag a^dag a a``).
    alpha1 : complex
        Single-photon (semiclassical) drive amplitude.
    alpha2 : complex
        Two-photon (parametric) drive amplitude.
    n_th : float
        Thermal occupation of the bath, ``>= 0``.
    eta : float
        Photon-counting detection efficiency in ``[0, 1]``.
    xi : complex
        Local-oscillator displacement of the detected field; the detector
        registers clicks of ``a + xi`` instead of ``a``.
    fock_dim : int or None
        Fock cutoff; ``None`` selects :func:`default_fock_dim`.
    """

    delta: float = 0.0
    kerr: float = 0.0
    alpha1: complex = 0.0
    alpha2: complex = 0.0
    n_th: float = 0.0
    eta: float = 1.0
    xi: complex = 0.0
    fock_dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "kerr", float(self.kerr))
        object.__setattr__(self, "alpha1", complex(self.alpha1))
        object.__setattr__(self, "alpha2", complex(self.alpha2))
        object.__setattr__(self, "n_th", float(self.n_th))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "xi", complex(self.xi))
        if self.kerr < 0:
            raise ValueError(f"kerr must be >= 0, got {self.kerr}")
        if self.n_th < 0:
            raise ValueError(f"n_th must be >= 0, got {self.n_th}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.fock_dim is not None:
            if not isinstance(self.fock_dim, (int, np.integer)) or self.fock_dim < 2:
                raise InvalidDimensionError(f"fock_dim must be an integer >= 2, got {self.fock_dim}")
            object.__setattr__(self, "fock_dim", int(self.fock_dim))
        for name in ("delta", "kerr", "n_th", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def kappa(self) -> float:
        return KAPPA

    def dim(self) -> int:
        """Resolved Fock cutoff (explicit value or heuristic)."""
        return self.fock_dim if self.fock_dim is not None else default_fock_dim(self)

    def with_dim(self, dim: int) -> "SystemParams":
        """Copy of the parameters with an explicit Fock cutoff."""
        return SystemParams(
            delta=self.delta, kerr=self.kerr, alpha1=self.alpha1, alpha2=self.alpha2,
            n_th=self.n_th, eta=self.eta, xi=self.xi, fock_dim=int(dim),
        )

    def to_dict(self) -> dict:
        """JSON-compatible dictionary; complex values become [re, im] pairs."""
        return {
            "delta": self.delta,
            "kerr": self.kerr,
            "alpha1": [self.alpha1.real, self.alpha1.imag],
            "alpha2": [self.alpha2.real, self.alpha2.imag],
            "n_th": self.n_th,
            "eta": self.eta,
            "xi": [self.xi.real, self.xi.imag],
            "fock_dim": self.fock_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        def cplx(v):
            if isinstance(v, (list, tuple)):
                return complex(v[0], v[1])
            return complex(v)

        return cls(
            delta=d.get("delta", 0.0),
            kerr=d.get("kerr", 0.0),
            alpha1=cplx(d.get("alpha1", 0.0)),
            alpha2=cplx(d.get("alpha2", 0.0)),
            n_th=d.get("n_th", 0.0),
            eta=d.get("eta", 1.0),
            xi=cplx(d.get("xi", 0.0)),
            fock_dim=d.get("fock_dim"),
        )


def mean_photon_estimate(params: SystemParams) -> float:
    """Rough steady-state photon number used by the cutoff heuristic.

    Uses the largest real root of the semiclassical cubic when the Kerr term
    is active, and the linear-cavity value otherwise.
    """
    a1sq = abs(params.alpha1) ** 2
    if params.kerr > 0 and a1sq > 0:
        coeffs = [
            4.0 * params.kerr ** 2,
            -4.0 * params.kerr * params.delta,
            params.delta ** 2 + KAPPA ** 2 / 4.0,
            -a1sq,
        ]
        roots = np.roots(coeffs)
        real = roots[np.abs(roots.imag) < 1e-9 * (1 + np.abs(roots.real))].real
        n_est = float(real.max()) if real.size else 0.0
    elif a1sq > 0:
        n_est = a1sq / (params.delta ** 2 + KAPPA ** 2 / 4.0)
    else:
        n_est = 0.0
    return max(n_est, params.n_th)


def default_fock_dim(params: SystemParams) -> int:
    """Cutoff heuristic ``ceil(4 max(n_est, |xi|^2, |alpha2/K|) + 20)``."""
    scales = [mean_photon_estimate(params), abs(params.xi) ** 2]
    if params.kerr > 0:
        scales.append(abs(params.alpha2) / params.kerr)
    elif params.alpha2 != 0:
        # No Kerr confinement for a parametric drive; fall back on the drive
        # amplitude itself as a photon-number scale.
        scales.append(4.0 * abs(params.alpha2))
    return int(math.ceil(4.0 * max(scales) + 20.0))


def _resolve_dim(params: SystemParams, dim: int | None) -> int:
    d = params.dim() if dim is None else int(dim)
    if d < 2:
        raise InvalidDimensionError(f"Fock cutoff must be >= 2, got {d}")
    return d


def build_hamiltonian(params: SystemParams, dim: int | None = None) -> np.ndarray:
    """Drive-frame Hamiltonian.

    ``H0 = -delta n + K a^dag a^dag a a + (alpha1 a^dag + alpha2 a^dag^2 + h.c.)``
    """
    d = _resolve_dim(params, dim)
    a = annihilation(d)
    ad = a.conj().T
    n = number(d)
    h = -params.delta * n + params.kerr * (ad @ ad @ a @ a)
    h += params.alpha1 * ad + np.conj(params.alpha1) * a
    h += params.alpha2 * (ad @ ad) + np.conj(params.alpha2) * (a @ a)
    return h


def jump_weight_operator(params: SystemParams, dim: int | None = None) -> np.ndarray:
    """Hermitian no-click weight ``M = kappa a^dag a / 2``."""
    d = _resolve_dim(params, dim)
    return (KAPPA / 2.0) * number(d)


def effective_nonhermitian(params: SystemParams, dim: int | None = None) -> np.ndarray:
    """Non-Hermitian no-click generator of the pure unraveling, lab frame.

    ``H_eff = H0 + (i kappa / 2)(xi a^dag - xi* a) - (i kappa / 2)(a^dag + xi*)(a + xi)``

    which reduces to ``H0 - i M`` at ``xi = 0``. The no-click evolution of the
    ideal photon counter (eta = 1, n_th = 0) is ``d|psi> = -i H_eff |psi> dt``
    up to normalization. Its spectrum coincides with the displaced-frame
    operator ``displaced_hamiltonian(params) - i M``, and eigenvectors map
    between the frames via the displacement ``D(xi)``.
    """
    d = _resolve_dim(params, dim)
    a = annihilation(d)
    ad = a.conj().T
    h = build_hamiltonian(params, d)
    xi = params.xi
    if xi != 0:
        h = h + (1j * KAPPA / 2.0) * (xi * ad - np.conj(xi) * a)
    c = a + xi * np.eye(d)
    return h - (1j * KAPPA / 2.0) * (c.conj().T @ c)


def displaced_hamiltonian(params: SystemParams, dim: int | None = None) -> np.ndarray:
    """Hermitian part of the no-click generator in the frame displaced by ``xi``.

    ``H0'(xi) = D(xi) H0 D(xi)^dag + (i kappa / 2)(xi a^dag - xi* a)``

    In this frame the detector clicks on bare ``a`` and the no-click weight is
    the undisplaced ``M``.
    """
    d = _resolve_dim(params, dim)
    a = annihilation(d)
    ad = a.conj().T
    dis = displacement(d, params.xi)
    h = dis @ build_hamiltonian(params, d) @ dis.conj().T
    xi = params.xi
    return h + (1j * KAPPA / 2.0) * (xi * ad - np.conj(xi) * a)


# --- Liouville-space helpers (column-stacked vectorization) ---


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec`."""
    d = int(round(math.isqrt(v.size)))
    if d * d != v.size:
        raise InvalidDimensionError(f"vector of length {v.size} is not a square matrix")
    return v.reshape((d, d), order="F")


def spre(op: np.ndarray) -> np.ndarray:
    """Superoperator of left multiplication, ``rho -> op rho``."""
    d = op.shape[0]
    return np.kron(np.eye(d), op)


def spost(op: np.ndarray) -> np.ndarray:
    """Superoperator of right multiplication, ``rho -> rho op``."""
    d = op.shape[0]
    return np.kron(op.T, np.eye(d))


def sandwich(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> left rho right``."""
    return np.kron(right.T, left)


def dissipator(op: np.ndarray) -> np.ndarray:
    """Lindblad dissipator ``D[op] rho = op rho op^dag - {op^dag op, rho} / 2``."""
    opd_op = op.conj().T @ op
    return sandwich(op, op.conj().T) - 0.5 * (spre(opd_op) + spost(opd_op))


def _commutator_super(h: np.ndarray) -> np.ndarray:
    return -1j * (spre(h) - spost(h))


def _warn_large(dim: int) -> None:
    if dim > MAX_FAST_SUPEROP_DIM:
        warnings.warn(
            f"building a {dim * dim} x {dim * dim} superoperator; expect slow dense solves",
            stacklevel=3,
        )


def build_liouvillian(params: SystemParams, dim: int | None = None) -> np.ndarray:
    """Unconditional Lindblad generator of the damped driven Kerr oscillator.

    ``L0 rho = -i [H0, rho] + kappa (n_th + 1) D[a] rho + kappa n_th D[a^dag] rho``
    """
    d = _resolve_dim(params, dim)
    _warn_large(d)
    a = annihilation(d)
    liou = _commutator_super(build_hamiltonian(params, d))
    liou += KAPPA * (params.n_th + 1.0) * dissipator(a)
    if params.n_th > 0:
        liou += KAPPA * params.n_th * dissipator(a.conj().T)
    return liou


def build_conditioned_generators(
    params: SystemParams, dim: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """No-click generators ``(L, N)`` of the displaced photon-counting record.

    Between clicks the unnormalized conditional state evolves as
    ``d rho = (L + N) rho dt`` with

    ``L rho = -i [H0 + (i g / 2)(xi a^dag - xi* a), rho]
              + kappa (n_th + 1)(1 - eta) D[a] rho + kappa n_th D[a^dag] rho``

    ``N rho = -(g / 2) {(a^dag + xi*)(a + xi), rho}``

    where ``g = kappa (n_th + 1) eta`` is the detected-loss rate. ``-Tr(N rho)``
    is the click intensity and ``L + N`` reduces to the unconditional generator
    at ``eta = 0``. A click applies ``rho -> c rho c^dag`` with ``c = a + xi``.
    """
    d = _resolve_dim(params, dim)
    _warn_large(d)
    a = annihilation(d)
    ad = a.conj().T
    g = KAPPA * (params.n_th + 1.0) * params.eta
    h = build_hamiltonian(params, d)
    xi = params.xi
    if xi != 0 and g != 0:
        h = h + (1j * g / 2.0) * (xi * ad - np.conj(xi) * a)
    liou = _commutator_super(h)
    undetected = KAPPA * (params.n_th + 1.0) * (1.0 - params.eta)
    if undetected > 0:
        liou += undetected * dissipator(a)
    if params.n_th > 0:
        liou += KAPPA * params.n_th * dissipator(ad)
    c = a + xi * np.eye(d)
    cdc = c.conj().T @ c
    weight = -(g / 2.0) * (spre(cdc) + spost(cdc))
    return liou, weight


def click_rate(params: SystemParams, rho: np.ndarray) -> float:
    """Detected click intensity ``g Tr[(a^dag + xi*)(a + xi) rho]``.

    Equals ``-Tr(N rho)`` for the conditioned generators and reduces to
    ``2 Tr(M rho)`` for ideal detection (eta = 1, n_th = 0, xi = 0).
    """
    d = rho.shape[0]
    a = annihilation(d)
    c = a + params.xi * np.eye(d)
    g = KAPPA * (params.n_th + 1.0) * params.eta
    return float(g * np.real(np.trace(c.conj().T @ c @ rho)))
