"""Photon-counting quantum trajectories by the waiting-time method.

Between clicks the unnormalized state evolves under a linear generator (the
non-Hermitian no-click generator for pure states, ``L + N`` for density
matrices); its squared norm (trace) is the no-click survival probability, so
each waiting time is found by propagating exactly to the point where the
survival crosses a pre-drawn uniform variate. Jumps apply ``c = a + xi`` and
renormalize.

Per-trajectory randomness comes from
``SeedSequence(master_seed, spawn_key=(index,))``, so ensembles are
reproducible regardless of execution order or worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import multiprocessing
import numpy as np

from .errors import (
    GridMismatchError,
    InsufficientDecayError,
    PureUnravelingError,
    TraceCollapseError,
)
from .fock import normalize, state_fidelity, trace_distance, hermitize
from .model import (
    SystemParams,
    build_conditioned_generators,
    effective_nonhermitian,
    unvec,
    vec,
)
from .propagate import EigenPropagator

__all__ = [
    "Trajectory",
    "EnsembleResult",
    "HeraldReport",
    "RelaxationFit",
    "simulate_sse",
    "simulate_sme",
    "run_ensemble",
    "ensemble_average",
    "detect_heralds",
    "fit_relaxation",
]

_BISECT_RTOL = 1e-10


@dataclass
class Trajectory:
    """One photon-counting record and its sampled observables.

    ``observables`` maps names to arrays on the ``times`` grid: ``"n"``
    (photon number), ``"a"`` (complex field amplitude), ``"parity"``, and
    ``"trace_dist_ref"`` when a reference state was supplied. Samples that
    coincide with a jump instant show the post-jump state.
    """

    times: np.ndarray
    observables: dict[str, np.ndarray]
    jump_times: np.ndarray
    traj_index: int
    master_seed: int
    dim: int
    final_state: np.ndarray = field(repr=False)
    pre_jump_states: list = field(repr=False, default_factory=list)
    post_jump_states: list = field(repr=False, default_factory=list)
    states: np.ndarray | None = field(repr=False, default=None)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])


def _rng_for(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _find_crossing(survival, remaining: float, u: float) -> float:
    """Smallest t in (0, remaining] with survival(t) = u (survival decreasing)."""
    lo, hi = 0.0, remaining
    while hi - lo > _BISECT_RTOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if survival(mid) > u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _pure_observables(cols: np.ndarray, reference: np.ndarray | None):
    """Vectorized observables for unit-normalized state columns."""
    d = cols.shape[0]
    nvec = np.arange(d)
    prob = np.abs(cols) ** 2
    n = prob.T @ nvec
    par = prob.T @ ((-1.0) ** nvec)
    sqrtn = np.sqrt(np.arange(1.0, d))
    a = np.sum(cols[:-1].conj() * cols[1:] * sqrtn[:, None], axis=0)
    out = {"n": n.real, "a": a, "parity": par.real}
    if reference is not None:
        ov = np.abs(reference.conj() @ cols) ** 2
        out["trace_dist_ref"] = np.sqrt(np.clip(1.0 - ov, 0.0, None))
    return out


def _apply_annihilation(psi: np.ndarray, xi: complex) -> np.ndarray:
    d = psi.size
    out = np.zeros(d, dtype=complex)
    out[:-1] = np.sqrt(np.arange(1.0, d)) * psi[1:]
    if xi != 0:
        out += xi * psi
    return out


def simulate_sse(
    params: SystemParams,
    initial: np.ndarray,
    t_final: float,
    *,
    master_seed: int = 0,
    traj_index: int = 0,
    n_samples: int = 2000,
    integrator: str = "eig",
    reference: np.ndarray | None = None,
    store_states: bool = False,
    max_jumps: int = 1_000_000,
    rtol: float = 1e-8,
) -> Trajectory:
    """Pure-state photon-counting trajectory (requires eta = 1, n_th = 0).

    Parameters
    ----------
    initial : numpy.ndarray
        Initial state vector; its length fixes the Fock cutoff.
    integrator : {"eig", "rk45"}
        Exact eigendecomposition propagation (default) or adaptive RK45 with
        event-based jump location (cross-validation path).
    reference : numpy.ndarray, optional
        Pure state against which ``trace_dist_ref`` is sampled.

    Notes
    -----
    Jump times are refined to a relative tolerance of 1e-10; the record is a
    deterministic function of ``(params, master_seed, traj_index)``.
    """
    if params.eta != 1.0 or params.n_th != 0.0:
        raise PureUnravelingError(
            "pure-state unraveling requires eta = 1 and n_th = 0; "
            "use simulate_sme for finite efficiency or temperature"
        )
    if integrator not in ("eig", "rk45"):
        raise ValueError(f"unknown integrator {integrator!r}")

    d = initial.shape[0]
    h_eff = effective_nonhermitian(params, d)
    gen = -1j * h_eff
    prop = EigenPropagator(gen) if integrator == "eig" else None

    rng = _rng_for(master_seed, traj_index)
    times = np.linspace(0.0, float(t_final), int(n_samples))
    sample_cols = np.empty((d, times.size), dtype=complex)

    psi = normalize(np.asarray(initial, dtype=complex))
    t = 0.0
    k_next = 0
    jumps: list[float] = []
    pre_states: list[np.ndarray] = []
    post_states: list[np.ndarray] = []

    while True:
        remaining = t_final - t
        u = rng.random()

        if integrator == "eig":
            coeffs = prop.coefficients(psi)

            def flow(ts):
                return prop.at_many(coeffs, ts)

            def survival(tau):
                return float(np.linalg.norm(prop.at(coeffs, tau)) ** 2)

            end_survival = survival(remaining)
            tau = remaining if end_survival > u else _find_crossing(survival, remaining, u)
            segment_end = t + tau

            k_hi = k_next
            while k_hi < times.size and (
                times[k_hi] < segment_end or (segment_end >= t_final and times[k_hi] <= t_final)
            ):
                k_hi += 1
            if k_hi > k_next:
                cols = flow(times[k_next:k_hi] - t)
                cols /= np.linalg.norm(cols, axis=0, keepdims=True)
                sample_cols[:, k_next:k_hi] = cols
                k_next = k_hi
            psi_end = normalize(prop.at(coeffs, tau))
        else:
            sol = _rk45_with_event(gen, psi, remaining, u, rtol)
            tau = sol["tau"]
            segment_end = t + tau
            k_hi = k_next
            while k_hi < times.size and (
                times[k_hi] < segment_end or (segment_end >= t_final and times[k_hi] <= t_final)
            ):
                k_hi += 1
            if k_hi > k_next:
                cols = sol["sol"](times[k_next:k_hi] - t)
                cols /= np.linalg.norm(cols, axis=0, keepdims=True)
                sample_cols[:, k_next:k_hi] = cols
                k_next = k_hi
            psi_end = normalize(sol["sol"](tau))

        if segment_end >= t_final:
            final_state = psi_end if k_next == times.size else normalize(sample_cols[:, -1])
            break

        pre_states.append(psi_end)
        psi = normalize(_apply_annihilation(psi_end, params.xi))
        post_states.append(psi)
        jumps.append(segment_end)
        t = segment_end
        if len(jumps) >= max_jumps:
            raise TraceCollapseError(f"exceeded {max_jumps} jumps; runaway trajectory")

    obs = _pure_observables(sample_cols, reference)
    return Trajectory(
        times=times,
        observables=obs,
        jump_times=np.asarray(jumps),
        traj_index=traj_index,
        master_seed=master_seed,
        dim=d,
        final_state=final_state,
        pre_jump_states=pre_states,
        post_jump_states=post_states,
        states=sample_cols.T.copy() if store_states else None,
    )


def _rk45_with_event(gen, x0, remaining, u, rtol, kind="pure"):
    """Adaptive segment integration stopping where the survival hits u."""
    from scipy.integrate import solve_ivp

    if kind == "pure":
        def event(_t, y):
            return float(np.real(np.vdot(y, y))) - u
    else:
        d = int(round(np.sqrt(x0.size)))
        diag_idx = (d + 1) * np.arange(d)

        def event(_t, y):
            return float(np.real(np.sum(y[diag_idx]))) - u

    event.terminal = True
    event.direction = -1

    sol = solve_ivp(
        lambda _t, y: gen @ y,
        (0.0, remaining),
        np.asarray(x0, dtype=complex),
        method="RK45",
        dense_output=True,
        events=event,
        rtol=rtol,
        atol=1e-12,
    )
    tau = float(sol.t_events[0][0]) if sol.t_events[0].size else remaining
    return {"tau": tau, "sol": sol.sol}


def _mixed_observables(cols: np.ndarray, d: int, reference: np.ndarray | None):
    """Vectorized observables for trace-normalized vectorized density columns."""
    diag_idx = (d + 1) * np.arange(d)
    sub_idx = (d + 1) * np.arange(d - 1) + 1  # elements rho[n+1, n]
    diag = cols[diag_idx].real
    nvec = np.arange(d)
    out = {
        "n": nvec @ diag,
        "a": np.sum(np.sqrt(np.arange(1.0, d))[:, None] * cols[sub_idx], axis=0),
        "parity": ((-1.0) ** nvec) @ diag,
    }
    if reference is not None:
        tds = np.empty(cols.shape[1])
        for i in range(cols.shape[1]):
            tds[i] = trace_distance(unvec(cols[:, i]), reference)
        out["trace_dist_ref"] = tds
    return out


def simulate_sme(
    params: SystemParams,
    initial: np.ndarray,
    t_final: float,
    *,
    master_seed: int = 0,
    traj_index: int = 0,
    n_samples: int = 2000,
    integrator: str = "eig",
    reference: np.ndarray | None = None,
    store_states: bool = False,
    max_jumps: int = 1_000_000,
    rtol: float = 1e-8,
) -> Trajectory:
    """Density-matrix photon-counting trajectory for general eta, n_th, xi.

    The unnormalized state follows ``d rho = (L + N) rho dt`` between clicks;
    its trace is the no-click survival. At eta = 1, n_th = 0 this reproduces
    :func:`simulate_sse` pathwise for the same seed, since both consume one
    uniform variate per no-click segment.
    """
    if integrator not in ("eig", "rk45"):
        raise ValueError(f"unknown integrator {integrator!r}")

    rho0 = np.outer(initial, initial.conj()) if initial.ndim == 1 else np.asarray(initial)
    d = rho0.shape[0]
    liou, weight = build_conditioned_generators(params, d)
    gen = liou + weight
    prop = EigenPropagator(gen) if integrator == "eig" else None

    diag_idx = (d + 1) * np.arange(d)
    a_full = np.diag(np.sqrt(np.arange(1.0, d)), k=1).astype(complex)
    c_op = a_full + params.xi * np.eye(d)

    rng = _rng_for(master_seed, traj_index)
    times = np.linspace(0.0, float(t_final), int(n_samples))
    sample_cols = np.empty((d * d, times.size), dtype=complex)

    tr0 = np.trace(rho0).real
    if tr0 <= 0:
        raise TraceCollapseError("initial state has non-positive trace")
    x = vec(rho0 / tr0)
    t = 0.0
    k_next = 0
    jumps: list[float] = []
    pre_states: list[np.ndarray] = []
    post_states: list[np.ndarray] = []

    def col_trace(col):
        return float(np.real(np.sum(col[diag_idx])))

    while True:
        remaining = t_final - t
        u = rng.random()

        if integrator == "eig":
            coeffs = prop.coefficients(x)

            def survival(tau):
                return col_trace(prop.at(coeffs, tau))

            tau = remaining if survival(remaining) > u else _find_crossing(survival, remaining, u)
            segment_end = t + tau
            k_hi = k_next
            while k_hi < times.size and (
                times[k_hi] < segment_end or (segment_end >= t_final and times[k_hi] <= t_final)
            ):
                k_hi += 1
            if k_hi > k_next:
                cols = prop.at_many(coeffs, times[k_next:k_hi] - t)
                traces = np.real(np.sum(cols[diag_idx], axis=0))
                if np.any(traces <= 1e-14):
                    raise TraceCollapseError("conditional state lost its trace")
                sample_cols[:, k_next:k_hi] = cols / traces[None, :]
                k_next = k_hi
            x_end = prop.at(coeffs, tau)
        else:
            sol = _rk45_with_event(gen, x, remaining, u, rtol, kind="mixed")
            tau = sol["tau"]
            segment_end = t + tau
            k_hi = k_next
            while k_hi < times.size and (
                times[k_hi] < segment_end or (segment_end >= t_final and times[k_hi] <= t_final)
            ):
                k_hi += 1
            if k_hi > k_next:
                cols = sol["sol"](times[k_next:k_hi] - t)
                traces = np.real(np.sum(cols[diag_idx], axis=0))
                if np.any(traces <= 1e-14):
                    raise TraceCollapseError("conditional state lost its trace")
                sample_cols[:, k_next:k_hi] = cols / traces[None, :]
                k_next = k_hi
            x_end = sol["sol"](tau)

        tr_end = col_trace(x_end)
        if tr_end <= 1e-14:
            raise TraceCollapseError("conditional state lost its trace at a segment end")
        rho_end = unvec(x_end) / tr_end

        if segment_end >= t_final:
            final_state = hermitize(rho_end)
            break

        pre_states.append(hermitize(rho_end))
        rho_post = c_op @ rho_end @ c_op.conj().T
        tr_post = np.trace(rho_post).real
        if tr_post <= 1e-16:
            raise TraceCollapseError("click projected the state onto (numerical) zero")
        rho_post = rho_post / tr_post
        post_states.append(hermitize(rho_post))
        jumps.append(segment_end)
        x = vec(rho_post)
        t = segment_end
        if len(jumps) >= max_jumps:
            raise TraceCollapseError(f"exceeded {max_jumps} jumps; runaway trajectory")

    obs = _mixed_observables(sample_cols, d, reference)
    return Trajectory(
        times=times,
        observables=obs,
        jump_times=np.asarray(jumps),
        traj_index=traj_index,
        master_seed=master_seed,
        dim=d,
        final_state=final_state,
        pre_jump_states=pre_states,
        post_jump_states=post_states,
        states=sample_cols.T.reshape(times.size, d, d).transpose(0, 2, 1).conj() if store_states else None,
    )


def _run_chunk(args):
    mode, params, initial, t_final, master_seed, indices, kwargs = args
    fn = simulate_sse if mode == "sse" else simulate_sme
    return [
        fn(params, initial, t_final, master_seed=master_seed, traj_index=i, **kwargs)
        for i in indices
    ]


def run_ensemble(
    params: SystemParams,
    initial: np.ndarray,
    t_final: float,
    n_trajectories: int,
    *,
    master_seed: int = 0,
    n_workers: int = 1,
    mode: str = "auto",
    **kwargs,
) -> list[Trajectory]:
    """Simulate an ensemble of trajectories with split seeds.

    ``mode="auto"`` picks the pure unraveling at eta = 1, n_th = 0 and the
    density-matrix unraveling otherwise. With ``n_workers > 1`` the index
    range is chunked over processes; results are identical to a serial run.
    """
    if mode == "auto":
        mode = "sse" if (params.eta == 1.0 and params.n_th == 0.0 and initial.ndim == 1) else "sme"
    if mode not in ("sse", "sme"):
        raise ValueError(f"unknown mode {mode!r}")

    indices = list(range(n_trajectories))
    if n_workers <= 1:
        return _run_chunk((mode, params, initial, t_final, master_seed, indices, kwargs))

    chunks = [indices[i::n_workers] for i in range(n_workers)]
    chunks = [c for c in chunks if c]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:  # pragma: no cover - non-POSIX fallback
        ctx = multiprocessing.get_context("spawn")
    results: dict[int, Trajectory] = {}
    with ProcessPoolExecutor(max_workers=len(chunks), mp_context=ctx) as ex:
        for chunk_result in ex.map(
            _run_chunk,
            [(mode, params, initial, t_final, master_seed, c, kwargs) for c in chunks],
        ):
            for traj in chunk_result:
                results[traj.traj_index] = traj
    return [results[i] for i in range(n_trajectories)]


@dataclass
class EnsembleResult:
    """Pointwise ensemble mean and standard error for each sampled observable."""

    times: np.ndarray
    means: dict[str, np.ndarray]
    stderrs: dict[str, np.ndarray]
    n_trajectories: int


def ensemble_average(trajectories: list[Trajectory]) -> EnsembleResult:
    """Average observables across trajectories sharing one time grid.

    Uses numpy pairwise summation over a trajectory-index-ordered stack, so
    the result does not depend on completion order.
    """
    if not trajectories:
        raise GridMismatchError("cannot average an empty ensemble")
    trajs = sorted(trajectories, key=lambda tr: tr.traj_index)
    t0 = trajs[0].times
    for tr in trajs[1:]:
        if tr.times.shape != t0.shape or not np.array_equal(tr.times, t0):
            raise GridMismatchError("trajectories sampled on different time grids")
    means, stderrs = {}, {}
    n = len(trajs)
    for key in trajs[0].observables:
        stack = np.stack([tr.observables[key] for tr in trajs])
        means[key] = np.mean(stack, axis=0)
        if n > 1:
            if np.iscomplexobj(stack):
                se = np.std(stack.real, axis=0, ddof=1) + 1j * np.std(stack.imag, axis=0, ddof=1)
                stderrs[key] = se / np.sqrt(n)
            else:
                stderrs[key] = np.std(stack, axis=0, ddof=1) / np.sqrt(n)
        else:
            stderrs[key] = np.zeros_like(np.abs(stack[0]))
    return EnsembleResult(times=t0, means=means, stderrs=stderrs, n_trajectories=n)


@dataclass
class HeraldReport:
    """Click-free intervals long enough to herald the pseudo-steady state.

    ``intervals`` holds (start, end) rows with ``end - start > k / gamma_rel``;
    ``fidelity_at_end`` is the fidelity of the trajectory state at the end of
    each interval against the supplied reference (nan without a reference).
    """

    intervals: np.ndarray
    fidelity_at_end: np.ndarray
    k: float
    gamma_rel: float
    threshold: float
    n_jumps: int
    t_final: float


def detect_heralds(
    traj: Trajectory,
    gamma_rel: float,
    *,
    reference: np.ndarray | None = None,
    k: float = 5.0,
) -> HeraldReport:
    """Extract heralding intervals from a click record.

    Interval boundaries are (0, first jump), consecutive jumps, and
    (last jump, t_final); an interval heralds when it exceeds ``k``
    relaxation times ``1 / gamma_rel``.
    """
    if gamma_rel <= 0 or not np.isfinite(gamma_rel):
        raise ValueError(f"gamma_rel must be positive, got {gamma_rel}")
    threshold = k / gamma_rel
    bounds = np.concatenate(([0.0], traj.jump_times, [traj.t_final]))
    intervals = []
    fids = []
    for i in range(bounds.size - 1):
        start, end = bounds[i], bounds[i + 1]
        if end - start <= threshold:
            continue
        intervals.append((start, end))
        if reference is None:
            fids.append(float("nan"))
        else:
            # state at the interval end: just before the closing jump, or final
            state = traj.final_state if i == bounds.size - 2 else traj.pre_jump_states[i]
            fids.append(state_fidelity(state, reference))
    return HeraldReport(
        intervals=np.asarray(intervals, dtype=float).reshape(-1, 2),
        fidelity_at_end=np.asarray(fids, dtype=float),
        k=float(k),
        gamma_rel=float(gamma_rel),
        threshold=float(threshold),
        n_jumps=int(traj.jump_times.size),
        t_final=traj.t_final,
    )


@dataclass
class RelaxationFit:
    """Log-linear fit of the post-jump decay of the distance to a reference."""

    rate: float
    r_squared: float
    segment: tuple[float, float]
    n_points: int


def fit_relaxation(
    traj: Trajectory,
    *,
    min_decades: float = 2.0,
    start_fraction: float = 0.25,
    floor_factor: float = 30.0,
) -> RelaxationFit:
    """Fit the exponential relaxation rate after a jump.

    Scans inter-jump segments by decreasing length and fits ``log`` of the
    sampled ``trace_dist_ref`` observable against time inside a window that
    drops the first fast transient (distances above ``start_fraction`` of the
    segment's initial distance) and the noise floor (distances below
    ``floor_factor`` times the segment minimum). Requires a segment whose
    distance spans at least ``min_decades`` decades.
    """
    td = traj.observables.get("trace_dist_ref")
    if td is None:
        raise ValueError("trajectory carries no trace_dist_ref observable; pass a reference")
    bounds = np.concatenate(([0.0], traj.jump_times, [traj.t_final]))
    segs = [(bounds[i], bounds[i + 1]) for i in range(bounds.size - 1)]
    segs.sort(key=lambda se: se[1] - se[0], reverse=True)

    for start, end in segs:
        if end >= traj.t_final:
            mask = (traj.times >= start) & (traj.times <= end)
        else:
            mask = (traj.times >= start) & (traj.times < end)
        t_seg = traj.times[mask]
        y = td[mask]
        if y.size < 10 or y[0] <= 0:
            continue
        floor = max(float(y.min()), 1e-15)
        if np.log10(y[0] / floor) < min_decades:
            continue
        top = start_fraction * y[0]
        lo = floor_factor * floor
        window = (y < top) & (y > lo)
        imin = int(np.argmin(y))
        window[imin + 1:] = False
        if np.count_nonzero(window) < 5:
            continue
        t_fit, y_fit = t_seg[window], np.log(y[window])
        slope, intercept = np.polyfit(t_fit, y_fit, 1)
        resid = y_fit - (slope * t_fit + intercept)
        ss = float(np.sum((y_fit - y_fit.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 0.0
        return RelaxationFit(
            rate=float(-slope),
            r_squared=r2,
            segment=(float(start), float(end)),
            n_points=int(np.count_nonzero(window)),
        )
    raise InsufficientDecayError(
        f"no inter-jump segment spans {min_decades} decades of decay"
    )
