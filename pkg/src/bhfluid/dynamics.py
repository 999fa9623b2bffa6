"""Time-dependent Schroedinger propagation under a disorder schedule.

The Hamiltonian along a schedule is H(t) = K + diag(V + occ @ delta(t)), where K
is the hopping matrix and V the on-site interaction. Inside a ramp the disorder
is an affine function of one scalar s(t), so each step only evaluates an
exponential and one axpy on the diagonal.

Three steppers are available:

``rk4``       classic fourth-order Runge-Kutta on a fixed grid (default)
``magnus4``   fourth-order Magnus with dense exponentials; exactly unitary
``adaptive``  scipy's DOP853 with local error control

All of them integrate segment by segment, so ramp kinks and jumps never fall
inside a step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numba import njit
from scipy.integrate import solve_ivp

from .errors import ParameterError, PropagationError
from .hamiltonian import HamiltonianParts, hamiltonian_parts
from .hilbert import DEFAULT_NMAX, BasisSet, Sector, enumerate_basis
from .lattice import LatticeConfig
from .schedule import RampSchedule, Segment, boomerang_schedule, melt_schedule, ramp_shape
from .state import StateVector

METHODS = ("rk4", "magnus4", "adaptive")


@dataclass(frozen=True)
class PropagatorSettings:
    """Step control.

    With ``dt=None`` the fixed-step methods pick, per segment,
    ``min(dt_factor / max|H|, duration / min_steps)`` where max|H| is the
    maximum absolute row sum of H over the segment. For ``rk4`` the step is
    further capped so that the worst-case norm loss accumulated over the whole
    schedule stays below ``norm_budget``. ``tolerance`` is the relative local
    error target of the adaptive method.
    """

    method: str = "rk4"
    dt: float | None = None
    dt_factor: float = 1.0 / 50.0
    min_steps: int = 1000
    tolerance: float = 1e-10
    max_step: float | None = None
    norm_budget: float = 1e-9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be > 0")
        if self.dt is not None and not self.dt > 0:
            raise ParameterError("dt must be > 0")
        if not self.dt_factor > 0:
            raise ParameterError("dt_factor must be > 0")
        if self.min_steps < 1:
            raise ParameterError("min_steps must be >= 1")
        if self.max_step is not None and not self.max_step > 0:
            raise ParameterError("max_step must be > 0")
        if not self.norm_budget > 0:
            raise ParameterError("norm_budget must be > 0")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dt": self.dt,
            "dt_factor": self.dt_factor,
            "min_steps": self.min_steps,
            "tolerance": self.tolerance,
            "max_step": self.max_step,
            "norm_budget": self.norm_budget,
        }


class _Drive:
    """Diagonal of H on one segment as diag0 + g(u) * ddiag."""

    def __init__(self, parts: HamiltonianParts, seg: Segment, extra_diag):
        self.kind = seg.kind
        self.duration = seg.duration
        self.span = seg.span
        self.tau = seg.tau
        if seg.kind == "exp_ramp":
            base, other = seg.end_profile, seg.start_profile
        elif seg.kind == "exp_ramp_reverse":
            base, other = seg.start_profile, seg.end_profile
        else:
            base = other = seg.end_profile
        self.diag0 = parts.diagonal(base) + extra_diag
        self.ddiag = parts.diagonal(other) - parts.diagonal(base)
        rows = np.asarray(abs(parts.hopping).sum(axis=1)).ravel()
        # Gershgorin interval of H over the segment; the diagonal is a convex
        # combination of its endpoint values. The fixed-step integrators run on
        # H - shift (a global phase, restored afterwards) so that the step size
        # is set by the spectral half-width rather than by |H|.
        if rows.size:
            a, b = np.real(self.diag0), np.real(self.diag0 + self.ddiag)
            lo = float(np.min(np.minimum(a, b) - rows))
            hi = float(np.max(np.maximum(a, b) + rows))
        else:
            lo = hi = 0.0
        self.shift = 0.5 * (lo + hi)
        self.norm_bound = 0.5 * (hi - lo)

    def weight(self, u: float) -> float:
        if self.kind == "exp_ramp":
            return float(ramp_shape(u, self.span, self.tau))
        if self.kind == "exp_ramp_reverse":
            return float(ramp_shape(self.duration - u, self.span, self.tau))
        return 0.0

    def diagonal(self, u: float) -> np.ndarray:
        g = self.weight(u)
        return self.diag0 if g == 0.0 else self.diag0 + g * self.ddiag


@njit(cache=True, nogil=True)
def _ramp_weight(mode, u, span, tau, duration):
    if mode == 0:
        return 0.0
    if mode == 2:
        u = duration - u
    floor = math.exp(-span / tau)
    return (math.exp(-u / tau) - floor) / (1.0 - floor)


@njit(cache=True, nogil=True)
def _rhs_into(out, indptr, indices, data, diag0, ddiag, g, psi):
    dim, m = psi.shape
    if m == 1:
        for i in range(dim):
            acc = (diag0[i] + g * ddiag[i]) * psi[i, 0]
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * psi[indices[p], 0]
            out[i, 0] = -1j * acc
        return
    for i in range(dim):
        d = -1j * (diag0[i] + g * ddiag[i])
        for j in range(m):
            out[i, j] = d * psi[i, j]
        for p in range(indptr[i], indptr[i + 1]):
            c = -1j * data[p]
            r = indices[p]
            for j in range(m):
                out[i, j] += c * psi[r, j]


@njit(cache=True, nogil=True)
def _rk4_kernel(indptr, indices, data, diag0, ddiag, mode, span, tau, duration, psi, u0, u1, n, thresholds):
    """Advance psi (dim x m, in place) by up to n RK4 steps from u0 to u1.

    Stops early after the first step at which some column's squared norm falls
    below its threshold (pass an empty array to disable); returns the number of
    steps taken.
    """
    dim, m = psi.shape
    h = (u1 - u0) / n
    k1 = np.empty_like(psi)
    k2 = np.empty_like(psi)
    k3 = np.empty_like(psi)
    k4 = np.empty_like(psi)
    tmp = np.empty_like(psi)
    check = thresholds.shape[0] == m
    for k in range(n):
        u = u0 + k * h
        u_end = u1 if k == n - 1 else u + h
        g1 = _ramp_weight(mode, u, span, tau, duration)
        gm = _ramp_weight(mode, u + 0.5 * h, span, tau, duration)
        g2 = _ramp_weight(mode, u_end, span, tau, duration)
        _rhs_into(k1, indptr, indices, data, diag0, ddiag, g1, psi)
        for i in range(dim):
            for j in range(m):
                tmp[i, j] = psi[i, j] + 0.5 * h * k1[i, j]
        _rhs_into(k2, indptr, indices, data, diag0, ddiag, gm, tmp)
        for i in range(dim):
            for j in range(m):
                tmp[i, j] = psi[i, j] + 0.5 * h * k2[i, j]
        _rhs_into(k3, indptr, indices, data, diag0, ddiag, gm, tmp)
        for i in range(dim):
            for j in range(m):
                tmp[i, j] = psi[i, j] + h * k3[i, j]
        _rhs_into(k4, indptr, indices, data, diag0, ddiag, g2, tmp)
        for i in range(dim):
            for j in range(m):
                psi[i, j] += (h / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        if check:
            for j in range(m):
                nrm = 0.0
                for i in range(dim):
                    nrm += psi[i, j].real ** 2 + psi[i, j].imag ** 2
                if nrm < thresholds[j]:
                    return k + 1
    return n


_MODES = {"jump": 0, "hold": 0, "exp_ramp": 1, "exp_ramp_reverse": 2}
_NO_THRESHOLDS = np.zeros(0)


class _Propagator:
    def __init__(self, parts: HamiltonianParts, extra_diag=None):
        self.parts = parts
        self.extra = 0.0 if extra_diag is None else np.asarray(extra_diag)
        self.hermitian = extra_diag is None or not np.any(np.imag(extra_diag))
        K = sp.csr_matrix(parts.hopping, dtype=complex)
        K.sort_indices()
        self.csr = (K.indptr.astype(np.int64), K.indices.astype(np.int64), K.data)
        self.hop_sparse = K
        self.hop_dense = None

    def _dense_hop(self) -> np.ndarray:
        if self.hop_dense is None:
            self.hop_dense = self.parts.hopping.toarray()
        return self.hop_dense

    def rhs(self, diag: np.ndarray, psi: np.ndarray) -> np.ndarray:
        if psi.ndim == 1:
            return -1j * (self.hop_sparse @ psi + diag * psi)
        return -1j * (self.hop_sparse @ psi + diag[:, None] * psi)

    def step_count(self, drive: _Drive, length: float, settings: PropagatorSettings, total: float) -> int:
        if settings.dt is not None:
            dt = settings.dt
        else:
            dt = drive.duration / settings.min_steps
            M = drive.norm_bound
            if M > 0:
                # RK4 shrinks an eigencomponent by (M dt)^6/72 per step; keep the
                # accumulated loss over the whole schedule below the norm budget
                dt = min(dt, settings.dt_factor / M)
                if settings.method == "rk4" and self.hermitian:
                    dt = min(dt, (72.0 * settings.norm_budget / (max(total, length) * M**6)) ** 0.2)
        if settings.max_step is not None:
            dt = min(dt, settings.max_step)
        return max(1, math.ceil(length / dt - 1e-9))

    def rk4(self, drive: _Drive, psi: np.ndarray, u0: float, u1: float, n: int, thresholds=_NO_THRESHOLDS) -> int:
        """In-place on a 2-D psi; returns the number of steps taken."""
        indptr, indices, data = self.csr
        taken = _rk4_kernel(
            indptr, indices, data,
            np.ascontiguousarray(drive.diag0 - drive.shift, dtype=complex),
            np.ascontiguousarray(drive.ddiag, dtype=float),
            _MODES[drive.kind],
            float(drive.span or 0.0), float(drive.tau or 1.0), float(drive.duration),
            psi, float(u0), float(u1), int(n), thresholds,
        )
        psi *= np.exp(-1j * drive.shift * (taken * (u1 - u0) / n))
        return taken

    def magnus4(self, drive: _Drive, psi: np.ndarray, u0: float, u1: float, n: int):
        h = (u1 - u0) / n
        K = self._dense_hop()
        c = math.sqrt(3.0) / 6.0
        constant = drive.kind in ("hold", "jump")
        U_const = None
        for k in range(n):
            u = u0 + k * h
            if constant:
                if U_const is None:
                    U_const = sla.expm(-1j * h * (K + np.diag(drive.diag0 - drive.shift)))
                psi = U_const @ psi
                continue
            da = drive.diagonal(u + (0.5 - c) * h) - drive.shift
            db = drive.diagonal(u + (0.5 + c) * h) - drive.shift
            A1 = -1j * (K + np.diag(da))
            A2 = -1j * (K + np.diag(db))
            omega = 0.5 * h * (A1 + A2) + (math.sqrt(3.0) / 12.0) * h * h * (A2 @ A1 - A1 @ A2)
            psi = sla.expm(omega) @ psi
        return psi * np.exp(-1j * drive.shift * (u1 - u0))

    def adaptive(self, drive: _Drive, psi: np.ndarray, u0: float, u1: float, settings: PropagatorSettings, t0: float):
        shape = psi.shape

        def f(u, y):
            return self.rhs(drive.diagonal(u), y.reshape(shape)).ravel()

        kwargs = {}
        if settings.max_step is not None:
            kwargs["max_step"] = settings.max_step
        sol = solve_ivp(
            f,
            (u0, u1),
            psi.ravel(),
            method="DOP853",
            rtol=settings.tolerance,
            atol=settings.tolerance * 1e-2,
            t_eval=[u1],
            **kwargs,
        )
        if not sol.success:
            t_fail = t0 + (float(sol.t[-1]) if sol.t.size else u0)
            raise PropagationError(f"adaptive step control failed: {sol.message}", t=t_fail)
        return sol.y[:, -1].reshape(shape)

    def advance(self, drive, psi, u0, u1, settings, t0, total):
        """Return psi advanced from local time u0 to u1 (psi is 2-D)."""
        if u1 <= u0:
            return psi
        if settings.method == "adaptive":
            return self.adaptive(drive, psi, u0, u1, settings, t0)
        n = self.step_count(drive, u1 - u0, settings, total)
        if settings.method == "magnus4":
            return self.magnus4(drive, psi, u0, u1, n)
        psi = np.ascontiguousarray(psi)
        self.rk4(drive, psi, u0, u1, n)
        return psi


def _check_schedule(basis: BasisSet, schedule: RampSchedule):
    if schedule.n_sites != basis.L:
        raise ParameterError(f"schedule covers {schedule.n_sites} sites, basis has {basis.L}")


def _run(prop: _Propagator, psi: np.ndarray, schedule: RampSchedule, settings: PropagatorSettings,
         sample_times, on_sample, advance=None):
    """Integrate a (dim x m) block over the schedule, calling ``on_sample(t, psi)``."""
    advance = advance or prop.advance
    total = schedule.total_duration
    samples = sorted(float(t) for t in (sample_times or ()))
    for t in samples:
        if not 0.0 <= t <= total:
            raise ParameterError(f"sample time {t} outside [0, {total}]")
    si = 0
    t0 = 0.0
    while si < len(samples) and samples[si] <= 0.0:
        on_sample(samples[si], psi)
        si += 1
    for seg in schedule.segments:
        drive = _Drive(prop.parts, seg, prop.extra)
        t1 = t0 + seg.duration
        u = 0.0
        while si < len(samples) and samples[si] <= t1 and seg.duration > 0:
            target = samples[si] - t0
            psi = advance(drive, psi, u, target, settings, t0, total)
            u = target
            on_sample(samples[si], psi)
            si += 1
        psi = advance(drive, psi, u, seg.duration, settings, t0, total)
        if not np.all(np.isfinite(psi)):
            raise PropagationError("state vector became non-finite", t=t1)
        t0 = t1
    while si < len(samples):
        on_sample(samples[si], psi)
        si += 1
    return psi


def evolve(
    psi0: StateVector,
    schedule: RampSchedule,
    config: LatticeConfig,
    settings: PropagatorSettings | None = None,
) -> StateVector:
    """Propagate ``psi0`` over the whole schedule and return psi(T)."""
    return evolve_sampled(psi0, schedule, config, (), settings)[1]


def evolve_sampled(
    psi0: StateVector,
    schedule: RampSchedule,
    config: LatticeConfig,
    sample_times: Sequence[float],
    settings: PropagatorSettings | None = None,
) -> tuple[list[tuple[float, StateVector]], StateVector]:
    """Like :func:`evolve` but also records the state at each sample time."""
    settings = settings or PropagatorSettings()
    basis = psi0.basis
    _check_schedule(basis, schedule)
    if abs(psi0.norm - 1.0) > 1e-8:
        raise ParameterError(f"initial state is not normalized (norm {psi0.norm:.12g})")
    prop = _Propagator(hamiltonian_parts(config, basis))
    records: list[tuple[float, StateVector]] = []
    final = _run(
        prop,
        psi0.amplitudes.copy()[:, None],
        schedule,
        settings,
        sample_times,
        on_sample=lambda t, v: records.append((t, StateVector(basis, v[:, 0].copy()))),
    )
    return records, StateVector(basis, final[:, 0])


def prepare_state(
    initial_fock: Sequence[int],
    config: LatticeConfig,
    stagger: str = "small",
    n_max: int = DEFAULT_NMAX,
    preparation: str = "eigenstate",
    sector: str = "fixed",
) -> StateVector:
    """Initial state for a run starting at a stagger.

    ``preparation="fock"`` returns the bare occupation state. ``"eigenstate"``
    returns the eigenstate of the disordered lattice that is continuously
    connected to it (largest overlap), which is what a frequency-selective
    excitation of the localized levels produces.
    """
    fock = tuple(int(n) for n in initial_fock)
    if len(fock) != config.L:
        raise ParameterError(f"initial_fock needs {config.L} entries")
    N = sum(fock)
    nm = max(n_max, max(fock, default=0))
    basis = enumerate_basis(config.L, nm, Sector.fixed(N) if sector == "fixed" else Sector.enr(N))
    if preparation == "fock":
        return StateVector.from_fock(basis, fock)
    if preparation != "eigenstate":
        raise ParameterError(f"unknown preparation {preparation!r}")
    fixed = basis if sector == "fixed" else enumerate_basis(config.L, nm, Sector.fixed(N))
    parts = hamiltonian_parts(config, fixed)
    w, v = np.linalg.eigh(parts.matrix(config.stagger(stagger)).toarray())
    k0 = fixed.index[fock]
    k = int(np.argmax(np.abs(v[k0, :])))
    vec = v[:, k] * np.sign(v[k0, k])
    if fixed is basis:
        return StateVector(basis, vec)
    amp = np.zeros(basis.dim, dtype=complex)
    for state, a in zip(fixed.states, vec):
        amp[basis.index[state]] = a
    return StateVector(basis, amp)


def melt(
    initial_fock: Sequence[int],
    config: LatticeConfig,
    t_ramp: float,
    sample_times: Sequence[float] = (),
    stagger: str = "small",
    n_max: int = DEFAULT_NMAX,
    settings: PropagatorSettings | None = None,
    preparation: str = "eigenstate",
) -> list[tuple[float, StateVector]]:
    """Start from ``initial_fock`` at the stagger and ramp the disorder to zero.

    Returns (t, state) at each sample time; the final time t_ramp is always
    included as the last record.
    """
    psi0 = prepare_state(initial_fock, config, stagger, n_max, preparation)
    schedule = melt_schedule(config, t_ramp, stagger)
    times = sorted(set(float(t) for t in sample_times) | {schedule.total_duration})
    records, _ = evolve_sampled(psi0, schedule, config, times, settings)
    return records


@dataclass(frozen=True)
class ReversibilityResult:
    """Return probability after a boomerang.

    ``fidelity`` is |<psi_final|psi_init>|^2; ``occupation_product`` is the
    product over initially occupied sites of the probability to find that site
    occupied, i.e. what a site-resolved readout records. ``norm`` is the final
    squared norm (below one only with loss).
    """

    t_ramp: float
    fidelity: float
    occupation_product: float
    norm: float = 1.0


def _occupation_product(basis: BasisSet, probs: np.ndarray, fock) -> float:
    occ = basis.occupations
    out = 1.0
    for i, n in enumerate(fock):
        if n > 0:
            out *= float(probs @ (occ[:, i] >= 1))
    return out


def reversibility(
    initial_fock: Sequence[int],
    config: LatticeConfig,
    t_ramp: float,
    t_hold: float = 0.0,
    stagger: str = "small",
    n_max: int = DEFAULT_NMAX,
    settings: PropagatorSettings | None = None,
    preparation: str = "eigenstate",
    gamma1=None,
    n_traj: int = 200,
    seed: int = 0,
) -> ReversibilityResult:
    """Ramp down, optionally hold, ramp back up and compare with the initial state.

    With ``gamma1`` (per-site loss rates, 1/us) the run uses quantum
    trajectories and reports ensemble averages; the fidelity is then the
    ensemble average of |<psi_init|psi_traj>|^2.
    """
    fock = tuple(int(n) for n in initial_fock)
    schedule = boomerang_schedule(config, t_ramp, t_hold, stagger)
    lossy = gamma1 is not None and bool(np.any(np.asarray(gamma1) > 0))
    psi0 = prepare_state(fock, config, stagger, n_max, preparation, "enr" if lossy else "fixed")
    basis = psi0.basis
    if not lossy:
        final = evolve(psi0, schedule, config, settings).amplitudes
        probs = np.abs(final) ** 2
        norm = float(probs.sum())
        fid = float(abs(np.vdot(psi0.amplitudes, final)) ** 2)
        return ReversibilityResult(t_ramp, fid, _occupation_product(basis, probs / norm, fock), norm)
    ensemble = evolve_lossy(psi0, schedule, config, gamma1, n_traj, seed, settings)
    fid = float(np.mean([abs(np.vdot(psi0.amplitudes, st.amplitudes)) ** 2 for st in ensemble]))
    probs = np.mean([st.probabilities for st in ensemble], axis=0)
    return ReversibilityResult(t_ramp, fid, _occupation_product(basis, probs, fock), 1.0)


def annihilators(basis: BasisSet) -> list[sp.csr_matrix]:
    """a_i for every site, restricted to the basis (terms leaving it are dropped)."""
    out = []
    dim = basis.dim
    for i in range(basis.L):
        rows, cols, vals = [], [], []
        for k, s in enumerate(basis.states):
            if s[i] > 0:
                t = list(s)
                t[i] -= 1
                m = basis.index.get(tuple(t))
                if m is not None:
                    rows.append(m)
                    cols.append(k)
                    vals.append(math.sqrt(s[i]))
        out.append(sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=complex))
    return out


def trajectory_seeds(seed: int, n_traj: int) -> list[np.random.SeedSequence]:
    """Per-trajectory seeds: child k of ``SeedSequence(seed)``."""
    return np.random.SeedSequence(seed).spawn(n_traj)


def evolve_lossy(
    psi0: StateVector,
    schedule: RampSchedule,
    config: LatticeConfig,
    gamma1,
    n_traj: int,
    seed: int,
    settings: PropagatorSettings | None = None,
    sample_times: Sequence[float] | None = None,
    record=None,
) -> list[StateVector]:
    """Quantum-trajectory unravelling of photon loss a_i at rates ``gamma1[i]``.

    Between jumps each trajectory evolves under H - (i/2) sum_i gamma_i n_i.
    A jump happens at the end of the first step where the squared norm has
    dropped below a uniform random threshold; the site is chosen with weight
    gamma_i <n_i>. Trajectory k draws from its own generator seeded with child
    k of ``SeedSequence(seed)``, so the ensemble does not depend on how the
    trajectories are batched. The basis of ``psi0`` must contain the
    lower-number states reached by losses (an ENR sector).

    Returns normalized final states; ``record(t, states)`` is called at each
    sample time if given. Only the fixed-step ``rk4`` method is supported.
    """
    settings = settings or PropagatorSettings()
    if settings.method != "rk4":
        raise ParameterError("lossy trajectories use the fixed-step rk4 method")
    if n_traj < 1:
        raise ParameterError("n_traj must be >= 1")
    basis = psi0.basis
    _check_schedule(basis, schedule)
    gamma = np.broadcast_to(np.asarray(gamma1, dtype=float), (basis.L,))
    if np.any(gamma < 0):
        raise ParameterError("gamma1 must be non-negative")
    if abs(psi0.norm - 1.0) > 1e-8:
        raise ParameterError("initial state is not normalized")

    if not np.any(gamma > 0):
        recs, final = evolve_sampled(psi0, schedule, config, sample_times or (), settings)
        if record is not None:
            for t, st in recs:
                record(t, [st] * n_traj)
        return [final] * n_traj

    parts = hamiltonian_parts(config, basis)
    prop = _Propagator(parts, -0.5j * (parts.occupations @ gamma))
    ops = annihilators(basis)
    occ = parts.occupations
    rngs = [np.random.default_rng(sq) for sq in trajectory_seeds(seed, n_traj)]
    thresholds = np.array([r.random() for r in rngs])

    def jump(psi: np.ndarray):
        norms = np.einsum("ij,ij->j", psi.conj(), psi).real
        for j in np.nonzero(norms < thresholds)[0]:
            col = psi[:, j]
            w = gamma * ((np.abs(col) ** 2) @ occ)
            total = w.sum()
            if total <= 0:
                continue
            site = int(np.searchsorted(np.cumsum(w), rngs[j].random() * total, side="right"))
            new = ops[min(site, basis.L - 1)] @ col
            psi[:, j] = new / np.linalg.norm(new)
            thresholds[j] = rngs[j].random()

    def advance(drive, psi, u0, u1, settings, t0, total):
        if u1 <= u0:
            return psi
        n = prop.step_count(drive, u1 - u0, settings, total)
        h = (u1 - u0) / n
        done = 0
        while done < n:
            # restart the kernel after every jump; the step grid is unchanged
            start = u0 + done * h
            done += prop.rk4(drive, psi, start, u1, n - done, thresholds)
            jump(psi)
        return psi

    def normalized(mat):
        return [StateVector(basis, mat[:, j] / np.linalg.norm(mat[:, j])) for j in range(n_traj)]

    def on_sample(t, mat):
        if record is not None:
            record(t, normalized(mat))

    psi = np.ascontiguousarray(np.repeat(psi0.amplitudes[:, None], n_traj, axis=1))
    final = _run(prop, psi, schedule, settings, sample_times, on_sample, advance=advance)
    return normalized(final)


def exact_propagate(psi: StateVector, config: LatticeConfig, site_energies, t: float) -> StateVector:
    """exp(-i H t) psi for a constant disorder profile, by eigendecomposition."""
    parts = hamiltonian_parts(config, psi.basis)
    w, v = np.linalg.eigh(parts.matrix(site_energies).toarray())
    return StateVector(psi.basis, v @ (np.exp(-1j * w * t) * (v.conj().T @ psi.amplitudes)))
