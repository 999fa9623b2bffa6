"""Measured quantities: densities, single-site purities, E_gl, g2(x), P(i|j), fidelities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateConditionError, FitError, ParameterError
from .hilbert import BasisSet
from .state import StateVector, require_same_basis

EMPTY_SITE = 1e-12


@dataclass(frozen=True, eq=False)
class DensityMatrixSite:
    site: int
    matrix: np.ndarray

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


@dataclass(frozen=True, eq=False)
class CorrelationRecord:
    g2: np.ndarray
    cond_prob: np.ndarray
    densities: np.ndarray
    nbar: float


@dataclass(frozen=True, eq=False)
class ObservableRecord:
    """Everything emitted for one time sample."""

    t: float
    densities: np.ndarray
    purities: np.ndarray
    egl: float
    fidelity: float | None = None


def density(psi: StateVector) -> np.ndarray:
    return psi.probabilities @ psi.basis.occupations


def pair_matrix(psi: StateVector) -> np.ndarray:
    """<n_i n_j> off the diagonal and <n_i (n_i - 1)> on it."""
    occ = psi.basis.occupations.astype(float)
    p = psi.probabilities
    nn = occ.T @ (p[:, None] * occ)
    np.fill_diagonal(nn, p @ (occ * (occ - 1.0)))
    return nn


def _site_environment(basis: BasisSet, site: int):
    key = basis.__dict__.get("_env_cache", {}).get(site)
    if key is not None:
        return key
    occ = basis.occupations
    rest = np.delete(occ, site, axis=1)
    _, env = np.unique(rest, axis=0, return_inverse=True)
    env = env.ravel()
    cache = basis.__dict__.setdefault("_env_cache", {})
    cache[site] = (env, int(env.max()) + 1 if env.size else 0)
    return cache[site]


def reduced_density_matrix(psi: StateVector, site: int) -> DensityMatrixSite:
    basis = psi.basis
    if not 0 <= site < basis.L:
        raise ParameterError(f"site {site} outside 0..{basis.L - 1}")
    env, n_env = _site_environment(basis, site)
    M = np.zeros((n_env, basis.n_max + 1), dtype=complex)
    M[env, basis.occupations[:, site]] = psi.amplitudes
    rho = M.T @ M.conj()
    return DensityMatrixSite(site, rho)


def purities(psi: StateVector) -> np.ndarray:
    return np.array([reduced_density_matrix(psi, i).purity for i in range(psi.basis.L)])


def global_entanglement(psi: StateVector) -> float:
    """E_gl = 2 - (2/L) sum_i Tr(rho_i^2), summed over every site."""
    L = psi.basis.L
    return float(2.0 - 2.0 / L * np.sum(purities(psi)))


def _nbar(psi: StateVector) -> tuple[np.ndarray, float]:
    n = density(psi)
    N = float(n.sum())
    if N < EMPTY_SITE:
        raise DegenerateConditionError("g2 is undefined for an empty lattice")
    return n, N / psi.basis.L


def pair_correlation(psi: StateVector) -> np.ndarray:
    """g2(x) for x = 0..L-1.

    x >= 1: sum_i <n_i n_{i+x}> / ((L - x) nbar^2); x = 0 uses the
    normal-ordered sum_i <n_i (n_i - 1)> / (L nbar^2).
    """
    _, nbar = _nbar(psi)
    nn = pair_matrix(psi)
    L = psi.basis.L
    return np.array([np.trace(nn, offset=x) / ((L - x) * nbar**2) for x in range(L)])


def rescaled_separation(L: int, nbar: float) -> np.ndarray:
    """Separation axis x * nbar."""
    return np.arange(L) * nbar


def conditional_probability(psi: StateVector) -> np.ndarray:
    """P[i, j] = P(i | j) = <n_i n_j>/<n_j>, diagonal <n_j(n_j-1)>/<n_j>."""
    n = density(psi)
    empty = np.nonzero(n < EMPTY_SITE)[0]
    if empty.size:
        raise DegenerateConditionError(f"cannot condition on empty site(s) {empty.tolist()}")
    return pair_matrix(psi) / n[None, :]


def correlation_record(psi: StateVector) -> CorrelationRecord:
    n, nbar = _nbar(psi)
    return CorrelationRecord(pair_correlation(psi), conditional_probability(psi), n, nbar)


def overlap_fidelity(a: StateVector, b: StateVector) -> float:
    require_same_basis(a.basis, b.basis)
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def observable_record(t: float, psi: StateVector, reference: StateVector | None = None) -> ObservableRecord:
    pur = purities(psi)
    L = psi.basis.L
    return ObservableRecord(
        t=float(t),
        densities=density(psi),
        purities=pur,
        egl=float(2.0 - 2.0 / L * pur.sum()),
        fidelity=None if reference is None else overlap_fidelity(reference, psi),
    )


@dataclass(frozen=True)
class FriedelFit:
    k: float
    amplitude: float
    residual: float
    oscillating: bool
    n_points: int


FRIEDEL_MODELS = ("tonks", "cosine")


def _friedel_shape(model: str, k: float, x: np.ndarray) -> np.ndarray:
    if model == "cosine":
        return np.cos(k * x)
    # np.sinc(z) = sin(pi z)/(pi z)
    return -np.sinc(k * x / np.pi) ** 2


def friedel_fit(
    g2,
    nbar: float,
    x_max: float | None = None,
    amplitude_threshold: float = 0.05,
    model: str = "tonks",
) -> FriedelFit:
    """Fit the oscillation wavevector of g2(x) - 1 over 0 <= x <= x_max (default L/2).

    ``model="tonks"`` fits the free-fermion form g2 - 1 = -A (sin(kx)/(kx))^2,
    whose zeros sit at multiples of pi/k; ``model="cosine"`` fits A cos(kx).
    k is searched on (0, pi] by a dense scan with A solved linearly, refined by
    a bounded scalar minimization. The fit is flagged as non-oscillating when
    the fitted model stays below ``amplitude_threshold`` at every x >= 1 in the
    window (e.g. unit filling, where k = pi puts every node on a lattice site).
    """
    if model not in FRIEDEL_MODELS:
        raise ParameterError(f"model must be one of {FRIEDEL_MODELS}")
    g2 = np.asarray(g2, dtype=float)
    L = g2.size
    if x_max is None:
        x_max = L / 2.0
    x = np.arange(L, dtype=float)
    keep = x <= x_max + 1e-12
    x, y = x[keep], g2[keep] - 1.0
    if x.size < 4:
        raise FitError(f"need at least 4 separations, got {x.size}")
    if not nbar > 0:
        raise FitError("nbar must be positive")
    if not np.all(np.isfinite(y)):
        raise FitError("g2 contains non-finite values")

    def solve(k):
        c = _friedel_shape(model, k, x)
        cc = float(c @ c)
        A = float(c @ y) / cc if cc > 0 else 0.0
        r = y - A * c
        return float(r @ r), A

    grid = np.linspace(1e-3, np.pi, 2000)
    res = np.array([solve(k)[0] for k in grid])
    i = int(np.argmin(res))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    opt = minimize_scalar(lambda k: solve(k)[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    k = float(opt.x) if opt.fun <= res[i] else float(grid[i])
    resid, A = solve(k)
    tail = A * _friedel_shape(model, k, x[x >= 1])
    oscillating = bool(tail.size and np.max(np.abs(tail)) >= amplitude_threshold)
    return FriedelFit(k=k, amplitude=A, residual=resid, oscillating=oscillating, n_points=int(x.size))
