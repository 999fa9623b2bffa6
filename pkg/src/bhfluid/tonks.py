"""Hardcore-limit oracles that never touch the Hamiltonian or an eigensolver.

Densities and density-density correlators of hardcore bosons on an open chain
equal those of free spinless fermions filling box modes. Because the fluid
"ground" state of the -J chain is its highest-energy state, the filled modes
are q = 1..N of

    phi_q(i) = sqrt(2/(L+1)) sin(q pi i/(L+1)),   i = 1..L

(the top and bottom of the band share |phi|^2, so the same formulas hold).
The Bijl-Jastrow ansatz is evaluated on lattice coordinates
x_i = i - (L+1)/2 by exhaustive summation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ParameterError


def _check(L: int, N: int, lo: int = 0):
    if L < 1:
        raise ParameterError("L must be >= 1")
    if not lo <= N <= L:
        raise ParameterError(f"need {lo} <= N <= L={L}, got N={N}")


@dataclass(frozen=True, eq=False)
class FermionOrbitalSet:
    L: int
    N: int
    orbitals: np.ndarray  # shape (N, L): row q-1 is phi_q over sites 1..L

    def propagator(self) -> np.ndarray:
        """G_ij = sum_{q<=N} phi_q(i) phi_q(j)."""
        return self.orbitals.T @ self.orbitals


def box_orbitals(L: int, N: int) -> FermionOrbitalSet:
    _check(L, N)
    i = np.arange(1, L + 1)
    q = np.arange(1, N + 1)[:, None]
    phi = math.sqrt(2.0 / (L + 1)) * np.sin(q * math.pi * i / (L + 1))
    return FermionOrbitalSet(L, N, phi.reshape(N, L))


def free_fermion_density(L: int, N: int) -> np.ndarray:
    """n_i = sum_q |phi_q(i)|^2."""
    return np.sum(box_orbitals(L, N).orbitals ** 2, axis=0)


def free_fermion_pair_matrix(L: int, N: int) -> np.ndarray:
    """<n_i n_j> for i != j by Wick's theorem; the diagonal holds <n_i(n_i-1)> = 0."""
    orb = box_orbitals(L, N)
    G = orb.propagator()
    n = np.diag(G).copy()
    nn = np.outer(n, n) - G**2
    np.fill_diagonal(nn, 0.0)
    return nn


def free_fermion_g2(L: int, N: int) -> np.ndarray:
    """g2(x) for x = 0..L-1, normalized by (L-x) nbar^2 (L nbar^2 at x=0)."""
    _check(L, N, lo=1)
    nn = free_fermion_pair_matrix(L, N)
    nbar = N / L
    g2 = np.empty(L)
    g2[0] = 0.0
    for x in range(1, L):
        g2[x] = np.trace(nn, offset=x) / ((L - x) * nbar**2)
    return g2


@dataclass(frozen=True)
class JastrowWavefunction:
    """Psi(x_1..x_N) = prod_i cos(pi x_i / scale) * prod_{i<j} |x_i - x_j|.

    Coordinates are x = i - (L+1)/2 for sites i = 1..L; the default
    ``scale = L`` puts the nodes of the single-particle factor half a site
    outside the chain ends.
    """

    L: int
    N: int
    scale: float | None = None

    def __post_init__(self):
        _check(self.L, self.N, lo=1)
        if self.scale is not None and self.scale <= 0:
            raise ParameterError("scale must be positive")

    @property
    def length(self) -> float:
        return float(self.L if self.scale is None else self.scale)

    def coordinates(self) -> np.ndarray:
        return np.arange(1, self.L + 1) - (self.L + 1) / 2.0

    def amplitude(self, sites) -> float:
        """Unnormalized amplitude for 0-based site indices."""
        x = self.coordinates()[list(sites)]
        out = float(np.prod(np.cos(math.pi * x / self.length)))
        for a, b in itertools.combinations(x, 2):
            out *= abs(a - b)
        return out


def jastrow_density(L: int, N: int, scale: float | None = None) -> np.ndarray:
    """Per-site density from |Psi_B|^2 summed over all ordered N-tuples of distinct sites."""
    wf = JastrowWavefunction(L, N, scale)
    dens = np.zeros(L)
    total = 0.0
    for tup in itertools.permutations(range(L), N):
        w = wf.amplitude(tup) ** 2
        total += w
        for s in tup:
            dens[s] += w
    if total == 0:
        raise ParameterError("Jastrow weight vanishes on every configuration")
    return dens / total


@dataclass(frozen=True)
class JastrowCalibration:
    scale: float
    max_abs_error: float
    max_rel_error: float


def calibrate_jastrow_scale(
    reference_density, N: int, bounds: tuple[float, float] | None = None
) -> JastrowCalibration:
    """Choose the single-particle length that best matches ``reference_density``.

    The reference is supplied by the caller (e.g. hardcore densities from exact
    diagonalization), so this module stays free of Hamiltonian code. The scale
    minimizes the largest relative per-site deviation.
    """
    ref = np.asarray(reference_density, dtype=float)
    L = ref.size
    _check(L, N, lo=1)
    if bounds is None:
        bounds = (0.5 * L, 3.0 * L)

    def worst(scale):
        return float(np.max(np.abs(jastrow_density(L, N, scale) - ref) / ref))

    grid = np.linspace(bounds[0], bounds[1], 61)
    vals = [worst(s) for s in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    opt = minimize_scalar(worst, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    scale = float(opt.x) if opt.fun <= vals[i] else float(grid[i])
    d = jastrow_density(L, N, scale)
    return JastrowCalibration(scale, float(np.max(np.abs(d - ref))), float(np.max(np.abs(d - ref) / ref)))
