"""Exact diagonalization along the melt and continuity tracking of one eigenstate.

The ramp parameter s is the fraction of disorder left: s = 1 is the full
stagger, s = 0 the degenerate lattice. Slices are spaced uniformly in ramp time
(so non-uniformly in s) using the same exponential shape as the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AmbiguityError, InternalError, ParameterError
from .hamiltonian import HamiltonianMatrix, HamiltonianParts, hamiltonian_parts
from .hilbert import DEFAULT_NMAX, BasisSet, Sector, enumerate_basis, state_index
from .lattice import LatticeConfig
from .schedule import TAU_FRACTION, ramp_shape
from .state import StateVector

DENSE_THRESHOLD = 2000
TIE_TOLERANCE = 1e-6
INITIAL_OVERLAP_MIN = 0.95


@dataclass(frozen=True, eq=False)
class SpectrumSlice:
    ramp_parameter: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    basis: BasisSet | None = None

    def vector(self, k: int) -> StateVector:
        return StateVector(self.basis, self.eigenvectors[:, k])


@dataclass(frozen=True)
class TrackPoint:
    s: float
    index: int
    energy: float
    overlap: float


@dataclass(frozen=True, eq=False)
class AdiabaticTrack:
    initial_fock: tuple[int, ...]
    slices: tuple[TrackPoint, ...]
    vectors: tuple[StateVector, ...]
    spectra: tuple[SpectrumSlice, ...]

    @property
    def final_state(self) -> StateVector:
        return self.vectors[-1]

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.slices])

    def gaps(self) -> np.ndarray:
        """Distance from the tracked level to its nearest neighbour at each slice."""
        out = []
        for p, sl in zip(self.slices, self.spectra):
            others = np.delete(sl.eigenvalues, p.index)
            out.append(np.min(np.abs(others - p.energy)) if others.size else np.inf)
        return np.array(out)


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real and positive."""
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    phases = pivots / np.abs(pivots)
    return vecs / phases


def _eigh(dense: np.ndarray, dense_threshold: int) -> tuple[np.ndarray, np.ndarray]:
    dim = dense.shape[0]
    if dim > dense_threshold:
        raise ParameterError(f"dimension {dim} exceeds the dense threshold {dense_threshold}")
    scale = max(1.0, float(np.max(np.abs(dense)))) if dim else 1.0
    if dim and float(np.max(np.abs(dense - dense.conj().T))) > 1e-12 * scale:
        raise InternalError("Hamiltonian is not Hermitian")
    if np.iscomplexobj(dense) and not np.any(dense.imag):
        dense = dense.real
    w, v = np.linalg.eigh(dense)
    return w, _fix_phase(v)


def diagonalize(H: HamiltonianMatrix, dense_threshold: int = DENSE_THRESHOLD, s: float = float("nan")) -> SpectrumSlice:
    w, v = _eigh(H.toarray(), dense_threshold)
    return SpectrumSlice(ramp_parameter=s, eigenvalues=w, eigenvectors=v, basis=H.basis)


def ramp_parameters(n_slices: int) -> np.ndarray:
    """s values from 1 to 0, evenly spaced in ramp time."""
    if n_slices < 2:
        raise ParameterError("need at least two slices")
    u = np.linspace(0.0, 1.0, n_slices)
    s = ramp_shape(u, 1.0, TAU_FRACTION)
    s[0], s[-1] = 1.0, 0.0
    return s


def _resolve_profile(config: LatticeConfig, stagger) -> np.ndarray:
    if isinstance(stagger, str):
        return config.stagger(stagger)
    prof = np.asarray(stagger, dtype=float)
    if prof.shape != (config.L,):
        raise ParameterError(f"stagger profile needs {config.L} entries")
    return prof


def _slice(parts: HamiltonianParts, profile: np.ndarray, s: float, dense_threshold: int) -> SpectrumSlice:
    dense = parts.matrix(s * profile).toarray()
    w, v = _eigh(dense, dense_threshold)
    return SpectrumSlice(ramp_parameter=float(s), eigenvalues=w, eigenvectors=v, basis=parts.basis)


def track_eigenstate(
    config: LatticeConfig,
    stagger,
    initial_fock: Sequence[int],
    n_slices: int = 101,
    n_max: int = DEFAULT_NMAX,
    basis: BasisSet | None = None,
    dense_threshold: int = DENSE_THRESHOLD,
    min_overlap: float = INITIAL_OVERLAP_MIN,
) -> AdiabaticTrack:
    """Follow the eigenstate that starts on ``initial_fock`` from s=1 down to s=0.

    At s=1 the eigenvector with the largest amplitude overlap |<fock|v>| is
    selected; it must exceed ``min_overlap``. Later slices pick the eigenvector
    with the largest |<v_prev|v>|.
    """
    fock = tuple(int(n) for n in initial_fock)
    if len(fock) != config.L:
        raise ParameterError(f"initial_fock needs {config.L} entries")
    if basis is None:
        basis = enumerate_basis(config.L, max(n_max, max(fock, default=0)), Sector.fixed(sum(fock)))
    profile = _resolve_profile(config, stagger)
    parts = hamiltonian_parts(config, basis)
    k0 = state_index(basis, fock)

    points, vectors, spectra = [], [], []
    prev = None
    for s in ramp_parameters(n_slices):
        sl = _slice(parts, profile, s, dense_threshold)
        if prev is None:
            weights = np.abs(sl.eigenvectors[k0, :])
            k = int(np.argmax(weights))
            if weights[k] <= min_overlap:
                raise ParameterError(
                    f"initial Fock state is not an eigenstate of the disordered lattice "
                    f"(best overlap {weights[k]:.4f})"
                )
            ov = float(weights[k])
        else:
            overlaps = np.abs(sl.eigenvectors.conj().T @ prev)
            order = np.argsort(overlaps)[::-1]
            k = int(order[0])
            if overlaps.size > 1 and overlaps[order[0]] - overlaps[order[1]] < TIE_TOLERANCE:
                raise AmbiguityError(f"tracking is ambiguous at s={s:.6g}")
            ov = float(overlaps[k])
        vec = sl.eigenvectors[:, k]
        # keep a continuous sign convention along the track
        if prev is not None and np.real(np.vdot(prev, vec)) < 0:
            vec = -vec
        prev = vec
        points.append(TrackPoint(s=float(s), index=k, energy=float(sl.eigenvalues[k]), overlap=ov))
        vectors.append(StateVector(basis, vec))
        spectra.append(sl)
    return AdiabaticTrack(fock, tuple(points), tuple(vectors), tuple(spectra))


def band_spectrum(
    config: LatticeConfig,
    N: int,
    n_slices: int = 101,
    stagger="small",
    n_max: int = DEFAULT_NMAX,
    basis: BasisSet | None = None,
    dense_threshold: int = DENSE_THRESHOLD,
) -> list[SpectrumSlice]:
    """Spectrum of the fixed-N sector at each slice of the melt."""
    if basis is None:
        if N > config.L * n_max:
            raise ParameterError(f"N={N} exceeds L*n_max={config.L * n_max}")
        basis = enumerate_basis(config.L, n_max, Sector.fixed(N))
    profile = _resolve_profile(config, stagger)
    parts = hamiltonian_parts(config, basis)
    return [_slice(parts, profile, s, dense_threshold) for s in ramp_parameters(n_slices)]


def top_sites(profile, N: int) -> tuple[int, ...]:
    """Fock state with one photon on each of the N highest-energy sites."""
    profile = np.asarray(profile, dtype=float)
    if not 0 <= N <= profile.size:
        raise ParameterError(f"need 0 <= N <= {profile.size}")
    order = np.argsort(-profile, kind="stable")[:N]
    occ = np.zeros(profile.size, dtype=int)
    occ[order] = 1
    return tuple(int(n) for n in occ)


def fluid_ground_state(config: LatticeConfig, N: int, n_max: int = DEFAULT_NMAX, basis: BasisSet | None = None) -> StateVector:
    """Highest-energy eigenstate of the N-particle sector at zero disorder."""
    if basis is None:
        basis = enumerate_basis(config.L, n_max, Sector.fixed(N))
    parts = hamiltonian_parts(config, basis)
    w, v = _eigh(parts.matrix(np.zeros(config.L)).toarray(), DENSE_THRESHOLD)
    return StateVector(basis, v[:, -1])
