"""Sparse Bose-Hubbard Hamiltonian in the rotating frame of the degeneracy point.

    H = -sum_i J_i (a_i^+ a_{i+1} + h.c.) + sum_i U_i/2 n_i (n_i - 1) + sum_i delta_i n_i

with open boundaries, J_i > 0 and U_i < 0 for the device. Zero disorder means
every single-particle diagonal energy is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .hilbert import BasisSet
from .lattice import LatticeConfig
from .state import StateVector, require_same_basis


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    basis: BasisSet
    matrix: sp.csr_matrix
    site_energies: np.ndarray

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def dim(self) -> int:
        return self.basis.dim


@dataclass(frozen=True, eq=False)
class HamiltonianParts:
    """Pieces from which H(delta) = hopping + diag(interaction + occ @ delta) is rebuilt cheaply."""

    basis: BasisSet
    hopping: sp.csr_matrix
    interaction: np.ndarray
    occupations: np.ndarray

    def diagonal(self, site_energies) -> np.ndarray:
        return self.interaction + self.occupations @ np.asarray(site_energies, dtype=float)

    def matrix(self, site_energies) -> sp.csr_matrix:
        return (self.hopping + sp.diags(self.diagonal(site_energies))).tocsr()

    def norm_bound(self, site_energies) -> float:
        """Max absolute row sum, an upper bound on the spectral radius."""
        rows = np.asarray(abs(self.hopping).sum(axis=1)).ravel()
        return float(np.max(rows + np.abs(self.diagonal(site_energies)))) if self.basis.dim else 0.0


def _hopping(basis: BasisSet, J: np.ndarray) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    n_max = basis.n_max
    for k, s in enumerate(basis.states):
        for b in range(basis.L - 1):
            ni, nj = s[b], s[b + 1]
            # a_b^+ a_{b+1} and its conjugate; each connected pair is visited once
            if nj > 0 and ni < n_max:
                t = list(s)
                t[b] += 1
                t[b + 1] -= 1
                m = basis.index.get(tuple(t))
                if m is not None:
                    amp = -J[b] * np.sqrt((ni + 1) * nj)
                    rows += [m, k]
                    cols += [k, m]
                    vals += [amp, amp]
    dim = basis.dim
    return sp.csr_matrix((np.array(vals, dtype=float), (rows, cols)), shape=(dim, dim))


def hamiltonian_parts(config: LatticeConfig, basis: BasisSet) -> HamiltonianParts:
    if basis.L != config.L:
        raise ParameterError(f"basis has {basis.L} sites, config has {config.L}")
    occ = basis.occupations.astype(float)
    interaction = (occ * (occ - 1.0)) @ (0.5 * config.U) if basis.dim else np.zeros(0)
    return HamiltonianParts(
        basis=basis,
        hopping=_hopping(basis, config.J),
        interaction=interaction,
        occupations=occ,
    )


def build_hamiltonian(config: LatticeConfig, site_energies, basis: BasisSet) -> HamiltonianMatrix:
    """Assemble H for one disorder profile ``site_energies`` (rad/us, length L)."""
    delta = np.asarray(site_energies, dtype=float)
    if delta.shape != (config.L,):
        raise ParameterError(f"site_energies needs length {config.L}, got shape {delta.shape}")
    parts = hamiltonian_parts(config, basis)
    delta = delta.copy()
    delta.setflags(write=False)
    return HamiltonianMatrix(basis=basis, matrix=parts.matrix(delta), site_energies=delta)


def apply_hamiltonian(H: HamiltonianMatrix, psi: StateVector) -> StateVector:
    require_same_basis(H.basis, psi.basis)
    return StateVector(H.basis, H.matrix @ psi.amplitudes)


def is_hermitian(H: HamiltonianMatrix, atol: float = 1e-12) -> bool:
    diff = H.matrix - H.matrix.conj().T
    return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= atol
