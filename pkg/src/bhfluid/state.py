from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .hilbert import BasisSet, state_index


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a :class:`BasisSet`."""

    basis: BasisSet
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.basis.dim,):
            raise ParameterError(
                f"amplitude vector has shape {amp.shape}, basis has dimension {self.basis.dim}"
            )
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_fock(cls, basis: BasisSet, occupations: Sequence[int]) -> "StateVector":
        amp = np.zeros(basis.dim, dtype=complex)
        amp[state_index(basis, occupations)] = 1.0
        return cls(basis, amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ParameterError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def require_same_basis(a: BasisSet, b: BasisSet) -> None:
    if not a.same_as(b):
        raise ParameterError("states are defined over different bases")
