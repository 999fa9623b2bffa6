"""Bosonic Fock basis with per-site truncation and particle-number sectors.

States are ordered lexicographically on the occupation tuple with site 1 as the
most significant digit, so the index of a state never depends on how the basis
was produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import LookupFailure, ParameterError

DEFAULT_NMAX = 3
DEFAULT_ENR_CAP = 6

FockState = tuple[int, ...]


@dataclass(frozen=True)
class Sector:
    """Which occupation tuples a basis keeps.

    ``kind`` is ``"fixed"`` (total number equals ``value``), ``"enr"`` (total
    number at most ``value``) or ``"full"`` (no constraint).
    """

    kind: str
    value: int | None = None

    @classmethod
    def fixed(cls, n: int) -> "Sector":
        return cls("fixed", int(n))

    @classmethod
    def enr(cls, cap: int = DEFAULT_ENR_CAP) -> "Sector":
        return cls("enr", int(cap))

    @classmethod
    def full(cls) -> "Sector":
        return cls("full", None)

    def admits(self, total: int) -> bool:
        if self.kind == "fixed":
            return total == self.value
        if self.kind == "enr":
            return total <= self.value
        return True

    def as_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class BasisSet:
    L: int
    n_max: int
    sector: Sector
    states: tuple[FockState, ...]
    index: dict[FockState, int] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def occupations(self) -> np.ndarray:
        """Integer array of shape (dim, L)."""
        occ = self.__dict__.get("_occ")
        if occ is None:
            occ = np.array(self.states, dtype=np.int64).reshape(len(self.states), self.L)
            occ.setflags(write=False)
            object.__setattr__(self, "_occ", occ)
        return occ

    @property
    def particle_numbers(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def fock_vector(self, state: Sequence[int]) -> np.ndarray:
        """Unit amplitude vector on a single Fock state."""
        v = np.zeros(self.dim, dtype=complex)
        v[state_index(self, state)] = 1.0
        return v

    def same_as(self, other: "BasisSet") -> bool:
        return self is other or (
            self.L == other.L
            and self.n_max == other.n_max
            and self.states == other.states
        )


def _compositions(L: int, n_max: int, lo: int, hi: int) -> Iterator[FockState]:
    """Lexicographic tuples of length L, entries in [0, n_max], sum in [lo, hi]."""
    prefix = [0] * L

    def rec(site: int, total: int) -> Iterator[FockState]:
        remaining = L - site
        if remaining == 0:
            if lo <= total <= hi:
                yield tuple(prefix)
            return
        for n in range(n_max + 1):
            t = total + n
            if t > hi:
                break
            if t + (remaining - 1) * n_max < lo:
                continue
            prefix[site] = n
            yield from rec(site + 1, t)
        prefix[site] = 0

    yield from rec(0, 0)


def _build(L: int, n_max: int, sector: Sector, states: list[FockState]) -> BasisSet:
    index = {s: k for k, s in enumerate(states)}
    return BasisSet(L=L, n_max=n_max, sector=sector, states=tuple(states), index=index)


def enumerate_basis(L: int, n_max: int = DEFAULT_NMAX, sector: Sector | None = None) -> BasisSet:
    """Enumerate the canonical Fock basis of ``L`` sites truncated at ``n_max``."""
    if sector is None:
        sector = Sector.full()
    if L < 1 or n_max < 1:
        raise ParameterError(f"need L >= 1 and n_max >= 1, got L={L}, n_max={n_max}")
    cap = L * n_max
    if sector.kind == "fixed":
        if sector.value is None or not 0 <= sector.value <= cap:
            raise ParameterError(f"fixed-N sector needs 0 <= N <= {cap}, got {sector.value}")
        lo = hi = sector.value
    elif sector.kind == "enr":
        if sector.value is None or sector.value < 0:
            raise ParameterError(f"ENR cap must be >= 0, got {sector.value}")
        lo, hi = 0, min(sector.value, cap)
    elif sector.kind == "full":
        lo, hi = 0, cap
    else:
        raise ParameterError(f"unknown sector kind {sector.kind!r}")
    return _build(L, n_max, sector, list(_compositions(L, n_max, lo, hi)))


def state_index(basis: BasisSet, s: Sequence[int]) -> int:
    key = tuple(int(n) for n in s)
    try:
        return basis.index[key]
    except KeyError:
        raise LookupFailure(f"state {key} is not in the basis") from None


def hardcore_projection(basis: BasisSet) -> BasisSet:
    """Sub-basis with at most one particle per site, same L and sector."""
    kept = [s for s in basis.states if max(s, default=0) <= 1]
    return _build(basis.L, 1, basis.sector, kept)
