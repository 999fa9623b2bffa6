"""Finite-shot site-resolved readout with binning errors and their correction.

A site is read out as "excited" when it holds at least one photon. Binning
errors act through a column-stochastic confusion matrix F[measured, true];
two sites read simultaneously use the Kronecker product of their 2x2
matrices with the first site as the more significant bit (outcome index
2*b_i + b_j).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConditioningError, ParameterError
from .state import StateVector

CONDITION_LIMIT = 1e6
DISTRIBUTION_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    F: np.ndarray

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        if F.shape not in ((2, 2), (4, 4)):
            raise ParameterError(f"confusion matrix must be 2x2 or 4x4, got {F.shape}")
        if np.any(F < -1e-12) or np.any(F > 1 + 1e-12):
            raise ParameterError("confusion matrix entries must lie in [0, 1]")
        if not np.allclose(F.sum(axis=0), 1.0, rtol=0, atol=1e-12):
            raise ParameterError("confusion matrix columns must sum to 1")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @property
    def dims(self) -> int:
        return self.F.shape[0]

    @classmethod
    def identity(cls, dims: int = 2) -> "ConfusionMatrix":
        return cls(np.eye(dims))

    @classmethod
    def from_errors(cls, p_e_given_g: float, p_g_given_e: float) -> "ConfusionMatrix":
        return cls([[1.0 - p_e_given_g, p_g_given_e], [p_e_given_g, 1.0 - p_g_given_e]])

    @classmethod
    def from_fidelity(cls, fidelity: float) -> "ConfusionMatrix":
        """Symmetric binning errors with assignment fidelity 1 - (P(e|g) + P(g|e))/2."""
        if not 0.5 < fidelity <= 1.0:
            raise ParameterError("fidelity must lie in (0.5, 1]")
        eps = 1.0 - fidelity
        return cls.from_errors(eps, eps)

    def tensor(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.dims != 2 or other.dims != 2:
            raise ParameterError("only 2x2 matrices combine into a two-site matrix")
        return ConfusionMatrix(np.kron(self.F, other.F))

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.F))

    def to_json(self) -> str:
        return json.dumps({"F": self.F.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ConfusionMatrix":
        doc = json.loads(text)
        if "F" not in doc:
            raise ParameterError("confusion matrix JSON needs an 'F' entry")
        return cls(doc["F"])

    @classmethod
    def load(cls, path: str | Path) -> "ConfusionMatrix":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class ShotRecord:
    n_shots: int
    counts: np.ndarray
    seed: object

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_shots


@dataclass(frozen=True, eq=False)
class CorrectedDistribution:
    """Clamped-and-renormalized estimate plus the raw F^-1 p vector."""

    p: np.ndarray
    raw: np.ndarray


def _as_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ParameterError("distribution must be a non-empty 1-D array")
    if np.any(p < -DISTRIBUTION_ATOL) or abs(p.sum() - 1.0) > DISTRIBUTION_ATOL:
        raise ParameterError("not a probability distribution")
    return np.clip(p, 0.0, None)


def sample_shots(p, n_shots: int, seed) -> ShotRecord:
    """Multinomial histogram of ``n_shots`` outcomes drawn from ``p``.

    ``seed`` may be an int or a ``SeedSequence``.
    """
    p = _as_distribution(p)
    if n_shots < 1:
        raise ParameterError("n_shots must be >= 1")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n_shots, p / p.sum())
    return ShotRecord(int(n_shots), counts, seed)


def apply_confusion(F: ConfusionMatrix, p_true) -> np.ndarray:
    p = _as_distribution(p_true)
    if p.size != F.dims:
        raise ParameterError(f"distribution has {p.size} outcomes, confusion matrix {F.dims}")
    return F.F @ p


def correct_confusion(F: ConfusionMatrix, p_meas, condition_limit: float = CONDITION_LIMIT) -> CorrectedDistribution:
    p = np.asarray(p_meas, dtype=float)
    if p.shape != (F.dims,):
        raise ParameterError(f"distribution has shape {p.shape}, confusion matrix {F.dims}")
    cond = F.condition_number()
    if not cond < condition_limit:
        raise ConditioningError(f"confusion matrix condition number {cond:.3g} exceeds {condition_limit:.3g}")
    raw = np.linalg.solve(F.F, p)
    clamped = np.clip(raw, 0.0, 1.0)
    total = clamped.sum()
    clamped = clamped / total if total > 0 else np.full_like(raw, 1.0 / raw.size)
    return CorrectedDistribution(clamped, raw)


def repeat_statistics(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (sample std with ddof=1 over sqrt(n))."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ParameterError("need at least two repeats")
    # shift by the first value so constant input gives exactly zero spread
    d = v - v[0]
    return float(v[0] + d.mean()), float(d.std(ddof=1) / np.sqrt(v.size))


def estimate_confusion(counts_prepared_g, counts_prepared_e) -> ConfusionMatrix:
    """Confusion matrix from calibration histograms taken with |g> and |e> prepared."""
    cols = []
    for c in (counts_prepared_g, counts_prepared_e):
        c = np.asarray(c, dtype=float)
        if c.shape != (2,) or c.sum() <= 0:
            raise ParameterError("calibration histograms need two non-negative counts")
        cols.append(c / c.sum())
    return ConfusionMatrix(np.column_stack(cols))


def site_outcomes(psi: StateVector, site: int) -> np.ndarray:
    """(P(empty), P(occupied)) for one site."""
    occ = psi.basis.occupations[:, site] >= 1
    p = psi.probabilities / np.sum(psi.probabilities)
    p1 = float(p @ occ)
    return np.array([1.0 - p1, p1])


def pair_outcomes(psi: StateVector, i: int, j: int) -> np.ndarray:
    """Joint outcome distribution of sites i and j, index 2*b_i + b_j."""
    occ = psi.basis.occupations
    idx = 2 * (occ[:, i] >= 1) + (occ[:, j] >= 1)
    p = psi.probabilities / np.sum(psi.probabilities)
    return np.bincount(idx, weights=p, minlength=4)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    mean: np.ndarray
    sem: np.ndarray
    per_repeat: np.ndarray  # (n_repeats, L)
    counts: np.ndarray  # (n_repeats, L, 2) raw histograms


def estimate_densities(
    p_excited: Sequence[float],
    confusion: Sequence[ConfusionMatrix],
    n_shots: int,
    n_repeats: int,
    seed: int,
) -> DensityEstimate:
    """Emulate ``n_repeats`` repeats of ``n_shots`` single-site readouts per site.

    Shots of repeat r at site i use child (r, i) of ``SeedSequence(seed)``.
    Each repeat's histogram is corrected through the site's confusion matrix.
    """
    p_excited = np.asarray(p_excited, dtype=float)
    L = p_excited.size
    if len(confusion) != L:
        raise ParameterError("need one confusion matrix per site")
    seeds = np.random.SeedSequence(seed).spawn(n_repeats * L)
    if n_repeats < 2:
        raise ParameterError("need at least two repeats")
    est = np.empty((n_repeats, L))
    counts = np.empty((n_repeats, L, 2), dtype=np.int64)
    for r in range(n_repeats):
        for i in range(L):
            p_true = np.array([1.0 - p_excited[i], p_excited[i]])
            rec = sample_shots(apply_confusion(confusion[i], p_true), n_shots, seeds[r * L + i])
            counts[r, i] = rec.counts
            est[r, i] = correct_confusion(confusion[i], rec.frequencies).p[1]
    stats = [repeat_statistics(est[:, i]) for i in range(L)]
    return DensityEstimate(np.array([s[0] for s in stats]), np.array([s[1] for s in stats]), est, counts)
