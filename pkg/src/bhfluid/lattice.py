"""Lattice parameters and the JSON device description.

Internally every frequency is an angular frequency in rad/us. Device files
quote cycle frequencies in MHz (f = omega / 2pi) and are converted exactly once,
in :func:`mhz_to_rad_per_us`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ParameterError

TWO_PI = 2.0 * math.pi


def mhz_to_rad_per_us(f_mhz):
    """Cycle frequency in MHz to angular frequency in rad/us."""
    return TWO_PI * np.asarray(f_mhz, dtype=float)


def rad_per_us_to_mhz(omega):
    return np.asarray(omega, dtype=float) / TWO_PI


def tunnelling_time(config: "LatticeConfig") -> float:
    """The time unit 1/J in microseconds, with J the mean tunnelling in MHz.

    Ramp durations are quoted as multiples of 1/J where J is the cycle
    frequency J/2pi (about 9 MHz for the device, so 1/J is about 111 ns).
    """
    if config.J_mean == 0:
        raise ParameterError("tunnelling time is undefined without bonds")
    return TWO_PI / config.J_mean


def in_tunnelling_times(x: float, config: "LatticeConfig") -> float:
    """Convert x (in units of 1/J) to microseconds."""
    return float(x) * tunnelling_time(config)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LatticeConfig:
    """Bose-Hubbard chain parameters, all in rad/us (loss rates in 1/us).

    ``delta_large`` and ``delta_small`` are the two stagger profiles, already
    measured from ``omega0``. ``J_nnn`` is carried for completeness and ignored
    by the Hamiltonian builder.
    """

    L: int
    J: np.ndarray
    U: np.ndarray
    omega0: float = 0.0
    delta_large: np.ndarray | None = None
    delta_small: np.ndarray | None = None
    gamma1: np.ndarray | None = None
    J_nnn: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        L = int(self.L)
        if L < 1:
            raise ParameterError(f"L must be >= 1, got {L}")
        object.__setattr__(self, "L", L)
        J = _frozen(np.atleast_1d(self.J) if L > 1 else np.zeros(0))
        if J.shape != (L - 1,):
            raise ParameterError(f"J needs {L - 1} bond entries, got {J.shape[0]}")
        object.__setattr__(self, "J", J)
        U = _frozen(np.broadcast_to(np.asarray(self.U, dtype=float), (L,)))
        object.__setattr__(self, "U", U)
        for name in ("delta_large", "delta_small", "gamma1"):
            v = getattr(self, name)
            if v is None:
                continue
            v = _frozen(v)
            if v.shape != (L,):
                raise ParameterError(f"{name} needs {L} site entries, got {v.shape}")
            if name == "gamma1" and np.any(v < 0):
                raise ParameterError("gamma1 must be non-negative")
            object.__setattr__(self, name, v)
        if self.J_nnn is not None:
            object.__setattr__(self, "J_nnn", _frozen(self.J_nnn))

    @property
    def J_mean(self) -> float:
        return float(np.mean(np.abs(self.J))) if self.L > 1 else 0.0

    def stagger(self, which: str) -> np.ndarray:
        prof = {"large": self.delta_large, "small": self.delta_small}.get(which)
        if prof is None:
            raise ParameterError(f"no {which!r} stagger profile in this config")
        return prof

    def interaction_ratio(self) -> float:
        """min |U_i| / max |J_ij|."""
        if self.L < 2:
            return math.inf
        return float(np.min(np.abs(self.U)) / np.max(np.abs(self.J)))

    def with_(self, **changes) -> "LatticeConfig":
        return replace(self, **changes)

    def to_json_dict(self) -> dict[str, Any]:
        def mhz(a):
            return None if a is None else [float(x) for x in rad_per_us_to_mhz(a)]

        omega0_mhz = float(rad_per_us_to_mhz(self.omega0))
        out = {
            "sites": self.L,
            "bonds": [[i, i + 1] for i in range(self.L - 1)],
            "J_MHz": mhz(self.J),
            "U_MHz": mhz(self.U),
            "omega0_MHz": omega0_mhz,
            "stagger_large_MHz": None,
            "stagger_small_MHz": None,
            "gamma1_per_us": None if self.gamma1 is None else [float(g) for g in self.gamma1],
        }
        for key, prof in (("stagger_large_MHz", self.delta_large), ("stagger_small_MHz", self.delta_small)):
            if prof is not None:
                out[key] = [omega0_mhz + float(x) for x in rad_per_us_to_mhz(prof)]
        return out


def uniform_config(
    L: int,
    J_mhz: float = 9.0,
    U_mhz: float = -240.0,
    stagger_mhz=None,
    gamma1_per_us=None,
) -> LatticeConfig:
    """Homogeneous chain, handy for closed-form checks."""
    stagger = None if stagger_mhz is None else mhz_to_rad_per_us(stagger_mhz)
    return LatticeConfig(
        L=L,
        J=mhz_to_rad_per_us(np.full(L - 1, J_mhz)),
        U=mhz_to_rad_per_us(np.full(L, U_mhz)),
        delta_large=stagger,
        delta_small=stagger,
        gamma1=None if gamma1_per_us is None else np.broadcast_to(gamma1_per_us, (L,)),
    )


def config_from_dict(doc: dict[str, Any]) -> LatticeConfig:
    """Build a config from the JSON device schema (values in MHz)."""
    try:
        L = int(doc["sites"])
        J = doc["J_MHz"]
        U = doc["U_MHz"]
    except KeyError as exc:
        raise ParameterError(f"missing required key {exc.args[0]!r}") from None
    bonds = doc.get("bonds")
    if bonds is not None:
        expected = [[i, i + 1] for i in range(L - 1)]
        if [list(map(int, b)) for b in bonds] != expected:
            raise ParameterError("bonds must list the open nearest-neighbour chain [[0,1],[1,2],...]")
    if np.ndim(J) == 0:
        J = [J] * (L - 1)
    omega0_mhz = float(doc.get("omega0_MHz", 0.0))

    def stagger(key):
        v = doc.get(key)
        if v is None:
            return None
        return mhz_to_rad_per_us(np.asarray(v, dtype=float) - omega0_mhz)

    gamma1 = doc.get("gamma1_per_us")
    if gamma1 is None and doc.get("T1_us") is not None:
        gamma1 = 1.0 / np.asarray(doc["T1_us"], dtype=float)
    nnn = doc.get("next_nearest_J_MHz")
    return LatticeConfig(
        L=L,
        J=mhz_to_rad_per_us(J),
        U=mhz_to_rad_per_us(U),
        omega0=float(mhz_to_rad_per_us(omega0_mhz)),
        delta_large=stagger("stagger_large_MHz"),
        delta_small=stagger("stagger_small_MHz"),
        gamma1=gamma1,
        J_nnn=None if nnn is None else mhz_to_rad_per_us(nnn),
    )


def load_config(path: str | Path) -> LatticeConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def device_config() -> LatticeConfig:
    """The seven-site device shipped with the package."""
    text = resources.files("bhfluid.data").joinpath("device.json").read_text()
    return config_from_dict(json.loads(text))
