"""Time-dependent disorder profiles delta_i(t).

A schedule is an ordered list of segments. Ramps use an exponential whose
residual at the end of the segment is subtracted and rescaled away, so a ramp
of duration t_r and time constant tau runs from its start profile to its end
profile exactly::

    s(u) = (exp(-u/tau) - exp(-t_r/tau)) / (1 - exp(-t_r/tau))
    delta(u) = s(u) * start + (1 - s(u)) * end

The default tau is 0.4 * t_r.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .lattice import LatticeConfig

TAU_FRACTION = 0.4
KINDS = ("jump", "hold", "exp_ramp", "exp_ramp_reverse")


def ramp_shape(u, duration: float, tau: float):
    """Rescaled exponential progress: 1 at u=0, 0 at u=duration."""
    if duration <= 0:
        raise ParameterError("ramp duration must be positive")
    if tau <= 0:
        raise ParameterError("ramp tau must be positive")
    floor = math.exp(-duration / tau)
    return (np.exp(-np.asarray(u, dtype=float) / tau) - floor) / (1.0 - floor)


@dataclass(frozen=True, eq=False)
class Segment:
    kind: str
    duration: float
    start_profile: np.ndarray
    end_profile: np.ndarray
    tau: float | None = None
    span: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown segment kind {self.kind!r}")
        start = np.array(self.start_profile, dtype=float)
        end = np.array(self.end_profile, dtype=float)
        if start.shape != end.shape or start.ndim != 1:
            raise ParameterError("segment profiles must be 1-D and of equal length")
        start.setflags(write=False)
        end.setflags(write=False)
        object.__setattr__(self, "start_profile", start)
        object.__setattr__(self, "end_profile", end)
        duration = float(self.duration)
        if duration < 0:
            raise ParameterError("segment duration must be >= 0")
        if self.kind == "jump" and duration != 0:
            raise ParameterError("jumps have zero duration")
        if self.kind in ("exp_ramp", "exp_ramp_reverse"):
            if duration <= 0:
                raise ParameterError("ramps need a positive duration")
            span = duration if self.span is None else float(self.span)
            if span < duration:
                raise ParameterError("ramp span must be at least the segment duration")
            tau = TAU_FRACTION * span if self.tau is None else float(self.tau)
            if tau <= 0:
                raise ParameterError("ramp tau must be positive")
            object.__setattr__(self, "tau", tau)
            object.__setattr__(self, "span", span)
        if self.kind == "hold" and not np.array_equal(start, end):
            raise ParameterError("hold segments keep a constant profile")
        object.__setattr__(self, "duration", duration)

    def evaluate(self, u: float) -> np.ndarray:
        """Profile at local time u in [0, duration].

        Ramp profiles are the endpoints of the full ``span``; a ramp cut short
        (span > duration) stops before reaching its target.
        """
        if self.kind in ("jump", "hold"):
            return self.end_profile
        if self.kind == "exp_ramp":
            s = float(ramp_shape(u, self.span, self.tau))
            return s * self.start_profile + (1.0 - s) * self.end_profile
        # time mirror of a forward ramp from end_profile towards start_profile
        s = float(ramp_shape(self.duration - u, self.span, self.tau))
        return s * self.end_profile + (1.0 - s) * self.start_profile

    def boundary_values(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "jump":
            return self.start_profile, self.end_profile
        return self.evaluate(0.0), self.evaluate(self.duration)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "duration_us": self.duration,
            "start_rad_per_us": [float(x) for x in self.start_profile],
            "end_rad_per_us": [float(x) for x in self.end_profile],
            "tau_us": self.tau,
            "span_us": self.span,
        }


@dataclass(frozen=True, eq=False)
class RampSchedule:
    segments: tuple[Segment, ...]
    mirror_symmetric: bool = False
    _starts: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ParameterError("a schedule needs at least one segment")
        L = segs[0].start_profile.shape[0]
        starts = []
        t = 0.0
        prev_end = None
        for seg in segs:
            if seg.start_profile.shape[0] != L:
                raise ParameterError("all segments must cover the same number of sites")
            first, last = seg.boundary_values()
            if prev_end is not None and seg.kind != "jump" and not np.allclose(
                first, prev_end, rtol=0, atol=1e-9
            ):
                raise ParameterError("profile discontinuity outside a jump segment")
            starts.append(t)
            t += seg.duration
            prev_end = last
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", tuple(starts))

    @property
    def total_duration(self) -> float:
        return self._starts[-1] + self.segments[-1].duration

    @property
    def n_sites(self) -> int:
        return self.segments[0].start_profile.shape[0]

    def breakpoints(self) -> list[float]:
        """Segment boundaries, including 0 and the end time."""
        pts = sorted(set(self._starts) | {self.total_duration})
        return pts

    def to_json(self) -> str:
        return json.dumps(
            {"mirror_symmetric": self.mirror_symmetric, "segments": [s.to_dict() for s in self.segments]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "RampSchedule":
        doc = json.loads(text)
        segs = [
            Segment(
                kind=d["kind"],
                duration=d["duration_us"],
                start_profile=d["start_rad_per_us"],
                end_profile=d["end_rad_per_us"],
                tau=d.get("tau_us"),
                span=d.get("span_us"),
            )
            for d in doc["segments"]
        ]
        return cls(tuple(segs), mirror_symmetric=bool(doc.get("mirror_symmetric", False)))


def _fold(total: float, t: float) -> float:
    # Map t onto the first half so that t and (total - t) evaluate to bit-identical
    # profiles; total - t is exact for t >= total/2, the double subtraction below
    # reproduces the same rounding for t < total/2.
    if t > 0.5 * total:
        return total - t
    return total - (total - t)


def disorder_at(schedule: RampSchedule, t: float) -> np.ndarray:
    """Per-site disorder (rad/us) at time t. Jumps are right-continuous."""
    total = schedule.total_duration
    if not 0.0 <= t <= total:
        raise ParameterError(f"t={t} outside schedule [0, {total}]")
    if schedule.mirror_symmetric:
        t = _fold(total, t)
    for seg, t0 in zip(reversed(schedule.segments), reversed(schedule._starts)):
        if t >= t0:
            if seg.kind == "jump":
                return seg.end_profile
            return seg.evaluate(min(t - t0, seg.duration))
    return schedule.segments[0].evaluate(0.0)


def sample_profiles(schedule: RampSchedule, times: Sequence[float]) -> np.ndarray:
    return np.array([disorder_at(schedule, t) for t in times])


def melt_schedule(config: LatticeConfig, t_ramp: float, stagger: str = "small") -> RampSchedule:
    """Single exponential ramp from a stagger profile to zero disorder."""
    if t_ramp <= 0:
        raise ParameterError("t_ramp must be positive")
    start = config.stagger(stagger)
    return RampSchedule((Segment("exp_ramp", t_ramp, start, np.zeros(config.L)),))


def boomerang_schedule(
    config: LatticeConfig, t_ramp: float, t_hold: float = 0.0, stagger: str = "small"
) -> RampSchedule:
    """Ramp to degeneracy, optional hold, then the exact time mirror back up."""
    if t_ramp <= 0:
        raise ParameterError("t_ramp must be positive")
    if t_hold < 0:
        raise ParameterError("t_hold must be >= 0")
    start = config.stagger(stagger)
    zero = np.zeros(config.L)
    segs = [Segment("exp_ramp", t_ramp, start, zero)]
    if t_hold > 0:
        segs.append(Segment("hold", t_hold, zero, zero))
    segs.append(Segment("exp_ramp_reverse", t_ramp, zero, start))
    return RampSchedule(tuple(segs), mirror_symmetric=True)


def partial_melt_schedule(
    config: LatticeConfig, t_ramp: float, fraction: float, stagger: str = "small", reverse: bool = False
) -> RampSchedule:
    """The first ``fraction`` of a melt; with ``reverse`` the same path is retraced back up."""
    if t_ramp <= 0:
        raise ParameterError("t_ramp must be positive")
    if not 0 < fraction <= 1:
        raise ParameterError("fraction must lie in (0, 1]")
    start = config.stagger(stagger)
    zero = np.zeros(config.L)
    t_stop = fraction * t_ramp
    tau = TAU_FRACTION * t_ramp
    segs = [Segment("exp_ramp", t_stop, start, zero, tau=tau, span=t_ramp)]
    if reverse:
        segs.append(Segment("exp_ramp_reverse", t_stop, zero, start, tau=tau, span=t_ramp))
    return RampSchedule(tuple(segs), mirror_symmetric=reverse)


def preparation_sequence(
    config: LatticeConfig, t_ramp: float, settle: float = 0.6, readout_settle: float = 0.6
) -> RampSchedule:
    """Large stagger -> jump to small -> settle -> melt -> jump back to large -> settle.

    Photons are injected instantaneously at the end of the first settle; the
    final jump freezes tunnelling for readout.
    """
    large = config.stagger("large")
    small = config.stagger("small")
    zero = np.zeros(config.L)
    segs = [
        Segment("jump", 0.0, large, small),
        Segment("hold", settle, small, small),
        Segment("exp_ramp", t_ramp, small, zero),
        Segment("jump", 0.0, zero, large),
        Segment("hold", readout_settle, large, large),
    ]
    return RampSchedule(tuple(segs))
