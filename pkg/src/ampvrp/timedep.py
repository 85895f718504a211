"""Time-dependent travel times: section tensors, profiles, non-passing repair.

Travel time between two locations is piecewise constant over a partition of
the planning horizon into K sections.  The section is chosen by departure
time alone; a ride keeps the travel time of its departure section even when
it crosses a boundary.  Under that lookup rule the non-passing property
(leaving later never means arriving earlier) holds exactly if and only if,
for every ordered pair, the section times never decrease from one section to
the next.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class TimeProfile:
    """Scaler-over-time shape for one ordered cluster pair.

    ``samples`` are (time, scaler) points; the scaler in force at time t is
    the one of the last sample not after t (the first sample before that).
    ``base_time`` is the reference ride duration the scalers were normalized
    against; it is carried for provenance and sanity checks.
    """

    samples: Tuple[Tuple[float, float], ...]
    base_time: float = 1.0

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("time profile needs at least one sample")
        ts = [s[0] for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("time profile samples must be strictly increasing in time")
        if any(s[1] <= 0 for s in self.samples):
            raise ValueError("time profile scalers must be positive")
        if self.base_time <= 0:
            raise ValueError("time profile base_time must be positive")

    def scaler_at(self, t: float) -> float:
        out = self.samples[0][1]
        for st, sv in self.samples:
            if st <= t:
                out = sv
            else:
                break
        return out


@dataclass(frozen=True, eq=False)
class TravelTimeTensor:
    """K travel-time matrices over a partition of the horizon.

    ``section_boundaries`` has K+1 increasing entries; section k covers
    [boundaries[k], boundaries[k+1]), except that a departure exactly on a
    boundary belongs to the later section.  ``times`` is (K, n, n) seconds.
    """

    section_boundaries: np.ndarray
    times: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.section_boundaries, dtype=float)
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 3 or t.shape[1] != t.shape[2]:
            raise ValueError(f"times must be (K, n, n), got {t.shape}")
        if b.ndim != 1 or len(b) != t.shape[0] + 1:
            raise ValueError(
                f"need {t.shape[0] + 1} section boundaries, got {b.shape}"
            )
        if np.any(np.diff(b) <= 0):
            raise ValueError("section boundaries must be strictly increasing")
        b.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "section_boundaries", b)
        object.__setattr__(self, "times", t)

    @property
    def section_count(self) -> int:
        return self.times.shape[0]

    @property
    def n_locations(self) -> int:
        return self.times.shape[1]

    @property
    def horizon(self) -> Tuple[float, float]:
        return float(self.section_boundaries[0]), float(self.section_boundaries[-1])


def section_of(tensor: TravelTimeTensor, departure: float) -> Tuple[int, bool]:
    """Section index for a departure time, plus whether it was clamped.

    Departures before the horizon use the first section, departures at or
    past the horizon end use the last; both count as clamped.  A departure
    exactly on an interior boundary uses the later section.
    """
    b = tensor.section_boundaries
    k = tensor.section_count
    if departure < b[0]:
        return 0, True
    if departure >= b[-1]:
        return k - 1, True
    idx = int(np.searchsorted(b, departure, side="right")) - 1
    return idx, False


def lookup(tensor: TravelTimeTensor, i: int, j: int, departure: float) -> float:
    """Travel time from i to j for the section the departure falls in."""
    if i == j:
        raise ValueError(f"travel time lookup needs two distinct locations, got {i}")
    k, _ = section_of(tensor, departure)
    return float(tensor.times[k, i, j])


def non_passing_violations(tensor: TravelTimeTensor, limit: int = 5) -> list:
    """Describe pairs whose travel time drops between consecutive sections.

    Any such drop lets a later departure arrive earlier (passing), because
    departures arbitrarily close to the boundary keep the old, larger time.
    Returns at most ``limit`` descriptions plus a summary line when more
    exist; an empty list means the tensor is compliant.
    """
    t = tensor.times
    drops = t[1:] < t[:-1]
    if not np.any(drops):
        return []
    out = []
    where = np.argwhere(drops)
    for k, i, j in where[:limit]:
        out.append(
            f"travel time tensor: pair ({i}, {j}) falls from {t[k, i, j]} to "
            f"{t[k + 1, i, j]} entering section {k + 1}; a later departure "
            "would arrive earlier"
        )
    if len(where) > limit:
        out.append(
            f"travel time tensor: {len(where) - limit} further passing-capable entries"
        )
    return out


def enforce_non_passing(tensor: TravelTimeTensor) -> TravelTimeTensor:
    """Minimally raise later-section times until the non-passing property holds.

    A departure just before boundary k+1 still travels for times[k], so the
    boundary inequality ``boundary + times[k+1] >= departure + times[k]`` for
    every departure in section k forces ``times[k+1] >= times[k]``.  The
    smallest compliant tensor dominating the input is therefore the running
    maximum over sections, taken per ordered pair.  Idempotent; never lowers
    an entry.
    """
    fixed = np.maximum.accumulate(tensor.times, axis=0)
    return TravelTimeTensor(tensor.section_boundaries.copy(), fixed)


def build_from_profiles(
    static_times: np.ndarray,
    cluster_of: Sequence[int],
    profiles: Mapping[Tuple[int, int], TimeProfile],
    sampling_step: float,
    horizon: Tuple[float, float],
) -> TravelTimeTensor:
    """Expand per-cluster-pair profiles into a full section tensor.

    Every entry starts as static time times the scaler of the profile for
    (cluster(i), cluster(j)) sampled at the section start; the result is then
    passed through :func:`enforce_non_passing`.  A 24 h horizon at a 15 min
    step yields 96 sections.
    """
    static = np.asarray(static_times, dtype=float)
    n = static.shape[0]
    if static.shape != (n, n):
        raise ValueError(f"static time matrix must be square, got {static.shape}")
    if len(cluster_of) != n:
        raise ValueError(
            f"cluster assignment covers {len(cluster_of)} locations, matrix has {n}"
        )
    if sampling_step <= 0:
        raise ValueError("sampling step must be positive")
    begin, end = horizon
    if not begin < end:
        raise ValueError(f"horizon begin must precede end, got {horizon}")

    k = int(np.ceil((end - begin) / sampling_step - 1e-9))
    boundaries = begin + sampling_step * np.arange(k + 1, dtype=float)
    boundaries[-1] = end

    clusters = sorted(set(cluster_of))
    cindex = {c: ci for ci, c in enumerate(clusters)}
    ncl = len(clusters)
    cl = np.array([cindex[c] for c in cluster_of], dtype=int)

    scal = np.empty((k, ncl, ncl), dtype=float)
    for a in clusters:
        for b in clusters:
            key = (a, b)
            if key not in profiles:
                raise ValueError(f"no time profile for cluster pair {key}")
            prof = profiles[key]
            for s in range(k):
                scal[s, cindex[a], cindex[b]] = prof.scaler_at(float(boundaries[s]))

    times = np.empty((k, n, n), dtype=float)
    for s in range(k):
        times[s] = static * scal[s][np.ix_(cl, cl)]
        np.fill_diagonal(times[s], 0.0)

    return enforce_non_passing(TravelTimeTensor(boundaries, times))
