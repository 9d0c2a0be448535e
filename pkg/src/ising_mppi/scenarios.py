"""Random reference trajectories: cone-constrained control points joined by a spline.

A scenario is 8 planar control points — the origin, then 7 hops of length
U(4, 5) whose headings each turn by at most pi/2 from the previous hop — with
a centripetal Catmull-Rom spline threaded through them and resampled at
roughly uniform arc-length spacing.  Reference headings come from the spline
tangent (unwrapped, so the sequence is continuous); reference speed and
steering are zero because their tracking weights are zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dynamics import State
from .rng import SeedStream, mask64

N_CONTROL_POINTS = 8
# Reference spacing: 0.2 units at dt=0.1 asks for ~2 units/s of progress, well
# inside the accel code book's reach; coarser spacing (0.5) demands a pace the
# standing-start vehicle cannot hold and tracking error saturates.
DEFAULT_DS = 0.2
_DENSE_PER_SEGMENT = 512   # samples used to invert arc length on each spline span


@dataclass(frozen=True)
class ControlPointSet:
    points: np.ndarray   # (8, 2)
    seed: int


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Per-sample reference states (px, py, theta, 0, 0) plus the matching start state."""

    states: np.ndarray        # (n, 5)
    initial_state: State
    ds: float

    @property
    def n(self) -> int:
        return self.states.shape[0]


def generate_control_points(seed: int) -> ControlPointSet:
    """Draw the 8-point set for `seed`.

    Draw order per hop is heading first, then distance, from one SplitMix64
    stream: the first heading is uniform on [0, 2pi), each later heading adds
    uniform(-pi/2, pi/2) to the previous one, and every hop length is
    uniform(4, 5).
    """
    stream = SeedStream(mask64(seed))
    points = np.zeros((N_CONTROL_POINTS, 2))
    heading = 2.0 * np.pi * stream.next_uniform()
    for k in range(1, N_CONTROL_POINTS):
        if k > 1:
            heading = heading + np.pi * (stream.next_uniform() - 0.5)
        dist = 4.0 + stream.next_uniform()
        points[k] = points[k - 1] + dist * np.array([np.cos(heading), np.sin(heading)])
    return ControlPointSet(points=points, seed=seed)


def _catmull_rom(points: np.ndarray) -> CubicHermiteSpline:
    """Centripetal Catmull-Rom through `points` as a Hermite spline.

    Knot spacing is the square root of chord length; tangents are the
    nonuniform finite differences (P_{k+1} - P_{k-1}) / (t_{k+1} - t_{k-1}),
    one-sided at the ends.
    """
    chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if np.any(chords == 0.0):
        raise ValueError("coincident consecutive control points")
    t = np.concatenate([[0.0], np.cumsum(np.sqrt(chords))])
    n = len(points)
    tangents = np.empty_like(points)
    tangents[0] = (points[1] - points[0]) / (t[1] - t[0])
    tangents[-1] = (points[-1] - points[-2]) / (t[-1] - t[-2])
    for k in range(1, n - 1):
        tangents[k] = (points[k + 1] - points[k - 1]) / (t[k + 1] - t[k - 1])
    return CubicHermiteSpline(t, points, tangents, axis=0)


def spline_resample(cps: ControlPointSet, ds: float = DEFAULT_DS) -> ReferenceTrajectory:
    """Resample the spline at arc-length spacing ~ds, keeping knots as exact samples.

    Each spline span is subdivided into round(length / ds) equal arc-length
    pieces (at least one), so every control point lands exactly on the output
    and consecutive samples are within about 10% of ds.
    """
    if not ds > 0:
        raise ValueError(f"ds must be positive, got {ds}")
    spline = _catmull_rom(cps.points)
    deriv = spline.derivative()
    knots = spline.x

    params = [np.array([knots[0]])]
    for a, b in zip(knots[:-1], knots[1:]):
        dense = np.linspace(a, b, _DENSE_PER_SEGMENT)
        seg = spline(dense)
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(seg, axis=0), axis=1))])
        length = arc[-1]
        pieces = max(1, round(length / ds))
        targets = np.arange(1, pieces + 1) * (length / pieces)
        ts = np.interp(targets, arc, dense)
        ts[-1] = b   # land exactly on the knot despite interpolation noise
        params.append(ts)
    t_all = np.concatenate(params)

    pos = spline(t_all)
    vel = deriv(t_all)
    theta = np.unwrap(np.arctan2(vel[:, 1], vel[:, 0]))
    states = np.zeros((len(t_all), 5))
    states[:, 0:2] = pos
    states[:, 2] = theta
    initial = State(0.0, 0.0, float(theta[0]), 0.0, 0.0)
    return ReferenceTrajectory(states=states, initial_state=initial, ds=ds)


def generate_reference(seed: int, ds: float = DEFAULT_DS) -> ReferenceTrajectory:
    """Convenience: control points for `seed`, splined and resampled at `ds`."""
    return spline_resample(generate_control_points(seed), ds)


def write_trajectory_csv(traj: ReferenceTrajectory, fh: TextIO) -> None:
    """`idx,px,py,theta` rows; floats via repr for lossless round trips."""
    fh.write("idx,px,py,theta\n")
    for i, row in enumerate(traj.states):
        fh.write(f"{i},{float(row[0])!r},{float(row[1])!r},{float(row[2])!r}\n")


def read_trajectory_csv(fh: TextIO) -> ReferenceTrajectory:
    """Rebuild a trajectory from its CSV; ds is recovered as the median spacing."""
    header = fh.readline().strip()
    if header != "idx,px,py,theta":
        raise ValueError(f"unexpected trajectory header: {header!r}")
    rows = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        _, px, py, theta = line.split(",")
        rows.append((float(px), float(py), float(theta)))
    if len(rows) < 2:
        raise ValueError("trajectory file must contain at least two states")
    states = np.zeros((len(rows), 5))
    states[:, 0:3] = np.asarray(rows)
    ds = float(np.median(np.linalg.norm(np.diff(states[:, 0:2], axis=0), axis=1)))
    initial = State(states[0, 0], states[0, 1], states[0, 2], 0.0, 0.0)
    return ReferenceTrajectory(states=states, initial_state=initial, ds=ds)
