"""Random reference scenarios: control-point draws, spline resampling, CSV IO."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ising_mppi.scenarios import (
    ControlPointSet,
    DEFAULT_DS,
    generate_control_points,
    generate_reference,
    read_trajectory_csv,
    spline_resample,
    write_trajectory_csv,
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


# --------------------------------------------------------- control points

@given(seeds)
@settings(deadline=None, max_examples=50)
def test_first_point_is_origin(seed):
    cps = generate_control_points(seed)
    np.testing.assert_array_equal(cps.points[0], [0.0, 0.0])


@given(seeds)
@settings(deadline=None, max_examples=50)
def test_hop_lengths_bounded(seed):
    pts = generate_control_points(seed).points
    hops = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert hops.shape == (7,)
    assert np.all(hops >= 4.0) and np.all(hops < 5.0)


@given(seeds)
@settings(deadline=None, max_examples=50)
def test_heading_never_reverses(seed):
    pts = generate_control_points(seed).points
    hops = np.diff(pts, axis=0)
    headings = np.arctan2(hops[:, 1], hops[:, 0])
    diffs = np.diff(headings)
    wrapped = np.abs((diffs + np.pi) % (2 * np.pi) - np.pi)
    assert np.all(wrapped <= np.pi / 2 + 1e-12)


def test_control_points_deterministic():
    a = generate_control_points(123).points
    b = generate_control_points(123).points
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, generate_control_points(124).points)


# ------------------------------------------------------------- resampling

def test_straight_line_spline_stays_on_axis():
    pts = np.stack([np.arange(8) * 4.5, np.zeros(8)], axis=1)
    traj = spline_resample(ControlPointSet(points=pts, seed=0), ds=0.25)
    np.testing.assert_allclose(traj.states[:, 1], 0.0, atol=1e-9)
    np.testing.assert_allclose(traj.states[:, 2], 0.0, atol=1e-9)
    assert traj.states[-1, 0] == pytest.approx(7 * 4.5)


def test_resampled_spacing_near_ds():
    for seed in range(20):
        traj = generate_reference(seed, ds=0.2)
        gaps = np.linalg.norm(np.diff(traj.states[:, :2], axis=0), axis=1)
        assert np.all(gaps > 0.18) and np.all(gaps < 0.22), f"seed {seed}"


def test_arc_length_close_to_chord_length():
    for seed in range(10):
        cps = generate_control_points(seed)
        traj = spline_resample(cps, ds=0.05)
        arc = np.linalg.norm(np.diff(traj.states[:, :2], axis=0), axis=1).sum()
        chords = np.linalg.norm(np.diff(cps.points, axis=0), axis=1).sum()
        assert arc <= chords * 1.15
        assert arc >= chords * 0.999   # a curve through the points is never shorter


def test_control_points_are_exact_samples():
    cps = generate_control_points(7)
    traj = spline_resample(cps, ds=0.2)
    pos = traj.states[:, :2]
    for p in cps.points:
        assert np.min(np.linalg.norm(pos - p, axis=1)) < 1e-8


def test_heading_column_is_continuous():
    traj = generate_reference(3, ds=0.2)
    # unwrapped heading: no sample-to-sample jump anywhere near pi
    assert np.max(np.abs(np.diff(traj.states[:, 2]))) < 1.0


def test_initial_state_at_origin_at_rest():
    traj = generate_reference(5)
    s = traj.initial_state
    assert (s.px, s.py, s.v, s.delta) == (0.0, 0.0, 0.0, 0.0)
    assert s.theta == pytest.approx(traj.states[0, 2])
    np.testing.assert_array_equal(traj.states[0, :2], [0.0, 0.0])


def test_speed_and_steer_columns_zero():
    traj = generate_reference(9)
    np.testing.assert_array_equal(traj.states[:, 3:], np.zeros((traj.n, 2)))


def test_finer_ds_gives_proportionally_more_samples():
    coarse = generate_reference(2, ds=0.4)
    fine = generate_reference(2, ds=0.1)
    assert fine.n == pytest.approx(4 * coarse.n, rel=0.05)


def test_resample_rejects_bad_ds():
    with pytest.raises(ValueError):
        generate_reference(0, ds=0.0)


def test_generation_deterministic():
    a = generate_reference(42, ds=0.2)
    b = generate_reference(42, ds=0.2)
    np.testing.assert_array_equal(a.states, b.states)


# ------------------------------------------------------------------ CSV IO

def test_csv_round_trip_is_lossless():
    traj = generate_reference(6, ds=0.3)
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    buf.seek(0)
    back = read_trajectory_csv(buf)
    np.testing.assert_array_equal(back.states[:, :3], traj.states[:, :3])
    assert back.ds == pytest.approx(traj.ds, rel=0.1)
    assert back.initial_state.theta == traj.initial_state.theta


def test_csv_header_and_layout():
    traj = generate_reference(1, ds=0.5)
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "idx,px,py,theta"
    assert len(lines) == traj.n + 1
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[1]) == traj.states[0, 0]


def test_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        read_trajectory_csv(io.StringIO("x,y\n0,0\n1,1\n"))
