"""Walk simulation, incremental range tracking, hitting records, reversal."""
import numpy as np
import pytest

from trapwalk import (
    Ball,
    Box,
    LatticePath,
    ModelParams,
    hitting_record,
    plant_vacant_ball,
    reverse,
    sample_obstacles,
    simulate,
)
from trapwalk.walk import NEVER

P2 = ModelParams(2, 0.5, (0.0, 0.0), 16)


def test_simulate_length_zero():
    path = simulate(P2, None, 0, seed=1)
    assert len(path) == 0
    assert path.range_size == 1
    assert path.endpoint == (0, 0)


def test_simulate_step_frequencies():
    # 1e6 steps: each of the 4 codes near 0.25 (3 sigma ~ 0.0013)
    path = simulate(P2, None, 1_000_000, seed=42)
    codes = np.asarray(path.steps)
    freq = np.bincount(codes, minlength=4) / len(codes)
    assert np.all(np.abs(freq - 0.25) < 0.002)


def test_simulate_deterministic():
    a = simulate(P2, None, 500, seed=7)
    b = simulate(P2, None, 500, seed=7)
    assert a.steps == b.steps
    assert simulate(P2, None, 500, seed=8).steps != a.steps


def test_step_geometry_and_parity():
    path = simulate(P2, None, 301, seed=3)
    pos = path.positions()
    diffs = np.abs(np.diff(pos, axis=0)).sum(axis=1)
    assert np.all(diffs == 1)  # nearest-neighbor steps only
    l1 = int(np.abs(pos[-1]).sum())
    assert l1 % 2 == len(path) % 2


def test_range_incremental_vs_replay():
    path = simulate(P2, None, 400, seed=11)
    pos = path.positions()
    seen = set()
    sizes = []
    for site in map(tuple, pos.tolist()):
        seen.add(site)
        sizes.append(len(seen))
    assert path.range_size == sizes[-1]
    # range nondecreasing with unit increments is implied by the replay
    assert all(b - a in (0, 1) for a, b in zip(sizes, sizes[1:]))


def test_append_pop_restores_range():
    path = LatticePath((0, 0))
    rng = np.random.default_rng(0)
    history = [path.range_size]
    codes = rng.integers(0, 4, size=60).tolist()
    for c in codes:
        path.append_step(c)
        history.append(path.range_size)
    for expect in reversed(history[:-1]):
        path.pop_step()
        assert path.range_size == expect
    assert len(path) == 0


def test_reverse_involution_and_range():
    path = simulate(P2, None, 97, seed=5)
    rev = reverse(path)
    assert rev.range_size == path.range_size
    assert np.array_equal(rev.positions(), path.positions()[::-1])
    back = reverse(rev)
    assert back.steps == path.steps and back.start == path.start


def test_reverse_tiny():
    path = LatticePath((0, 0), [0, 1])  # 0 -> e1 -> 0
    rev = path.reverse()
    assert rev.range_size == 2
    assert set(map(tuple, rev.positions().tolist())) == {(0, 0), (1, 0)}


def test_hitting_record_basics():
    window = Box((-20, -20), (20, 20))
    occupied_origin = sample_obstacles(1, window, 0.0)
    straight = LatticePath((0, 0), [0, 0, 0])  # 0 -> (3,0)
    rec = hitting_record(straight, occupied_origin, (3, 0), 0)
    assert rec.tau_o == 0
    assert rec.tau_target == 3
    assert rec.tau_target_after_n == 3

    clear = sample_obstacles(1, window, 1.0)
    rec2 = hitting_record(straight, clear, (5, 5), 0)
    assert rec2.tau_o == NEVER
    assert rec2.tau_target == NEVER
    assert not rec2.hit_after_n()


def test_hitting_record_after_n_and_region():
    # walk 0 -> e1 -> 0 -> e1: first visit of e1 at 1, first at time >= 2 is 3
    path = LatticePath((0, 0), [0, 1, 0])
    rec = hitting_record(path, None, (1, 0), 2, region=Ball((0, 0), 0.5))
    assert rec.tau_target == 1
    assert rec.tau_target_after_n == 3
    assert rec.tau_target_after_n >= rec.n_min
    assert rec.tau_region == 0  # starts inside the region {0}
    assert rec.last_visit == 2
    assert rec.tau_region <= rec.last_visit


def test_hitting_record_field_reuse():
    # fields differing only outside the visited set give the same tau_o
    window = Box((-30, -30), (30, 30))
    path = simulate(P2, None, 200, seed=9)
    visited = path.positions()
    base = sample_obstacles(4, window, 0.6)
    far_corner = (28, 28)
    assert not any(tuple(s) == far_corner for s in visited.tolist())
    altered = plant_vacant_ball(base, far_corner, 1.5)
    ra = hitting_record(path, base, (7, 7), 10)
    rb = hitting_record(path, altered, (7, 7), 10)
    assert ra.tau_o == rb.tau_o


def test_path_string_round_trip():
    # alphabet: A/a = +-x1, B/b = +-x2
    path = LatticePath((2, -1), [0, 1, 2, 3])
    text = path.to_string()
    assert text == "2,-1:AaBb"
    assert LatticePath.from_string(text) == path
    with pytest.raises(ValueError):
        LatticePath.from_string("0,0:AzB")


def test_log_weight_matches_direct():
    params = ModelParams(2, 0.5, (0.2, -0.1), 16)
    path = simulate(params, None, 16, seed=13)
    end = np.asarray(path.endpoint, dtype=float)
    expect = path.range_size * np.log(0.5) + float(end @ np.asarray(params.h))
    assert abs(path.log_weight(params) - expect) < 1e-12
