"""Geometry, derived constants, and seeded obstacle fields."""
import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from trapwalk import (
    Ball,
    Box,
    ModelParams,
    ObstacleField,
    SiteSet,
    compute_rho1_and_cdp,
    first_bessel_zero,
    plant_vacant_ball,
    sample_obstacles,
    unit_ball_volume,
)
from trapwalk.lattice import (
    nearest_site,
    pack_sites,
    sites_from_csv,
    sites_to_csv,
    unpack_sites,
)

# frozen regression values; independently re-derived below
J01 = 2.404825557695773
RHO1_HALF = 0.9026782081402187
CDP_HALF = 3.5487160087208944


def _objective(d, p):
    lam = first_bessel_zero(d / 2.0 - 1.0) ** 2 / (2.0 * d)
    w = unit_ball_volume(d)
    return lambda r: lam / r**2 + w * r**d * math.log(1.0 / p)


def test_first_bessel_zero_j0():
    assert abs(first_bessel_zero(0.0) - J01) < 1e-12


def test_rho1_cdp_frozen_values():
    rho1, cdp = compute_rho1_and_cdp(2, 0.5)
    assert abs(rho1 - RHO1_HALF) < 1e-12
    assert abs(cdp - CDP_HALF) < 1e-12


@pytest.mark.parametrize("d,p", [(2, 0.5), (2, 0.7), (3, 0.5), (2, 0.05)])
def test_rho1_cdp_vs_numeric_minimization(d, p):
    # independent oracle: 1-D minimization of the same objective
    rho1, cdp = compute_rho1_and_cdp(d, p)
    f = _objective(d, p)
    res = minimize_scalar(f, bracket=(0.2, 1.0, 8.0), method="brent",
                          options={"xtol": 1e-12})
    assert abs(rho1 - res.x) < 1e-6
    assert abs(cdp - res.fun) < 1e-6


def test_rho1_stationarity_d2():
    # for d=2 the two objective terms are equal at the optimum
    rho1, _ = compute_rho1_and_cdp(2, 0.5)
    lam = first_bessel_zero(0.0) ** 2 / 4.0
    assert abs(lam / rho1**2 - unit_ball_volume(2) * rho1**2 * math.log(2.0)) < 1e-12
    # and perturbing rho1 by +-1% strictly increases the objective
    f = _objective(2, 0.5)
    assert f(rho1 * 1.01) > f(rho1)
    assert f(rho1 * 0.99) > f(rho1)


def test_cdp_decreasing_in_p():
    vals = [compute_rho1_and_cdp(2, p)[1] for p in (0.2, 0.4, 0.6, 0.8)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_rho1_cdp_rejects_bad_inputs():
    for bad_p in (0.0, 1.0, -0.3, 2.0):
        with pytest.raises(ValueError):
            compute_rho1_and_cdp(2, bad_p)
    with pytest.raises(ValueError):
        compute_rho1_and_cdp(1, 0.5)


def test_model_params_derived():
    params = ModelParams(2, 0.5, (0.0, 0.0), 4096)
    assert params.rhoN == params.rho1 * 4096 ** 0.25
    assert abs(params.rhoN - 7.22142566512175) < 1e-10
    assert np.all(params.eh == 0.0)
    drift = ModelParams(2, 0.5, (0.3, 0.4), 16)
    assert np.allclose(drift.eh, (0.6, 0.8))


def test_model_params_delta_nx():
    params = ModelParams(2, 0.5, (0.0, 0.0), 1024)
    floor = params.rhoN ** (-0.2)
    assert params.delta_nx((0, 0)) == floor
    assert params.delta_nx((1, 0)) >= floor
    # monotone in |x|
    vals = [params.delta_nx((k, 0)) for k in range(0, 200, 25)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_model_params_round_trip():
    params = ModelParams(3, 0.6, (0.1, 0.0, -0.2), 64)
    again = ModelParams.from_dict(params.to_dict())
    assert again == params


def test_nearest_site_half_away_from_zero():
    assert nearest_site((0.5, -0.5)).tolist() == [1, -1]
    assert nearest_site((1.49, -2.51)).tolist() == [1, -3]


def test_pack_unpack_round_trip():
    rng = np.random.default_rng(5)
    for d in (2, 3):
        sites = rng.integers(-1_000_000, 1_000_000, size=(200, d)).astype(np.int64)
        packed = pack_sites(sites)
        assert np.array_equal(unpack_sites(packed, d), sites)
        assert len(np.unique(packed)) == len(np.unique(sites, axis=0))
    with pytest.raises(ValueError):
        pack_sites(np.array([[1 << 21, 0]]))


def test_ball_membership_and_symmetry():
    ball = Ball((2, -1), 4.5)
    sites = ball.sites()
    # membership is the euclidean predicate
    rel = sites - np.array([2, -1])
    assert np.all((rel**2).sum(axis=1) <= 4.5**2)
    assert len(np.unique(pack_sites(sites))) == len(sites)
    # symmetric under coordinate permutation and sign flips about the center
    centered = Ball((0, 0), 4.5)
    packed = set(pack_sites(centered.sites()).tolist())
    for transform in (lambda s: s[:, ::-1], lambda s: -s, lambda s: s * np.array([1, -1])):
        assert set(pack_sites(np.ascontiguousarray(transform(centered.sites()))).tolist()) == packed


def test_box_and_siteset():
    box = Box((-2, -3), (1, 0))
    assert len(box) == 4 * 4
    assert len(np.unique(pack_sites(box.sites()))) == len(box)
    ss = SiteSet(np.array([[0, 0], [1, 0], [0, 0]]))
    assert len(ss.sites()) == 2  # duplicates collapse
    assert ss.contains(np.array([[1, 0], [2, 2]])).tolist() == [True, False]


def test_sites_csv_round_trip():
    sites = np.array([[3, -1], [0, 0], [-2, 5]], dtype=np.int64)
    text = sites_to_csv(sites)
    back = sites_from_csv(text)
    # serialization sorts; compare as sets
    assert set(map(tuple, back.tolist())) == set(map(tuple, sites.tolist()))


def test_obstacles_extreme_p():
    window = Box((-5, -5), (5, 5))
    clear = sample_obstacles(11, window, 1.0)
    full = sample_obstacles(11, window, 0.0)
    sites = window.sites()
    assert not clear.occupied_many(sites).any()
    assert full.occupied_many(sites).all()


def test_obstacles_density_band():
    # 1000x1000 window, p=0.5: occupied fraction within 3 sigma
    window = Box((0, 0), (999, 999))
    field = sample_obstacles(123, window, 0.5)
    frac = field.occupied_many(window.sites()).mean()
    assert abs(frac - 0.5) < 0.002


def test_obstacles_deterministic_and_scalar_vector_agree():
    window = Box((-8, -8), (8, 8))
    a = sample_obstacles(77, window, 0.4)
    b = sample_obstacles(77, window, 0.4)
    sites = window.sites()
    assert np.array_equal(a.occupied_many(sites), b.occupied_many(sites))
    for site in sites[::23]:
        assert a.occupied(site) == a.occupied_many(site[None, :])[0]
    # outside the window counts as occupied
    assert a.occupied((99, 99))
    assert a.occupied_many(np.array([[99, 99]]))[0]


def test_plant_vacant_ball():
    window = Box((-10, -10), (10, 10))
    full = sample_obstacles(3, window, 0.0)  # all occupied
    planted = plant_vacant_ball(full, (0, 0), 5.0)
    ball_sites = Ball((0, 0), 5.0).sites()
    vacant = ~planted.occupied_many(window.sites())
    assert vacant.sum() == len(ball_sites)  # exactly the ball freed
    assert not planted.occupied((0, 0))
    # sites outside the ball unchanged
    outside = window.sites()[~Ball((0, 0), 5.0).contains(window.sites())]
    assert np.array_equal(planted.occupied_many(outside), full.occupied_many(outside))
    # planting on an already clear field changes nothing
    clear = sample_obstacles(3, window, 1.0)
    replant = plant_vacant_ball(clear, (2, 2), 3.0)
    assert not replant.occupied_many(window.sites()).any()
    with pytest.raises(ValueError):
        plant_vacant_ball(full, (9, 9), 5.0)


def test_obstacle_field_json_round_trip():
    window = Box((-6, -6), (6, 6))
    field = plant_vacant_ball(sample_obstacles(9, window, 0.3), (1, -1), 2.0)
    back = ObstacleField.from_json(field.to_json())
    sites = window.sites()
    assert np.array_equal(back.occupied_many(sites), field.occupied_many(sites))
    rec = json.loads(field.to_json())
    assert rec["seed"] == 9 and rec["p"] == 0.3
