"""Crossing-cost estimators and the fitted direction norm."""
import math

import numpy as np
import pytest

from trapwalk import (
    Ball,
    ModelParams,
    NormModel,
    SiteSet,
    classify_drift,
    critical_magnitude,
    crossing_probability,
    dist_beta,
    dual_norm,
    estimate_beta,
)

PARAMS = ModelParams(2, 0.5, (0.0, 0.0), 64)
LOG2 = math.log(2.0)
LOG8 = math.log(8.0)


@pytest.fixture(scope="module")
def model():
    return NormModel.fit(PARAMS, samples=2048, seed=17)


def test_exact_enum_is_exact():
    est = crossing_probability(PARAMS, (2, 0), method="exactEnum", cap=12)
    assert est.expectation_stderr == 0.0 and est.stderr == 0.0
    assert est.within_sandwich(k_sigma=0.0)
    assert 0.0 < est.hit_weight <= 1.0
    assert est.truncation_bound >= 0.0
    assert est.value == pytest.approx(-math.log(est.expectation) / 2.0)
    with pytest.raises(ValueError):
        crossing_probability(PARAMS, (8, 0), method="exactEnum", cap=4)
    with pytest.raises(ValueError):
        crossing_probability(PARAMS, (0, 0))


def test_exact_enum_cap_refinement():
    rough = crossing_probability(PARAMS, (2, 0), method="exactEnum", cap=8)
    fine = crossing_probability(PARAMS, (2, 0), method="exactEnum", cap=12)
    # longer cap resolves strictly more hitting weight
    assert fine.expectation > rough.expectation
    assert fine.truncation_bound < rough.truncation_bound
    assert fine.expectation <= rough.expectation + rough.truncation_bound + 1e-15


def test_tilted_sandwich_e1():
    est = crossing_probability(PARAMS, (1, 0), samples=8192, seed=3)
    lo, hi = est.sandwich()
    assert (lo, hi) == (0.5**2 / 4.0, 0.5**2)
    assert est.within_sandwich(3.0)
    assert est.hit_weight > 0.5  # the tilt must actually reach a neighbor


def test_near_one_occupancy_band():
    # hitting a neighbor before accumulating range is only logarithmically
    # likely: the expectation climbs to 1 very slowly as p -> 1, settling
    # near 0.69 at p = 0.999 under a 1e5-step cap
    kw = dict(samples=4096, maxlen=100_000, theta=0.0)
    near_one = crossing_probability(
        ModelParams(2, 0.999, (0.0, 0.0), 64), (1, 0), seed=11, **kw
    )
    assert 0.60 <= near_one.expectation <= 0.80
    mid = crossing_probability(
        ModelParams(2, 0.9, (0.0, 0.0), 64), (1, 0), seed=12, **kw
    )
    low = crossing_probability(PARAMS, (1, 0), seed=13, **kw)
    for worse, better in ((low, mid), (mid, near_one)):
        gap = better.expectation - worse.expectation
        noise = math.hypot(better.expectation_stderr, worse.expectation_stderr)
        assert gap > -3.0 * noise
        assert gap > 0.05  # the climb is far from flat


def test_axis_symmetry():
    a = crossing_probability(PARAMS, (3, 0), samples=16384, seed=21)
    b = crossing_probability(PARAMS, (0, 3), samples=16384, seed=22)
    assert abs(a.value - b.value) <= 3.0 * math.hypot(a.stderr, b.stderr) + 1e-6


def test_methods_agree():
    a = crossing_probability(PARAMS, (2, 1), method="tiltedIS", samples=16384, seed=31)
    b = crossing_probability(PARAMS, (2, 1), method="splitting", samples=16384, seed=32)
    c = crossing_probability(PARAMS, (2, 1), method="exactEnum", cap=13)
    noise = 3.0 * math.hypot(a.expectation_stderr, b.expectation_stderr)
    assert abs(a.expectation - b.expectation) <= noise
    # the enumeration is a certified lower bound on the full expectation
    assert a.expectation >= c.expectation - 3.0 * a.expectation_stderr
    assert a.expectation <= c.expectation + c.truncation_bound + 3.0 * a.expectation_stderr


def test_estimate_beta_e1():
    beta, se, diag = estimate_beta(PARAMS, (1, 0), samples=4096, seed=5)
    assert diag["beta_in_band"]
    assert LOG2 <= beta <= LOG8  # hard band, not just within fit noise
    assert all(chk["ok"] for chk in diag["subadditivity"])
    assert not diag["residual_flag"]
    with pytest.raises(ValueError):
        estimate_beta(PARAMS, (0, 0))
    with pytest.raises(ValueError):
        estimate_beta(PARAMS, (1, 0), n_list=(2, 4))


def test_gauge_homogeneity_and_triangle(model):
    rng = np.random.default_rng(7)
    vecs = rng.integers(-9, 10, size=(40, 2))
    vecs = vecs[np.any(vecs != 0, axis=1)]
    for v in vecs:
        assert model.beta_of(3 * v) == pytest.approx(3.0 * model.beta_of(v), rel=1e-12)
    for x, y in zip(vecs[::2], vecs[1::2]):
        # gauge of a polytope: max of linear forms, so exactly subadditive
        assert model.beta_of(x + y) <= model.beta_of(x) + model.beta_of(y) + 1e-9
    assert model.beta_of((0, 0)) == 0.0
    u = np.array([3.0, 1.0])
    assert model.beta_of_direction(u) == pytest.approx(
        model.beta_of(u / np.linalg.norm(u)), rel=1e-12
    )


def test_gauge_vs_fitted_directions(model):
    # hull of the scaled grid points is inscribed: the gauge can only
    # round a fitted direction down, never up
    for u, b in zip(model.directions, model.beta_values):
        g = model.beta_of_direction(u)
        assert g <= b + 1e-9


def test_fitted_sign_pairs_agree(model):
    idx = {u: i for i, u in enumerate(model.directions)}
    seen = set()
    for u, i in idx.items():
        mu = tuple(-c for c in u)
        if mu in idx and u not in seen:
            seen.update((u, mu))
            j = idx[mu]
            gap = abs(model.beta_values[i] - model.beta_values[j])
            noise = math.hypot(model.stderr[i], model.stderr[j])
            assert gap <= 3.0 * noise + 0.05


def test_norm_model_json_roundtrip(model):
    back = NormModel.from_json(model.to_json())
    assert back.directions == model.directions
    assert np.allclose(back.beta_values, model.beta_values)
    assert back.angular_gap == pytest.approx(model.angular_gap)
    for v in ((5, 2), (-1, 4), (7, -7)):
        assert back.beta_of(v) == pytest.approx(model.beta_of(v), rel=1e-12)


def test_dual_norm(model):
    assert dual_norm(model, (0.0, 0.0)) == 0.0
    h = (0.4, -0.1)
    assert dual_norm(model, tuple(2 * c for c in h)) == pytest.approx(
        2.0 * dual_norm(model, h), rel=1e-12
    )
    val, u_star, err = model.dual_details(h)
    assert u_star in model.directions and err >= 0.0
    # recompute the maximum by hand
    best = max(
        (np.dot(h, u) / math.sqrt(np.dot(u, u))) / model.beta_of_direction(u)
        for u in model.directions
    )
    assert val >= best - 1e-12


def test_critical_magnitude_band(model):
    # along an axis the critical scale inherits the per-unit cost band
    t_star = critical_magnitude(model, (1.0, 0.0))
    assert LOG2 - 1e-9 <= t_star <= LOG8 + 1e-9
    assert classify_drift(model, (0.5 * t_star, 0.0)) == "subcritical"
    assert classify_drift(model, (1.5 * t_star, 0.0)) == "supercritical"
    assert classify_drift(model, (t_star, 0.0)) == "critical"
    with pytest.raises(ValueError):
        critical_magnitude(model, (0.0, 0.0))


def test_classify_single_transition(model):
    t_star = critical_magnitude(model, (1.0, 0.0))
    code = {"subcritical": 0, "critical": 1, "supercritical": 2}
    seq = [
        code[classify_drift(model, (t, 0.0))]
        for t in np.linspace(0.1 * t_star, 2.0 * t_star, 25)
    ]
    assert all(b >= a for a, b in zip(seq, seq[1:]))
    assert seq[0] == 0 and seq[-1] == 2


def test_dist_beta(model):
    ball = Ball((0, 0), 10.0)
    assert dist_beta(model, (3, 2), ball) == 0.0
    d0 = dist_beta(model, (15, 0), ball)
    along = model.beta_of((5, 0))
    assert 0.6 * along <= d0 <= along + 1e-9
    assert dist_beta(model, (20, 0), ball) > d0
    origin = SiteSet(np.array([[0, 0]]))
    assert dist_beta(model, (4, 3), origin) == pytest.approx(
        model.beta_of((4, 3)), rel=1e-12
    )
    with pytest.raises(ValueError):
        dist_beta(model, (4, 3), SiteSet(np.empty((0, 2)), d=2))
