"""Dirichlet eigenpairs, killed heat kernels, exact survival, shape reports."""
import math

import numpy as np
import pytest

from trapwalk import (
    Ball,
    Box,
    DirichletOperator,
    EigenConvergenceError,
    SiteSet,
    faber_krahn_report,
    first_bessel_zero,
    heat_kernel_floor,
    killed_heat_kernel,
    level_sets,
    principal_eigen,
    survival_exact,
)
from trapwalk.spectral import fit_decay_constant, interior_l1_depth


def _random_blob(rng, n_sites, d=2):
    # connected blob grown site by site from the origin
    sites = {(0,) * d}
    frontier = [(0,) * d]
    while len(sites) < n_sites:
        base = frontier[rng.integers(0, len(frontier))]
        axis = rng.integers(0, d)
        sgn = 1 if rng.random() < 0.5 else -1
        new = tuple(c + (sgn if a == axis else 0) for a, c in enumerate(base))
        if new not in sites:
            sites.add(new)
            frontier.append(new)
    return SiteSet(np.array(sorted(sites), dtype=np.int64))


def test_single_site_lambda_one():
    for d in (2, 3):
        pair = principal_eigen(SiteSet(np.zeros((1, d), dtype=np.int64)))
        assert abs(pair.lambda_ - 1.0) < 1e-12


def test_adjacent_pair_lambda():
    for d in (2, 3):
        sites = np.zeros((2, d), dtype=np.int64)
        sites[1, 0] = 1
        pair = principal_eigen(SiteSet(sites))
        assert abs(pair.lambda_ - (1.0 - 1.0 / (2 * d))) < 1e-12


def test_eigen_matches_dense_solver():
    # strongest oracle: dense symmetric eigensolve on a random blob
    rng = np.random.default_rng(21)
    dom = _random_blob(rng, 40)
    op = DirichletOperator(dom)
    mat = np.column_stack([op.apply(np.eye(op.ns)[:, i]) for i in range(op.ns)])
    lam_dense = float(np.linalg.eigvalsh(mat)[0])
    pair = principal_eigen(dom, tol=1e-11)
    assert abs(pair.lambda_ - lam_dense) < 1e-9


def test_eigen_ball_continuum_limit():
    lam = principal_eigen(Ball((0, 0), 12.0), tol=1e-10).lambda_
    cont = first_bessel_zero(0.0) ** 2 / 4.0 / 144.0
    assert abs(lam - cont) / cont < 0.05


def test_eigenfunction_normalized_positive():
    pair = principal_eigen(Ball((0, 0), 6.0))
    assert abs(pair.values.sum() - 1.0) < 1e-12
    assert (pair.values > 0).all()
    assert pair.residual <= 1e-10


def test_disconnected_domain_min_over_components():
    # isolated site (lambda=1) plus an adjacent pair (lambda=1-1/4)
    sites = np.array([[10, 10], [0, 0], [1, 0]], dtype=np.int64)
    pair = principal_eigen(SiteSet(sites))
    assert abs(pair.lambda_ - 0.75) < 1e-12
    # eigenfunction lives on the achieving component only
    assert pair.value_at((10, 10)) == 0.0
    assert pair.value_at((0, 0)) > 0.0


def test_domain_monotonicity():
    rng = np.random.default_rng(3)
    small = _random_blob(rng, 25)
    grown = set(map(tuple, small.sites().tolist()))
    for s in list(grown):
        grown.add((s[0] + 1, s[1]))
    big = SiteSet(np.array(sorted(grown), dtype=np.int64))
    tol = 1e-10
    lam_small = principal_eigen(small, tol=tol).lambda_
    lam_big = principal_eigen(big, tol=tol).lambda_
    assert lam_small >= lam_big - 2 * tol


def test_eigen_convergence_error():
    with pytest.raises(EigenConvergenceError) as err:
        principal_eigen(Ball((0, 0), 10.0), tol=1e-14, maxiter=3)
    assert err.value.residual > 0.0


def test_survival_exact_small_cases():
    single = SiteSet(np.zeros((1, 2), dtype=np.int64))
    assert survival_exact(single, (0, 0), 0) == 1.0
    assert survival_exact(single, (0, 0), 1) == 0.0
    pair = SiteSet(np.array([[0, 0], [1, 0]], dtype=np.int64))
    assert abs(survival_exact(pair, (0, 0), 1) - 0.25) < 1e-15
    with pytest.raises(Exception):
        survival_exact(pair, (5, 5), 1)


def test_survival_spectral_tail_bound():
    # survival <= sqrt(|U|) (1-lambda)^n, exact inequality on a few domains
    rng = np.random.default_rng(17)
    for _ in range(12):
        dom = _random_blob(rng, int(rng.integers(3, 60)))
        lam = principal_eigen(dom, tol=1e-11).lambda_
        start = tuple(dom.sites()[rng.integers(0, len(dom))].tolist())
        for n in (1, 7, 40, 200):
            s = survival_exact(dom, start, n)
            assert s <= math.sqrt(len(dom)) * (1.0 - lam) ** n + 1e-12


def test_heat_kernel_basics():
    ball = Ball((0, 0), 4.0)
    assert killed_heat_kernel(ball, (0, 0), (0, 0), 0) == 1.0
    assert abs(killed_heat_kernel(ball, (0, 0), (1, 0), 1) - 0.25) < 1e-15
    # parity mismatch is exactly zero
    assert killed_heat_kernel(ball, (0, 0), (1, 0), 2) == 0.0
    assert killed_heat_kernel(ball, (0, 0), (0, 0), 7) == 0.0
    # symmetry in (x, y)
    a = killed_heat_kernel(ball, (0, 1), (2, -1), 10)
    b = killed_heat_kernel(ball, (2, -1), (0, 1), 10)
    assert abs(a - b) < 1e-15 and a > 0


def test_heat_kernel_chapman_kolmogorov():
    dom = Box((-2, -2), (2, 2))
    m, n = 6, 8
    x, y = (0, 0), (2, 0)
    total = sum(
        killed_heat_kernel(dom, x, tuple(z), m) * killed_heat_kernel(dom, tuple(z), y, n)
        for z in dom.sites().tolist()
    )
    assert abs(total - killed_heat_kernel(dom, x, y, m + n)) < 1e-12


def test_heat_kernel_decay_rate_small():
    # -(1/n) log p_n(0,0) approaches -log(1-lambda); small-scale variant
    ball = Ball((0, 0), 4.0)
    lam = principal_eigen(ball, tol=1e-12).lambda_
    n = 2000
    rate = -math.log(killed_heat_kernel(ball, (0, 0), (0, 0), n)) / n
    assert abs(rate + math.log(1.0 - lam)) < 2e-3


def test_faber_krahn_ball_and_segment():
    deficit, asym, center = faber_krahn_report(Ball((3, 3), 12.0))
    assert asym <= 0.05
    assert center == (3, 3)
    seg = SiteSet(np.array([[k, 0] for k in range(12)], dtype=np.int64))
    _, seg_asym, _ = faber_krahn_report(seg)
    assert seg_asym >= 0.5


def test_faber_krahn_two_balls():
    a = Ball((0, 0), 6.0).sites()
    b = Ball((40, 0), 6.0).sites()
    dom = SiteSet(np.vstack([a, b]))
    _, asym, _ = faber_krahn_report(dom)
    assert asym >= 0.3


def test_level_sets_nesting():
    pair = principal_eigen(Ball((0, 0), 7.0))
    rep = level_sets(pair, eta=0.3, e_size=50)
    keys = lambda ss: set(map(tuple, ss.sites().tolist()))
    assert keys(rep.omega) <= keys(rep.omega_sq)
    assert keys(rep.omega) <= keys(rep.omega_plus)
    assert not rep.empty
    # eta -> 0+: level set is the whole support
    tiny = level_sets(pair, eta=1e-12, e_size=50)
    assert len(tiny.omega) == len(pair.support())
    # threshold above the max empties the set and sets the flag
    big = level_sets(pair, eta=0.999999, e_size=1)
    assert big.empty and len(big.omega) == 0


def test_fit_decay_constant_stable():
    # fitted c for survival <= c exp(-c n |U|^(-2/d)): refining the time
    # grid on the same domains moves the fit by at most 20%
    rng = np.random.default_rng(29)
    domains = [_random_blob(rng, int(rng.integers(8, 80))) for _ in range(8)]

    def collect(times):
        out = []
        for dom in domains:
            start = tuple(dom.sites()[0].tolist())
            for n in times:
                out.append((survival_exact(dom, start, int(n)), int(n), len(dom)))
        return out

    coarse = fit_decay_constant(collect((20, 120, 400)), 2)
    fine = fit_decay_constant(collect((20, 60, 120, 250, 400)), 2)
    assert coarse > 0 and fine > 0
    assert abs(fine - coarse) / coarse <= 0.2


def test_heat_kernel_floor_positive_and_stable():
    c = 4.0
    floors = [heat_kernel_floor(r, [r * r // 2, r * r, 2 * r * r], c) for r in (4, 8)]
    assert all(f > 0.0 for f in floors)


def test_interior_depth():
    sites, depth = interior_l1_depth(Ball((0, 0), 4.0))
    by_site = {tuple(s): int(v) for s, v in zip(sites.tolist(), depth)}
    assert by_site[(4, 0)] == 0  # boundary site
    assert by_site[(0, 0)] > 0
    assert min(by_site.values()) == 0
