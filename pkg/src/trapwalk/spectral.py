"""Dirichlet Laplacian -(1/2d)Delta on finite site sets.

Principal eigenpairs by power iteration on the shifted operator 2I - L
(positive definite, Perron vector positive), exact killed-walk dynamic
programming for survival probabilities and heat kernels, level-set reports
for eigenfunctions, and Faber-Krahn shape diagnostics.

Conventions: (Lf)(v) = f(v) - (1/2d) sum of f over lattice neighbors of v
inside the domain; neighbors outside contribute zero.  The heat kernel is
exactly 0 on parity mismatch (bipartite lattice), kept total rather than
an error.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .backend import HAS_NUMBA
from . import _kernels as K
from .lattice import (
    Ball,
    LatticeRegion,
    SiteSet,
    first_bessel_zero,
    pack_one,
    pack_sites,
    unit_ball_volume,
)


class EigenConvergenceError(RuntimeError):
    """Raised when power iteration stalls; carries the best residual seen."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"eigensolver did not reach tolerance after {iterations} iterations "
            f"(best residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


class DirichletOperator:
    """The killed-walk Laplacian on a finite domain.

    Precomputes a (ns, 2d) neighbor-index table; index ns is a sentinel
    row of the extended vector that always holds 0, so a single gather
    implements the Dirichlet condition.
    """

    def __init__(self, domain: LatticeRegion):
        sites = np.atleast_2d(domain.sites())
        if len(sites) == 0:
            raise ValueError("domain must be nonempty")
        self.domain = domain
        self.sites = sites
        self.d = sites.shape[1]
        self.ns = len(sites)
        packed = pack_sites(sites)
        index = {int(k): i for i, k in enumerate(packed)}
        nbr = np.full((self.ns, 2 * self.d), self.ns, dtype=np.int64)
        for a in range(self.d):
            for sgn, col in ((1, 2 * a), (-1, 2 * a + 1)):
                shifted = sites.copy()
                shifted[:, a] += sgn
                for i, k in enumerate(pack_sites(shifted)):
                    j = index.get(int(k))
                    if j is not None:
                        nbr[i, col] = j
        self.nbr = nbr
        self._index = index

    def site_index(self, site) -> int:
        key = pack_one(np.asarray(site, dtype=np.int64))
        if key not in self._index:
            raise ValueError(f"site {tuple(site)} is not in the domain")
        return self._index[key]

    def transition(self, f: np.ndarray) -> np.ndarray:
        """(1/2d) * sum of f over in-domain neighbors: one killed step."""
        ext = np.zeros(self.ns + 1)
        ext[: self.ns] = f
        return ext[self.nbr].sum(axis=1) / (2.0 * self.d)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """L f = f - transition(f)."""
        return f - self.transition(f)

    def transition_n(self, f: np.ndarray, n: int) -> np.ndarray:
        """n killed steps of mass evolution, jitted when available."""
        if n == 0:
            return f.copy()
        a = np.zeros(self.ns + 1)
        a[: self.ns] = f
        if HAS_NUMBA:
            b = np.zeros(self.ns + 1)
            res = K.dp_run(a, b, self.nbr, n, 1.0 / (2.0 * self.d))
            return res[: self.ns].copy()
        inv2d = 1.0 / (2.0 * self.d)
        for _ in range(n):
            a[: self.ns] = a[self.nbr].sum(axis=1) * inv2d
        return a[: self.ns].copy()

    def components(self) -> list[np.ndarray]:
        """Index arrays of the lattice-connected components."""
        rows = np.repeat(np.arange(self.ns), 2 * self.d)
        cols = self.nbr.ravel()
        keep = cols < self.ns
        adj = csr_matrix(
            (np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(self.ns, self.ns)
        )
        ncomp, labels = connected_components(adj, directed=False)
        return [np.flatnonzero(labels == c) for c in range(ncomp)]


@dataclass(frozen=True)
class SpectralPair:
    """Principal eigenpair: f >= 0, ||f||_1 = 1, residual = ||Lf - lambda f||_inf."""

    lambda_: float
    sites: np.ndarray
    values: np.ndarray
    residual: float

    def value_at(self, site) -> float:
        key = pack_one(np.asarray(site, dtype=np.int64))
        packed = pack_sites(self.sites)
        hit = np.flatnonzero(packed == key)
        return float(self.values[hit[0]]) if hit.size else 0.0

    def support(self) -> np.ndarray:
        return self.sites[self.values > 0.0]

    def to_csv(self) -> str:
        """site coordinates then the eigenfunction value, one row per site."""
        order = np.lexsort(self.sites.T[::-1])
        lines = []
        for i in order:
            coords = ",".join(str(v) for v in self.sites[i])
            lines.append(f"{coords},{self.values[i]:.17g}")
        return "\n".join(lines)


def _power_iteration(op: DirichletOperator, idx: np.ndarray, tol: float, maxiter: int):
    """Principal pair of L restricted to one component, via 2I - L."""
    mask = np.zeros(op.ns, dtype=bool)
    mask[idx] = True
    v = np.zeros(op.ns)
    v[idx] = 1.0
    v /= np.linalg.norm(v)
    best = math.inf
    it = 0
    block = 1  # ramp the residual-check spacing so loose tol exits early
    while it < maxiter:
        for _ in range(block):
            w = 2.0 * v - op.apply(v)
            w[~mask] = 0.0
            v = w / np.linalg.norm(w)
            it += 1
        lam_a = float(v @ (2.0 * v - op.apply(v)))
        lam = 2.0 - lam_a
        resid = float(np.max(np.abs(op.apply(v) - lam * v)))
        best = min(best, resid)
        if resid <= tol:
            v = np.abs(v)  # Perron vector; sign fixed for output
            return lam, v, resid
        block = min(64, block * 2)
    raise EigenConvergenceError(best, it)


def principal_eigen(domain: LatticeRegion, tol: float = 1e-10, maxiter: int = 2_000_000) -> SpectralPair:
    """Smallest Dirichlet eigenvalue and its eigenfunction.

    Disconnected domains: the minimum over components, with the
    eigenfunction supported on the achieving component.
    """
    op = DirichletOperator(domain)
    best = None
    for idx in op.components():
        lam, v, resid = _power_iteration(op, idx, tol, maxiter)
        if best is None or lam < best[0]:
            best = (lam, v, resid)
    lam, v, resid = best
    v = v / v.sum()
    return SpectralPair(lambda_=lam, sites=op.sites, values=v, residual=resid)


def survival_exact(domain: LatticeRegion, start, n: int) -> float:
    """P_start(walk stays in the domain for n steps), exact DP."""
    if n < 0:
        raise ValueError("n must be >= 0")
    op = DirichletOperator(domain)
    i = op.site_index(start)  # start outside the domain is an error
    f = np.zeros(op.ns)
    f[i] = 1.0
    return float(op.transition_n(f, n).sum())


def killed_heat_kernel(domain: LatticeRegion, x, y, n: int) -> float:
    """p_n^U(x, y): killed transition probability, exact DP.

    Exactly 0 on parity mismatch; symmetric in (x, y).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    op = DirichletOperator(domain)
    ix = op.site_index(x)
    iy = op.site_index(y)
    l1 = int(np.abs(np.asarray(x, dtype=np.int64) - np.asarray(y, dtype=np.int64)).sum())
    if (n + l1) % 2 == 1:
        return 0.0
    f = np.zeros(op.ns)
    f[ix] = 1.0
    return float(op.transition_n(f, n)[iy])


# ---------------------------------------------------------------------------
# shape diagnostics


def _ball_volume_table(max_sq: int, d: int) -> list[tuple[int, int]]:
    """(squared radius, lattice ball volume) for squared radii 0..max_sq."""
    r = int(math.isqrt(max_sq))
    axes = [np.arange(-r, r + 1, dtype=np.int64)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    sq = (grid**2).sum(axis=1)
    out = []
    for s in range(max_sq + 1):
        out.append((s, int((sq <= s).sum())))
    return out


def faber_krahn_report(domain: LatticeRegion, tol: float = 1e-10):
    """(deficit, asymmetry, best_center) comparing the domain to a ball.

    deficit = |U|^(2/d) * lambda_U - lambda_ball where lambda_ball is the
    unit-volume continuum ball value j^2/(2d) * omega_d^(2/d); asymmetry is
    the minimum over centers near the barycenter of |B delta U|/|B| with the
    lattice ball B volume-matched to |U|.
    """
    sites = np.atleast_2d(domain.sites())
    d = sites.shape[1]
    vol = len(sites)
    lam = principal_eigen(domain, tol=tol).lambda_
    j = first_bessel_zero(d / 2.0 - 1.0)
    lam_ball = j * j / (2.0 * d) * unit_ball_volume(d) ** (2.0 / d)
    deficit = vol ** (2.0 / d) * lam - lam_ball

    # volume-matched squared radius: nearest achievable lattice-ball volume
    guess_r = (vol / unit_ball_volume(d)) ** (1.0 / d)
    max_sq = int((guess_r + 4.0) ** 2) + 1
    table = _ball_volume_table(max_sq, d)
    best_sq = min(table, key=lambda t: (abs(t[1] - vol), t[0]))[0]
    radius = math.sqrt(best_sq)

    bary = np.asarray(np.round(sites.mean(axis=0)), dtype=np.int64)
    dom_keys = set(pack_sites(sites).tolist())
    best = None
    for off in np.ndindex(*([5] * d)):
        center = bary + np.array(off, dtype=np.int64) - 2
        ball_sites = Ball(center, radius).sites()
        bkeys = set(pack_sites(ball_sites).tolist())
        inter = len(bkeys & dom_keys)
        sym_diff = len(bkeys) + vol - 2 * inter
        asym = sym_diff / len(bkeys)
        if best is None or asym < best[0]:
            best = (asym, tuple(int(c) for c in center))
    return float(deficit), float(best[0]), best[1]


# ---------------------------------------------------------------------------
# eigenfunction level sets


@dataclass(frozen=True)
class LevelSetReport:
    """Level sets of an eigenfunction at thresholds eta and eta^2.

    omega: {f >= eta/e_size}; omega_sq: same at eta^2; omega_plus: sites
    within Chebyshev distance 1 of omega.  Eigenvalues are None for empty
    sets.  Ratios against a reference site set E are None when E is not
    supplied.
    """

    eta: float
    e_size: int
    omega: SiteSet
    omega_sq: SiteSet
    omega_plus: SiteSet
    lambda_full: float
    lambda_omega: float | None
    lambda_omega_sq: float | None
    lambda_omega_plus: float | None
    empty: bool
    vol_omega_sq_minus_e_over_e: float | None
    eig_ratio_omega_to_full: float | None
    vol_plus_minus_omega_sq_over_e: float | None

    def to_json(self) -> str:
        rec = {
            "eta": self.eta,
            "e_size": self.e_size,
            "vol_omega": len(self.omega),
            "vol_omega_sq": len(self.omega_sq),
            "vol_omega_plus": len(self.omega_plus),
            "lambda_full": self.lambda_full,
            "lambda_omega": self.lambda_omega,
            "lambda_omega_sq": self.lambda_omega_sq,
            "lambda_omega_plus": self.lambda_omega_plus,
            "empty": self.empty,
            "vol_omega_sq_minus_e_over_e": self.vol_omega_sq_minus_e_over_e,
            "eig_ratio_omega_to_full": self.eig_ratio_omega_to_full,
            "vol_plus_minus_omega_sq_over_e": self.vol_plus_minus_omega_sq_over_e,
        }
        return json.dumps(rec, separators=(",", ":"))


def _chebyshev_dilate(sites: np.ndarray, d: int) -> np.ndarray:
    if len(sites) == 0:
        return sites
    offs = np.stack(np.meshgrid(*([np.arange(-1, 2)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    fat = (sites[:, None, :] + offs[None, :, :]).reshape(-1, d)
    return np.unique(fat, axis=0)


def _maybe_lambda(region: SiteSet, tol: float) -> float | None:
    if len(region) == 0:
        return None
    return principal_eigen(region, tol=tol).lambda_


def level_sets(
    pair: SpectralPair,
    eta: float,
    e_size: int,
    e_set: SiteSet | None = None,
    tol: float = 1e-9,
) -> LevelSetReport:
    """Threshold the eigenfunction at eta/e_size and eta^2/e_size.

    e_set, when given, is the coarse empty set the thresholds normalize
    against; the set-difference ratios need it and are None otherwise.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must lie in (0,1)")
    if e_size < 1:
        raise ValueError("e_size must be >= 1")
    d = pair.sites.shape[1]
    f = pair.values
    omega_sites = pair.sites[f >= eta / e_size]
    omega_sq_sites = pair.sites[f >= eta * eta / e_size]
    omega = SiteSet(omega_sites, d=d)
    omega_sq = SiteSet(omega_sq_sites, d=d)
    omega_plus = SiteSet(_chebyshev_dilate(omega.sites(), d), d=d)
    empty = len(omega) == 0

    lam_omega = _maybe_lambda(omega, tol)
    lam_omega_sq = _maybe_lambda(omega_sq, tol)
    lam_omega_plus = _maybe_lambda(omega_plus, tol)

    # residual from the solve that produced the pair bounds lambda_full
    lam_full = pair.lambda_

    r1 = r2 = r3 = None
    if e_set is not None and len(e_set) > 0:
        e_keys = set(pack_sites(e_set.sites()).tolist())
        o2_keys = set(pack_sites(omega_sq.sites()).tolist()) if len(omega_sq) else set()
        op_keys = set(pack_sites(omega_plus.sites()).tolist()) if len(omega_plus) else set()
        r1 = len(o2_keys - e_keys) / len(e_keys)
        r3 = len(op_keys - o2_keys) / len(e_keys)
    if lam_omega is not None and lam_full > 0:
        r2 = lam_omega / lam_full
    return LevelSetReport(
        eta=eta,
        e_size=e_size,
        omega=omega,
        omega_sq=omega_sq,
        omega_plus=omega_plus,
        lambda_full=lam_full,
        lambda_omega=lam_omega,
        lambda_omega_sq=lam_omega_sq,
        lambda_omega_plus=lam_omega_plus,
        empty=empty,
        vol_omega_sq_minus_e_over_e=r1,
        eig_ratio_omega_to_full=r2,
        vol_plus_minus_omega_sq_over_e=r3,
    )


# ---------------------------------------------------------------------------
# decay-rate diagnostics used by the property suite


def fit_decay_constant(samples: list[tuple[float, int, int]], d: int) -> float:
    """Smallest c with survival <= c*exp(-c*n*|U|^(-2/d)) across samples.

    samples: (survival, n, volume) triples.  F(c) = max_i [log s_i + c*A_i]
    - log c is convex; feasibility is F <= 0.  Returns the left root.
    """
    logs = [(math.log(s), n * v ** (-2.0 / d)) for s, n, v in samples if s > 0.0]
    if not logs:
        raise ValueError("no positive survival values to fit")

    def big_f(c: float) -> float:
        return max(ls + c * a for ls, a in logs) - math.log(c)

    lo, hi = 1e-6, 1e6
    # ternary search for the minimizer of the convex F
    a, b = lo, hi
    for _ in range(200):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if big_f(m1) < big_f(m2):
            b = m2
        else:
            a = m1
    c_min = 0.5 * (a + b)
    if big_f(c_min) > 0.0:
        raise ValueError("no constant satisfies the decay form on these samples")
    a, b = lo, c_min
    for _ in range(200):
        m = 0.5 * (a + b)
        if big_f(m) <= 0.0:
            b = m
        else:
            a = m
    return b


def interior_l1_depth(domain: LatticeRegion) -> tuple[np.ndarray, np.ndarray]:
    """l1 distance from each site to the inner boundary, by BFS.

    The inner boundary (sites with a neighbor outside the domain) has
    depth 0, so the normalized depth vanishes exactly where the
    heat-kernel lower bound degenerates.
    """
    op = DirichletOperator(domain)
    depth = np.full(op.ns, -1, dtype=np.int64)
    frontier = [i for i in range(op.ns) if (op.nbr[i] == op.ns).any()]
    for i in frontier:
        depth[i] = 0
    level = 0
    while frontier:
        nxt = []
        for i in frontier:
            for j in op.nbr[i]:
                if j < op.ns and depth[j] < 0:
                    depth[j] = level + 1
                    nxt.append(j)
        frontier = nxt
        level += 1
    return op.sites, depth


def heat_kernel_floor(radius: int, n_list: list[int], c: float) -> float:
    """min over (n, x, y) of p_n^B(x,y) R^d / (dR(x) dR(y) exp(-n/(c R^2)))

    on the lattice ball of the given radius, with dR = l1 depth to the
    inner boundary / R.  Only parity-matched pairs with positive
    denominator enter the minimum (the bound is vacuous where dR = 0).
    A zero minimum flags a genuine violation.
    """
    ball = Ball((0,) * 2, float(radius))
    op = DirichletOperator(ball)
    sites, depth = interior_l1_depth(ball)
    d = sites.shape[1]
    norm = depth.astype(np.float64) / radius
    ratio_min = math.inf
    for n in n_list:
        for ix in range(0, op.ns, max(1, op.ns // 12)):
            if norm[ix] <= 0.0:
                continue
            f = np.zeros(op.ns)
            f[ix] = 1.0
            pn = op.transition_n(f, n)
            l1 = np.abs(sites - sites[ix]).sum(axis=1)
            ok = ((l1 + n) % 2 == 0) & (norm > 0.0)
            denom = norm[ix] * norm * math.exp(-n / (c * radius * radius))
            vals = pn[ok] * radius**d / denom[ok]
            ratio_min = min(ratio_min, float(vals.min()))
    return ratio_min
