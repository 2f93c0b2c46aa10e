"""Crossing costs for the range-weighted walk: the direction norm, its dual,
and drift criticality.

The central quantity is E[p^{|range up to tau_x|}] over free walks started at
the origin, with the start site counted in the range.  Its exponential decay
rate per unit distance defines a norm on directions; the dual norm of a drift
vector decides whether the drift is strong enough to delocalize the walk.
"""

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from ._rng import derive_seed
from .lattice import LatticeRegion, ModelParams, pack_one, unpack_sites
from .walk import dir_deltas, origin_packed

__all__ = [
    "CrossingEstimate",
    "DegenerateEstimateWarning",
    "NormModel",
    "classify_drift",
    "critical_magnitude",
    "crossing_probability",
    "dist_beta",
    "dual_norm",
    "estimate_beta",
]


class DegenerateEstimateWarning(UserWarning):
    """No sample ever reached the target; the estimate carries no signal."""


@dataclass(frozen=True)
class CrossingEstimate:
    """One crossing-cost measurement toward a lattice site.

    value is the decay rate per unit l1 distance, -log(expectation)/n with
    n = |x|_1.  The expectation itself and its plain standard error are kept
    alongside; stderr on value comes from the delta method.
    """

    direction: tuple
    n: int
    value: float
    stderr: float
    method: str
    expectation: float
    expectation_stderr: float
    samples: int
    hit_weight: float = 0.0
    truncation_bound: float = 0.0
    theta: float = 0.0
    p: float = 0.0
    d: int = 0

    def sandwich(self):
        """Exact bounds on the expectation: direct path below, range count above."""
        l1 = self.n
        lo = self.p ** (l1 + 1) / (2 * self.d) ** l1
        hi = self.p ** (l1 + 1)
        return lo, hi

    def within_sandwich(self, k_sigma=3.0):
        lo, hi = self.sandwich()
        slack = k_sigma * self.expectation_stderr
        return self.expectation >= lo - slack and self.expectation <= hi + slack

    def to_dict(self):
        return {
            "direction": list(self.direction),
            "n": self.n,
            "value": self.value,
            "stderr": self.stderr,
            "method": self.method,
            "expectation": self.expectation,
            "expectation_stderr": self.expectation_stderr,
            "samples": self.samples,
            "hit_weight": self.hit_weight,
            "truncation_bound": self.truncation_bound,
            "theta": self.theta,
        }


def _as_site(x, d):
    v = tuple(int(c) for c in x)
    if len(v) != d:
        raise ValueError(f"site has {len(v)} coordinates, expected {d}")
    return v


def _tilt_weights(x, d, theta):
    # proposal weight exp(theta * <e_k, x_hat>) per step code; codes 2a and
    # 2a+1 are +e_(a+1) and -e_(a+1)
    nx = math.sqrt(sum(c * c for c in x))
    qw = np.empty(2 * d, np.float64)
    for a in range(d):
        comp = x[a] / nx
        qw[2 * a] = math.exp(theta * comp)
        qw[2 * a + 1] = math.exp(-theta * comp)
    return qw


def _run_tilted(params, x, theta, samples, seed, maxlen):
    dd = dir_deltas(params.d)
    out = np.zeros(samples, np.float64)
    qw = _tilt_weights(x, params.d, theta)
    _k.cross_tilted(
        seed,
        samples,
        2 * params.d,
        dd,
        origin_packed(params.d),
        pack_one(x),
        math.log(params.p),
        qw,
        maxlen,
        out,
    )
    return out


def crossing_probability(
    params: ModelParams,
    x,
    method: str = "tiltedIS",
    samples: int = 4096,
    seed: int = 0,
    cap: int | None = None,
    maxlen: int | None = None,
    theta: float | None = None,
    batches: int = 16,
) -> CrossingEstimate:
    """Estimate E[p^{range up to the first visit of x}] over free walks.

    method: exactEnum enumerates all step sequences up to cap and reports the
    discarded mass as an explicit truncation bound; tiltedIS drifts proposal
    steps toward x with a pilot-tuned strength; splitting clones replicas at
    every new unit of l1 progress and kills them on lazily sampled obstacle
    coins, which integrates to the same range weight.
    """
    x = _as_site(x, params.d)
    l1 = sum(abs(c) for c in x)
    if l1 == 0:
        raise ValueError("crossing target must be nonzero")
    d = params.d
    twod = 2 * d
    dd = dir_deltas(d)
    logp = math.log(params.p)

    if method == "exactEnum":
        if cap is None:
            cap = max(12, l1)
        if cap < l1:
            raise ValueError(f"cap {cap} cannot reach |x|_1 = {l1}")
        expect, hit_prob = _k.cross_enum(
            cap, twod, dd, origin_packed(d), pack_one(x), logp
        )
        trunc = (1.0 - hit_prob) * params.p ** (l1 + 1)
        val = -math.log(max(expect, 1e-300)) / l1
        return CrossingEstimate(
            direction=x,
            n=l1,
            value=val,
            stderr=0.0,
            method=method,
            expectation=expect,
            expectation_stderr=0.0,
            samples=0,
            hit_weight=hit_prob,
            truncation_bound=trunc,
            p=params.p,
            d=d,
        )

    if method == "tiltedIS":
        if maxlen is None:
            maxlen = max(256, 32 * l1)
        if theta is None:
            # short pilot per tilt strength; keep the one with the smallest
            # empirical variance, preferring any signal over none
            grid = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0)
            npilot = max(256, samples // 8)
            best = None
            for i, th in enumerate(grid):
                pilot = _run_tilted(
                    params, x, th, npilot, derive_seed(seed, 17 + i), maxlen
                )
                m = pilot.mean()
                v = pilot.var()
                score = v if m > 0 else math.inf
                if best is None or score < best[0]:
                    best = (score, th)
            theta = best[1]
        out = _run_tilted(params, x, theta, samples, derive_seed(seed, 1), maxlen)
        est = float(out.mean())
        se = float(out.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        hits = float((out > 0).mean())
        if hits == 0.0:
            warnings.warn(
                f"tiltedIS: no sample reached {x} within {maxlen} steps",
                DegenerateEstimateWarning,
            )
        val = -math.log(max(est, 1e-300)) / l1
        vse = se / (l1 * est) if est > 0 else math.inf
        return CrossingEstimate(
            direction=x,
            n=l1,
            value=val,
            stderr=vse,
            method=method,
            expectation=est,
            expectation_stderr=se,
            samples=samples,
            hit_weight=hits,
            truncation_bound=0.0,
            theta=theta,
            p=params.p,
            d=d,
        )

    if method == "splitting":
        if maxlen is None:
            maxlen = max(256, 32 * l1)
        nb = max(2, min(batches, samples))
        per = max(1, samples // nb)
        means = np.empty(nb, np.float64)
        hits_total = 0
        trunc_total = 0.0
        for b in range(nb):
            bs = derive_seed(seed, 300 + b)
            roots = np.array(
                [derive_seed(bs, 7000 + r) for r in range(per)], np.int64
            )
            est_b, hits_b, trunc_b = _k.cross_split(
                bs,
                roots,
                d,
                twod,
                dd,
                origin_packed(d),
                pack_one(x),
                params.p,
                maxlen,
                4 * per + 64,
            )
            means[b] = est_b
            hits_total += hits_b
            trunc_total += trunc_b / nb
        est = float(means.mean())
        se = float(means.std(ddof=1) / math.sqrt(nb))
        if hits_total == 0:
            warnings.warn(
                f"splitting: every replica truncated before reaching {x}",
                DegenerateEstimateWarning,
            )
        val = -math.log(max(est, 1e-300)) / l1
        vse = se / (l1 * est) if est > 0 else math.inf
        return CrossingEstimate(
            direction=x,
            n=l1,
            value=val,
            stderr=vse,
            method=method,
            expectation=est,
            expectation_stderr=se,
            samples=nb * per,
            hit_weight=float(hits_total),
            truncation_bound=trunc_total,
            p=params.p,
            d=d,
        )

    raise ValueError(f"unknown method {method!r}")


def estimate_beta(
    params: ModelParams,
    direction,
    n_list=(2, 4, 6, 8),
    method: str = "tiltedIS",
    samples: int = 4096,
    seed: int = 0,
    **kw,
):
    """Fit the per-unit-length crossing cost along one direction.

    Evaluates the crossing expectation at targets k * direction for k in
    n_list and fits a_k = beta * s + gamma * log(s) + C against the l2 scale
    s = k * |direction|.  The log term absorbs the slowly varying correction
    a subadditive sequence carries at small scales.  Returns (beta, stderr,
    diagnostics); beta is per unit l2 length.
    """
    u = tuple(int(c) for c in direction)
    if all(c == 0 for c in u):
        raise ValueError("direction must be nonzero")
    if len(n_list) < 3:
        raise ValueError("need at least 3 scales for the 3-parameter fit")
    n_list = sorted(int(k) for k in n_list)
    norm_u = math.sqrt(sum(c * c for c in u))

    ests = {}
    for k in n_list:
        target = tuple(k * c for c in u)
        ests[k] = crossing_probability(
            params,
            target,
            method=method,
            samples=samples,
            seed=derive_seed(seed, 1000 + k),
            **kw,
        )

    s = np.array([k * norm_u for k in n_list], np.float64)
    a = np.empty(len(n_list), np.float64)
    sig = np.empty(len(n_list), np.float64)
    for i, k in enumerate(n_list):
        e = ests[k]
        a[i] = -math.log(max(e.expectation, 1e-300))
        rel = e.expectation_stderr / e.expectation if e.expectation > 0 else 10.0
        sig[i] = max(rel, 1e-9)

    X = np.column_stack([s, np.log(s), np.ones_like(s)])
    w = 1.0 / sig**2
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    coef = cov @ (X.T @ (w * a))
    beta = float(coef[0])
    beta_se = float(math.sqrt(max(cov[0, 0], 0.0)))
    resid = a - X @ coef

    # subadditivity check on pairs whose sum is also a measured scale
    sub = []
    for i, m in enumerate(n_list):
        for j, n in enumerate(n_list):
            if j < i or (m + n) not in n_list:
                continue
            kk = n_list.index(m + n)
            gap = (a[i] + a[j]) - a[kk]
            tol = 3.0 * math.sqrt(sig[i] ** 2 + sig[j] ** 2 + sig[kk] ** 2)
            sub.append({"m": m, "n": n, "gap": gap, "tol": tol, "ok": gap >= -tol})

    max_rel_resid = float(np.max(np.abs(resid) / np.maximum(a, 1e-12)))
    l1_l2 = sum(abs(c) for c in u) / norm_u
    band = (math.log(1.0 / params.p) * l1_l2, math.log(2 * params.d / params.p) * l1_l2)
    diagnostics = {
        "beta_band": band,
        "beta_in_band": band[0] - 3 * beta_se <= beta <= band[1] + 3 * beta_se,
        "scales": n_list,
        "a": {k: float(v) for k, v in zip(n_list, a)},
        "a_stderr": {k: float(v) for k, v in zip(n_list, sig)},
        "expectations": {k: ests[k].expectation for k in n_list},
        "gamma": float(coef[1]),
        "intercept": float(coef[2]),
        "residuals": [float(r) for r in resid],
        "residual_flag": max_rel_resid > 0.25,
        "subadditivity": sub,
        "ratio_to_linear": {
            k: float(a[i] / (beta * s[i])) if beta > 0 else math.nan
            for i, k in enumerate(n_list)
        },
    }
    return beta, beta_se, diagnostics


def _primitive_directions(d: int, radius: int):
    out = []
    r2 = radius * radius
    for v in itertools.product(range(-radius, radius + 1), repeat=d):
        if all(c == 0 for c in v):
            continue
        if sum(c * c for c in v) > r2:
            continue
        if math.gcd(*(abs(c) for c in v)) != 1:
            continue
        out.append(v)
    return sorted(out)


class NormModel:
    """Fitted direction norm on a grid of primitive lattice directions.

    Stores one per-unit-length cost per grid direction and evaluates the
    norm anywhere as the gauge of the convex hull of the scaled grid points
    u / beta(u).  The hull is inscribed in the true unit ball, so the gauge
    never undershoots on grid rays and overshoots between them by at most
    the grid's angular resolution.
    """

    def __init__(self, d, directions, beta_values, stderr, fit_meta=None):
        self.d = int(d)
        self.directions = [tuple(int(c) for c in v) for v in directions]
        self.beta_values = np.asarray(beta_values, np.float64)
        self.stderr = np.asarray(stderr, np.float64)
        self.fit_meta = dict(fit_meta or {})
        if len(self.directions) != len(self.beta_values):
            raise ValueError("directions and beta_values length mismatch")
        if np.any(self.beta_values <= 0):
            raise ValueError("fitted beta must be positive")
        self._units = np.array(
            [np.asarray(v) / math.sqrt(sum(c * c for c in v)) for v in self.directions]
        )
        self._build_gauge()

    def _build_gauge(self):
        from scipy.spatial import ConvexHull

        pts = self._units / self.beta_values[:, None]
        hull = ConvexHull(pts)
        eqs = hull.equations
        offs = -eqs[:, -1]
        if np.any(offs <= 1e-12):
            raise ValueError("unit ball does not contain the origin")
        self._facet_normals = eqs[:, :-1] / offs[:, None]
        # covering-angle proxy: largest nearest-neighbor angle on the grid
        dots = self._units @ self._units.T
        np.fill_diagonal(dots, -1.0)
        nn = np.clip(dots.max(axis=1), -1.0, 1.0)
        self.angular_gap = float(np.max(np.arccos(nn)))

    @classmethod
    def fit(
        cls,
        params: ModelParams,
        n_list=(2, 4, 6),
        method: str = "tiltedIS",
        samples: int = 2048,
        seed: int = 0,
        radius: int | None = None,
        **kw,
    ) -> "NormModel":
        """Fit every primitive direction in a ball of the given radius.

        Default radius 3 in d=2 (16 directions); 2 in d=3, which already
        gives the 26 directions the dual evaluation needs.
        """
        if params.p >= 1.0:
            raise ValueError("p = 1 has zero crossing cost; there is no norm")
        if radius is None:
            radius = 3 if params.d == 2 else 2
        dirs = _primitive_directions(params.d, radius)
        betas = np.empty(len(dirs), np.float64)
        errs = np.empty(len(dirs), np.float64)
        for i, v in enumerate(dirs):
            b, se, _ = estimate_beta(
                params,
                v,
                n_list=n_list,
                method=method,
                samples=samples,
                seed=derive_seed(seed, 50 + i),
                **kw,
            )
            # the true per-unit cost provably lies between log(1/p) and
            # log(2d/p) per l1 unit; small-scale fits can stray outside, so
            # clamp, which also keeps the gauge inside the same bounds
            l1_l2 = sum(abs(c) for c in v) / math.sqrt(sum(c * c for c in v))
            lo = math.log(1.0 / params.p) * l1_l2
            hi = math.log(2 * params.d / params.p) * l1_l2
            betas[i] = min(max(b, lo), hi)
            errs[i] = se
        meta = {
            "n_list": list(n_list),
            "method": method,
            "samples": samples,
            "seed": seed,
            "radius": radius,
            "p": params.p,
            "d": params.d,
        }
        return cls(params.d, dirs, betas, errs, meta)

    def beta_of(self, x) -> float:
        """Norm of an arbitrary lattice vector (gauge of the fitted ball)."""
        v = np.asarray(x, np.float64)
        if np.all(v == 0):
            return 0.0
        return float(np.max(self._facet_normals @ v))

    def beta_of_direction(self, u) -> float:
        """Per-unit-length cost along u (homogeneity is structural)."""
        v = np.asarray(u, np.float64)
        return self.beta_of(v / math.sqrt(float(v @ v)))

    def dual_details(self, h):
        """Dual norm with the maximizing grid direction and resolution error."""
        hv = np.asarray(h, np.float64)
        if np.all(hv == 0):
            return 0.0, None, 0.0
        vals = (self._units @ hv) / self.beta_values
        i = int(np.argmax(vals))
        val = float(vals[i])
        err = val * (1.0 / math.cos(self.angular_gap / 2.0) - 1.0)
        return val, self.directions[i], err

    def to_json(self) -> str:
        rec = {
            "d": self.d,
            "directions": [list(v) for v in self.directions],
            "betaValues": [float(b) for b in self.beta_values],
            "stderr": [float(s) for s in self.stderr],
            "fitMeta": self.fit_meta,
        }
        return json.dumps(rec)

    @classmethod
    def from_json(cls, text: str) -> "NormModel":
        rec = json.loads(text)
        return cls(
            rec["d"],
            rec["directions"],
            rec["betaValues"],
            rec["stderr"],
            rec.get("fitMeta"),
        )


def dual_norm(model: NormModel, h) -> float:
    """beta*(h) = max over grid directions u of <h, u> / beta(u)."""
    val, _, _ = model.dual_details(h)
    return val


def dist_beta(model: NormModel, x, region: LatticeRegion) -> float:
    """Distance from x to a region in the fitted norm; 0 inside."""
    x = np.asarray(x, np.int64)
    if region.contains_one(x):
        return 0.0
    sites = region.sites()
    if len(sites) == 0:
        raise ValueError("region is empty")
    # boundary sites: at least one lattice neighbor outside the region
    bnd = np.zeros(len(sites), bool)
    for a in range(model.d):
        for sgn in (1, -1):
            shifted = sites.copy()
            shifted[:, a] += sgn
            bnd |= ~region.contains(shifted)
    cand = sites[bnd] if bnd.any() else sites
    diffs = x[None, :] - cand
    best = math.inf
    for row in diffs:
        b = model.beta_of(row)
        if b < best:
            best = b
    return best


def classify_drift(model: NormModel, h, tol: float = 0.05) -> str:
    """Subcritical, critical, or supercritical by the dual norm against 1."""
    v = dual_norm(model, h)
    if v < 1.0 - tol:
        return "subcritical"
    if v > 1.0 + tol:
        return "supercritical"
    return "critical"


def critical_magnitude(model: NormModel, direction) -> float:
    """Scale t at which t * direction crosses the criticality threshold."""
    v = dual_norm(model, direction)
    if v <= 0:
        raise ValueError("direction with zero dual cost has no critical scale")
    return 1.0 / v
