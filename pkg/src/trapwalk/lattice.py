"""Lattice geometry, model parameters, and seeded Bernoulli obstacle fields.

Sites are integer vectors in Z^d (d = 2 or 3 for anything that touches a
walk or a field; the scaling constants support any d >= 2).  Sites are
packed into a single int64 with 21 bits per signed coordinate, which keeps
hashing, set membership, and kernel code cheap.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from ._rng import site_u01_array, site_u01_py

COORD_BITS = 21
COORD_OFF = 1 << 20  # supports |coordinate| < 2**20
COORD_MASK = (1 << COORD_BITS) - 1
COORD_LIMIT = COORD_OFF - 1


def pack_sites(sites: np.ndarray) -> np.ndarray:
    """Pack an (n, d) int array of sites into int64 keys (d <= 3)."""
    sites = np.asarray(sites, dtype=np.int64)
    if sites.ndim == 1:
        sites = sites[None, :]
    d = sites.shape[1]
    if d > 3:
        raise ValueError(f"packed coordinates support d <= 3, got d={d}")
    if np.any(np.abs(sites) > COORD_LIMIT):
        raise ValueError("site coordinate exceeds packing range")
    out = np.zeros(len(sites), dtype=np.int64)
    for a in range(d):
        out |= (sites[:, a] + COORD_OFF) << (COORD_BITS * a)
    return out


def unpack_sites(packed: np.ndarray, d: int) -> np.ndarray:
    """Inverse of pack_sites; returns an (n, d) int64 array."""
    packed = np.asarray(packed, dtype=np.int64)
    out = np.empty((len(packed), d), dtype=np.int64)
    for a in range(d):
        out[:, a] = ((packed >> (COORD_BITS * a)) & COORD_MASK) - COORD_OFF
    return out


def pack_one(site) -> int:
    return int(pack_sites(np.asarray(site, dtype=np.int64))[0])


def nearest_site(x) -> np.ndarray:
    """Closest lattice site to a real vector, rounding half away from zero.

    The tie rule is a documented convention; any fixed rule works.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5)).astype(np.int64)


def first_bessel_zero(nu: float) -> float:
    """First positive zero of J_nu, by bracketed root-finding (tol 1e-12)."""
    lo = max(nu, 0.1)
    t = lo + 0.05
    f_prev = jv(nu, t)
    step = 0.05
    while t < lo + 60.0:
        t_next = t + step
        f_next = jv(nu, t_next)
        if f_prev > 0.0 and f_next <= 0.0:
            return float(brentq(lambda s: jv(nu, s), t, t_next, xtol=1e-14, rtol=1e-15))
        f_prev, t = f_next, t_next
    raise RuntimeError(f"no sign change found for J_{nu} on the scan interval")


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def compute_rho1_and_cdp(d: int, p: float) -> tuple[float, float]:
    """Optimal continuum ball radius and the survival-cost constant.

    Minimizes lam/r^2 + omega_d r^d log(1/p) over r > 0, where lam is the
    principal eigenvalue of -(1/2d)*Laplacian on the unit continuum ball.
    Closed form for the minimizer: r^(d+2) = 2*lam/(d*omega_d*log(1/p)).

    Returns
    -------
    (rho1, cdp) : minimizer radius and the minimum value.
    """
    if not (isinstance(d, (int, np.integer)) and d >= 2):
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")
    if not (0.0 < p < 1.0):
        raise ValueError(f"vacancy probability must lie in (0,1), got {p!r}")
    j = first_bessel_zero(d / 2.0 - 1.0)
    lam_cont = j * j / (2.0 * d)
    omega = unit_ball_volume(d)
    log_inv_p = math.log(1.0 / p)
    rho1 = (2.0 * lam_cont / (d * omega * log_inv_p)) ** (1.0 / (d + 2))
    cdp = lam_cont / rho1**2 + omega * rho1**d * log_inv_p
    return rho1, cdp


class LatticeRegion:
    """Finite set of lattice sites: ball, box, or explicit site set.

    Subclasses provide sites() (each site exactly once) and a vectorized
    membership predicate.
    """

    d: int

    def sites(self) -> np.ndarray:
        raise NotImplementedError

    def contains(self, sites: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __len__(self) -> int:
        return len(self.sites())

    def contains_one(self, site) -> bool:
        return bool(self.contains(np.asarray(site, dtype=np.int64)[None, :])[0])


class Ball(LatticeRegion):
    """Euclidean lattice ball: sites y with |y - center|_2 <= radius."""

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=np.int64)
        self.radius = float(radius)
        self.d = len(self.center)
        self._sites: np.ndarray | None = None

    def sites(self) -> np.ndarray:
        if self._sites is None:
            r = int(math.floor(self.radius))
            if r < 0:
                self._sites = np.empty((0, self.d), dtype=np.int64)
            else:
                axes = [np.arange(-r, r + 1, dtype=np.int64)] * self.d
                grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
                sq = (grid.astype(np.float64) ** 2).sum(axis=1)
                # 1e-9 slack so radius = sqrt(integer) keeps its boundary shell
                self._sites = grid[sq <= self.radius**2 + 1e-9] + self.center
        return self._sites

    def contains(self, sites: np.ndarray) -> np.ndarray:
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        diff = (sites - self.center).astype(np.float64)
        return (diff**2).sum(axis=1) <= self.radius**2 + 1e-9


class Box(LatticeRegion):
    """Axis-aligned box of sites with lo <= y <= hi componentwise."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.int64)
        self.hi = np.asarray(hi, dtype=np.int64)
        if np.any(self.hi < self.lo):
            raise ValueError("empty box: hi < lo")
        self.d = len(self.lo)

    @classmethod
    def from_corner(cls, corner, side: int) -> "Box":
        corner = np.asarray(corner, dtype=np.int64)
        return cls(corner, corner + side - 1)

    @classmethod
    def centered(cls, center, halfwidth: int) -> "Box":
        center = np.asarray(center, dtype=np.int64)
        return cls(center - halfwidth, center + halfwidth)

    def sites(self) -> np.ndarray:
        axes = [np.arange(self.lo[a], self.hi[a] + 1, dtype=np.int64) for a in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)

    def contains(self, sites: np.ndarray) -> np.ndarray:
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        return np.all((sites >= self.lo) & (sites <= self.hi), axis=1)

    def __len__(self) -> int:
        return int(np.prod(self.hi - self.lo + 1))

    def volume(self) -> int:
        return len(self)


class SiteSet(LatticeRegion):
    """Explicit site set; stored deduplicated in lexicographic order."""

    def __init__(self, sites: np.ndarray, d: int | None = None):
        sites = np.asarray(sites, dtype=np.int64)
        if sites.size == 0:
            if d is None:
                raise ValueError("empty SiteSet needs an explicit dimension")
            sites = sites.reshape(0, d)
        sites = np.atleast_2d(sites)
        self.d = sites.shape[1]
        order = np.lexsort(sites.T[::-1])
        sites = sites[order]
        if len(sites) > 1:
            keep = np.ones(len(sites), dtype=bool)
            keep[1:] = np.any(sites[1:] != sites[:-1], axis=1)
            sites = sites[keep]
        self._sites = sites
        self._packed = set(pack_sites(sites).tolist()) if len(sites) else set()

    def sites(self) -> np.ndarray:
        return self._sites

    def contains(self, sites: np.ndarray) -> np.ndarray:
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        packed = pack_sites(sites)
        return np.fromiter((p in self._packed for p in packed.tolist()), dtype=bool, count=len(packed))


def sites_to_csv(sites: np.ndarray) -> str:
    """Sorted coordinate rows, one site per line."""
    sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    order = np.lexsort(sites.T[::-1])
    return "\n".join(",".join(str(v) for v in row) for row in sites[order])


def sites_from_csv(text: str) -> np.ndarray:
    rows = [r for r in text.strip().splitlines() if r.strip()]
    return np.array([[int(v) for v in r.split(",")] for r in rows], dtype=np.int64)


@dataclass(frozen=True)
class ModelParams:
    """Model parameters and the derived scaling constants.

    rhoN = rho1 * N**(1/(d+2)) is the localization radius; delta_nx is the
    accuracy parameter max(rhoN**(-1/5), |x|/rhoN**d).
    """

    d: int
    p: float
    h: tuple[float, ...]
    N: int
    rho1: float = field(init=False)
    cdp: float = field(init=False)
    rhoN: float = field(init=False)
    eh: np.ndarray = field(init=False, compare=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"simulation dimension must be 2 or 3, got {self.d}")
        if not (0.0 < self.p <= 1.0):
            # p = 1 allowed for degenerate no-obstacle checks
            raise ValueError(f"p must lie in (0,1], got {self.p}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        h = tuple(float(v) for v in self.h)
        if len(h) != self.d:
            raise ValueError(f"drift has length {len(h)}, expected {self.d}")
        object.__setattr__(self, "h", h)
        if self.p < 1.0:
            rho1, cdp = compute_rho1_and_cdp(self.d, self.p)
        else:
            rho1, cdp = math.inf, 0.0
        object.__setattr__(self, "rho1", rho1)
        object.__setattr__(self, "cdp", cdp)
        object.__setattr__(self, "rhoN", rho1 * self.N ** (1.0 / (self.d + 2)))
        hv = np.array(h, dtype=np.float64)
        norm = float(np.linalg.norm(hv))
        object.__setattr__(self, "eh", hv / norm if norm > 0 else np.zeros(self.d))

    def delta_nx(self, x) -> float:
        """Accuracy parameter for endpoint x."""
        x = np.asarray(x, dtype=np.float64)
        return max(self.rhoN ** (-0.2), float(np.linalg.norm(x)) / self.rhoN**self.d)

    def to_dict(self) -> dict:
        return {"d": self.d, "p": self.p, "h": list(self.h), "N": self.N}

    @classmethod
    def from_dict(cls, rec: dict) -> "ModelParams":
        return cls(d=rec["d"], p=rec["p"], h=tuple(rec["h"]), N=rec["N"])


class ObstacleField:
    """Seeded Bernoulli occupancy over a finite window.

    Membership is a pure function of (seed, site), so queries never
    materialize the window.  Sites outside the window count as occupied,
    which models the walk being disallowed from leaving B(0; 2N).  A site
    is vacant with probability p.
    """

    def __init__(self, seed: int, window: Box, p: float, vacant_overrides: frozenset[int] = frozenset()):
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"p must lie in [0,1], got {p}")
        self.seed = int(seed)
        self.window = window
        self.p = float(p)
        self.vacant_overrides = vacant_overrides

    def occupied(self, site) -> bool:
        site = np.asarray(site, dtype=np.int64)
        if not self.window.contains(site[None, :])[0]:
            return True
        packed = pack_one(site)
        if packed in self.vacant_overrides:
            return False
        return site_u01_py(self.seed, packed) >= self.p

    def occupied_many(self, sites: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n, d) array of sites."""
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        inside = self.window.contains(sites)
        out = np.ones(len(sites), dtype=bool)
        if inside.any():
            packed = pack_sites(sites[inside])
            occ = site_u01_array(self.seed, packed) >= self.p
            if self.vacant_overrides:
                forced = np.fromiter(
                    (v in self.vacant_overrides for v in packed.tolist()), dtype=bool, count=len(packed)
                )
                occ &= ~forced
            out[inside] = occ
        return out

    def kernel_args(self):
        """(seed, p, lo, hi, sorted override keys) for jitted queries."""
        over = np.array(sorted(self.vacant_overrides), dtype=np.int64)
        return (self.seed, self.p, self.window.lo.copy(), self.window.hi.copy(), over)

    def to_json(self) -> str:
        rec = {
            "seed": self.seed,
            "window": {"lo": self.window.lo.tolist(), "hi": self.window.hi.tolist()},
            "p": self.p,
        }
        if self.vacant_overrides:
            d = self.window.d
            sites = unpack_sites(np.array(sorted(self.vacant_overrides), dtype=np.int64), d)
            rec["vacant_overrides"] = sites.tolist()
        return json.dumps(rec, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ObstacleField":
        rec = json.loads(text)
        window = Box(rec["window"]["lo"], rec["window"]["hi"])
        overrides = frozenset()
        if rec.get("vacant_overrides"):
            overrides = frozenset(pack_sites(np.array(rec["vacant_overrides"], dtype=np.int64)).tolist())
        return cls(rec["seed"], window, rec["p"], overrides)


def sample_obstacles(seed: int, window: Box, p: float) -> ObstacleField:
    """Bernoulli field: each window site occupied independently w.p. 1 - p."""
    if len(window) < 1:
        raise ValueError("window must be nonempty")
    return ObstacleField(seed, window, p)


def plant_vacant_ball(field_: ObstacleField, center, radius: float) -> ObstacleField:
    """Copy of the field with every site of the lattice ball forced vacant."""
    ball = Ball(center, radius)
    sites = ball.sites()
    if not field_.window.contains(sites).all():
        raise ValueError("planted ball must be contained in the window")
    forced = frozenset(pack_sites(sites).tolist())
    return ObstacleField(field_.seed, field_.window, field_.p, field_.vacant_overrides | forced)
