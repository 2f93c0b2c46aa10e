"""Structural detectors: coarse-grained low-density sets, the vacant ball
and its inner/outer companions, density-dichotomy violations, and the
good-event decomposition used to localize the endpoint law.

Every detector reports raw quantities next to its flags so that any choice
of the free constants can be re-evaluated offline.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    Ball,
    Box,
    LatticeRegion,
    ModelParams,
    ObstacleField,
    SiteSet,
    nearest_site,
    pack_sites,
)
from .walk import LatticePath

__all__ = [
    "CoarseGrainConfig",
    "EmptyBoxSet",
    "EventGReport",
    "VacantBallReport",
    "density_dichotomy_scan",
    "density_scan_csv",
    "detect_vacant_ball",
    "empty_box_set",
    "event_G",
    "visit_statistics",
    "volume_cost_check",
]

_GRID_GUARD = 50_000_000


def _window_bounds(region: LatticeRegion):
    """Inclusive per-axis bounds without materializing large regions."""
    if isinstance(region, Ball):
        c = np.asarray(region.center, np.int64)
        r = int(math.floor(region.radius))
        return c - r, c + r
    if isinstance(region, Box):
        return region.lo.copy(), region.hi.copy()
    sites = region.sites()
    if len(sites) == 0:
        raise ValueError("empty window")
    return sites.min(axis=0), sites.max(axis=0)


class CoarseGrainConfig:
    """Tiling of space into cubes of side 2m+1 on the grid (2m+1)Z^d.

    m = floor(iota * rhoN).  The side equals the grid spacing, so the tiles
    partition every site into exactly one box; a tile is declared empty when
    its obstacle fraction is at most rho.
    """

    def __init__(self, params: ModelParams, iota: float, rho: float):
        if not (0.0 < rho < 1.0):
            raise ValueError(f"rho must lie in (0,1), got {rho}")
        if iota <= 0.0:
            raise ValueError(f"iota must be positive, got {iota}")
        self.params = params
        self.iota = float(iota)
        self.rho = float(rho)
        self.m = max(1, int(math.floor(iota * params.rhoN)))
        self.side = 2 * self.m + 1
        self.clamped = False

    @classmethod
    def from_params(cls, params: ModelParams, x=None) -> "CoarseGrainConfig":
        """Accuracy-driven parameters eta = 2 delta, rho = eta^2, iota = eta^{5/2}.

        At small horizons these formulas can leave (0,1); the values are then
        clamped and the config flagged, so desk-scale runs stay well-defined.
        """
        if x is None:
            x = (0,) * params.d
        eta = 2.0 * params.delta_nx(x)
        rho = eta * eta
        iota = eta**2.5
        cfg = cls(params, min(iota, 1.0), min(rho, 0.99))
        cfg.clamped = rho >= 1.0 or iota > 1.0
        return cfg

    @property
    def tile_volume(self) -> int:
        return self.side**self.params.d

    def tile_of(self, sites: np.ndarray) -> np.ndarray:
        """Tile index vector of each site; site m+k*side maps to index k."""
        sites = np.atleast_2d(np.asarray(sites, np.int64))
        return np.floor_divide(sites + self.m, self.side)

    def tile_center(self, index) -> np.ndarray:
        return np.asarray(index, np.int64) * self.side

    def tile_offsets(self) -> np.ndarray:
        ax = np.arange(-self.m, self.m + 1, dtype=np.int64)
        grids = np.meshgrid(*([ax] * self.params.d), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.params.d)


class EmptyBoxSet(LatticeRegion):
    """Union of low-density tiles, viewed through a window region."""

    def __init__(self, tile_centers: np.ndarray, config: CoarseGrainConfig, window):
        self.tile_centers = np.asarray(tile_centers, np.int64).reshape(
            -1, config.params.d
        )
        self.config = config
        self.window = window
        self.d = config.params.d
        self._tile_keys = set(int(k) for k in pack_sites(self.tile_centers))

    @property
    def tile_count(self) -> int:
        return len(self.tile_centers)

    def contains(self, sites: np.ndarray) -> np.ndarray:
        sites = np.atleast_2d(np.asarray(sites, np.int64))
        centers = self.config.tile_center(self.config.tile_of(sites))
        keys = pack_sites(centers)
        inside = np.fromiter(
            (int(k) in self._tile_keys for k in keys), bool, len(keys)
        )
        return inside & self.window.contains(sites)

    def sites(self) -> np.ndarray:
        if self.tile_count * self.config.tile_volume > _GRID_GUARD:
            raise ValueError("empty-box set too large to materialize")
        offs = self.config.tile_offsets()
        if self.tile_count == 0:
            return np.empty((0, self.d), np.int64)
        full = (self.tile_centers[:, None, :] + offs[None, :, :]).reshape(-1, self.d)
        keep = self.window.contains(full)
        out = full[keep]
        return out[np.lexsort(out.T[::-1])]


def empty_box_set(
    field_: ObstacleField, config: CoarseGrainConfig, window: LatticeRegion
) -> EmptyBoxSet:
    """Tiles whose obstacle fraction is at most rho, clipped to the window.

    The fraction is always measured over the full tile, including any part
    protruding beyond the window.
    """
    lo, hi = _window_bounds(window)
    side, m, d = config.side, config.m, config.params.d
    t_lo = np.floor_divide(lo + m, side)
    t_hi = np.floor_divide(hi + m, side)
    nt = (t_hi - t_lo + 1).astype(np.int64)
    if int(np.prod(nt)) * config.tile_volume > _GRID_GUARD:
        raise ValueError("window spans too many tiles to scan")

    # one rectangle covering all candidate tiles exactly
    axes = [
        np.arange(t_lo[a] * side - m, t_hi[a] * side + m + 1, dtype=np.int64)
        for a in range(d)
    ]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    occ = field_.occupied_many(grid)
    shape = []
    for a in range(d):
        shape.extend([int(nt[a]), side])
    occ = occ.reshape(shape)
    counts = occ.sum(axis=tuple(range(1, 2 * d, 2)))

    passing = np.argwhere(counts <= config.rho * config.tile_volume)
    centers = (passing + t_lo[None, :]) * side
    return EmptyBoxSet(centers, config, window)


def volume_cost_check(
    p: float,
    config: CoarseGrainConfig,
    window: LatticeRegion,
    V: int,
    mc_samples: int = 10_000,
    seed: int = 0,
):
    """Monte Carlo log-probability that the empty set has volume exactly V,
    against the closed-form cost -V(log(1/p) + 2 rho log rho - log(3N)/side^d).

    Returns (empirical_log_prob, bound); -inf empirical means no field in the
    sample produced that volume, a one-sided outcome.
    """
    from ._rng import derive_seed

    if V % config.tile_volume != 0:
        raise ValueError("V must be a whole number of tiles")
    lo, hi = _window_bounds(window)
    fbox = Box(lo - config.side, hi + config.side)
    hits = 0
    for r in range(mc_samples):
        f = ObstacleField(derive_seed(seed, r), fbox, p)
        e = empty_box_set(f, config, window)
        if e.tile_count * config.tile_volume == V:
            hits += 1
    emp = math.log(hits / mc_samples) if hits else -math.inf
    n = config.params.N
    bound = -V * (
        math.log(1.0 / p)
        + 2.0 * config.rho * math.log(config.rho)
        - math.log(3.0 * n) / config.tile_volume
    )
    return emp, bound


@dataclass(frozen=True)
class VacantBallReport:
    """Detected obstacle-free ball and its derived inner/outer companions.

    radius is the detected fully vacant radius; radius_minus/plus follow the
    (1 - 2 delta^c) and (1 + delta^{c/2} (log N)^3) shapes around the nominal
    localization radius rhoN and may be degenerate at small N (radius_minus
    can fall to zero); raw values are kept so other constants can be tried.
    """

    center: tuple
    radius: float
    radius_nominal: float
    radius_inner: float
    radius_minus: float
    radius_plus: float
    delta: float
    c_const: float
    obstacle_count_inside: int
    obstacle_count_nominal: int
    below_threshold: bool
    coverage: bool | None
    tile_mass: int
    stage1_center: tuple | None
    iota: float
    rho: float

    def to_json(self) -> str:
        rec = {k: getattr(self, k) for k in self.__dataclass_fields__}
        rec["center"] = list(self.center)
        rec["stage1_center"] = (
            list(self.stage1_center) if self.stage1_center is not None else None
        )
        return json.dumps(rec)


def _refine_vacant_ball(field_: ObstacleField, around, half: int):
    """Largest obstacle-free lattice ball centered in a box around a point.

    Exact: squared distance to the nearest obstacle comes from a distance
    transform, capped by the distance to the examined boundary so the
    reported ball never relies on unexamined sites.  Ties break to the
    lexicographically smallest center.
    """
    from scipy import ndimage

    around = np.asarray(around, np.int64)
    d = len(around)
    box = Box.centered(around, half)
    grid = box.sites()
    occ = field_.occupied_many(grid).reshape((2 * half + 1,) * d)
    if occ.all():
        return tuple(int(c) for c in around), -1.0
    if occ.any():
        dist = ndimage.distance_transform_edt(~occ)
        d2 = np.rint(dist * dist).astype(np.int64)
    else:
        d2 = np.full(occ.shape, np.iinfo(np.int64).max, np.int64)
    # ball of squared radius r2 fits the examined box iff r2 <= edge^2
    idx = np.indices(occ.shape)
    edge = np.minimum(idx, 2 * half - idx).min(axis=0)
    r2 = np.minimum(d2 - 1, edge * edge)
    best = int(r2.max())
    cand = np.argwhere(r2 == best) + (around - half)
    cand = cand[np.lexsort(cand.T[::-1])]
    center = tuple(int(c) for c in cand[0])
    return center, math.sqrt(best) if best >= 0 else -1.0


def detect_vacant_ball(
    field_: ObstacleField,
    params: ModelParams,
    path: LatticePath | None = None,
    config: CoarseGrainConfig | None = None,
    window: LatticeRegion | None = None,
    c_const: float = 1.0,
) -> VacantBallReport:
    """Two-stage vacant-ball detector.

    Stage 1 coarse-grains the field and takes the barycenter of the largest
    connected mass of low-density tiles; stage 2 maximizes the exactly
    vacant ball radius near that candidate with a distance transform.  A
    radius below rhoN/2 sets below_threshold instead of raising.  With a
    path, also reports whether the ball is covered by the visited range.
    """
    from scipy import ndimage

    d = params.d
    if config is None:
        config = CoarseGrainConfig.from_params(params)
    if window is None:
        reach = min(2.0 * params.N, max(6.0 * params.rhoN, 24.0))
        window = Ball((0,) * d, reach)

    e = empty_box_set(field_, config, window)
    stage1 = None
    if e.tile_count:
        idx = config.tile_of(e.tile_centers)
        lo = idx.min(axis=0)
        grid = np.zeros((idx - lo).max(axis=0) + 1, bool)
        grid[tuple((idx - lo).T)] = True
        labels, nlab = ndimage.label(grid)
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        big = int(sizes.argmax())
        mass = int(sizes[big])
        sel = labels[tuple((idx - lo).T)] == big
        bary = e.tile_centers[sel].mean(axis=0)
        stage1 = tuple(int(c) for c in nearest_site(bary))
    else:
        mass = 0
        stage1 = None

    around = stage1 if stage1 is not None else (0,) * d
    half = int(math.ceil(1.6 * params.rhoN)) + config.side + 4
    center, radius = _refine_vacant_ball(field_, around, half)
    radius = max(radius, 0.0)

    delta = params.delta_nx((0,) * d)
    dc = delta**c_const
    r_minus = max((1.0 - 2.0 * dc) * params.rhoN, 0.0)
    r_inner = max((1.0 - dc) * params.rhoN, 0.0)
    r_plus = (1.0 + delta ** (c_const / 2.0) * math.log(params.N) ** 3) * params.rhoN

    ball = Ball(center, radius)
    inside = int(field_.occupied_many(ball.sites()).sum()) if radius > 0 else 0
    nominal = int(field_.occupied_many(Ball(center, params.rhoN).sites()).sum())

    coverage = None
    if path is not None:
        visited = set(int(k) for k in path.packed_positions())
        need = pack_sites(ball.sites())
        coverage = all(int(k) in visited for k in need)

    return VacantBallReport(
        center=center,
        radius=radius,
        radius_nominal=params.rhoN,
        radius_inner=r_inner,
        radius_minus=r_minus,
        radius_plus=r_plus,
        delta=delta,
        c_const=c_const,
        obstacle_count_inside=inside,
        obstacle_count_nominal=nominal,
        below_threshold=radius < params.rhoN / 2.0,
        coverage=coverage,
        tile_mass=mass,
        stage1_center=stage1,
        iota=config.iota,
        rho=config.rho,
    )


def density_dichotomy_scan(
    field_: ObstacleField,
    window: LatticeRegion,
    l_min: int,
    l_max: int,
    delta: float,
):
    """All (obstacle v, dyadic l) with obstacle fraction of B(v,l) below delta.

    Sites beyond the field's own window count as occupied, which biases edge
    fractions upward, i.e. against flagging; flags returned are certain.
    Returns rows (site tuple, l, fraction).
    """
    from scipy.signal import fftconvolve

    if l_min < 2:
        raise ValueError("l_min must be at least 2")
    scales = []
    l = int(l_min)
    while l <= l_max:
        scales.append(l)
        l *= 2
    if not scales:
        return []

    d = field_.window.d
    lo, hi = _window_bounds(window)
    pad = max(scales)
    box = Box(lo - pad, hi + pad)
    if len(box) > _GRID_GUARD:
        raise ValueError("scan window too large")
    shape = tuple(int(v) for v in (box.hi - box.lo + 1))
    occ = field_.occupied_many(box.sites()).reshape(shape)
    occf = occ.astype(np.float64)

    win_slice = tuple(slice(pad, pad + (hi[a] - lo[a] + 1)) for a in range(d))
    occ_win = occ[win_slice]
    coords = np.argwhere(occ_win) + lo

    rows = []
    for l in scales:
        ax = np.arange(-l, l + 1)
        grids = np.meshgrid(*([ax] * d), indexing="ij")
        kernel = (sum(g * g for g in grids) <= l * l).astype(np.float64)
        vol = kernel.sum()
        counts = fftconvolve(occf, kernel, mode="same")
        frac = counts[win_slice] / vol
        flagged = occ_win & (frac < delta)
        for ij in np.argwhere(flagged):
            v = tuple(int(c) for c in (ij + lo))
            rows.append((v, l, float(frac[tuple(ij)])))
    return rows


def density_scan_csv(rows, d: int) -> str:
    head = ",".join(f"x{a}" for a in range(d)) + ",l,fraction"
    lines = [head]
    for v, l, frac in rows:
        lines.append(",".join(str(c) for c in v) + f",{l},{frac:.9g}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EventGReport:
    """Flag set for the good event at a candidate center z.

    variant G checks vacancy of the inner ball, coverage-and-confinement of
    the walk between its first and last visits to B-(z), and that this
    window misses at most t_out steps of the horizon.  variant Gprime swaps
    the time condition for first/last-visit bounds by eps*N and adds the
    rhoN^2-frequent-return property; its confinement drops the coverage
    requirement.  Flags are False with a reason code when the path cannot
    supply the needed times.
    """

    variant: str
    z: tuple
    vacant_ok: bool
    confined_ok: bool
    time_ok: bool | None
    short_ok: bool | None
    return_ok: bool | None
    t_out: float | None
    eps: float | None
    r_z: float | None
    r_xz: float | None
    reasons: tuple
    raw: dict

    @property
    def holds(self) -> bool:
        flags = [self.vacant_ok, self.confined_ok]
        if self.variant == "G":
            flags.append(self.time_ok)
        else:
            flags.extend([self.short_ok, self.return_ok])
        return all(bool(f) for f in flags)

    def to_json(self) -> str:
        rec = {k: getattr(self, k) for k in self.__dataclass_fields__}
        rec["z"] = list(self.z)
        rec["reasons"] = list(self.reasons)
        rec["holds"] = self.holds
        rec["raw"] = {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in self.raw.items()
        }
        return json.dumps(rec)


def _first_hit_after(path: LatticePath, x, n_min: int):
    pos = path.positions()
    x = np.asarray(x, np.int64)
    match = np.all(pos == x[None, :], axis=1)
    match[:n_min] = False
    t = np.nonzero(match)[0]
    return int(t[0]) if len(t) else None


def event_G(
    field_: ObstacleField,
    path: LatticePath,
    params: ModelParams,
    x,
    z,
    model=None,
    variant: str = "G",
    c_const: float = 1.0,
    eps: float = 0.1,
    radius_vacant: float | None = None,
    radius_minus: float | None = None,
    radius_plus: float | None = None,
    t_out: float | None = None,
) -> EventGReport:
    """Evaluate the good-event flags at candidate center z.

    Radii default to the delta-shapes of the detector; the free constants
    are exposed so small-horizon runs can pick non-degenerate values.
    """
    if variant not in ("G", "Gprime"):
        raise ValueError(f"unknown variant {variant!r}")
    d = params.d
    x = tuple(int(c) for c in x)
    z = tuple(int(c) for c in z)
    delta = params.delta_nx(x)
    dc = delta**c_const
    if radius_vacant is None:
        radius_vacant = max((1.0 - dc) * params.rhoN, 0.0)
    if radius_minus is None:
        radius_minus = max((1.0 - 2.0 * dc) * params.rhoN, 0.0)
    if radius_plus is None:
        radius_plus = (
            1.0 + delta ** (c_const / 2.0) * math.log(params.N) ** 3
        ) * params.rhoN
    if t_out is None:
        l1z = sum(abs(c) for c in z)
        l1xz = sum(abs(xc - zc) for xc, zc in zip(x, z))
        t_out = dc * (l1z + l1xz) * params.rhoN**2

    reasons = []
    raw = {
        "radius_vacant": radius_vacant,
        "radius_minus": radius_minus,
        "radius_plus": radius_plus,
        "delta": delta,
    }

    vacant_ok = bool(radius_vacant > 0.0) and not bool(
        field_.occupied_many(Ball(z, radius_vacant).sites()).any()
    )
    if radius_vacant <= 0.0:
        reasons.append("degenerate-vacant-radius")

    pos = path.positions()
    bminus = Ball(z, radius_minus)
    bplus = Ball(z, radius_plus)
    in_minus = bminus.contains(pos) if radius_minus > 0 else np.zeros(len(pos), bool)
    times = np.nonzero(in_minus)[0]

    confined_ok = False
    time_ok: bool | None = None
    short_ok: bool | None = None
    return_ok: bool | None = None
    tau = tau_back = None

    if len(times) == 0:
        reasons.append("no-entry")
        if variant == "G":
            time_ok = False
        else:
            short_ok = False
            return_ok = False
    else:
        tau, tau_back = int(times[0]), int(times[-1])
        raw["tau_bminus"] = tau
        raw["tau_back_bminus"] = tau_back
        seg = pos[tau : tau_back + 1]
        inside_plus = bool(bplus.contains(seg).all())
        if not inside_plus:
            reasons.append("escaped-bplus")
        seg_pk = np.unique(pack_sites(seg))
        if variant == "G":
            seg_sites = np.unique(seg, axis=0)
            clean = not bool(field_.occupied_many(seg_sites).any())
            if not clean:
                reasons.append("hit-obstacle")
            need = pack_sites(bminus.sites())
            covered = bool(np.isin(need, seg_pk).all())
            if not covered:
                reasons.append("not-covered")
            confined_ok = covered and inside_plus and clean
            time_ok = bool(tau_back - tau >= params.N - t_out)
            if not time_ok:
                reasons.append("window-too-short")
        else:
            confined_ok = inside_plus
            tau_x = _first_hit_after(path, x, params.N)
            raw["tau_x_N"] = tau_x
            if tau_x is None:
                short_ok = False
                reasons.append("no-hitting-time")
            else:
                short_ok = bool(
                    tau <= eps * params.N and tau_x - tau_back <= eps * params.N
                )
                if not short_ok:
                    reasons.append("ends-too-far-out")
            gaps = np.diff(times)
            max_gap = int(gaps.max()) if len(gaps) else 0
            raw["max_return_gap"] = max_gap
            return_ok = bool(max_gap <= params.rhoN**2 + 1)
            if not return_ok:
                reasons.append("returns-too-rare")

    r_z = r_xz = None
    if model is not None:
        from .lyapunov import dist_beta

        r_z = dist_beta(model, (0,) * d, bplus)
        r_xz = min(dist_beta(model, x, bplus), max(model.beta_of(x) - r_z, 0.0))

    return EventGReport(
        variant=variant,
        z=z,
        vacant_ok=vacant_ok,
        confined_ok=confined_ok,
        time_ok=time_ok,
        short_ok=short_ok,
        return_ok=return_ok,
        t_out=t_out,
        eps=eps if variant == "Gprime" else None,
        r_z=r_z,
        r_xz=r_xz,
        reasons=tuple(reasons),
        raw=raw,
    )


def visit_statistics(
    path: LatticePath,
    field_: ObstacleField,
    params: ModelParams,
    x,
    report: VacantBallReport,
    eps: float = 0.3,
) -> dict:
    """Raw confinement statistics of one path against a detected ball.

    Returns first/last visit times to B-, the time spent before and after,
    the maximum excursion gap between consecutive B- visits, whether the
    between-visits segment stays in B+, and the fraction of all steps spent
    outside B(center, (1+eps) rhoN).
    """
    pos = path.positions()
    n_steps = len(pos) - 1
    r_minus = report.radius_minus if report.radius_minus > 0 else report.radius
    bminus_degenerate = report.radius_minus <= 0
    bminus = Ball(report.center, r_minus)
    bplus = Ball(report.center, report.radius_plus)

    in_minus = bminus.contains(pos)
    times = np.nonzero(in_minus)[0]
    out = {
        "n": n_steps,
        "center": report.center,
        "bminus_radius": r_minus,
        "bminus_degenerate": bminus_degenerate,
    }
    if len(times) == 0:
        out.update(
            tau_bminus=None,
            tail_gap=None,
            confined=False,
            max_gap=None,
            visits=0,
        )
    else:
        tau, tau_back = int(times[0]), int(times[-1])
        seg = pos[tau : tau_back + 1]
        gaps = np.diff(times)
        tau_x = _first_hit_after(path, x, min(params.N, n_steps))
        out.update(
            tau_bminus=tau,
            tau_back_bminus=tau_back,
            tail_gap=(tau_x - tau_back) if tau_x is not None else None,
            tail_gap_horizon=n_steps - tau_back,
            confined=bool(bplus.contains(seg).all()),
            max_gap=int(gaps.max() - 1) if len(gaps) else 0,
            visits=int(len(times)),
        )

    wide = Ball(report.center, (1.0 + eps) * params.rhoN)
    outside = ~wide.contains(pos)
    out["fraction_outside"] = float(outside.mean())
    out["eps"] = eps
    return out
