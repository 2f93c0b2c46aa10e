"""Range-weighted path measures on fixed-length walks.

Obstacles integrate out exactly: averaging survival over the Bernoulli field
turns P(tau_O > N) into E[p^{|range|}], so every measure here weighs a walk by
p to the number of distinct sites visited (start counted), times a drift
factor on the endpoint.  The module carries exact enumeration oracles for
small horizons, a path-space Metropolis sampler for large ones, direct
estimators of the survival probability, and the three-phase localization
strategy that lower-bounds endpoint deviations.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from ._rng import derive_seed, uniform_array
from .lattice import Ball, ModelParams, nearest_site, pack_one, unpack_sites
from .lyapunov import DegenerateEstimateWarning, NormModel, crossing_probability
from .spectral import DirichletOperator
from .walk import LatticePath, dir_deltas, origin_packed

__all__ = [
    "ExactDistribution",
    "McmcInvariantError",
    "McmcSampler",
    "PolymerWeight",
    "annealed_survival_estimate",
    "exact_endpoint_distribution",
    "integrated_autocorr",
    "mcmc_sampler",
    "strategy_lower_bound",
]

ENUM_CAP = 12


class McmcInvariantError(RuntimeError):
    """Cached chain state drifted from a from-scratch recomputation."""


@dataclass(frozen=True)
class PolymerWeight:
    """Weight p^{rangeSize} * exp(<h, endpoint>) on fixed-horizon walks.

    For walks stopped on first arrival somewhere, the drift factor is not
    applied; the stopped weight is the range factor alone.
    """

    p: float
    h: tuple

    @classmethod
    def from_params(cls, params: ModelParams) -> "PolymerWeight":
        return cls(params.p, params.h)

    def log_weight(self, path: LatticePath) -> float:
        end = path.endpoint
        drift = sum(hc * ec for hc, ec in zip(self.h, end))
        return path.range_size * math.log(self.p) + drift

    def weight(self, path: LatticePath) -> float:
        return math.exp(self.log_weight(path))

    def stopped_log_weight(self, range_size: int) -> float:
        return range_size * math.log(self.p)


@dataclass(frozen=True)
class ExactDistribution:
    """Exhaustively enumerated endpoint law with its partition function.

    empty flags a conditioning event of measure zero (wrong parity, or no
    path reaches the pin); such a distribution has no support and Z = 0.
    """

    variant: str
    d: int
    N: int
    p: float
    h: tuple
    endpoints: np.ndarray
    prob: np.ndarray
    partition: float
    empty: bool = False
    x: tuple | None = None
    range_hist: dict | None = None
    tau_range_hist: dict | None = None
    truncation_bound: float = 0.0
    hit_weight: float = 0.0

    def prob_of(self, site) -> float:
        key = pack_one(site)
        packed = _pack_rows(self.endpoints)
        idx = np.nonzero(packed == key)[0]
        return float(self.prob[idx[0]]) if len(idx) else 0.0

    def event_prob(self, mask_fn) -> float:
        """Probability of {endpoint in A} for a vectorized site predicate."""
        if self.empty:
            return 0.0
        keep = mask_fn(self.endpoints)
        return float(self.prob[keep].sum())

    def to_json(self) -> str:
        import json

        rec = {
            "variant": self.variant,
            "d": self.d,
            "N": self.N,
            "p": self.p,
            "h": list(self.h),
            "x": list(self.x) if self.x is not None else None,
            "endpoints": self.endpoints.tolist(),
            "prob": self.prob.tolist(),
            "partition": self.partition,
            "empty": self.empty,
            "rangeHist": (
                {str(k): v for k, v in self.range_hist.items()}
                if self.range_hist is not None
                else None
            ),
            "tauRangeHist": (
                {f"{t},{r}": v for (t, r), v in self.tau_range_hist.items()}
                if self.tau_range_hist is not None
                else None
            ),
            "truncationBound": self.truncation_bound,
            "hitWeight": self.hit_weight,
        }
        return json.dumps(rec)


def _pack_rows(sites: np.ndarray) -> np.ndarray:
    if len(sites) == 0:
        return np.empty(0, np.int64)
    from .lattice import pack_sites

    return pack_sites(np.asarray(sites, np.int64))


def _empty_distribution(params, variant, x, **extra):
    return ExactDistribution(
        variant=variant,
        d=params.d,
        N=params.N,
        p=params.p,
        h=params.h,
        endpoints=np.empty((0, params.d), np.int64),
        prob=np.empty(0, np.float64),
        partition=0.0,
        empty=True,
        x=tuple(int(c) for c in x) if x is not None else None,
        **extra,
    )


def exact_endpoint_distribution(
    params: ModelParams,
    variant: str = "muN_h",
    x=None,
    cap: int | None = None,
) -> ExactDistribution:
    """Enumerate every step sequence and accumulate the polymer weights.

    variant muN_h: the horizon-N endpoint law under drift h.
    variant pinned: condition on endpoint x; also records the conditional
    range-size law.
    variant muNx: walks stopped at the first visit to x at time >= N,
    weighted by the stopped range; paths still unstopped at the length cap
    (default 2N) are dropped, with the exact discarded weight reported as
    truncation_bound.
    """
    d = params.d
    twod = 2 * d
    dd = dir_deltas(d)
    N = params.N
    logp = math.log(params.p)

    if variant == "muN_h":
        limit = ENUM_CAP if cap is None else cap
        if N > limit:
            raise ValueError(f"N = {N} exceeds the enumeration cap {limit}")
        agg = _k.enum_endpoint_weights(
            N, twod, dd, origin_packed(d), logp, np.asarray(params.h), d
        )
        packed = np.fromiter(agg.keys(), np.int64, len(agg))
        w = np.fromiter(agg.values(), np.float64, len(agg))
        order = np.argsort(packed)
        packed, w = packed[order], w[order]
        total = float(w.sum())
        z = total * math.exp(-N * math.log(twod))
        return ExactDistribution(
            variant=variant,
            d=d,
            N=N,
            p=params.p,
            h=params.h,
            endpoints=unpack_sites(packed, d),
            prob=w / total,
            partition=z,
        )

    if variant == "pinned":
        if x is None:
            raise ValueError("pinned variant needs the endpoint x")
        limit = ENUM_CAP if cap is None else cap
        if N > limit:
            raise ValueError(f"N = {N} exceeds the enumeration cap {limit}")
        x = tuple(int(c) for c in x)
        l1 = sum(abs(c) for c in x)
        if l1 > N or (l1 + N) % 2 != 0:
            return _empty_distribution(params, variant, x, range_hist={})
        hist = _k.enum_pinned_range_hist(N, twod, dd, origin_packed(d), pack_one(x))
        if len(hist) == 0:
            return _empty_distribution(params, variant, x, range_hist={})
        drift = math.exp(sum(hc * xc for hc, xc in zip(params.h, x)))
        z = 0.0
        for r, pr in hist.items():
            z += pr * math.exp(r * logp) * drift
        rng_hist = {
            int(r): pr * math.exp(r * logp) * drift / z for r, pr in hist.items()
        }
        return ExactDistribution(
            variant=variant,
            d=d,
            N=N,
            p=params.p,
            h=params.h,
            endpoints=np.asarray([x], np.int64),
            prob=np.array([1.0]),
            partition=z,
            x=x,
            range_hist=dict(sorted(rng_hist.items())),
        )

    if variant == "muNx":
        if x is None:
            raise ValueError("muNx variant needs the target x")
        x = tuple(int(c) for c in x)
        if cap is None:
            cap = 2 * N
        if cap < N:
            raise ValueError(f"cap {cap} below the horizon N = {N}")
        hist, z, hit_prob, tail = _k.enum_stopped_histogram(
            cap, N, twod, dd, origin_packed(d), pack_one(x), logp
        )
        if len(hist) == 0:
            return _empty_distribution(
                params, variant, x, tau_range_hist={}, truncation_bound=tail
            )
        tr = {}
        for key, pr in hist.items():
            tau, r = int(key) >> 32, int(key) & 0xFFFFFFFF
            tr[(tau, r)] = pr * math.exp(r * logp) / z
        return ExactDistribution(
            variant=variant,
            d=d,
            N=N,
            p=params.p,
            h=params.h,
            endpoints=np.asarray([x], np.int64),
            prob=np.array([1.0]),
            partition=z,
            x=x,
            tau_range_hist=dict(sorted(tr.items())),
            truncation_bound=tail,
            hit_weight=hit_prob,
        )

    raise ValueError(f"unknown variant {variant!r}")


def _staircase_steps(x, N, d):
    # deterministic feasible start: walk out each axis, then pad with
    # canceling +-e1 pairs
    steps = []
    for a, c in enumerate(x):
        code = 2 * a if c > 0 else 2 * a + 1
        steps.extend([code] * abs(c))
    while len(steps) < N:
        steps.extend([0, 1])
    return np.array(steps, np.int8)


def integrated_autocorr(series) -> float:
    """Integrated autocorrelation time by Geyer's initial positive sequence."""
    x = np.asarray(series, np.float64)
    n = len(x)
    if n < 4:
        return 1.0
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return 1.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(f * np.conj(f), nfft)[:n].real / (var * n)
    tau = 1.0
    k = 1
    while k + 1 < n:
        pair = acf[k] + acf[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 2
    return float(max(tau, 1.0))


_MOVE_NAMES = ("flip", "crankshaft", "pivot", "reversal")


class McmcSampler:
    """Metropolis chain on fixed-length step sequences.

    Moves: single-step flip, crankshaft (re-randomize a window of <= 8 steps
    on the fiber of its net displacement), tail pivot from a mixed cut, and
    full reversal.  Each proposal is symmetric, so detailed balance holds
    move by move.  Pinned chains drop flip and pivot, which change the
    endpoint.  The cached range and endpoint are revalidated against a
    from-scratch recomputation every checkpoint_every moves; disagreement
    beyond 1e-9 raises McmcInvariantError.
    """

    def __init__(
        self,
        params: ModelParams,
        variant: str = "muN_h",
        seed: int = 0,
        x=None,
        mix=None,
        thin: int | None = None,
        checkpoint_every: int = 10_000,
        init_steps=None,
    ):
        if params.N < 2:
            raise ValueError("chain needs N >= 2")
        if variant == "muNx":
            raise NotImplementedError(
                "stopped-path sampling is not provided; use "
                "exact_endpoint_distribution(variant='muNx') at small N"
            )
        if variant not in ("muN_h", "pinned"):
            raise ValueError(f"unknown variant {variant!r}")
        self.params = params
        self.variant = variant
        self.d = params.d
        self.N = params.N
        self._dd = dir_deltas(self.d)
        self._h = np.asarray(params.h, np.float64)
        self._logp = math.log(params.p)
        self.checkpoint_every = int(checkpoint_every)

        if variant == "pinned":
            if x is None:
                raise ValueError("pinned variant needs the endpoint x")
            x = tuple(int(c) for c in x)
            l1 = sum(abs(c) for c in x)
            if l1 > self.N or (l1 + self.N) % 2 != 0:
                raise ValueError(f"no length-{self.N} path ends at {x}")
            self.x = x
            self.steps = _staircase_steps(x, self.N, self.d)
            if mix is None:
                mix = (0.0, 0.85, 0.0, 0.15)
        else:
            self.x = None
            u = uniform_array(derive_seed(seed, 0), np.arange(self.N, dtype=np.uint64))
            self.steps = np.minimum(
                (u * 2 * self.d).astype(np.int64), 2 * self.d - 1
            ).astype(np.int8)
            if mix is None:
                mix = (0.25, 0.45, 0.20, 0.10)
        if init_steps is not None:
            # caller-supplied start state, e.g. a path already confined to a
            # ball; cuts burn-in when the default start is far from typical
            init_steps = np.asarray(init_steps, np.int8)
            if init_steps.shape != (self.N,):
                raise ValueError(f"init_steps must have length {self.N}")
            if init_steps.min() < 0 or init_steps.max() >= 2 * self.d:
                raise ValueError("init_steps entries must be direction codes")
            if variant == "pinned":
                ends = np.zeros(self.d, np.int64)
                for c in init_steps:
                    ends[c // 2] += 1 if c % 2 == 0 else -1
                if tuple(ends) != self.x:
                    raise ValueError("init_steps does not end at the pin")
            self.steps = init_steps.copy()
        self._mix = tuple(float(m) for m in mix)
        self._mix_cdf = np.cumsum(np.asarray(self._mix, np.float64))
        if abs(self._mix_cdf[-1] - 1.0) > 1e-12:
            raise ValueError("move mix must sum to 1")

        self.pos = np.empty(self.N + 1, np.int64)
        self.pos[0] = origin_packed(self.d)
        self.counts = _k.new_counts()
        rng = _k.rebuild_counts(self.steps, self.pos, self.counts, self._dd)
        self.state_i = np.array([0, rng, 0], np.int64)
        self.stats = np.zeros((5, 2), np.int64)
        self._scratch = np.empty(self.N, np.int8)
        self.seed = derive_seed(seed, 2)
        self.moves_done = 0
        self._thin = thin
        self._last_iat = None
        self._none = np.empty(1, np.int64)

    # -- state access -------------------------------------------------

    @property
    def endpoint(self):
        return tuple(
            int(c) for c in unpack_sites(self.pos[self.N : self.N + 1], self.d)[0]
        )

    @property
    def range_size(self) -> int:
        return int(self.state_i[1])

    def log_weight(self) -> float:
        drift = float(sum(hc * ec for hc, ec in zip(self.params.h, self.endpoint)))
        return self.range_size * self._logp + drift

    def current_path(self) -> LatticePath:
        return LatticePath((0,) * self.d, [int(k) for k in self.steps])

    def verify_checkpoint(self) -> tuple[float, float]:
        """Compare the cached log-weight against a from-scratch rebuild."""
        cached = self.log_weight()
        pos2 = np.empty_like(self.pos)
        pos2[0] = origin_packed(self.d)
        counts2 = _k.new_counts()
        rng2 = _k.rebuild_counts(self.steps.copy(), pos2, counts2, self._dd)
        end2 = unpack_sites(pos2[self.N : self.N + 1], self.d)[0]
        drift2 = float(sum(hc * ec for hc, ec in zip(self.params.h, end2)))
        scratch = rng2 * self._logp + drift2
        if pos2[self.N] != self.pos[self.N] or abs(cached - scratch) > 1e-9:
            raise McmcInvariantError(
                f"cached logWeight {cached} vs recomputed {scratch} "
                f"after {self.moves_done} moves"
            )
        if self.variant == "pinned" and self.endpoint != self.x:
            raise McmcInvariantError(f"pinned endpoint drifted to {self.endpoint}")
        return cached, scratch

    # -- running ------------------------------------------------------

    def _run_block(self, n_moves, thin, out_end, out_range):
        _k.mcmc_run(
            self.steps,
            self.pos,
            self.counts,
            self.state_i,
            self._dd,
            self._h,
            self.d,
            self._logp,
            self._mix_cdf,
            n_moves,
            thin,
            self.seed,
            out_end,
            out_range,
            self.stats,
            self._scratch,
        )
        self.moves_done += n_moves

    def run(self, n_moves: int) -> None:
        """Advance without recording samples (burn-in), checkpointing."""
        left = int(n_moves)
        while left > 0:
            chunk = min(left, self.checkpoint_every)
            self._run_block(chunk, 0, self._none, self._none)
            self.verify_checkpoint()
            left -= chunk

    def resolve_thin(self, pilot_moves: int = 8192) -> int:
        """Thinning from a pilot autocorrelation estimate (burn-in work)."""
        if self._thin is not None:
            return self._thin
        out_end = np.empty(pilot_moves, np.int64)
        out_rng = np.empty(pilot_moves, np.int64)
        self.state_i[2] = 0
        self._run_block(pilot_moves, 1, out_end, out_rng)
        self.verify_checkpoint()
        self.state_i[2] = 0
        ends = unpack_sites(out_end, self.d)
        if np.any(self._h != 0.0) and self.variant == "muN_h":
            series = ends @ self._h
        elif self.variant == "pinned":
            series = out_rng.astype(np.float64)
        else:
            series = ends[:, 0].astype(np.float64)
        iat = integrated_autocorr(series)
        self._last_iat = iat
        self._thin = int(min(max(math.ceil(2.0 * iat), 1), 128))
        return self._thin

    def endpoint_samples(self, n_samples: int, burn_in: int | None = None):
        """Bulk post-burn-in samples: (endpoints (n,d), range sizes (n,))."""
        thin = self.resolve_thin()
        total = n_samples * thin
        if burn_in is None:
            # burn 10% of the full chain length
            burn_in = total // 9 + thin
        self.run(burn_in)
        out_end = np.empty(n_samples, np.int64)
        out_rng = np.empty(n_samples, np.int64)
        self.state_i[2] = 0
        block = thin * max(1, self.checkpoint_every // thin)
        left = total
        while left > 0:
            chunk = min(left, block)
            self._run_block(chunk, thin, out_end, out_rng)
            self.verify_checkpoint()
            left -= chunk
        assert int(self.state_i[2]) == n_samples
        return unpack_sites(out_end, self.d), out_rng

    def samples(self, n_samples: int, burn_in: int | None = None):
        """Generator of post-burn-in LatticePath samples."""
        thin = self.resolve_thin()
        if burn_in is None:
            burn_in = (n_samples * thin) // 9 + thin
        self.run(burn_in)
        since_check = 0
        for _ in range(n_samples):
            self.state_i[2] = 0
            self._run_block(thin, 0, self._none, self._none)
            since_check += thin
            if since_check >= self.checkpoint_every:
                self.verify_checkpoint()
                since_check = 0
            yield self.current_path()

    def diagnostics(self) -> dict:
        acc = {}
        for i, name in enumerate(_MOVE_NAMES):
            prop = int(self.stats[i, 0])
            acc[name] = {
                "proposed": prop,
                "accepted": int(self.stats[i, 1]),
                "rate": int(self.stats[i, 1]) / prop if prop else math.nan,
            }
        return {
            "variant": self.variant,
            "moves": self.moves_done,
            "thin": self._thin,
            "iat_pilot": self._last_iat,
            "acceptance": acc,
            "crank_fiber_failures": int(self.stats[4, 0]),
            "mix": self._mix,
        }


def mcmc_sampler(
    params: ModelParams,
    variant: str = "muN_h",
    seed: int = 0,
    steps: int = 100_000,
    x=None,
    **kw,
):
    """Stream of LatticePath samples from a Metropolis chain of given length.

    Burn-in takes the first 10% of the move budget; the rest is emitted as
    thinned path samples.  Build McmcSampler directly for bulk endpoint
    arrays or diagnostics.
    """
    sampler = McmcSampler(params, variant=variant, seed=seed, x=x, **kw)
    thin = sampler.resolve_thin()
    burn = int(steps) // 10
    n_samples = max((int(steps) - burn) // thin, 0)
    return sampler.samples(n_samples, burn_in=burn)


def annealed_survival_estimate(
    params: ModelParams,
    method: str = "plainMC",
    samples: int = 4096,
    seed: int = 0,
    theta: float | None = None,
):
    """Estimate E[p^{|range of S_[0,N]|}] = P x P(tau_O > N).

    plainMC averages the range weight over free walks.  tiltedIS biases each
    step toward unvisited sites with strength theta (pilot-tuned when not
    given) and reweights exactly.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    d = params.d
    twod = 2 * d
    dd = dir_deltas(d)
    N = params.N
    logp = math.log(params.p)

    if method == "plainMC":
        ranges = np.empty(samples, np.int64)
        _k.plain_ranges(
            derive_seed(seed, 1), samples, N, twod, dd, origin_packed(d), ranges
        )
        w = np.exp(ranges * logp)
    elif method == "tiltedIS":
        if theta is None:
            grid = (0.0, 0.2, 0.4, 0.8)
            npilot = max(256, samples // 8)
            best = None
            for i, th in enumerate(grid):
                out = np.empty(npilot, np.float64)
                _k.tilted_survival_logw(
                    derive_seed(seed, 17 + i),
                    npilot,
                    N,
                    twod,
                    dd,
                    origin_packed(d),
                    th,
                    logp,
                    out,
                )
                v = float(np.exp(out).var())
                if best is None or v < best[0]:
                    best = (v, th)
            theta = best[1]
        out = np.empty(samples, np.float64)
        _k.tilted_survival_logw(
            derive_seed(seed, 1),
            samples,
            N,
            twod,
            dd,
            origin_packed(d),
            theta,
            logp,
            out,
        )
        w = np.exp(out)
    else:
        raise ValueError(f"unknown method {method!r}")

    est = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    if samples > 1 and w.std() == 0.0:
        warnings.warn(
            "all sample weights equal; stderr is degenerate",
            DegenerateEstimateWarning,
        )
    return est, se


def strategy_lower_bound(
    params: ModelParams,
    x,
    M: int = 2,
    seed: int = 0,
    eps: float = 0.1,
    model: NormModel | None = None,
):
    """Three-phase localization strategy bound on log mu_N(endpoint near x).

    Phase (i): survive to time n = N - M|x-y|_1 - rhoN^2 inside a vacant
    ball centered near y/2, at the Donsker-Varadhan cost.  Phase (ii): move
    to y within the ball in ~rhoN^2 steps (exact killed heat kernel floor).
    Phase (iii): cross from y to x in M|x-y|_1 steps at the fitted norm
    cost; y = x inside radius (2-4eps) rhoN, so nearby targets pay nothing.
    Returns (total log lower bound, per-phase components).
    """
    d = params.d
    x = tuple(int(c) for c in x)
    rho = params.rhoN
    if not math.isfinite(rho):
        raise ValueError("p = 1 has no localization scale")
    inner = (2.0 - 4.0 * eps) * rho
    xnorm = math.sqrt(sum(c * c for c in x))

    if xnorm <= inner:
        y = x
        log_cross = 0.0
        sandwich = (0.0, 0.0)
    else:
        if model is None:
            model = NormModel.fit(
                params,
                n_list=(2, 3, 4, 6),
                samples=1024,
                seed=derive_seed(seed, 99),
                radius=1,
            )
        ball = Ball((0,) * d, inner)
        sites = ball.sites()
        keep = np.zeros(len(sites), bool)
        for a in range(d):
            for sgn in (1, -1):
                sh = sites.copy()
                sh[:, a] += sgn
                keep |= ~ball.contains(sh)
        cand = sites[keep]
        best = math.inf
        y = None
        xa = np.asarray(x, np.float64)
        for row in cand:
            b = model.beta_of(xa - row)
            if b < best:
                best = b
                y = tuple(int(c) for c in row)
        log_cross = -best
        l1xy = sum(abs(xc - yc) for xc, yc in zip(x, y))
        # per-unit crossing cost lies in [log(1/p), log(2d/p)]
        sandwich = (
            -l1xy * math.log(2 * d / params.p),
            -l1xy * math.log(1.0 / params.p),
        )

    l1xy = sum(abs(xc - yc) for xc, yc in zip(x, y))
    reloc_steps = int(math.ceil(rho * rho))
    n = params.N - M * l1xy - reloc_steps
    if n <= 0:
        raise ValueError(
            f"horizon N = {params.N} cannot fund crossing {M * l1xy} "
            f"plus relocation {reloc_steps} steps"
        )

    # phase (i): Donsker-Varadhan survival cost at horizon n
    log_survive = -params.cdp * n ** (d / (d + 2.0))
    rho_n = params.rho1 * n ** (1.0 / (d + 2.0))

    # phase (ii): exact killed heat kernel from y across its vacant ball
    center = tuple(int(c) for c in nearest_site([c / 2.0 for c in y]))
    ball_n = Ball(center, rho_n)
    if not ball_n.contains_one(np.asarray(y, np.int64)):
        raise ValueError(
            f"relocation ball around {center} (radius {rho_n:.2f}) misses y = {y}"
        )
    op = DirichletOperator(ball_n)
    f = np.zeros(len(op.sites), np.float64)
    f[op.site_index(y)] = 1.0
    if reloc_steps % 2 != 0:
        reloc_steps += 1
    fm1 = op.transition_n(f, reloc_steps - 1)
    fm = op.transition_n(fm1, 1)
    reach = fm + fm1
    if np.any(reach <= 0.0):
        raise ValueError("relocation horizon too short to cover the ball")
    log_reloc = float(np.log(reach.min()))

    delta_slack = -params.delta_nx(x) * params.N ** (d / (d + 2.0))
    total = log_survive + log_reloc + log_cross + delta_slack
    components = {
        "y": y,
        "n": n,
        "ball_center": center,
        "ball_radius": rho_n,
        "relocation_steps": reloc_steps,
        "crossing_steps": M * l1xy,
        "survival": log_survive,
        "relocation": log_reloc,
        "crossing": log_cross,
        "crossing_sandwich": sandwich,
        "delta_slack": delta_slack,
        "total": total,
    }
    return total, components
