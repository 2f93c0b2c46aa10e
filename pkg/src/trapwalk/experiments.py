"""Config-driven experiment runner and property suites.

Every experiment is a pure function of its ExperimentConfig: independent
cells (one per N, target, or replica) get seeds derived from the master
seed and cell index, run in a worker pool, and are merged in payload
order.  Scheduling therefore never touches the numbers, and a report can
be reproduced bit-exactly from the config embedded in it, at any worker
count.  Reports carry no timestamps for the same reason.

Trend assertions (monotone means, ratio bands) are pinned desk-scale
regression values from pilot runs, not limits; the asymptotic statements
they shadow are not quantitatively reachable at these N.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
from scipy.optimize import minimize_scalar

from . import __version__
from .backend import backend_name
from ._rng import derive_seed, uniform_array
from .lattice import (
    Ball,
    Box,
    ModelParams,
    ObstacleField,
    compute_rho1_and_cdp,
    first_bessel_zero,
    pack_sites,
    plant_vacant_ball,
    sample_obstacles,
    unit_ball_volume,
)
from .walk import LatticePath
from .spectral import killed_heat_kernel, principal_eigen, survival_exact
from .polymer import (
    McmcSampler,
    annealed_survival_estimate,
    exact_endpoint_distribution,
    strategy_lower_bound,
)
from .lyapunov import NormModel, crossing_probability, dual_norm, estimate_beta
from .detect import CoarseGrainConfig, density_dichotomy_scan, detect_vacant_ball, empty_box_set

EXPERIMENTS = (
    "survival",
    "eigen",
    "lyapunov",
    "ldp",
    "confine",
    "detect",
    "pinned-compare",
    "suite",
)

# bump when any column or field name changes
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _default_n_grid(experiment: str) -> tuple:
    return {
        "survival": (8, 16, 24, 32),
        "eigen": (5000,),
        "lyapunov": (2, 4, 6, 8),
        "ldp": (256, 1024, 4096, 16384),
        "confine": (1024, 4096, 16384, 65536),
        "detect": (4096,),
        "pinned-compare": (8,),
        "suite": (8,),
    }[experiment]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; serialized into every output file."""

    experiment: str
    d: int = 2
    p: float = 0.5
    h: tuple = ()
    n_grid: tuple = ()
    seed: int = 0
    replicas: int = 1
    samples: int = 4096
    method: str = ""
    out: str | None = None
    fmt: str = "json"
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.d not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        if not (0.0 < self.p <= 1.0):
            raise ConfigError("p must be in (0, 1]")
        h = tuple(float(c) for c in self.h) if self.h else (0.0,) * self.d
        if len(h) != self.d:
            raise ConfigError(f"drift must have {self.d} components")
        object.__setattr__(self, "h", h)
        grid = tuple(int(n) for n in self.n_grid) or _default_n_grid(self.experiment)
        if any(n < 1 for n in grid):
            raise ConfigError("n grid entries must be positive")
        if list(grid) != sorted(grid):
            raise ConfigError("n grid must be sorted increasing")
        object.__setattr__(self, "n_grid", grid)
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.fmt not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not isinstance(self.extra, dict):
            raise ConfigError("extra must be a mapping")

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "d": self.d,
            "p": self.p,
            "h": list(self.h),
            "nGrid": list(self.n_grid),
            "seed": self.seed,
            "replicas": self.replicas,
            "samples": self.samples,
            "method": self.method,
            "format": self.fmt,
            "workers": self.workers,
            "extra": self.extra,
            "schemaVersion": SCHEMA_VERSION,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls(
                experiment=data["experiment"],
                d=int(data.get("d", 2)),
                p=float(data.get("p", 0.5)),
                h=tuple(data.get("h", ())),
                n_grid=tuple(data.get("nGrid", ())),
                seed=int(data.get("seed", 0)),
                replicas=int(data.get("replicas", 1)),
                samples=int(data.get("samples", 4096)),
                method=str(data.get("method", "")),
                fmt=str(data.get("format", "json")),
                workers=int(data.get("workers", 1)),
                extra=dict(data.get("extra", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config: {exc}") from exc


@dataclass(frozen=True)
class LdpResult:
    """One endpoint-deviation cell: measured vs predicted decay rate."""

    n: int
    scale: str
    phi: float
    x: tuple
    target: tuple
    cell_side: int
    measured: float
    measured_stderr: float
    predicted: float
    ratio: float
    hits: int
    one_sided: bool
    ladder_rungs: int


def resolve_workers(config: ExperimentConfig) -> int:
    env = os.environ.get("TRAPWALK_WORKERS", "").strip()
    if env:
        try:
            w = int(env)
        except ValueError as exc:
            raise ConfigError(f"TRAPWALK_WORKERS must be an integer, got {env!r}") from exc
        if w < 1:
            raise ConfigError("TRAPWALK_WORKERS must be >= 1")
        return w
    return config.workers


def _map_cells(payloads: list, workers: int) -> list:
    """Run cells, preserving payload order so merges are deterministic."""
    if workers <= 1 or len(payloads) <= 1:
        return [_dispatch_cell(pl) for pl in payloads]
    # fork inherits the already-jitted kernels, so workers skip compilation
    ctx = get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads)), mp_context=ctx) as ex:
        return list(ex.map(_dispatch_cell, payloads))


def _dispatch_cell(payload: dict) -> dict:
    return _CELL_FNS[payload["kind"]](payload)


def _py(x):
    """Coerce numpy scalars/arrays into plain python for json."""
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_py(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _py(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_py(v) for v in x]
    return x


def _report(config: ExperimentConfig, results: dict, assertions: list) -> dict:
    return {
        "schema": f"trapwalk/{config.experiment}/v{SCHEMA_VERSION}",
        "config": config.to_dict(),
        "backend": {"kernels": backend_name(), "version": __version__},
        "results": _py(results),
        "assertions": _py(assertions),
        "passed": all(a["passed"] for a in assertions) if assertions else True,
    }


def _assert(name: str, passed, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


# ---------------------------------------------------------------------------
# survival


def _survival_cell(pl: dict) -> dict:
    params = ModelParams(pl["d"], pl["p"], tuple(pl["h"]), pl["n"])
    est, se = annealed_survival_estimate(
        params, method=pl["method"], samples=pl["samples"], seed=pl["seed"]
    )
    model = NormModel.from_json(pl["model"]) if pl["model"] else None
    origin = (0,) * pl["d"]
    try:
        bound, _ = strategy_lower_bound(params, origin, seed=pl["seed"], model=model)
    except ValueError:
        bound = -math.inf  # N too small to stage the three phases
    scale = pl["n"] ** (pl["d"] / (pl["d"] + 2.0))
    log_est = math.log(est) if est > 0 else -math.inf
    upper = math.log(est + 3.0 * se) if est + 3.0 * se > 0 else -math.inf
    return {
        "n": pl["n"],
        "method": pl["method"],
        "samples": pl["samples"],
        "estimate": est,
        "stderr": se,
        "log_estimate": log_est,
        "rate": -log_est / scale,
        "cdp": params.cdp,
        "rate_over_cdp": (-log_est / scale) / params.cdp if params.cdp > 0 else math.nan,
        "lower_bound": bound,
        "bound_ok": bound <= upper,
    }


def run_survival(config: ExperimentConfig) -> dict:
    method = config.method or "plainMC"
    if method not in ("plainMC", "tiltedIS"):
        raise ConfigError(f"survival method must be plainMC or tiltedIS, got {method!r}")
    model_json = ""
    if config.p < 1.0:
        model = _shared_model(config)
        model_json = model.to_json()
    payloads = [
        {
            "kind": "survival",
            "d": config.d,
            "p": config.p,
            "h": list(config.h),
            "n": n,
            "method": method,
            "samples": config.samples,
            "seed": derive_seed(config.seed, 100 + i),
            "model": model_json,
        }
        for i, n in enumerate(config.n_grid)
    ]
    rows = _map_cells(payloads, resolve_workers(config))
    assertions = [
        _assert(
            "estimates-positive",
            all(r["estimate"] > 0 for r in rows),
            "every survival estimate strictly positive",
        ),
        _assert(
            "strategy-bound-holds",
            all(r["bound_ok"] for r in rows),
            "three-phase lower bound <= log(estimate + 3 stderr) on every row",
        ),
    ]
    if len(rows) >= 2:
        # desk-scale approach to the variational constant from below; allow
        # two standard errors of slack per step for the MC rates
        ok = True
        for a, b in zip(rows, rows[1:]):
            slack = 2.0 * (b["stderr"] / max(b["estimate"], 1e-300)) / (
                b["n"] ** (config.d / (config.d + 2.0)))
            ok = ok and b["rate"] >= a["rate"] - slack
        assertions.append(_assert(
            "rate-nondecreasing", ok,
            " -> ".join(f"{r['rate']:.3f}" for r in rows)))
    columns = [
        "n", "method", "samples", "estimate", "stderr", "log_estimate",
        "rate", "cdp", "rate_over_cdp", "lower_bound", "bound_ok",
    ]
    return _report(config, {"rows": rows, "columns": columns}, assertions)


# ---------------------------------------------------------------------------
# eigen


def run_eigen(config: ExperimentConfig) -> dict:
    d = config.d
    tol = float(config.extra.get("eigen_tol", 1e-10))
    rows = []

    single = Ball((0,) * d, 0.0)
    lam1 = principal_eigen(single, tol=min(tol, 1e-12)).lambda_
    rows.append({"check": "single-site", "measured": lam1, "target": 1.0,
                 "error": abs(lam1 - 1.0), "tol": 1e-12})

    pair_sites = np.zeros((2, d), np.int64)
    pair_sites[1, 0] = 1
    from .lattice import SiteSet

    lam2 = principal_eigen(SiteSet(pair_sites), tol=min(tol, 1e-12)).lambda_
    t2 = 1.0 - 1.0 / (2 * d)
    rows.append({"check": "adjacent-pair", "measured": lam2, "target": t2,
                 "error": abs(lam2 - t2), "tol": 1e-12})

    # R = 12 is the smallest ball whose discrete eigenvalue sits within 5%
    # of the continuum value; smaller balls carry a larger lattice correction
    for radius in config.extra.get("radii", (12, 16, 20)):
        radius = int(radius)
        lam = principal_eigen(Ball((0,) * d, float(radius)), tol=tol).lambda_
        target = _lambda_cont(d) / radius**2
        rows.append({
            "check": f"ball-R{radius}",
            "measured": lam,
            "target": target,
            "error": abs(lam - target) / target,
            "tol": 0.05,
        })

    rho1, cdp = compute_rho1_and_cdp(d, config.p) if config.p < 1 else (math.inf, 0.0)
    if config.p < 1:
        # independent route: 1-d numeric minimization of the explicit
        # volume-vs-eigenvalue tradeoff, against the closed-form optimum
        lam_c, omega, logq = _lambda_cont(d), unit_ball_volume(d), math.log(1.0 / config.p)
        res = minimize_scalar(
            lambda r: lam_c / r**2 + logq * omega * r**d,
            bounds=(1e-3, 50.0),
            method="bounded",
            options={"xatol": 1e-12},
        )
        rows.append({"check": "rho1-minimizer", "measured": rho1, "target": res.x,
                     "error": abs(rho1 - res.x), "tol": 1e-6})
        rows.append({"check": "cdp-minimum", "measured": cdp, "target": res.fun,
                     "error": abs(cdp - res.fun), "tol": 1e-6})

    n_heat = config.n_grid[-1]
    ball8 = Ball((0,) * d, 8.0)
    lam8 = principal_eigen(ball8, tol=tol).lambda_
    pn = killed_heat_kernel(ball8, (0,) * d, (0,) * d, n_heat)
    gap = abs(-math.log(pn) / n_heat + math.log(1.0 - lam8))
    rows.append({"check": f"heat-kernel-n{n_heat}", "measured": gap, "target": 0.0,
                 "error": gap, "tol": 1e-3})

    assertions = [
        _assert(row["check"], row["error"] <= row["tol"],
                f"error {row['error']:.3e} vs tol {row['tol']:.0e}")
        for row in rows
    ]
    columns = ["check", "measured", "target", "error", "tol"]
    return _report(config, {"rows": rows, "columns": columns}, assertions)


def _lambda_cont(d: int) -> float:
    # principal Dirichlet eigenvalue of the unit ball for the 1/(2d) Laplacian
    return first_bessel_zero(d / 2.0 - 1.0) ** 2 / (2.0 * d)


# ---------------------------------------------------------------------------
# lyapunov


def _beta_cell(pl: dict) -> dict:
    params = ModelParams(pl["d"], pl["p"], (0.0,) * pl["d"], 64)
    beta, se, diag = estimate_beta(
        params,
        tuple(pl["direction"]),
        n_list=tuple(pl["n_list"]),
        method=pl["method"],
        samples=pl["samples"],
        seed=pl["seed"],
    )
    ratio_dev = max(abs(v - 1.0) for v in diag["ratio_to_linear"].values())
    return {
        "direction": ",".join(str(c) for c in pl["direction"]),
        "beta": beta,
        "stderr": se,
        "band_low": diag["beta_band"][0],
        "band_high": diag["beta_band"][1],
        "in_band": diag["beta_in_band"],
        "residual_flag": diag["residual_flag"],
        "max_ratio_dev": ratio_dev,
        "subadditivity_ok": all(s["ok"] for s in diag["subadditivity"]),
    }


def run_lyapunov(config: ExperimentConfig) -> dict:
    if config.p >= 1.0:
        raise ConfigError("lyapunov needs p < 1")
    method = config.method or "tiltedIS"
    from .lyapunov import _primitive_directions

    radius = int(config.extra.get("radius", 3 if config.d == 2 else 2))
    dirs = _primitive_directions(config.d, radius)
    payloads = [
        {
            "kind": "beta_dir",
            "d": config.d,
            "p": config.p,
            "direction": [int(c) for c in v],
            "n_list": list(config.n_grid),
            "method": method,
            "samples": config.samples,
            "seed": derive_seed(config.seed, 50 + i),
        }
        for i, v in enumerate(dirs)
    ]
    rows = _map_cells(payloads, resolve_workers(config))

    # assemble the norm from the same estimates the rows report
    betas = np.array([r["beta"] for r in rows])
    errs = np.array([r["stderr"] for r in rows])
    dirs_arr = [np.asarray(v, np.float64) for v in dirs]
    lo = np.array([math.log(1.0 / config.p) * np.abs(v).sum() / np.linalg.norm(v) for v in dirs_arr])
    hi = np.array([math.log(2 * config.d / config.p) * np.abs(v).sum() / np.linalg.norm(v) for v in dirs_arr])
    clamped = np.clip(betas, lo, hi)
    model = NormModel(config.d, dirs, clamped, errs,
                      {"method": method, "samples": config.samples, "seed": config.seed,
                       "nList": list(config.n_grid)})
    h = np.asarray(config.h)
    bstar = dual_norm(model, h) if np.any(h != 0.0) else 0.0
    results = {
        "rows": rows,
        "columns": ["direction", "beta", "stderr", "band_low", "band_high",
                    "in_band", "residual_flag", "max_ratio_dev", "subadditivity_ok"],
        "model": json.loads(model.to_json()),
        "dual_at_h": bstar,
        "drift_class": ("zero" if not np.any(h != 0.0) else
                        ("subcritical" if bstar < 0.95 else
                         "supercritical" if bstar > 1.05 else "critical")),
    }
    assertions = [
        _assert("betas-in-provable-band", all(r["in_band"] for r in rows),
                "every fitted direction inside [log(1/p), log(2d/p)] per l1 unit"),
        _assert("betas-positive", bool((betas > 0).all()), "all direction costs positive"),
    ]
    out = config.extra.get("model_out")
    if out:
        with open(out, "w") as fh:
            fh.write(model.to_json())
    return _report(config, results, assertions)


def _shared_model(config: ExperimentConfig) -> NormModel:
    """Norm model for predictions: loaded from extra.model_json if given."""
    path = config.extra.get("model_json")
    if path:
        with open(path) as fh:
            return NormModel.from_json(fh.read())
    params = ModelParams(config.d, config.p, (0.0,) * config.d, 64)
    return NormModel.fit(
        params,
        n_list=(2, 3, 4, 6),
        samples=int(config.extra.get("model_samples", 1024)),
        seed=derive_seed(config.seed, 7777),
        radius=1,
    )


# ---------------------------------------------------------------------------
# ldp


def _scaled_dist_to_ball2(model: NormModel, x: np.ndarray) -> float:
    """beta-distance from x to the euclidean ball B(0,2), continuum version."""
    if float(np.linalg.norm(x)) <= 2.0:
        return 0.0
    d = len(x)
    if d == 2:
        ang = np.linspace(0.0, 2.0 * math.pi, 1441)[:-1]
        bnd = 2.0 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        # fibonacci sphere, plenty for a norm this smooth
        k = np.arange(2000)
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        z = 1.0 - 2.0 * (k + 0.5) / 2000
        r = np.sqrt(1.0 - z**2)
        bnd = 2.0 * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return min(model.beta_of(x - y) for y in bnd)


def _serpentine_steps(d: int, n: int, center: np.ndarray, half: int) -> np.ndarray:
    """Direction codes of a boustrophedon path that never leaves the box
    center +/- half in the first two coordinates (used as a confined
    chain start)."""
    steps = np.empty(n, np.int8)
    pos = center.astype(np.int64).copy()
    right, up = True, True
    for i in range(n):
        dx = pos[0] - center[0]
        if right and dx < half:
            steps[i] = 0
            pos[0] += 1
            continue
        if not right and dx > -half:
            steps[i] = 1
            pos[0] -= 1
            continue
        right = not right
        dy = pos[1] - center[1]
        if up and dy >= half:
            up = False
        elif not up and dy <= -half:
            up = True
        steps[i] = 2 if up else 3
        pos[1] += 1 if up else -1
    return steps


def _ldp_cell(pl: dict) -> dict:
    d, p, n = pl["d"], pl["p"], pl["n"]
    x = np.asarray(pl["x"], np.float64)
    model = NormModel.from_json(pl["model"])
    params0 = ModelParams(d, p, (0.0,) * d, n)
    rho = params0.rhoN
    phi = rho if pl["scale"] == "rho" else rho ** 1.5
    target = np.rint(phi * x).astype(np.int64)
    # endpoint parity is forced by n; nudge the first coordinate if needed
    if (int(np.abs(target).sum()) + n) % 2 != 0:
        target[0] += 1
    side = max(1, int(rho / 8.0))
    half_lo = side // 2
    half_hi = side - 1 - half_lo

    samples = pl["samples"]
    seed = pl["seed"]
    u = x / float(np.linalg.norm(x))
    goal = float(target @ u)

    log_ratio = 0.0
    var_log = 0.0
    h_now = np.zeros(d)
    rungs = 0
    max_rungs = 24
    # cold start confined near the origin (the h = 0 typical shape); every
    # later rung warm-starts from the previous rung's end state, so the
    # small drift increments never have to re-equilibrate from scratch
    init = _serpentine_steps(d, n, np.zeros(d, np.int64),
                             max(1, int(rho / math.sqrt(2.0))))
    ends = None
    for k in range(max_rungs):
        smp = McmcSampler(ModelParams(d, p, tuple(h_now), n), "muN_h",
                          seed=derive_seed(seed, 10 + k), init_steps=init)
        thin = smp.resolve_thin()
        burn = max(samples * thin // 9, (4 if k == 0 else 2) * n)
        ends, _ = smp.endpoint_samples(samples, burn_in=burn)
        init = smp.steps.copy()
        mean_along = float((ends @ u).mean())
        if mean_along >= goal or rungs >= max_rungs - 1:
            break
        # step the drift so the tilt factor stays O(1) per sample
        spread = float((ends @ u).std()) + 1e-9
        delta = min(0.25, 1.5 / spread)
        h_next = h_now + delta * u
        w = np.exp(ends @ (h_next - h_now))
        r = float(w.mean())
        # batch split for an honest relative variance of the mean
        nb = 16
        bm = w[: (len(w) // nb) * nb].reshape(nb, -1).mean(axis=1)
        var_log += float(bm.std(ddof=1) ** 2 / nb) / r**2
        log_ratio += math.log(r)
        h_now = h_next
        rungs += 1

    # final term from the rung that reached the target, continued for a
    # second batch; a fresh chain could land in the other metastable
    # branch near the transition and miss the cell entirely
    more, _ = smp.endpoint_samples(samples, burn_in=0)
    ends = np.concatenate([ends, more], axis=0)
    inside = np.all((ends >= target - half_lo) & (ends <= target + half_hi), axis=1)
    hits = int(inside.sum())
    wts = np.where(inside, np.exp(-(ends @ h_now)), 0.0)
    est_term = float(wts.mean())
    one_sided = hits == 0
    if hits > 0:
        nb = 16
        bm = wts[: (len(wts) // nb) * nb].reshape(nb, -1).mean(axis=1)
        var_log += float(bm.std(ddof=1) ** 2 / nb) / est_term**2
        measured = -(log_ratio + math.log(est_term))
        stderr = math.sqrt(var_log)
    else:
        measured = math.inf
        stderr = math.nan

    if pl["scale"] == "rho":
        predicted = _scaled_dist_to_ball2(model, x) * rho
    else:
        predicted = model.beta_of(x) * phi
    ratio = measured / predicted if predicted > 0 else (0.0 if hits else math.inf)
    return {
        "n": n,
        "scale": pl["scale"],
        "phi": phi,
        "x": ",".join(f"{c:g}" for c in x),
        "target": ",".join(str(int(c)) for c in target),
        "cell_side": side,
        "measured": measured,
        "measured_stderr": stderr,
        "predicted": predicted,
        "ratio": ratio,
        "hits": hits,
        "one_sided": one_sided,
        "ladder_rungs": rungs,
    }


def run_ldp(config: ExperimentConfig) -> dict:
    if config.p >= 1.0:
        raise ConfigError("ldp needs p < 1")
    scale = config.method or "rho"
    if scale not in ("rho", "mid"):
        raise ConfigError("ldp method selects the scale: rho or mid")
    model = _shared_model(config)
    targets = config.extra.get("targets", [[1.0] + [0.0] * (config.d - 1),
                                           [3.0] + [0.0] * (config.d - 1)])
    payloads = []
    for i, n in enumerate(config.n_grid):
        for j, x in enumerate(targets):
            payloads.append({
                "kind": "ldp_cell",
                "d": config.d,
                "p": config.p,
                "n": n,
                "x": [float(c) for c in x],
                "scale": scale,
                "samples": config.samples,
                "seed": derive_seed(config.seed, 1000 + 64 * i + j),
                "model": model.to_json(),
            })
    rows = _map_cells(payloads, resolve_workers(config))

    assertions = [
        _assert("cells-resolved",
                all(not r["one_sided"] for r in rows),
                "every cell collected endpoint hits (one-sided rows fail this)"),
    ]
    # pinned desk-scale band from pilot runs: measured over predicted sat
    # between 1.78 and 1.80 at n in {4096, 16384} and near 2.2 at n = 256,
    # so outside-ball targets must land in [0.5, 2.4] and the top two
    # scales may not drift apart by more than 0.45
    top = config.n_grid[-1]
    band_rows = [r for r in rows if r["n"] == top and r["predicted"] > 0 and not r["one_sided"]]
    if band_rows:
        ok = all(0.5 <= r["ratio"] <= 2.4 for r in band_rows)
        detail = ", ".join(f"x=({r['x']}) ratio {r['ratio']:.3f}" for r in band_rows)
        assertions.append(_assert("ratio-band-at-top-n", ok, detail))
    if len(config.n_grid) >= 2:
        prev = config.n_grid[-2]
        by_x = {r["x"]: r["ratio"] for r in band_rows}
        drift_rows = [
            (r["x"], abs(by_x[r["x"]] - r["ratio"]))
            for r in rows
            if r["n"] == prev and r["x"] in by_x
            and r["predicted"] > 0 and not r["one_sided"]
        ]
        if drift_rows:
            ok = all(dv <= 0.45 for _, dv in drift_rows)
            detail = ", ".join(f"x=({x}) drift {dv:.3f}" for x, dv in drift_rows)
            assertions.append(_assert("ratio-scale-stability", ok, detail))
    zero_rows = [r for r in rows if r["predicted"] == 0.0 and not r["one_sided"]]
    if zero_rows:
        vals = {}
        for r in zero_rows:
            vals.setdefault(r["x"], []).append((r["n"], r["measured"] / r["phi"]))
        trend_ok = all(
            seq[-1][1] <= seq[0][1] + 1e-9 or len(seq) < 2
            for seq in (sorted(v) for v in vals.values())
        )
        assertions.append(_assert(
            "zero-rate-trend", trend_ok,
            "measured rate over phi(N) does not grow for targets inside the free ball"))
    columns = ["n", "scale", "phi", "x", "target", "cell_side", "measured",
               "measured_stderr", "predicted", "ratio", "hits", "one_sided",
               "ladder_rungs"]
    return _report(config, {"rows": rows, "columns": columns}, assertions)


# ---------------------------------------------------------------------------
# confine


def _confine_cell(pl: dict) -> dict:
    d, p, n = pl["d"], pl["p"], pl["n"]
    h = np.asarray(pl["h"], np.float64)
    params = ModelParams(d, p, tuple(h), n)
    rho = params.rhoN
    drifted = bool(np.any(h != 0.0))
    e_h = h / np.linalg.norm(h) if drifted else np.eye(d)[0]

    if drifted:
        center0 = np.rint(rho * e_h).astype(np.int64)
    else:
        center0 = np.zeros(d, np.int64)
    half = max(1, int(rho / math.sqrt(2.0)))
    init = _serpentine_steps(d, n, center0, half)
    smp = McmcSampler(params, "muN_h", seed=pl["seed"], init_steps=init)

    thin = smp.resolve_thin()
    total = pl["samples"] * thin
    burn = max(total // 9 + thin, int(pl["burn_factor"] * n))
    ends, _ = smp.endpoint_samples(pl["samples"], burn_in=burn)
    proj = ends @ e_h / rho
    nb = 16
    bm = proj[: (len(proj) // nb) * nb].reshape(nb, -1).mean(axis=1)
    mean_proj = float(proj.mean())
    stderr = float(bm.std(ddof=1) / math.sqrt(nb))

    eps = pl["eps"]
    n_sand = pl["n_sandwich"]
    spacing = max(n // 2, 2048)
    inner_r = (1.0 - eps) * rho
    outer_r = (1.0 + eps) * rho
    sand_hits = 0
    for _ in range(n_sand):
        smp.run(spacing)
        path = smp.current_path()
        pos = path.positions()
        upos = np.unique(pack_sites(pos))
        if drifted:
            c = np.rint(rho * e_h).astype(np.int64)
        else:
            sites = np.unique(pos, axis=0)
            c = np.rint(sites.mean(axis=0)).astype(np.int64)
        inner = Ball(tuple(c), inner_r).sites()
        covered = np.isin(pack_sites(inner), upos).all()
        within = (np.linalg.norm(pos - c, axis=1) <= outer_r).all()
        if covered and within:
            sand_hits += 1
    diag = smp.diagnostics()
    return {
        "n": n,
        "rho_n": rho,
        "thin": thin,
        "mean_proj": mean_proj,
        "mean_proj_stderr": stderr,
        "sandwich_freq": sand_hits / n_sand,
        "sandwich_n": n_sand,
        "eps": eps,
        "centered_on": "drift" if drifted else "range-barycenter",
        "accept_flip": diag["acceptance"]["flip"]["rate"],
        "accept_crank": diag["acceptance"]["crankshaft"]["rate"],
    }


def run_confine(config: ExperimentConfig) -> dict:
    h = np.asarray(config.h)
    drifted = bool(np.any(h != 0.0))
    bstar = math.nan
    if config.p < 1.0:
        model = _shared_model(config)
        if drifted:
            bstar = dual_norm(model, h)
    eps = float(config.extra.get("eps", 0.5))
    payloads = [
        {
            "kind": "confine",
            "d": config.d,
            "p": config.p,
            "h": list(config.h),
            "n": n,
            "samples": config.samples,
            "seed": derive_seed(config.seed, 300 + i),
            "eps": eps,
            "n_sandwich": int(config.extra.get("n_sandwich", 12)),
            "burn_factor": float(config.extra.get("burn_factor", 4.0)),
        }
        for i, n in enumerate(config.n_grid)
    ]
    rows = _map_cells(payloads, resolve_workers(config))

    assertions = []
    if drifted:
        means = [r["mean_proj"] for r in rows]
        mono = all(means[i + 1] >= means[i] for i in range(len(means) - 1))
        assertions.append(_assert(
            "mean-projection-monotone", mono,
            " -> ".join(f"{m:.4f}" for m in means)))
        if not math.isnan(bstar):
            tag = bstar < 1.0
            assertions.append(_assert(
                "drift-subcritical", tag,
                f"fitted dual norm {bstar:.4f} (theorem hypothesis needs < 1)"))
        if config.n_grid[-1] >= 65536:
            top = rows[-1]["mean_proj"]
            assertions.append(_assert(
                "pinned-band-at-top", 1.0 <= top <= 2.5,
                f"mean projection {top:.4f} at N={config.n_grid[-1]}, band [1.0, 2.5]"))
        # the sandwich panels are small, so require nondecreasing only up
        # to twice the binomial noise of each adjacent pair
        freqs = [r["sandwich_freq"] for r in rows]
        ns = [max(int(r["sandwich_n"]), 1) for r in rows]
        trend_ok = True
        for i in range(len(freqs) - 1):
            var = (max(freqs[i] * (1 - freqs[i]), 1.0 / ns[i]) / ns[i]
                   + max(freqs[i + 1] * (1 - freqs[i + 1]), 1.0 / ns[i + 1])
                   / ns[i + 1])
            if freqs[i + 1] < freqs[i] - 2.0 * math.sqrt(var):
                trend_ok = False
        assertions.append(_assert(
            "sandwich-freq-trend", trend_ok,
            " -> ".join(f"{f:.3f}" for f in freqs)
            + " (nondecreasing up to 2-sigma panel noise)"))
    else:
        for r in rows:
            assertions.append(_assert(
                f"zero-drift-centered-n{r['n']}",
                abs(r["mean_proj"]) <= 3.0 * r["mean_proj_stderr"] + 1e-9,
                f"mean projection {r['mean_proj']:.5f} +- {r['mean_proj_stderr']:.5f}"))
    results = {
        "rows": rows,
        "columns": ["n", "rho_n", "thin", "mean_proj", "mean_proj_stderr",
                    "sandwich_freq", "sandwich_n", "eps", "centered_on",
                    "accept_flip", "accept_crank"],
        "beta_star": bstar,
    }
    return _report(config, results, assertions)


# ---------------------------------------------------------------------------
# detect


def _detect_cell(pl: dict) -> dict:
    d, p = pl["d"], pl["p"]
    params = ModelParams(d, p, (0.0,) * d, pl["n"])
    rho = params.rhoN
    span = int(math.ceil(4 * rho)) + 8
    window = Box((-span,) * d, (span,) * d)
    field = sample_obstacles(pl["seed"], window, p)
    iota = float(pl["iota"])
    cfg = CoarseGrainConfig(params, iota=iota, rho=float(pl["rho"]))
    if pl["plant"]:
        # center drawn uniformly in a box so the ball stays in the window
        lim = max(1, int(rho))
        u = uniform_array(derive_seed(pl["seed"], 3), np.arange(d, dtype=np.uint64))
        center = np.floor(u * (2 * lim + 1)).astype(np.int64) - lim
        field = plant_vacant_ball(field, tuple(center), rho)
    else:
        center = None
    report = detect_vacant_ball(field, params, config=cfg, window=window)
    err = (float(np.linalg.norm(np.asarray(report.center) - center))
           if center is not None else math.nan)
    return {
        "replica": pl["replica"],
        "planted": pl["plant"],
        "true_center": ",".join(str(c) for c in center) if center is not None else "",
        "center": ",".join(str(c) for c in report.center),
        "center_error": err,
        "tolerance": iota * rho,
        "recovered": bool(err <= iota * rho) if center is not None else None,
        "radius": report.radius,
        "obstacles_inside": report.obstacle_count_inside,
        "below_threshold": report.below_threshold,
    }


def run_detect(config: ExperimentConfig) -> dict:
    n = config.n_grid[-1]
    if "rho_n" in config.extra:
        # pick N so the localization radius matches the requested value
        params0 = ModelParams(config.d, config.p, (0.0,) * config.d, 2)
        n = max(2, int(round((float(config.extra["rho_n"]) / params0.rho1) ** (config.d + 2))))
    plant = bool(config.extra.get("plant", True))
    iota = float(config.extra.get("iota", 0.3))
    rho_frac = float(config.extra.get("rho", 0.04))
    payloads = [
        {
            "kind": "detect",
            "d": config.d,
            "p": config.p,
            "n": n,
            "replica": r,
            "seed": derive_seed(config.seed, 2000 + r),
            "plant": plant,
            "iota": iota,
            "rho": rho_frac,
        }
        for r in range(config.replicas)
    ]
    rows = _map_cells(payloads, resolve_workers(config))
    assertions = [
        _assert("reported-balls-vacant",
                all(r["obstacles_inside"] == 0 for r in rows),
                "exact recount found no obstacle inside any reported ball"),
    ]
    if plant:
        rec = sum(1 for r in rows if r["recovered"])
        assertions.append(_assert(
            "recovery-rate", rec >= math.ceil(0.95 * len(rows)),
            f"{rec}/{len(rows)} replicas within iota*rho_N of the planted center"))

    params = ModelParams(config.d, config.p, (0.0,) * config.d, n)
    span = int(math.ceil(4 * params.rhoN)) + 8
    window = Box((-span,) * config.d, (span,) * config.d)
    field0 = sample_obstacles(derive_seed(config.seed, 2000), window, config.p)
    flags = density_dichotomy_scan(field0, window, 4, 16, float(config.extra.get("delta", 0.1)))
    results = {
        "rows": rows,
        "columns": ["replica", "planted", "true_center", "center", "center_error",
                    "tolerance", "recovered", "radius", "obstacles_inside",
                    "below_threshold"],
        "n": n,
        "rho_n": params.rhoN,
        "density_flags_first_replica": len(flags),
    }
    return _report(config, results, assertions)


# ---------------------------------------------------------------------------
# pinned-compare


def _pinned_cell(pl: dict) -> dict:
    d, p, n = pl["d"], pl["p"], pl["n"]
    x = tuple(pl["x"])
    params = ModelParams(d, p, (0.0,) * d, n)
    pinned = exact_endpoint_distribution(params, variant="pinned", x=x)
    stopped = exact_endpoint_distribution(params, variant="muNx", x=x, cap=pl["cap"])
    # mass the stopped law puts on hitting exactly at n, by range size
    tau_n = {r: pr for (t, r), pr in stopped.tau_range_hist.items() if t == n}
    mass_tau_n = sum(tau_n.values())
    # pinned weight over stopped weight; finite whenever the target is
    # reachable within the cap at all
    ratio = pinned.partition / stopped.partition if stopped.partition > 0 else math.inf
    # conditioned on hitting exactly at n, the two laws agree by construction
    tv = math.nan
    if not pinned.empty and mass_tau_n > 0:
        q = {r: pr / mass_tau_n for r, pr in tau_n.items()}
        keys = set(q) | set(pinned.range_hist)
        tv = 0.5 * sum(abs(q.get(k, 0.0) - pinned.range_hist.get(k, 0.0)) for k in keys)
    return {
        "x": ",".join(str(c) for c in x),
        "pinned_empty": pinned.empty,
        "pinned_weight": pinned.partition,
        "stopped_weight": stopped.partition,
        "hit_weight": stopped.hit_weight,
        "ratio": ratio,
        "stopped_tau_n_mass": mass_tau_n,
        "range_law_tv": tv,
        "truncation_bound": stopped.truncation_bound,
        "ratio_finite": math.isfinite(ratio),
    }


def run_pinned_compare(config: ExperimentConfig) -> dict:
    n = config.n_grid[-1]
    if n > 10:
        raise ConfigError("pinned-compare enumerates all paths; use n <= 10")
    cap = int(config.extra.get("cap", min(2 * n, 14)))
    targets = config.extra.get("targets")
    if targets is None:
        targets = [[2, 0], [1, 1], [4, 0], [2, 2], [0, 0]] if config.d == 2 else [[1, 1, 0], [2, 0, 0]]
    payloads = [
        {
            "kind": "pinned",
            "d": config.d,
            "p": config.p,
            "n": n,
            "x": [int(c) for c in x],
            "cap": cap,
        }
        for x in targets
    ]
    rows = _map_cells(payloads, resolve_workers(config))
    nonempty = [r for r in rows if not r["pinned_empty"]]
    assertions = [
        _assert("ratios-finite", all(r["ratio_finite"] for r in rows),
                "pinned-to-hitting comparison finite for every target"),
        _assert("conditional-range-laws-match",
                all(r["range_law_tv"] <= 1e-12 for r in nonempty),
                "tau = N slice of the stopped law equals the pinned law exactly"),
    ]
    columns = ["x", "pinned_empty", "pinned_weight", "stopped_weight",
               "hit_weight", "ratio", "stopped_tau_n_mass", "range_law_tv",
               "truncation_bound", "ratio_finite"]
    return _report(config, {"rows": rows, "columns": columns, "cap": cap}, assertions)


# ---------------------------------------------------------------------------
# property suites


def _suite_partition_oracle(config):
    params = ModelParams(2, config.p if config.p < 1 else 0.5, (0.0, 0.0), 2)
    dist = exact_endpoint_distribution(params, variant="muN_h")
    p = params.p
    target = (4 * p**2 + 12 * p**3) / 16.0
    ok = abs(dist.partition - target) < 1e-15
    return ok, f"Z_2 = {dist.partition!r}, closed form {target!r}", {"p": p}


def _suite_pinned_oracle(config):
    params = ModelParams(2, 0.5, (0.0, 0.0), 8)
    dist = exact_endpoint_distribution(params, variant="pinned", x=(2, 0))
    # frozen from an independent rational-arithmetic enumeration of all
    # 4^8 step sequences
    expected = {
        3: 0.018999554697936766,
        4: 0.13774677156004156,
        5: 0.35861659492355646,
        6: 0.3265548463707882,
        7: 0.1288407302953837,
        8: 0.025827519667507792,
        9: 0.003413982484785513,
    }
    gap = max(abs(dist.range_hist.get(k, 0.0) - v) for k, v in expected.items())
    return gap < 1e-12, f"max deviation {gap:.2e} from the frozen length-8 law", {"x": [2, 0]}


def _suite_exit_tail(config):
    # randomized domains; the inequality is exact so one violation fails
    rng_seed = derive_seed(config.seed, 40)
    cases = int(config.extra.get("exit_cases", 200))
    bad = 0
    worst = 0.0
    d = 2
    for c in range(cases):
        u = uniform_array(derive_seed(rng_seed, c), np.arange(6, dtype=np.uint64))
        kind = int(u[0] * 3)
        if kind == 0:
            radius = 1.0 + u[1] * 9.0
            dom = Ball((0, 0), radius)
        elif kind == 1:
            a = 1 + int(u[1] * 9)
            b = 1 + int(u[2] * 9)
            dom = Box((-a, -b), (a, b))
        else:
            from .lattice import SiteSet

            m = 30 + int(u[1] * 170)
            pts = np.floor(
                uniform_array(derive_seed(rng_seed, 10_000 + c),
                              np.arange(2 * m, dtype=np.uint64)).reshape(m, 2) * 17
            ).astype(np.int64) - 8
            dom = SiteSet(np.unique(pts, axis=0))
        sites = dom.sites()
        if len(sites) > 400:
            sites = sites[:400]
            from .lattice import SiteSet

            dom = SiteSet(sites)
        start = tuple(sites[int(u[3] * (len(sites) - 1))])
        n = 1 + int(u[4] * 1999)
        lam = principal_eigen(dom, tol=1e-11).lambda_
        surv = survival_exact(dom, start, n)
        bound = math.sqrt(len(sites)) * (1.0 - lam) ** n
        slack = surv - bound
        worst = max(worst, slack)
        if slack > 1e-12:
            bad += 1
    return bad == 0, f"{cases} domains, {bad} violations, worst slack {worst:.2e}", {
        "cases": cases, "seed": rng_seed}


def _suite_heat_kernel(config):
    tol = float(config.extra.get("eigen_tol", 1e-10))
    ball = Ball((0, 0), 8.0)
    lam = principal_eigen(ball, tol=tol).lambda_
    n = 5000
    pn = killed_heat_kernel(ball, (0, 0), (0, 0), n)
    gap = abs(-math.log(pn) / n + math.log(1.0 - lam))
    return gap <= 1e-3, f"decay-rate gap {gap:.2e} at n={n} (tol 1e-3, eigen_tol {tol:g})", {
        "eigen_tol": tol}


def _suite_rng_parity(config):
    from . import _rng

    idx = np.arange(4096, dtype=np.uint64)
    vec = uniform_array(123456789, idx)
    scalar = np.array([_rng.uniform_py(123456789, i) for i in range(4096)])
    ok = bool((vec == scalar).all())
    return ok, "vectorized and scalar generators agree on 4096 draws", {"seed": 123456789}


def _suite_tiling(config):
    params = ModelParams(2, 0.5, (0.0, 0.0), 4096)
    cfg = CoarseGrainConfig(params, iota=0.3, rho=0.04)
    window = Box((-17, -17), (17, 17))
    pts = window.sites()
    tiles = cfg.tile_of(pts)
    centers = cfg.tile_center(tiles)
    off = np.abs(pts - centers).max(axis=1)
    ok = bool((off <= cfg.m).all())
    return ok, f"each of {len(pts)} sites lands in exactly one side-{cfg.side} tile", {}


def _suite_detector(config):
    params = ModelParams(2, 0.5, (0.0, 0.0), 4096)
    window = Box((-40, -40), (40, 40))
    field = sample_obstacles(derive_seed(config.seed, 41), window, 0.5)
    field = plant_vacant_ball(field, (3, -2), params.rhoN)
    rep = detect_vacant_ball(field, params, window=window)
    err = math.hypot(rep.center[0] - 3, rep.center[1] + 2)
    ok = rep.obstacle_count_inside == 0 and err <= 0.3 * params.rhoN
    return ok, (f"center {rep.center}, error {err:.2f}, recount "
                f"{rep.obstacle_count_inside}"), {"planted": [3, -2]}


def _suite_empty_monotone(config):
    params = ModelParams(2, 0.5, (0.0, 0.0), 4096)
    window = Box((-20, -20), (20, 20))
    field = sample_obstacles(derive_seed(config.seed, 42), window, 0.7)
    lo = empty_box_set(field, CoarseGrainConfig(params, iota=0.3, rho=0.05), window)
    hi = empty_box_set(field, CoarseGrainConfig(params, iota=0.3, rho=0.3), window)
    keys_lo = {tuple(c) for c in lo.tile_centers}
    keys_hi = {tuple(c) for c in hi.tile_centers}
    ok = keys_lo <= keys_hi
    return ok, f"|E(rho=0.05)| = {len(keys_lo)} subset of |E(rho=0.3)| = {len(keys_hi)}", {}


def _suite_crossing_sandwich(config):
    params = ModelParams(2, 0.5, (0.0, 0.0), 16)
    ok = True
    details = []
    for x in ((1, 0), (1, 1), (2, 0)):
        est = crossing_probability(params, x, method="exactEnum", cap=12)
        lo, hi = est.sandwich()
        ok = ok and lo <= est.expectation <= hi
        details.append(f"x={x}: {lo:.3e} <= {est.expectation:.3e} <= {hi:.3e}")
    return ok, "; ".join(details), {"cap": 12}


def _suite_norm_geometry(config):
    # exact gauge structure: homogeneity and the triangle inequality hold by
    # construction whatever the fitted values are; symmetry is statistical
    # and checked elsewhere
    params = ModelParams(2, 0.5, (0.0, 0.0), 64)
    model = NormModel.fit(params, n_list=(2, 3, 4), samples=256,
                          seed=derive_seed(config.seed, 43), radius=1)
    v = np.array([3.0, 1.0])
    hom = abs(model.beta_of(2 * v) - 2 * model.beta_of(v))
    tri_worst = -math.inf
    for a in ((1, 0), (0, 1), (2, 1), (-1, 3), (-2, -1)):
        for b in ((1, 1), (-1, 2), (3, 0), (0, -2)):
            a_, b_ = np.asarray(a, float), np.asarray(b, float)
            gap = model.beta_of(a_ + b_) - model.beta_of(a_) - model.beta_of(b_)
            tri_worst = max(tri_worst, gap)
    val, _, _ = model.dual_details(np.array([0.3, 0.1]))
    rt = NormModel.from_json(model.to_json())
    round_trip = abs(rt.beta_of(v) - model.beta_of(v))
    ok = hom < 1e-12 and tri_worst <= 1e-12 and val > 0 and round_trip < 1e-15
    return ok, (f"homogeneity gap {hom:.1e}, worst triangle slack {tri_worst:.1e}, "
                f"json round-trip gap {round_trip:.1e}"), {}


def _suite_inclusion(config):
    # every length-8 path pinned at x first reaches x no later than time 8,
    # so the pinned event sits inside the hitting event; verified by the
    # exact laws agreeing on the tau = N slice
    params = ModelParams(2, 0.6, (0.0, 0.0), 8)
    x = (2, 0)
    pinned = exact_endpoint_distribution(params, variant="pinned", x=x)
    stopped = exact_endpoint_distribution(params, variant="muNx", x=x, cap=12)
    tau_n = {r: pr for (t, r), pr in stopped.tau_range_hist.items() if t == 8}
    mass = sum(tau_n.values())
    if mass <= 0 or pinned.empty:
        return False, "tau = N slice empty", {}
    q = {r: pr / mass for r, pr in tau_n.items()}
    keys = set(q) | set(pinned.range_hist)
    tv = 0.5 * sum(abs(q.get(k, 0.0) - pinned.range_hist.get(k, 0.0)) for k in keys)
    return tv <= 1e-12, f"pinned vs stopped tau=N slice, TV {tv:.2e}", {"x": [2, 0]}


_SUITES = [
    ("partition-oracle", _suite_partition_oracle),
    ("pinned-range-oracle", _suite_pinned_oracle),
    ("exit-time-tail", _suite_exit_tail),
    ("heat-kernel-decay", _suite_heat_kernel),
    ("rng-backend-parity", _suite_rng_parity),
    ("tiling-exactness", _suite_tiling),
    ("detector-soundness", _suite_detector),
    ("empty-boxes-monotone", _suite_empty_monotone),
    ("crossing-sandwich", _suite_crossing_sandwich),
    ("norm-geometry", _suite_norm_geometry),
    ("pinned-hitting-inclusion", _suite_inclusion),
]


def run_property_suites(config: ExperimentConfig) -> dict:
    rows = []
    assertions = []
    for name, fn in _SUITES:
        try:
            ok, detail, inputs = fn(config)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail, inputs = False, f"raised {type(exc).__name__}: {exc}", {}
        rows.append({"suite": name, "passed": bool(ok), "detail": detail,
                     "inputs": json.dumps(_py(inputs), sort_keys=True)})
        assertions.append(_assert(name, ok, detail))
    columns = ["suite", "passed", "detail", "inputs"]
    return _report(config, {"rows": rows, "columns": columns}, assertions)


_CELL_FNS = {
    "survival": _survival_cell,
    "beta_dir": _beta_cell,
    "ldp_cell": _ldp_cell,
    "confine": _confine_cell,
    "detect": _detect_cell,
    "pinned": _pinned_cell,
}


# ---------------------------------------------------------------------------
# serialization and dispatch


def report_to_csv(report: dict) -> str:
    """Plot-ready CSV: comment header with schema and config, then rows."""
    results = report["results"]
    columns = results["columns"]
    lines = [
        f"# schema: {report['schema']}",
        f"# config: {json.dumps(report['config'], sort_keys=True)}",
        f"# passed: {str(report['passed']).lower()}",
        ",".join(columns),
    ]
    for row in results["rows"]:
        cells = []
        for col in columns:
            v = row[col]
            if isinstance(v, float):
                cells.append(repr(v))
            elif isinstance(v, str) and ("," in v or '"' in v):
                cells.append('"' + v.replace('"', '""') + '"')
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_report(report: dict, out: str | None, fmt: str) -> str:
    text = (json.dumps(report, sort_keys=True, indent=2) + "\n"
            if fmt == "json" else report_to_csv(report))
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return text


_RUNNERS = {
    "survival": run_survival,
    "eigen": run_eigen,
    "lyapunov": run_lyapunov,
    "ldp": run_ldp,
    "confine": run_confine,
    "detect": run_detect,
    "pinned-compare": run_pinned_compare,
    "suite": run_property_suites,
}


def run_experiment(config: ExperimentConfig) -> dict:
    return _RUNNERS[config.experiment](config)
