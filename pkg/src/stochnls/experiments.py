"""Coupled Monte Carlo experiments on the central difference scheme.

Every experiment is a set of *lanes*: trajectories that differ in grid,
initial datum or noise amplitude but consume the same Gaussian draws
``xi[sample, step, k]``.  Because the noise is spectral, the increment seen by
a coarse lane is exactly the restriction of the fine lane's increment, so
coarse/fine differences measure the spatial error alone.

Samples are split into fixed-size chunks that are simulated as one batch.
The chunking never depends on the worker count, which makes every result
bit-identical for any ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .functionals import energy_bounds_array
from .grid import (
    GridFunction,
    UniformGrid,
    forward_diff_array,
    format_float,
    laplacian_array,
    norm_array,
    norm_linf,
    restriction_factor,
)
from .noise import COSINE, SpectralCovariance, draw_xi_block, noise_matrix
from .scheme import BlowUp, FixedPointDiverged, SchemeConfig, stepper_for

CHUNK_SIZE = 16
BOOTSTRAP_RESAMPLES = 1000
MAX_EXCLUDED_FRACTION = 0.05


@dataclass(frozen=True)
class Lane:
    cfg: SchemeConfig
    initial: GridFunction
    noise_scale: float = 1.0


@dataclass
class ChunkResult:
    samples: list
    sup_error: np.ndarray  # (pairs, B) sup_t ||restrict(u_a) - u_b||_h
    charge_drift: np.ndarray  # (lanes, B) max_t |c(t) - c(0)| / c(0)
    energy_ok: np.ndarray  # (lanes, B) energy sandwich held at every step
    exp_integral: np.ndarray  # (lanes, B) trapezoid of ||u0||_h ||d+ u||_h
    blown: np.ndarray  # (B,)
    error_trace: np.ndarray | None = None  # (pairs, steps + 1, B)


def _validate_lanes(lanes: Sequence[Lane], pairs: Sequence[tuple[int, int]]):
    base = lanes[0].cfg
    for lane in lanes:
        c = lane.cfg
        if (c.dt, c.t_final, c.lam, c.seed) != (base.dt, base.t_final, base.lam, base.seed):
            raise ValueError("coupled lanes must share dt, T, lambda and seed")
        if c.covariance.truncation != base.covariance.truncation:
            raise ValueError("coupled lanes must share the mode truncation K")
        if lane.initial.grid != c.grid:
            raise ValueError("lane initial datum lives on the wrong grid")
    strides = []
    for a, b in pairs:
        strides.append(restriction_factor(lanes[a].cfg.grid, lanes[b].cfg.grid))
    return strides


def simulate_chunk(
    lanes: Sequence[Lane],
    pairs: Sequence[tuple[int, int]],
    samples: Sequence[int],
    trace: bool = False,
) -> ChunkResult:
    """Run all lanes for the given sample indices with shared draws.

    Lanes with identical configurations are stacked into one batch so that a
    single stepper call advances all of them.
    """
    strides = _validate_lanes(lanes, pairs)
    base = lanes[0].cfg
    n_lanes, n_pairs, batch = len(lanes), len(pairs), len(samples)
    K = base.covariance.truncation
    steps = base.time_steps

    groups: dict[SchemeConfig, list[int]] = {}
    for i, lane in enumerate(lanes):
        groups.setdefault(lane.cfg, []).append(i)
    # Lane i occupies rows slot[i] * batch .. (slot[i] + 1) * batch of its group's array.
    slot = {i: j for members in groups.values() for j, i in enumerate(members)}
    state = {
        cfg: np.concatenate([np.tile(lanes[i].initial.values, (batch, 1)) for i in members])
        for cfg, members in groups.items()
    }
    mats = {cfg: noise_matrix(cfg.covariance, cfg.grid) for cfg in groups}
    scales = {cfg: np.repeat([lanes[i].noise_scale for i in members], batch)[:, None] for cfg, members in groups.items()}

    def view(i: int, rows: np.ndarray) -> np.ndarray:
        return state[lanes[i].cfg][slot[i] * batch + rows]

    hs = [lane.cfg.grid.step for lane in lanes]
    inv = [lane.cfg.grid.inv_step for lane in lanes]
    charge0 = np.array([norm_array(lane.initial.values, lane.cfg.grid.step) ** 2 for lane in lanes])
    mass0 = np.sqrt(charge0)
    charge_drift = np.zeros((n_lanes, batch))
    energy_ok = np.ones((n_lanes, batch), dtype=bool)
    grad_prev = np.array(
        [norm_array(forward_diff_array(lane.initial.values, lane.cfg.grid.inv_step), lane.cfg.grid.step) for lane in lanes]
    )[:, None] * np.ones(batch)
    exp_integral = np.zeros((n_lanes, batch))
    blown = np.zeros(batch, dtype=bool)
    sup_error = np.zeros((n_pairs, batch))
    error_trace = np.zeros((n_pairs, len(steps) + 1, batch)) if trace else None

    def monitor(step_no: int, rows: np.ndarray):
        for p, ((a, b), stride) in enumerate(zip(pairs, strides)):
            err = norm_array(view(a, rows)[:, ::stride] - view(b, rows), hs[b])
            sup_error[p, rows] = np.maximum(sup_error[p, rows], err)
            if error_trace is not None:
                error_trace[p, step_no, rows] = err
        for i in range(n_lanes):
            energy_ok[i, rows] &= energy_bounds_array(view(i, rows), inv[i], base.lam)

    alive = np.arange(batch)
    monitor(0, alive)
    for n, dt in enumerate(steps):
        if alive.size == 0:
            break
        xi = draw_xi_block(base.seed, [samples[j] for j in alive], n, K)
        sq = math.sqrt(dt)
        over = np.zeros(alive.size, dtype=bool)
        for cfg, members in groups.items():
            rows = np.concatenate([j * batch + alive for j in range(len(members))])
            if K:
                dw = np.tile(sq * (xi @ mats[cfg]), (len(members), 1)) * scales[cfg][rows]
            else:
                dw = np.zeros((rows.size, cfg.grid.size))
            new = stepper_for(cfg, dt).step(state[cfg][rows], dw)
            state[cfg][rows] = new
            bad = ~np.all(np.isfinite(new), axis=1) | (np.max(np.abs(new), axis=1) > cfg.blowup_threshold)
            over |= bad.reshape(len(members), alive.size).any(axis=0)
        if over.any():
            blown[alive[over]] = True
            alive = alive[~over]
        for i in range(n_lanes):
            vals = view(i, alive)
            if charge0[i] > 0:
                c = norm_array(vals, hs[i]) ** 2
                charge_drift[i, alive] = np.maximum(charge_drift[i, alive], np.abs(c - charge0[i]) / charge0[i])
            grad = norm_array(forward_diff_array(vals, inv[i]), hs[i])
            exp_integral[i, alive] += 0.5 * dt * mass0[i] * (grad_prev[i, alive] + grad)
            grad_prev[i, alive] = grad
        monitor(n + 1, alive)

    return ChunkResult(list(samples), sup_error, charge_drift, energy_ok, exp_integral, blown, error_trace)


def _chunk_job(args):
    lanes, pairs, samples, trace = args
    return simulate_chunk(lanes, pairs, samples, trace)


def default_workers() -> int:
    import os

    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_coupled(
    lanes: Sequence[Lane],
    pairs: Sequence[tuple[int, int]],
    n_samples: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
    trace: bool = False,
) -> ChunkResult:
    """Simulate ``n_samples`` coupled samples and concatenate chunk results in sample order."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    chunks = [list(range(i, min(i + chunk_size, n_samples))) for i in range(0, n_samples, chunk_size)]
    jobs = [(list(lanes), list(pairs), c, trace) for c in chunks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_chunk_job, jobs))
    else:
        results = [_chunk_job(j) for j in jobs]
    return ChunkResult(
        samples=[s for r in results for s in r.samples],
        sup_error=np.concatenate([r.sup_error for r in results], axis=1),
        charge_drift=np.concatenate([r.charge_drift for r in results], axis=1),
        energy_ok=np.concatenate([r.energy_ok for r in results], axis=1),
        exp_integral=np.concatenate([r.exp_integral for r in results], axis=1),
        blown=np.concatenate([r.blown for r in results]),
        error_trace=np.concatenate([r.error_trace for r in results], axis=2) if trace else None,
    )


# Fitting helpers.


def fit_order(h: Sequence[float], err: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 2 or np.any(err <= 0):
        raise ValueError("fit needs at least two positive errors")
    slope, intercept = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope), float(intercept)


def rms_error(sup_errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``sqrt(mean(e^2))`` along the last axis, with delta-method standard error."""
    sq = np.asarray(sup_errors, dtype=float) ** 2
    m = sq.shape[-1]
    mean = sq.mean(axis=-1)
    est = np.sqrt(mean)
    sd = sq.std(axis=-1, ddof=1) if m > 1 else np.zeros_like(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(est > 0, sd / math.sqrt(m) / (2.0 * est), 0.0)
    return est, se


def bootstrap_slope_ci(x: Sequence[float], sup_errors: np.ndarray, seed: int, resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95):
    """Percentile CI of the fitted slope, resampling Monte Carlo samples jointly across grids."""
    sup_errors = np.asarray(sup_errors, dtype=float)
    m = sup_errors.shape[1]
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.integers(0, m, size=(resamples, m))
    boot = np.sqrt(np.mean(sup_errors[:, idx] ** 2, axis=2))  # (grids, resamples)
    logx = np.log(np.asarray(x, dtype=float))
    slopes = []
    for col in boot.T:
        if np.all(col > 0):
            slopes.append(np.polyfit(logx, np.log(col), 1)[0])
    if not slopes:
        return (float("nan"), float("nan"))
    alpha = 0.5 * (1 - level)
    lo, hi = np.quantile(slopes, [alpha, 1 - alpha])
    return float(lo), float(hi)


# Records.


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class ConvergenceRecord:
    n_interior: list
    h: list
    errors: list
    stderr: list
    n_samples: int
    reference_n: int
    order: float | None = None
    intercept: float | None = None
    order_ci: tuple | None = None
    excluded: int = 0
    max_charge_drift: float = 0.0
    energy_bounds_ok: bool = True
    sup_errors: list = field(default_factory=list, repr=False)
    config: dict = field(default_factory=dict)

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / (self.n_samples + self.excluded) if self.n_samples + self.excluded else 0.0

    @property
    def valid(self) -> bool:
        return self.excluded_fraction <= MAX_EXCLUDED_FRACTION and self.n_samples > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["excluded_fraction"] = self.excluded_fraction
        d["valid"] = self.valid
        return _jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "h", "error", "stderr", "fit"])
        for n, h, e, s in zip(self.n_interior, self.h, self.errors, self.stderr):
            fit = math.exp(self.intercept) * h**self.order if self.order is not None else float("nan")
            w.writerow([n, format_float(h), format_float(e), format_float(s), format_float(fit)])
        return buf.getvalue()


@dataclass
class ResidualReport:
    function_id: str
    n_interior: list
    h: list
    residual_linf: list
    order: float | None

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "h", "residual_linf"])
        for n, h, r in zip(self.n_interior, self.h, self.residual_linf):
            w.writerow([n, format_float(h), format_float(r)])
        return buf.getvalue()


@dataclass
class ScalingRecord:
    """Output error against a perturbation size (initial data or noise amplitude)."""

    kind: str
    sizes: list
    input_distance: list
    errors: list
    stderr: list
    slope: float | None
    slope_ci: tuple | None
    n_samples: int
    excluded: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "input_distance", "error", "stderr"])
        for s, d, e, se in zip(self.sizes, self.input_distance, self.errors, self.stderr):
            w.writerow([format_float(s), format_float(d), format_float(e), format_float(se)])
        return buf.getvalue()


# Truncation residual.


ANALYTIC_FUNCTIONS: dict[str, tuple[Callable, Callable]] = {
    "sin": (lambda x: np.sin(np.pi * x), lambda x: -np.pi**2 * np.sin(np.pi * x)),
    "sin2": (lambda x: np.sin(2 * np.pi * x), lambda x: -4 * np.pi**2 * np.sin(2 * np.pi * x)),
    "affine": (lambda x: 2.0 - 3.0 * x, lambda x: np.zeros_like(x)),
    "cubic": (lambda x: x**3 - x, lambda x: 6.0 * x),
    "exp": (lambda x: np.exp(x), lambda x: np.exp(x)),
}


def truncation_residual(u: Callable, u_xx: Callable, grid: UniformGrid) -> GridFunction:
    """``R(l) = u''(x_l) - (d+ d- u)(l)`` at interior nodes; boundary entries are 0.

    ``u`` is sampled at all nodes including the boundary, so it need not vanish there.
    """
    x = grid.nodes
    sampled = np.asarray(u(x), dtype=complex)
    r = np.zeros(grid.size, dtype=complex)
    r[1:-1] = np.asarray(u_xx(x[1:-1]), dtype=complex) - laplacian_array(sampled, grid.inv_step)[1:-1]
    return GridFunction(grid, r)


def residual_study(function_id: str, n_list: Sequence[int]) -> ResidualReport:
    u, u_xx = ANALYTIC_FUNCTIONS[function_id]
    grids = [UniformGrid(n) for n in n_list]
    res = [norm_linf(truncation_residual(u, u_xx, g)) for g in grids]
    h = [g.step for g in grids]
    order = fit_order(h, res)[0] if len(grids) >= 2 and all(r > 0 for r in res) else None
    return ResidualReport(function_id, list(n_list), h, res, order)


# Strong convergence.


def _sine(x):
    return np.sin(np.pi * np.asarray(x))


def _check_shared(cfgs: Sequence[SchemeConfig]):
    base = cfgs[0]
    for c in cfgs[1:]:
        if (c.dt, c.t_final, c.lam, c.covariance, c.seed) != (base.dt, base.t_final, base.lam, base.covariance, base.seed):
            raise ValueError("all configurations must share dt, T, lambda, covariance and seed")


def convergence_lanes(coarse: Sequence[SchemeConfig], fine: SchemeConfig, initial: Callable, min_refinement: int = 4):
    _check_shared([fine, *coarse])
    finest = max(c.n_interior for c in coarse)
    if (fine.n_interior + 1) < min_refinement * (finest + 1):
        raise ValueError(f"reference grid must be at least {min_refinement}x finer than the finest coarse grid")
    lanes = [Lane(fine, fine.grid.sample(initial))]
    pairs = []
    for c in coarse:
        restriction_factor(fine.grid, c.grid)
        lanes.append(Lane(c, c.grid.sample(initial)))
        pairs.append((0, len(lanes) - 1))
    return lanes, pairs


def run_coupled_ensemble(
    coarse: Sequence[SchemeConfig],
    fine: SchemeConfig,
    n_samples: int,
    initial: Callable | None = None,
    workers: int = 1,
    min_refinement: int = 4,
    chunk_size: int = CHUNK_SIZE,
) -> ConvergenceRecord:
    """Strong error ``sqrt(E[sup_t ||u_ref - u_h||_h^2])`` per coarse grid and its fitted order.

    ``initial`` is a callable of x, ``sin(pi x)`` by default.  Samples that
    blow up are excluded and counted.
    """
    initial = initial or _sine
    lanes, pairs = convergence_lanes(coarse, fine, initial, min_refinement)
    res = run_coupled(lanes, pairs, n_samples, workers, chunk_size)
    keep = ~res.blown
    sup = res.sup_error[:, keep]
    errors, se = rms_error(sup) if keep.any() else (np.zeros(len(coarse)), np.zeros(len(coarse)))
    h = [c.grid.step for c in coarse]
    order = intercept = ci = None
    if len(coarse) >= 3 and np.all(errors > 0):
        order, intercept = fit_order(h, errors)
        ci = bootstrap_slope_ci(h, sup, seed=fine.seed)
    return ConvergenceRecord(
        n_interior=[c.n_interior for c in coarse],
        h=h,
        errors=errors.tolist(),
        stderr=se.tolist(),
        n_samples=int(keep.sum()),
        reference_n=fine.n_interior,
        order=order,
        intercept=intercept,
        order_ci=ci,
        excluded=int(res.blown.sum()),
        max_charge_drift=float(res.charge_drift[:, keep].max()) if keep.any() else 0.0,
        energy_bounds_ok=bool(res.energy_ok[:, keep].all()),
        sup_errors=sup.tolist(),
        config={"coarse": [c.to_dict() for c in coarse], "fine": fine.to_dict(), "samples": n_samples},
    )


def lp_error(record: ConvergenceRecord, p: float) -> np.ndarray:
    """``(E[sup_t ||u_ref - u_h||_h^p])^{1/p}`` per coarse grid from a finished ensemble."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if p == 2:
        # the ensemble's own estimate; recomputing could differ in the last bit
        return np.asarray(record.errors, dtype=float)
    sup = np.asarray(record.sup_errors, dtype=float)
    return np.mean(sup**p, axis=1) ** (1.0 / p)


# Continuous dependence.


def initial_dependence_sweep(
    u0: GridFunction,
    perturbed: Sequence[GridFunction],
    cfg: SchemeConfig,
    n_samples: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
):
    """Coupled runs from ``u0`` and each ``v0``; returns (distances, errors, stderr, excluded)."""
    lanes = [Lane(cfg, u0)] + [Lane(cfg, v) for v in perturbed]
    pairs = [(0, i) for i in range(1, len(lanes))]
    res = run_coupled(lanes, pairs, n_samples, workers, chunk_size)
    keep = ~res.blown
    errors, se = rms_error(res.sup_error[:, keep])
    dist = [float(norm_array(u0.values - v.values, cfg.grid.step)) for v in perturbed]
    return dist, errors, se, int(res.blown.sum()), res.sup_error[:, keep]


def initial_dependence(u0: GridFunction, v0: GridFunction, cfg: SchemeConfig, n_samples: int, workers: int = 1):
    """``(||u0 - v0||_h, sqrt(E[sup_t ||u - v||_h^2]))`` with coupled noise."""
    dist, errors, _, _, _ = initial_dependence_sweep(u0, [v0], cfg, n_samples, workers)
    return dist[0], float(errors[0])


def initial_dependence_study(
    cfg: SchemeConfig,
    deltas: Sequence[float],
    n_samples: int,
    initial: Callable | None = None,
    direction: Callable | None = None,
    workers: int = 1,
) -> ScalingRecord:
    """Perturb ``u0`` by ``delta * direction`` and fit the log-log slope of the output error."""
    initial = initial or _sine
    direction = direction or (lambda x: np.sin(2 * np.pi * x))
    grid = cfg.grid
    u0 = grid.sample(initial)
    shape = grid.sample(direction)
    perturbed = [GridFunction(grid, u0.values + d * shape.values) for d in deltas]
    dist, errors, se, excluded, sup = initial_dependence_sweep(u0, perturbed, cfg, n_samples, workers)
    positive = [i for i, d in enumerate(deltas) if d != 0]
    slope = ci = None
    if len(positive) >= 2:
        sizes = [abs(deltas[i]) for i in positive]
        slope = fit_order(sizes, errors[positive])[0]
        ci = bootstrap_slope_ci(sizes, sup[positive], seed=cfg.seed)
    return ScalingRecord(
        "initial", list(deltas), dist, errors.tolist(), se.tolist(), slope, ci, int(sup.shape[1]), excluded,
        {"scheme": cfg.to_dict(), "samples": n_samples},
    )


def noise_scaling(
    eps_list: Sequence[float],
    cfg: SchemeConfig,
    n_samples: int,
    initial: Callable | None = None,
    workers: int = 1,
) -> ScalingRecord:
    """Deviation ``sqrt(E[sup_t ||u_eps - u_0||_h^2])`` of the noise-scaled solution from the deterministic one."""
    initial = initial or _sine
    u0 = cfg.grid.sample(initial)
    lanes = [Lane(cfg, u0, 0.0)] + [Lane(cfg, u0, float(e)) for e in eps_list]
    pairs = [(0, i) for i in range(1, len(lanes))]
    res = run_coupled(lanes, pairs, n_samples, workers)
    keep = ~res.blown
    sup = res.sup_error[:, keep]
    errors, se = rms_error(sup)
    positive = [i for i, e in enumerate(eps_list) if e != 0]
    slope = ci = None
    if len(positive) >= 2:
        sizes = [abs(eps_list[i]) for i in positive]
        slope = fit_order(sizes, errors[positive])[0]
        ci = bootstrap_slope_ci(sizes, sup[positive], seed=cfg.seed)
    return ScalingRecord(
        "noise", list(eps_list), [abs(e) for e in eps_list], errors.tolist(), se.tolist(), slope, ci,
        int(sup.shape[1]), int(res.blown.sum()), {"scheme": cfg.to_dict(), "samples": n_samples},
    )


# Exponential moments.


def exp_moment_probe(
    cfg: SchemeConfig,
    n_samples: int,
    initial: Callable | None = None,
    q_values: Sequence[float] = (1, 2),
    workers: int = 1,
) -> dict:
    """``E[exp(q int_0^T ||u0||_h ||d+ u(r)||_h dr)]^{1/q}`` for each ``q``, accumulated in log space."""
    initial = initial or _sine
    u0 = cfg.grid.sample(initial)
    res = run_coupled([Lane(cfg, u0)], [], n_samples, workers)
    integral = res.exp_integral[0, ~res.blown]
    out = {}
    for q in q_values:
        a = q * integral
        amax = a.max()
        log_mean = amax + math.log(np.mean(np.exp(a - amax)))
        out[q] = math.exp(log_mean / q)
    return out


def reference_scheme(n_interior: int = 511, seed: int = 20240607, **overrides) -> SchemeConfig:
    """Defocusing reference setup: T = 0.5, dt = 1e-4, K = 16, q_k = k^-12, cosine modes."""
    params = dict(
        n_interior=n_interior,
        dt=1e-4,
        t_final=0.5,
        lam=-1,
        covariance=SpectralCovariance.power_law(16, 12.0, basis_kind=COSINE),
        seed=seed,
    )
    params.update(overrides)
    return SchemeConfig(**params)


__all__ = [
    "BlowUp",
    "FixedPointDiverged",
    "ConvergenceRecord",
    "Lane",
    "ResidualReport",
    "ScalingRecord",
    "exp_moment_probe",
    "fit_order",
    "initial_dependence",
    "initial_dependence_study",
    "lp_error",
    "noise_scaling",
    "reference_scheme",
    "residual_study",
    "run_coupled",
    "run_coupled_ensemble",
    "simulate_chunk",
    "truncation_residual",
]
