"""Central difference semi-discretization and its charge-conserving time stepper.

The spatial system is

    du = (i L u + i lam |u|^2 u - F_Q u / 2) dt - i u dW,     L = d+ d-,

written in Ito form.  Time stepping uses the stochastic implicit midpoint rule
on the equivalent Stratonovich form,

    u+ = u + dt (i L + i lam |m|^2) m - i m dW,     m = (u + u+) / 2,

which conserves the discrete charge exactly for real increments.  The linear
part ``(I - i dt L / 2)`` is factored once per grid (complex tridiagonal LU)
and only the cubic and noise terms are iterated, so the iteration contracts
independently of ``dt / h^2``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from . import functionals
from .grid import GridFunction, UniformGrid, laplacian_array, write_records_binary, write_records_csv
from .noise import SpectralCovariance, draw_xi, noise_matrix, evaluate_fq


class SchemeError(RuntimeError):
    """Base class for failures while advancing a trajectory."""

    def __init__(self, message: str, t: float | None = None, state: "TrajectoryState | None" = None):
        super().__init__(message if t is None else f"{message} (t={t:.17g})")
        self.t = t
        self.state = state


class FixedPointDiverged(SchemeError):
    """The midpoint fixed-point iteration did not reach ``fp_tol``."""


class BlowUp(SchemeError):
    """The sup norm exceeded ``blowup_threshold``; ``state`` holds the trajectory so far."""


@dataclass(frozen=True)
class SchemeConfig:
    n_interior: int
    dt: float
    t_final: float
    lam: int = -1
    covariance: SpectralCovariance = field(default_factory=SpectralCovariance.zero)
    seed: int = 0
    fp_tol: float = 1e-12
    fp_max_iter: int = 100
    fp_damping: float = 1.0
    blowup_threshold: float = 1e6

    def __post_init__(self):
        UniformGrid(self.n_interior)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.t_final > 0 and self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if self.lam not in (1, -1):
            raise ValueError("lambda must be +1 (focusing) or -1 (defocusing)")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be at least 1")
        if not 0 < self.fp_damping <= 1:
            raise ValueError("fp_damping must lie in (0, 1]")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")

    @property
    def grid(self) -> UniformGrid:
        return UniformGrid(self.n_interior)

    @property
    def time_steps(self) -> list[float]:
        """Step sizes: ``dt`` repeated, plus a shorter last step if ``T / dt`` is not integral."""
        ratio = self.t_final / self.dt
        n = int(round(ratio))
        if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
            return [self.dt] * n
        n = int(math.floor(ratio))
        return [self.dt] * n + [self.t_final - n * self.dt]

    @property
    def n_steps(self) -> int:
        return len(self.time_steps)

    def with_grid(self, n_interior: int) -> SchemeConfig:
        return replace(self, n_interior=n_interior)

    def to_dict(self) -> dict:
        return {
            "n_interior": self.n_interior,
            "dt": self.dt,
            "t_final": self.t_final,
            "lambda": self.lam,
            "covariance": self.covariance.to_dict(),
            "seed": self.seed,
            "fp_tol": self.fp_tol,
            "fp_max_iter": self.fp_max_iter,
            "fp_damping": self.fp_damping,
            "blowup_threshold": self.blowup_threshold,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TrajectoryState:
    t: float
    u: GridFunction
    step_index: int = 0
    reports: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    @property
    def max_charge_drift(self) -> float:
        """``max_t |charge(t) - charge(0)| / charge(0)`` over recorded reports."""
        if not self.reports or self.reports[0].charge == 0:
            return 0.0
        c0 = self.reports[0].charge
        return max(abs(r.charge - c0) for r in self.reports) / c0

    @property
    def sup_linf(self) -> float:
        return max((r.linf for r in self.reports), default=functionals.norm_linf(self.u))

    @property
    def sup_h1(self) -> float:
        return max((r.h1_seminorm for r in self.reports), default=0.0)


class MidpointStepper:
    """Batched implicit midpoint steps for one (grid, dt, lam) triple.

    ``u`` and ``dW`` are arrays of shape ``(B, N + 2)``.  Rows are iterated to
    convergence independently: a converged row is frozen, so its result does
    not depend on which other rows share the batch.
    """

    def __init__(self, grid: UniformGrid, dt: float, lam: float, fp_tol=1e-12, fp_max_iter=100, fp_damping=1.0):
        self.grid = grid
        self.dt = float(dt)
        self.lam = float(lam)
        self.fp_tol = fp_tol
        self.fp_max_iter = fp_max_iter
        self.fp_damping = fp_damping
        n = grid.n_interior
        c = 0.5j * self.dt * grid.inv_step**2
        diag = np.full(n, 1.0 + 2.0 * c, dtype=complex)
        off = np.full(max(n - 1, 0), -c, dtype=complex)
        dl, d, du, du2, ipiv, info = lapack.zgttrf(off, diag, off.copy())
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal factorization failed (info={info})")
        self._lu = (dl, d, du, du2, ipiv)
        self.last_iterations = np.zeros(0, dtype=int)

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        # rhs: (B, N + 2); solves on interior columns, boundary stays 0.
        out = np.zeros_like(rhs)
        x, info = lapack.zgttrs(*self._lu, rhs[:, 1:-1].T)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
        out[:, 1:-1] = x.T
        return out

    def step(self, u: np.ndarray, dw: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        dw = np.asarray(dw, dtype=float)
        explicit = u + (0.5j * self.dt) * laplacian_array(u, self.grid.inv_step)
        v = u.copy()
        iterations = np.zeros(u.shape[0], dtype=int)
        active = np.arange(u.shape[0])
        omega = self.fp_damping
        for it in range(1, self.fp_max_iter + 1):
            ua, va, dwa = u[active], v[active], dw[active]
            mid = 0.5 * (ua + va)
            rhs = explicit[active] + (1j * self.dt * self.lam) * (np.abs(mid) ** 2) * mid - 1j * mid * dwa
            new = self._solve(rhs)
            if omega != 1.0:
                new = (1.0 - omega) * va + omega * new
            change = np.max(np.abs(new - va), axis=1)
            scale = np.maximum(1.0, np.max(np.abs(new), axis=1))
            if not np.all(np.isfinite(change)):
                bad = active[~np.isfinite(change)]
                raise FixedPointDiverged(f"non-finite midpoint iterate in rows {bad.tolist()}")
            v[active] = new
            iterations[active] = it
            done = change <= self.fp_tol * scale
            active = active[~done]
            if active.size == 0:
                self.last_iterations = iterations
                return v
        self.last_iterations = iterations
        raise FixedPointDiverged(
            f"midpoint iteration exceeded {self.fp_max_iter} iterations in rows {active.tolist()}"
        )


@lru_cache(maxsize=64)
def _cached_stepper(n_interior, dt, lam, fp_tol, fp_max_iter, fp_damping) -> MidpointStepper:
    return MidpointStepper(UniformGrid(n_interior), dt, lam, fp_tol, fp_max_iter, fp_damping)


def stepper_for(cfg: SchemeConfig, dt: float | None = None) -> MidpointStepper:
    return _cached_stepper(
        cfg.n_interior, cfg.dt if dt is None else float(dt), cfg.lam, cfg.fp_tol, cfg.fp_max_iter, cfg.fp_damping
    )


def drift(u: GridFunction, lam: float, f_q: GridFunction) -> GridFunction:
    """Ito drift ``i L u + i lam |u|^2 u - F_Q u / 2`` at interior nodes."""
    vals = u.values
    out = 1j * laplacian_array(vals, u.grid.inv_step) + 1j * lam * np.abs(vals) ** 2 * vals - 0.5 * f_q.values.real * vals
    out[0] = out[-1] = 0.0
    return GridFunction(u.grid, out)


class NoiseSource:
    """Forkable per-sample draw source: ``xi(step)`` is fixed by ``(seed, sample, step)``."""

    def __init__(self, seed: int, sample_index: int = 0):
        self.seed = int(seed)
        self.sample_index = int(sample_index)

    def xi(self, step_index: int, truncation: int) -> np.ndarray:
        return draw_xi(self.seed, self.sample_index, step_index, truncation)

    def fork(self, sample_index: int) -> NoiseSource:
        return NoiseSource(self.seed, sample_index)


def _check_state(state: TrajectoryState, cfg: SchemeConfig) -> None:
    if state.u.grid != cfg.grid:
        raise ValueError("state grid does not match the configuration")
    if state.u.values[0] != 0 or state.u.values[-1] != 0:
        raise ValueError("trajectory state must satisfy homogeneous Dirichlet conditions")


def step(state: TrajectoryState, cfg: SchemeConfig, increment) -> TrajectoryState:
    """Advance one midpoint step with a given :class:`~stochnls.noise.NoiseIncrement`."""
    _check_state(state, cfg)
    if increment.values.grid != cfg.grid:
        raise ValueError("increment grid does not match the configuration")
    stepper = stepper_for(cfg, increment.dt)
    new = stepper.step(state.u.values[None, :], increment.values.values.real[None, :])[0]
    t_new = state.t + increment.dt
    result = TrajectoryState(t_new, GridFunction(cfg.grid, new), state.step_index + 1, list(state.reports), list(state.snapshots))
    if np.max(np.abs(new)) > cfg.blowup_threshold:
        raise BlowUp("sup norm exceeded blow-up threshold", t_new, result)
    return result


def evolve(
    cfg: SchemeConfig,
    initial: GridFunction,
    noise_source: NoiseSource | None = None,
    report_every: int = 1,
    snapshot_every: int | None = None,
) -> TrajectoryState:
    """Integrate from ``t = 0`` to ``cfg.t_final``.

    Functional reports are recorded every ``report_every`` steps (and at the
    final time); snapshots of ``u`` every ``snapshot_every`` steps.  On
    :class:`BlowUp` or :class:`FixedPointDiverged` the exception carries the
    trajectory up to the last successful step.
    """
    _check_state(TrajectoryState(0.0, initial), cfg)
    source = noise_source if noise_source is not None else NoiseSource(cfg.seed)
    grid = cfg.grid
    basis = noise_matrix(cfg.covariance, grid)
    state = TrajectoryState(0.0, initial)
    state.reports.append(functionals.report(initial, 0.0, cfg.lam))
    if snapshot_every:
        state.snapshots.append((0, 0.0, initial))
    u = initial.values.copy()
    t = 0.0
    steps = cfg.time_steps
    for n, dt in enumerate(steps):
        stepper = stepper_for(cfg, dt)
        dw = math.sqrt(dt) * (source.xi(n, cfg.covariance.truncation) @ basis)
        try:
            new = stepper.step(u[None, :], dw[None, :])[0]
        except FixedPointDiverged as exc:
            state.t, state.u, state.step_index = t, GridFunction(grid, u), n
            raise FixedPointDiverged(str(exc), t, state) from exc
        t = (n + 1) * cfg.dt if dt == cfg.dt else cfg.t_final
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > cfg.blowup_threshold:
            raise BlowUp("sup norm exceeded blow-up threshold", t, state)
        u = new
        current = GridFunction(grid, u)
        last = n == len(steps) - 1
        if (n + 1) % report_every == 0 or last:
            state.reports.append(functionals.report(current, t, cfg.lam))
        if snapshot_every and ((n + 1) % snapshot_every == 0 or last):
            state.snapshots.append((n + 1, t, current))
        state.t, state.u, state.step_index = t, current, n + 1
    return state


# Built-in initial profiles.  Each returns a callable of x on [0, 1].


def sine_profile(mode: int = 1, amplitude: complex = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: amplitude * np.sin(mode * np.pi * np.asarray(x))


def sech_profile(amplitude: float = 1.0, width: float = 0.1, center: float = 0.5) -> Callable[[np.ndarray], np.ndarray]:
    """``amplitude * sech((x - center) / width)``; boundary values are zeroed on sampling."""
    return lambda x: amplitude / np.cosh((np.asarray(x) - center) / width)


def parse_profile(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """``"sin"``, ``"sin:MODE:AMP"``, ``"sech:AMP:WIDTH[:CENTER]"`` or ``"zero"``."""
    name, *args = text.strip().split(":")
    values = [float(a) for a in args]
    if name == "sin":
        mode = int(values[0]) if values else 1
        amp = values[1] if len(values) > 1 else 1.0
        return sine_profile(mode, amp)
    if name == "sech":
        return sech_profile(*values)
    if name == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    raise ValueError(f"unknown initial profile {text!r}")


def write_trajectory(path: str | Path, cfg: SchemeConfig, snapshots: Sequence, fmt: str = "csv", manifest_lines=()) -> None:
    """Checkpoint: header (config hash, N, dt, lambda, K, seed) then one record per snapshot."""
    header = [
        f"cfg_hash={cfg.digest()}",
        f"N={cfg.n_interior}",
        f"dt={cfg.dt:.17g}",
        f"lambda={cfg.lam}",
        f"K={cfg.covariance.truncation}",
        f"seed={cfg.seed}",
        *manifest_lines,
    ]
    if fmt == "csv":
        write_records_csv(
            path,
            [s[2] for s in snapshots],
            prefix_rows=[(s[0], f"{s[1]:.17g}") for s in snapshots],
            header=header + ["columns=step,t,N,h,re_0,im_0,...,re_N+1,im_N+1"],
        )
    elif fmt == "bin":
        write_records_binary(path, [s[2] for s in snapshots])
        Path(str(path) + ".header").write_text("\n".join(header) + "\n")
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")


def fq_values(cfg: SchemeConfig) -> np.ndarray:
    return evaluate_fq(cfg.covariance, cfg.grid).values.real
