"""Monitored scalar quantities: charge, discrete energy, Lyapunov proxy, seminorms."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .grid import (
    GridFunction,
    forward_diff_array,
    inner_array,
    laplacian_array,
    norm_array,
    norm_h,
    norm_linf,
)

MAX_SEMINORM_ORDER = 5
ENERGY_SLACK = 1e-10


@dataclass(frozen=True)
class FunctionalReport:
    time: float
    charge: float
    energy_h: float
    lyapunov_2: float
    h1_seminorm: float
    linf: float
    gn_slack: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name if f.name != "time" else "t" for f in fields(cls)]

    def row(self) -> tuple[float, ...]:
        return astuple(self)


def charge(u: GridFunction) -> float:
    """Discrete mass ``||u||_h^2``."""
    return norm_h(u) ** 2


def _energy_parts(values: np.ndarray, inv_h: int):
    h = 1.0 / inv_h
    grad2 = norm_array(forward_diff_array(values, inv_h), h) ** 2
    quartic = h * np.sum(np.abs(values) ** 4, axis=-1)
    mass = norm_array(values, h) ** 2
    return grad2, quartic, mass


def energy_array(values: np.ndarray, inv_h: int, lam: float) -> np.ndarray:
    grad2, quartic, _ = _energy_parts(values, inv_h)
    return 0.5 * grad2 - 0.25 * lam * quartic


def energy_h(u: GridFunction, lam: float) -> float:
    """``U^h(u) = 1/2 ||d+ u||_h^2 - lam/4 ||u||_{l4h}^4``."""
    return float(energy_array(u.values, u.grid.inv_step, lam))


def energy_bounds_array(values: np.ndarray, inv_h: int, lam: float, slack: float = ENERGY_SLACK) -> np.ndarray:
    """Vectorized sandwich ``g/4 - m^3/4 <= U^h <= 3g/4 + m^3/4`` (g = grad2, m = mass)."""
    grad2, quartic, mass = _energy_parts(values, inv_h)
    energy = 0.5 * grad2 - 0.25 * lam * quartic
    lower = 0.25 * grad2 - 0.25 * mass**3
    upper = 0.75 * grad2 + 0.25 * mass**3
    return (lower <= energy + slack) & (energy <= upper + slack)


def energy_bounds_check(u: GridFunction, lam: float = 1.0) -> bool:
    """Check the two-sided bound of the discrete energy by the H^1 seminorm and the charge.

    The bound holds for either sign of ``lam``; both are the caller's choice.
    """
    return bool(energy_bounds_array(u.values, u.grid.inv_step, lam))


def alternating_difference_array(values: np.ndarray, inv_h: int, m: int) -> np.ndarray:
    """``L^j u`` for ``m = 2j`` and ``d+ L^j u`` for ``m = 2j + 1``, with ``L = d+ d-``."""
    out = values
    for _ in range(m // 2):
        out = laplacian_array(out, inv_h)
    if m % 2:
        out = forward_diff_array(out, inv_h)
    return out


def _check_order(u: GridFunction, m: int) -> None:
    if m < 0 or m > MAX_SEMINORM_ORDER:
        raise ValueError(f"order must be in 0..{MAX_SEMINORM_ORDER}, got {m}")
    if u.grid.n_interior < m:
        raise ValueError(f"grid with N={u.grid.n_interior} too small for order {m}")


def sobolev_seminorm_h(u: GridFunction, m: int) -> float:
    _check_order(u, m)
    return float(norm_array(alternating_difference_array(u.values, u.grid.inv_step, m), u.grid.step))


def lyapunov_array(values: np.ndarray, inv_h: int, lam: float, s: int = 2) -> np.ndarray:
    h = 1.0 / inv_h
    top = norm_array(alternating_difference_array(values, inv_h, s), h) ** 2
    neg_lap = values
    for _ in range(s - 1):
        neg_lap = -laplacian_array(neg_lap, inv_h)
    cubic = np.abs(values) ** 2 * values
    return top - lam * inner_array(neg_lap, cubic, h)


def lyapunov_f(u: GridFunction, lam: float, s: int = 2) -> float:
    """Discrete proxy ``||D^s u||_h^2 - lam <(-L)^{s-1} u, |u|^2 u>_h`` (diagnostic only)."""
    if s < 2:
        raise ValueError("the Lyapunov functional is defined for s >= 2")
    _check_order(u, s)
    return float(lyapunov_array(u.values, u.grid.inv_step, lam, s))


def gn_slack_array(values: np.ndarray, inv_h: int) -> np.ndarray:
    """``2 ||f||_h ||d+ f||_h - ||f||_inf^2``; nonnegative for dirichlet ``f``."""
    h = 1.0 / inv_h
    rhs = 2.0 * norm_array(values, h) * norm_array(forward_diff_array(values, inv_h), h)
    return rhs - np.max(np.abs(values), axis=-1) ** 2


def gn_slack(u: GridFunction) -> float:
    return float(gn_slack_array(u.values, u.grid.inv_step))


def report(u: GridFunction, t: float, lam: float) -> FunctionalReport:
    inv_h = u.grid.inv_step
    lyap = float(lyapunov_array(u.values, inv_h, lam, 2)) if u.grid.n_interior >= 2 else float("nan")
    return FunctionalReport(
        time=float(t),
        charge=charge(u),
        energy_h=energy_h(u, lam),
        lyapunov_2=lyap,
        h1_seminorm=float(norm_array(forward_diff_array(u.values, inv_h), u.grid.step)),
        linf=norm_linf(u),
        gn_slack=gn_slack(u),
    )
