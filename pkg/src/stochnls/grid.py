"""Uniform mesh on (0, 1), difference operators and discrete norms.

Grid functions carry all ``N + 2`` nodes, boundary included, so sums over
``l = 0..N+1`` can be written literally.  Every operator also accepts a
stacked array of shape ``(..., N + 2)`` through the ``*_array`` helpers,
which is what the vectorized ensemble code uses.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


class GridMismatchError(ValueError):
    """Two grid functions (or a function and a grid) are not compatible."""


@dataclass(frozen=True)
class UniformGrid:
    """Uniform partition ``x_l = l h`` of [0, 1] with ``h = 1 / (N + 1)``."""

    n_interior: int

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 1:
            raise ValueError(f"n_interior must be a positive integer, got {self.n_interior!r}")
        object.__setattr__(self, "n_interior", int(self.n_interior))

    @property
    def step(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def inv_step(self) -> int:
        return self.n_interior + 1

    @property
    def size(self) -> int:
        return self.n_interior + 2

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.size) / (self.n_interior + 1)

    @property
    def interior(self) -> slice:
        return slice(1, self.n_interior + 1)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.size, dtype=complex))

    def sample(self, func, dirichlet: bool = True) -> "GridFunction":
        """Evaluate ``func`` at the nodes; boundary values are zeroed when ``dirichlet``."""
        values = np.asarray(func(self.nodes), dtype=complex) * np.ones(self.size)
        if dirichlet:
            values[0] = values[-1] = 0.0
        return GridFunction(self, values, dirichlet=dirichlet)


@dataclass(frozen=True)
class GridFunction:
    """Complex values on the ``N + 2`` nodes of a :class:`UniformGrid`."""

    grid: UniformGrid
    values: np.ndarray
    dirichlet: bool = field(default=True)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.size,):
            raise GridMismatchError(
                f"expected {self.grid.size} values for N={self.grid.n_interior}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        if self.dirichlet and (values[0] != 0 or values[-1] != 0):
            raise ValueError("dirichlet grid function must vanish at both boundary nodes")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __add__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values, self.dirichlet and other.dirichlet)

    def __sub__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values, self.dirichlet and other.dirichlet)

    def scale(self, factor: complex) -> GridFunction:
        return GridFunction(self.grid, factor * self.values, self.dirichlet)


def _check_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(
            f"grid functions live on different grids (N={f.grid.n_interior} vs N={g.grid.n_interior})"
        )


# Array kernels; last axis is the node index.


def forward_diff_array(values: np.ndarray, inv_h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[..., :-1] = (values[..., 1:] - values[..., :-1]) * inv_h
    return out


def backward_diff_array(values: np.ndarray, inv_h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[..., 1:] = (values[..., 1:] - values[..., :-1]) * inv_h
    return out


def laplacian_array(values: np.ndarray, inv_h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[..., 1:-1] = (values[..., 2:] - 2.0 * values[..., 1:-1] + values[..., :-2]) * (inv_h * inv_h)
    return out


def inner_array(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    return h * np.sum((np.conj(f) * g).real, axis=-1)


def norm_array(f: np.ndarray, h: float) -> np.ndarray:
    return np.sqrt(h * np.sum(f.real**2 + f.imag**2, axis=-1))


# GridFunction operations.


def forward_diff(f: GridFunction) -> GridFunction:
    """``(f(l+1) - f(l)) / h`` for ``l = 0..N``; node ``N+1`` holds 0."""
    return GridFunction(f.grid, forward_diff_array(f.values, f.grid.inv_step), dirichlet=False)


def backward_diff(f: GridFunction) -> GridFunction:
    """``(f(l) - f(l-1)) / h`` for ``l = 1..N+1``; node 0 holds 0."""
    return GridFunction(f.grid, backward_diff_array(f.values, f.grid.inv_step), dirichlet=False)


def discrete_laplacian(f: GridFunction) -> GridFunction:
    """Central second difference at interior nodes, zero on the boundary."""
    return GridFunction(f.grid, laplacian_array(f.values, f.grid.inv_step), dirichlet=True)


def inner_h(f: GridFunction, g: GridFunction) -> float:
    """``h * sum_l Re[conj(f(l)) g(l)]`` over all ``N + 2`` nodes."""
    _check_same_grid(f, g)
    return float(inner_array(f.values, g.values, f.grid.step))


def norm_h(f: GridFunction) -> float:
    return float(norm_array(f.values, f.grid.step))


def norm_l4h(f: GridFunction) -> float:
    return float((f.grid.step * np.sum(np.abs(f.values) ** 4)) ** 0.25)


def norm_linf(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def restriction_factor(fine: UniformGrid, coarse: UniformGrid) -> int:
    """Stride between coinciding nodes; raises when the grids are not nested."""
    ratio, rem = divmod(fine.n_interior + 1, coarse.n_interior + 1)
    if rem or ratio < 1:
        raise GridMismatchError(
            f"N_fine+1={fine.n_interior + 1} is not a multiple of N_coarse+1={coarse.n_interior + 1}"
        )
    return ratio


def restrict_array(values: np.ndarray, stride: int) -> np.ndarray:
    return values[..., ::stride]


def restrict(fine: GridFunction, coarse: UniformGrid) -> GridFunction:
    """Injection onto a nested coarse grid: coarse node ``l`` is fine node ``stride * l``."""
    stride = restriction_factor(fine.grid, coarse)
    return GridFunction(coarse, restrict_array(fine.values, stride), fine.dirichlet)


# Serialization: flat record N, h, then (re, im) for every node.


def to_record(f: GridFunction) -> np.ndarray:
    record = np.empty(2 + 2 * f.grid.size)
    record[0] = f.grid.n_interior
    record[1] = f.grid.step
    record[2::2] = f.values.real
    record[3::2] = f.values.imag
    return record


def from_record(record: Iterable[float], dirichlet: bool = False) -> GridFunction:
    record = np.asarray(list(record), dtype=float)
    n = int(record[0])
    grid = UniformGrid(n)
    if record.size != 2 + 2 * grid.size:
        raise GridMismatchError(f"record length {record.size} does not match N={n}")
    if record[1] != grid.step:
        raise GridMismatchError(f"record step {record[1]!r} does not match 1/(N+1)")
    values = record[2::2] + 1j * record[3::2]
    return GridFunction(grid, values, dirichlet=dirichlet)


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_records_csv(path: str | Path, functions: Iterable[GridFunction], prefix_rows=None, header=None) -> None:
    """One CSV row per grid function; optional leading columns from ``prefix_rows``."""
    with open(path, "w", newline="") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        prefixes = iter(prefix_rows) if prefix_rows is not None else None
        for f in functions:
            lead = [str(v) for v in next(prefixes)] if prefixes is not None else []
            writer.writerow(lead + [format_float(v) for v in to_record(f)])


def read_records_csv(path: str | Path, n_prefix: int = 0) -> list[GridFunction]:
    out = []
    with open(path, newline="") as fh:
        rows = (row for row in csv.reader(line for line in fh if not line.startswith("#")) if row)
        for row in rows:
            out.append(from_record(float(v) for v in row[n_prefix:]))
    return out


def write_records_binary(path: str | Path, functions: Iterable[GridFunction]) -> None:
    """Concatenated little-endian float64 records."""
    with open(path, "wb") as fh:
        for f in functions:
            fh.write(to_record(f).astype("<f8").tobytes())


def read_records_binary(path: str | Path) -> list[GridFunction]:
    data = Path(path).read_bytes()
    out = []
    pos = 0
    while pos < len(data):
        (n,) = struct.unpack_from("<d", data, pos)
        length = 2 + 2 * (int(n) + 2)
        record = np.frombuffer(data, dtype="<f8", count=length, offset=pos)
        out.append(from_record(record))
        pos += 8 * length
    return out
