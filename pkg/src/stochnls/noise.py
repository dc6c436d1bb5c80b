"""Q-Wiener increments in a trigonometric eigenbasis.

The covariance is diagonal in an orthonormal basis of L^2(0, 1), so
``Q^{1/2} e_k = sqrt(q_k) e_k`` and every derived quantity has a closed form.
Two bases are available:

* ``sine``: ``e_k(x) = sqrt(2) sin(k pi x)``, vanishing at both ends;
* ``cosine``: ``e_1 = 1``, ``e_k(x) = sqrt(2) cos((k - 1) pi x)``.

Cosine modes have vanishing odd derivatives at the boundary, so ``u e_k``
keeps the compatibility conditions of a smooth Dirichlet solution.  Sine
modes do not (``(u e_k)''`` is nonzero at x = 0), which caps the spatial
regularity of the solution and the observed convergence rate.

Gaussian draws come from counter-based Philox streams keyed by
``(seed, sample, step)``; mode ``k`` is the ``k``-th draw of its stream, so a
run with more modes extends rather than reshuffles the draws of a run with
fewer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import GridFunction, UniformGrid, format_float

SINE = "sine"
COSINE = "cosine"
BASES = (SINE, COSINE)

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SpectralCovariance:
    """Eigenvalues ``q_1..q_K`` of Q in the chosen trigonometric basis.

    ``decay_exponent`` records how the spectrum was generated
    (``q_k = k**-r``); it is ``None`` for an explicit eigenvalue list.
    """

    eigenvalues: tuple[float, ...]
    decay_exponent: float | None = None
    basis_kind: str = SINE

    def __post_init__(self):
        eig = tuple(float(q) for q in self.eigenvalues)
        if any(not np.isfinite(q) or q < 0 for q in eig):
            raise ValueError("covariance eigenvalues must be finite and nonnegative")
        if self.basis_kind not in BASES:
            raise ValueError(f"unsupported basis kind {self.basis_kind!r}")
        object.__setattr__(self, "eigenvalues", eig)

    @classmethod
    def power_law(
        cls, truncation: int, decay_exponent: float, scale: float = 1.0, basis_kind: str = SINE
    ) -> SpectralCovariance:
        """``q_k = scale * k**(-decay_exponent)`` for ``k = 1..truncation``."""
        if truncation < 0:
            raise ValueError("truncation must be nonnegative")
        k = np.arange(1, truncation + 1, dtype=float)
        return cls(tuple(scale * k ** (-float(decay_exponent))), float(decay_exponent), basis_kind)

    @classmethod
    def zero(cls, basis_kind: str = SINE) -> SpectralCovariance:
        return cls((), None, basis_kind)

    @property
    def truncation(self) -> int:
        return len(self.eigenvalues)

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=float)

    def scaled(self, eps: float) -> SpectralCovariance:
        """Covariance of ``eps * W``."""
        return SpectralCovariance(tuple(eps * eps * q for q in self.eigenvalues), self.decay_exponent, self.basis_kind)

    def admissible(self, s: int) -> bool:
        """Whether the generating power law makes ``Q^{1/2}`` Hilbert-Schmidt into H^s untruncated."""
        if self.decay_exponent is None:
            return True
        return self.decay_exponent > 2 * s + 1

    def to_dict(self) -> dict:
        if self.decay_exponent is not None:
            return {"kind": self.basis_kind, "K": self.truncation, "decay_exponent": self.decay_exponent}
        return {"kind": self.basis_kind, "K": self.truncation, "eigenvalues": list(self.eigenvalues)}

    def wavenumbers(self) -> np.ndarray:
        """Frequency ``k`` (sine) or ``k - 1`` (cosine) of each mode, as multiples of pi."""
        k = np.arange(1, self.truncation + 1, dtype=float)
        return k if self.basis_kind == SINE else k - 1


@dataclass(frozen=True)
class NoiseIncrement:
    """Real grid values of ``W(t + dt) - W(t)`` plus the draws that produced them."""

    values: GridFunction
    dt: float
    xi: np.ndarray


def sine_basis(truncation: int, nodes: np.ndarray) -> np.ndarray:
    """``e_k(x_l)`` as a ``(K, len(nodes))`` array, exact zeros at x = 0 and 1."""
    k = np.arange(1, truncation + 1)
    basis = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, nodes))
    basis[:, 0] = 0.0
    if nodes.size and nodes[-1] == 1.0:
        basis[:, -1] = 0.0
    return basis


def cosine_basis(truncation: int, nodes: np.ndarray) -> np.ndarray:
    """``e_1 = 1`` and ``e_k(x_l) = sqrt(2) cos((k - 1) pi x_l)``, shape ``(K, len(nodes))``."""
    k = np.arange(truncation)
    basis = np.sqrt(2.0) * np.cos(np.pi * np.outer(k, nodes))
    if truncation:
        basis[0] = 1.0
    return basis


def basis_values(cov: SpectralCovariance, nodes: np.ndarray) -> np.ndarray:
    if cov.basis_kind == SINE:
        return sine_basis(cov.truncation, nodes)
    return cosine_basis(cov.truncation, nodes)


def noise_matrix(cov: SpectralCovariance, grid: UniformGrid) -> np.ndarray:
    """Rows ``sqrt(q_k) e_k(x_l)``: a draw vector ``xi`` maps to ``sqrt(dt) * xi @ M``."""
    return np.sqrt(cov.q)[:, None] * basis_values(cov, grid.nodes)


def fork_stream(seed: int, sample_index: int, step_index: int) -> np.random.Generator:
    """Deterministic Gaussian source for one (sample, step) cell.

    Philox is keyed by ``(seed, sample)`` and the step index occupies the third
    counter word, so cells never overlap and can be opened in any order.
    """
    bitgen = np.random.Philox(
        key=[int(seed) & _SEED_MASK, int(sample_index) & _SEED_MASK],
        counter=[0, 0, int(step_index) & _SEED_MASK, 0],
    )
    return np.random.Generator(bitgen)


def draw_xi(seed: int, sample_index: int, step_index: int, truncation: int) -> np.ndarray:
    return fork_stream(seed, sample_index, step_index).standard_normal(truncation)


def draw_xi_block(seed: int, samples: Sequence[int], step_index: int, truncation: int) -> np.ndarray:
    """Draws for several samples at one step, shape ``(len(samples), K)``."""
    out = np.empty((len(samples), truncation))
    for row, m in enumerate(samples):
        out[row] = draw_xi(seed, m, step_index, truncation)
    return out


def increment_from_xi(cov: SpectralCovariance, grid: UniformGrid, dt: float, xi: np.ndarray) -> NoiseIncrement:
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (cov.truncation,):
        raise ValueError(f"expected {cov.truncation} draws, got shape {xi.shape}")
    values = np.sqrt(dt) * (xi @ noise_matrix(cov, grid))
    return NoiseIncrement(GridFunction(grid, values.astype(complex), dirichlet=cov.basis_kind == SINE), dt, xi)


def sample_increment(cov: SpectralCovariance, grid: UniformGrid, dt: float, rng: np.random.Generator) -> NoiseIncrement:
    """``dW(x_l) = sum_k sqrt(q_k) e_k(x_l) sqrt(dt) xi_k`` with fresh draws from ``rng``."""
    return increment_from_xi(cov, grid, dt, rng.standard_normal(cov.truncation))


def evaluate_fq(cov: SpectralCovariance, grid: UniformGrid) -> GridFunction:
    """``F_Q(x_l) = sum_k q_k e_k(x_l)^2``."""
    basis = basis_values(cov, grid.nodes)
    return GridFunction(grid, (cov.q @ basis**2).astype(complex), dirichlet=cov.basis_kind == SINE)


def hs_norm(cov: SpectralCovariance, s: int) -> float:
    """Hilbert-Schmidt norm of ``Q^{1/2}`` into H^s.

    Uses ``||e_k||_{H^s}^2 = sum_{j=0}^{s} (k pi)^{2j}`` with ``k`` the mode's
    wavenumber.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    k = cov.wavenumbers()
    weights = sum((k * np.pi) ** (2 * j) for j in range(s + 1)) if cov.truncation else np.zeros(0)
    return float(np.sqrt(np.sum(cov.q * weights)))


def covariance_matrix(cov: SpectralCovariance, grid: UniformGrid, dt: float) -> np.ndarray:
    """Closed-form ``E[dW(x_l) dW(x_m)] = dt sum_k q_k e_k(x_l) e_k(x_m)``."""
    basis = basis_values(cov, grid.nodes)
    return dt * (basis.T * cov.q) @ basis


def write_noise_path_csv(path: str | Path, seed: int, sample_index: int, n_steps: int, truncation: int, header=None) -> None:
    """Audit dump of the draws ``(step, k, xi_k)`` for one sample path."""
    with open(path, "w", newline="") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "k", "xi"])
        for n in range(n_steps):
            for k, x in enumerate(draw_xi(seed, sample_index, n, truncation), start=1):
                writer.writerow([n, k, format_float(x)])
