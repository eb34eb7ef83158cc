"""Periodic pseudospectral grids on [0, L)^d and exact Fourier calculus.

Conventions used throughout the package:

* forward FFT is unnormalized, the inverse carries the 1/n^dim factor
  (numpy/pocketfft convention);
* wavenumbers per axis are k = (2*pi/L) * {-n/2, ..., n/2 - 1};
* odd derivatives zero the unpaired Nyquist mode so that real fields stay
  real; even derivatives keep it (the multiplier is real there);
* the quadrature weight is h^dim with h = L/n, so inner(f, g) approximates
  the integral over the box and mean(f) is the plain average.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as _sfft

__all__ = [
    "GridSpec",
    "Field",
    "SpectralField",
    "transform",
    "inverse",
    "derivative",
    "dealias",
    "mean_and_inner",
    "mean",
    "inner",
    "l2_norm",
]


def _fft_workers() -> int:
    """Worker cap for the FFT kernels, from the THERMOCH_THREADS env var."""
    try:
        return max(1, int(os.environ.get("THERMOCH_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: `n` points per axis on a box of side `box_len`.

    dim must be 1, 2 or 3; n must be a power of two >= 8 (keeps the dyadic
    frequency decomposition and the 2/3-rule masks exact on the lattice).
    """

    dim: int
    n: int
    box_len: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (self.box_len > 0.0 and np.isfinite(self.box_len)):
            raise ValueError(f"box_len must be positive and finite, got {self.box_len}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def h(self) -> float:
        """Grid spacing L/n."""
        return self.box_len / self.n

    @property
    def size(self) -> int:
        return self.n**self.dim

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays per axis, broadcastable over the grid."""
        x = np.arange(self.n) * self.h
        out = []
        for i in range(self.dim):
            shape = [1] * self.dim
            shape[i] = self.n
            out.append(x.reshape(shape))
        return tuple(out)

    @cached_property
    def k_axes(self) -> tuple[np.ndarray, ...]:
        """Wavenumber arrays per axis ((2*pi/L)*integers), broadcastable."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.box_len
        out = []
        for i in range(self.dim):
            shape = [1] * self.dim
            shape[i] = self.n
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 on the full lattice."""
        k2 = np.zeros(self.shape)
        for ki in self.k_axes:
            k2 = k2 + ki**2
        return k2

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def nyquist_masks(self) -> tuple[np.ndarray, ...]:
        """Per-axis boolean mask, True off the unpaired Nyquist plane."""
        k_nyq = -np.pi * self.n / self.box_len  # fftfreq stores -n/2, not +n/2
        return tuple(ki != k_nyq for ki in self.k_axes)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k_i| <= (2/3) k_max on every axis."""
        k_max = np.pi * self.n / self.box_len
        keep = np.ones(self.shape, dtype=bool)
        for ki in self.k_axes:
            keep &= np.abs(ki) <= (2.0 / 3.0) * k_max + 1e-12 * k_max
        return keep


@dataclass
class Field:
    """Real scalar field sampled on a GridSpec lattice (C-order values)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            bad = int(np.count_nonzero(~np.isfinite(self.values)))
            raise ValueError(f"field contains {bad} non-finite values")


@dataclass
class SpectralField:
    """Fourier coefficients of a real field (full complex layout).

    Hermitian symmetry coeffs[k] == conj(coeffs[-k]) is checked on
    construction; every operation in this module preserves it.
    """

    grid: GridSpec
    coeffs: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coeff shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("spectral field contains non-finite coefficients")
        if self.check and not _is_hermitian(self.coeffs):
            raise ValueError("coefficients break Hermitian symmetry (field not real)")


def _reflect(c: np.ndarray) -> np.ndarray:
    """Map coeffs[k] -> coeffs[-k] in the fftfreq index layout."""
    out = c
    for ax in range(c.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def _is_hermitian(c: np.ndarray, rtol: float = 1e-8) -> bool:
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(c - np.conj(_reflect(c)))) <= rtol * scale)


def transform(f: Field) -> SpectralField:
    """Unnormalized forward FFT of a real field."""
    coeffs = _sfft.fftn(f.values, workers=_fft_workers())
    return SpectralField(f.grid, coeffs, check=False)


def inverse(g: SpectralField) -> Field:
    """Inverse FFT (carries the 1/n^dim factor); returns the real part.

    The imaginary residue of a Hermitian-symmetric input is pure round-off.
    """
    vals = _sfft.ifftn(g.coeffs, workers=_fft_workers())
    return Field(g.grid, vals.real)


def derivative(g: SpectralField, op: str, axis: int = 0) -> SpectralField:
    """Exact spectral derivative.

    op is one of 'grad' (needs axis), 'laplacian', 'bilaplacian'.
    """
    grid = g.grid
    if op == "grad":
        if not 0 <= axis < grid.dim:
            raise ValueError(f"axis {axis} out of range for dim {grid.dim}")
        mult = 1j * grid.k_axes[axis] * grid.nyquist_masks[axis]
        return SpectralField(grid, g.coeffs * mult, check=False)
    if op == "laplacian":
        return SpectralField(grid, g.coeffs * (-grid.k_squared), check=False)
    if op == "bilaplacian":
        return SpectralField(grid, g.coeffs * grid.k_squared**2, check=False)
    raise ValueError(f"unknown derivative op {op!r}")


def dealias(g: SpectralField) -> SpectralField:
    """Zero every mode with any |k_i| beyond the 2/3 cutoff."""
    return SpectralField(g.grid, g.coeffs * g.grid.dealias_mask, check=False)


def mean_and_inner(f: Field, g: Field) -> tuple[float, float]:
    """(mean of f, quadrature inner product h^dim * sum(f*g))."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    m = float(np.sum(f.values)) / f.grid.size
    ip = f.grid.h**f.grid.dim * float(np.sum(f.values * g.values))
    return m, ip


def mean(f: Field) -> float:
    return mean_and_inner(f, f)[0]


def inner(f: Field, g: Field) -> float:
    return mean_and_inner(f, g)[1]


def l2_norm(f: Field) -> float:
    """Torus L2 norm sqrt(h^dim * sum f^2)."""
    return float(np.sqrt(inner(f, f)))


# -- array-level helpers used by the heavier numerical modules ---------------
# These avoid repeated Field/SpectralField wrapping in inner loops while
# keeping the exact same conventions.


def fftn(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return _sfft.fftn(values, workers=_fft_workers())


def ifftn_real(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    return _sfft.ifftn(coeffs, workers=_fft_workers()).real


def grad_arrays(grid: GridSpec, values: np.ndarray) -> list[np.ndarray]:
    """All gradient components of a real array, via one forward FFT."""
    c = fftn(grid, values)
    return [
        ifftn_real(grid, c * (1j * grid.k_axes[i] * grid.nyquist_masks[i]))
        for i in range(grid.dim)
    ]


def laplacian_array(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return ifftn_real(grid, fftn(grid, values) * (-grid.k_squared))


def divergence_arrays(grid: GridSpec, comps: list[np.ndarray], mask: bool = False) -> np.ndarray:
    """Spectral divergence of a vector of real arrays (optionally dealiased)."""
    out = np.zeros(grid.shape, dtype=complex)
    for i, v in enumerate(comps):
        out += fftn(grid, v) * (1j * grid.k_axes[i] * grid.nyquist_masks[i])
    if mask:
        out *= grid.dealias_mask
    return ifftn_real(grid, out)


def dealias_array(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return ifftn_real(grid, fftn(grid, values) * grid.dealias_mask)
