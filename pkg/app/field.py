"""Real fields sampled on periodic grids, with a lazily cached spectrum.

Grid coordinates run over [-L/2, L/2) so the origin sits at index n/2 on
every axis.  Spectra use the half-complex ``rfftn`` layout; wavenumbers are
2*pi*k/L with k in the symmetric integer range.  All per-grid arrays are
cached with ``lru_cache`` (safe for concurrent lookup) and returned
read-only.
"""

import logging
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
import scipy.fft

from app.config import settings
from app.errors import InvalidFieldError
from app.models import Grid

logger = logging.getLogger(__name__)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Per-grid caches
# ---------------------------------------------------------------------------


def axis(grid: Grid) -> np.ndarray:
    """1D node coordinates -L/2 + j*h."""
    return -0.5 * grid.box_length + grid.h * np.arange(grid.n)


@lru_cache(maxsize=64)
def coordinates(grid: Grid) -> tuple[np.ndarray, ...]:
    x = axis(grid)
    return tuple(_frozen(c) for c in np.meshgrid(*([x] * grid.d), indexing="ij"))


@lru_cache(maxsize=64)
def radius(grid: Grid) -> np.ndarray:
    return _frozen(np.sqrt(sum(c**2 for c in coordinates(grid))))


@lru_cache(maxsize=64)
def wavenumbers(grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-axis wavenumbers, broadcastable against the rfftn spectrum."""
    ks = []
    for ax in range(grid.d):
        if ax == grid.d - 1:
            k = 2 * np.pi * np.fft.rfftfreq(grid.n, d=grid.h)
        else:
            k = 2 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
        shape = [1] * grid.d
        shape[ax] = k.size
        ks.append(_frozen(k.reshape(shape)))
    return tuple(ks)


@lru_cache(maxsize=64)
def xi_squared(grid: Grid) -> np.ndarray:
    """|xi|^2 on the rfftn spectrum."""
    ks = wavenumbers(grid)
    out = np.zeros(np.broadcast_shapes(*(k.shape for k in ks)))
    for k in ks:
        out = out + k**2
    return _frozen(out)


@lru_cache(maxsize=64)
def _half_spectrum_weights(grid: Grid) -> np.ndarray:
    # Modes with a conjugate partner outside the rfft half count twice
    w = np.full(xi_squared(grid).shape, 2.0)
    w[..., 0] = 1.0
    if grid.n % 2 == 0:
        w[..., -1] = 1.0
    return _frozen(w)


@lru_cache(maxsize=64)
def _tail_mask(grid: Grid) -> np.ndarray:
    k_max = np.pi / grid.h
    return _frozen(np.sqrt(xi_squared(grid)) > (2.0 / 3.0) * k_max)


def forward(samples: np.ndarray) -> np.ndarray:
    return scipy.fft.rfftn(samples, workers=settings.fft_workers)


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return scipy.fft.irfftn(coeffs, s=grid.shape, workers=settings.fft_workers)


# ---------------------------------------------------------------------------
# Field
# ---------------------------------------------------------------------------


class Field:
    """Immutable point samples on a grid; the spectrum is computed on first use.

    ``check=False`` skips the finiteness check.  The stepper uses it so that
    overflow can be detected and handled by the caller.
    """

    def __init__(
        self,
        grid: Grid,
        samples: np.ndarray,
        *,
        spectral: np.ndarray | None = None,
        check: bool = True,
    ):
        arr = np.array(samples, dtype=float)
        if arr.shape != grid.shape:
            if arr.size != grid.n**grid.d:
                raise InvalidFieldError(
                    f"expected {grid.n**grid.d} samples for grid {grid.shape}, got {arr.size}"
                )
            arr = arr.reshape(grid.shape)
        if check and not np.all(np.isfinite(arr)):
            raise InvalidFieldError("field has non-finite samples")
        self.grid = grid
        self._samples = _frozen(arr)
        if spectral is not None:
            self.__dict__["spectral"] = _frozen(np.asarray(spectral))

    # -- construction -------------------------------------------------------

    @classmethod
    def from_spectral(cls, grid: Grid, coeffs: np.ndarray, *, check: bool = True) -> "Field":
        return cls(grid, inverse(coeffs, grid), spectral=coeffs, check=check)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample ``fn(x_1, ..., x_d)`` on the grid (arguments are mesh arrays)."""
        values = fn(*coordinates(grid))
        return cls(grid, np.broadcast_to(values, grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls.constant(grid, 0.0)

    # -- data ---------------------------------------------------------------

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @cached_property
    def spectral(self) -> np.ndarray:
        return _frozen(forward(self._samples))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self._samples)))

    def require_finite(self) -> None:
        if not self.is_finite():
            raise InvalidFieldError("field has non-finite samples")

    def scaled(self, factor: float) -> "Field":
        return Field(self.grid, factor * self._samples)

    # -- quadrature and norms -----------------------------------------------

    def integral(self) -> float:
        return float(self._samples.sum() * self.grid.cell_volume)

    def mean(self) -> float:
        return float(self._samples.mean())

    def lp_norm(self, q: float) -> float:
        """Grid L^q norm; q = inf is the sup norm."""
        a = np.abs(self._samples)
        if np.isinf(q):
            return float(a.max())
        return float((np.sum(a**q) * self.grid.cell_volume) ** (1.0 / q))

    def spectral_tail_fraction(self) -> float:
        """Energy in the top third of |xi| over the total spectral energy."""
        energy = _half_spectrum_weights(self.grid) * np.abs(self.spectral) ** 2
        total = float(energy.sum())
        if total == 0.0:
            return 0.0
        return float(energy[_tail_mask(self.grid)].sum()) / total

    def __repr__(self) -> str:
        return f"Field(d={self.grid.d}, n={self.grid.n}, L={self.grid.box_length})"
