"""The mixed operator L_{a,b} = -a*Laplacian + b*(-Laplacian)^s as Fourier multipliers.

On the torus the fractional power is defined by its symbol |xi|^{2s}.
``frac_laplacian_pv_profile`` evaluates the singular integral of the
periodic extension directly in real space and serves as an independent
oracle for that definition in 1D.
"""

import logging
import math
import warnings
from functools import lru_cache

import numpy as np
from scipy.special import gamma as Gamma
from scipy.special import zeta

from app.errors import DomainError, RangeError, ResolutionWarning, UnsupportedDimensionError
from app.field import Field, inverse, wavenumbers, xi_squared
from app.models import FracConstant, Grid, OperatorParams

logger = logging.getLogger(__name__)

# Negative kernel values below this fraction of the sup are ringing, not under-resolution
KERNEL_RINGING_TOL = 1e-6


def symbol(xi, params: OperatorParams) -> float:
    """a|xi|^2 + b|xi|^{2s} for one frequency vector."""
    v = np.atleast_1d(np.asarray(xi, dtype=float))
    k2 = float(np.dot(v, v))
    return params.a * k2 + params.b * k2**params.s


@lru_cache(maxsize=128)
def symbol_grid(grid: Grid, params: OperatorParams) -> np.ndarray:
    k2 = xi_squared(grid)
    out = params.a * k2 + params.b * k2**params.s
    out.flags.writeable = False
    return out


def phi1(sigma, dt: float):
    """(1 - exp(-dt*sigma))/sigma, with the limit value dt at sigma = 0."""
    sig = np.asarray(sigma, dtype=float)
    safe = np.where(sig > 0, sig, 1.0)
    out = np.where(sig > 0, -np.expm1(-dt * safe) / safe, dt)
    return out if out.ndim else float(out)


def phi1_multiplier(params: OperatorParams, grid: Grid, dt: float) -> np.ndarray:
    """Exact Duhamel weight of a constant source over one step of length dt."""
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    return phi1(symbol_grid(grid, params), dt)


def semigroup_multiplier(params: OperatorParams, grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    return np.exp(-t * symbol_grid(grid, params))


def apply_operator(u: Field, params: OperatorParams) -> Field:
    u.require_finite()
    return Field.from_spectral(u.grid, symbol_grid(u.grid, params) * u.spectral)


def apply_semigroup(u: Field, params: OperatorParams, t: float) -> Field:
    u.require_finite()
    return Field.from_spectral(u.grid, semigroup_multiplier(params, u.grid, t) * u.spectral)


def heat_kernel(grid: Grid, params: OperatorParams, t: float) -> Field:
    """Samples of P_t centred at the origin (index n/2), normalised to unit integral."""
    if t <= 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    raw = inverse(semigroup_multiplier(params, grid, t), grid) / grid.cell_volume
    # Symmetrise under x -> -x so the kernel is even to the last bit
    axes = tuple(range(grid.d))
    reflected = np.roll(np.flip(raw, axis=axes), 1, axis=axes)
    kernel = np.fft.fftshift(0.5 * (raw + reflected), axes=axes)

    sup = float(kernel.max())
    low = float(kernel.min())
    if low < -KERNEL_RINGING_TOL * sup:
        msg = (
            f"heat kernel at t={t:g} has negative values down to {low:.3e} "
            f"({-low / sup:.1e} of sup); refine the grid"
        )
        logger.warning(msg)
        warnings.warn(msg, ResolutionWarning, stacklevel=2)
    return Field(grid, kernel)


def frac_constant(d: int, s: float) -> FracConstant:
    """C_{d,s} = 2^{2s-1} * 2s * Gamma((d+2s)/2) / (pi^{d/2} * Gamma(1-s))."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if not 0 < s < 1:
        raise DomainError("s must lie in (0,1)")
    value = 2 ** (2 * s - 1) * 2 * s * Gamma((d + 2 * s) / 2) / (math.pi ** (d / 2) * Gamma(1 - s))
    return FracConstant(d=d, s=s, value=float(value))


# ---------------------------------------------------------------------------
# Principal-value oracle (1D)
# ---------------------------------------------------------------------------


def _simpson_weights(count: int) -> np.ndarray:
    w = np.ones(count)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def frac_laplacian_pv_profile(
    u: Field,
    s: float,
    *,
    taylor_cells: int = 8,
    direct_periods: int = 4,
    tail_order: int = 6,
    tol: float = 1e-8,
) -> np.ndarray:
    """C_{1,s} * PV integral of (u(x) - u(y))/|x - y|^{1+2s} at every grid node.

    Written as an integral over r > 0 of (2u(x) - u(x+r) - u(x-r)) r^{-1-2s}
    for the periodic extension of u, split three ways:

    * r < eps: Taylor expansion with the even derivatives at x;
    * eps <= r <= L/2: composite Simpson on grid offsets;
    * r > L/2: the constant part 2(u(x) - mean) integrates in closed form,
      the mean-free remainder is summed period by period and the tail of
      that sum is closed with a moment expansion and Hurwitz zeta sums.
    """
    grid = u.grid
    if grid.d != 1:
        raise UnsupportedDimensionError(f"principal-value oracle is 1D only, got d={grid.d}")
    if not 0 < s < 1:
        raise DomainError("s must lie in (0,1)")
    u.require_finite()

    n, h, L = grid.n, grid.h, grid.box_length
    half = n // 2
    if taylor_cells % 2 or taylor_cells >= half:
        raise DomainError("taylor_cells must be even and smaller than n/2")
    v = u.samples
    alpha = 1.0 + 2.0 * s

    # near field
    k = wavenumbers(grid)[0]
    uh = u.spectral
    d2 = inverse(-(k**2) * uh, grid)
    d4 = inverse(k**4 * uh, grid)
    d6 = inverse(-(k**6) * uh, grid)
    eps = taylor_cells * h
    near = -(
        d2 * eps ** (2 - 2 * s) / (2 - 2 * s)
        + d4 / 12.0 * eps ** (4 - 2 * s) / (4 - 2 * s)
        + d6 / 360.0 * eps ** (6 - 2 * s) / (6 - 2 * s)
    )

    # middle field
    offsets = np.arange(taylor_cells, half + 1)
    weights = _simpson_weights(offsets.size) * h
    middle = np.zeros(n)
    for j, wj in zip(offsets, weights):
        g = 2.0 * v - np.roll(v, -j) - np.roll(v, j)
        middle += (wj * (j * h) ** -alpha) * g

    # far field
    mean = float(v.mean())
    far = 2.0 * (v - mean) * (0.5 * L) ** (-2 * s) / (2 * s)
    tilde = v - mean
    direct = np.zeros(n)
    moments = np.zeros((tail_order + 1, n))
    for j in range(n + 1):
        shift = half + j
        G = np.roll(tilde, -shift) + np.roll(tilde, shift)
        wj = 0.5 * h if j in (0, n) else h
        rho = j * h
        for m in range(direct_periods):
            direct += (wj * (0.5 * L + m * L + rho) ** -alpha) * G
        for order in range(tail_order + 1):
            moments[order] += (wj * rho**order) * G

    tail = np.zeros(n)
    last_term = 0.0
    for order in range(tail_order + 1):
        # order-th derivative of r^{-alpha} is c * r^{-alpha-order}
        c = (-1) ** order * Gamma(alpha + order) / Gamma(alpha)
        power = alpha + order
        periods = L**-power * zeta(power, direct_periods + 0.5)
        term = moments[order] / math.factorial(order) * c * periods
        tail += term
        last_term = float(np.abs(term).max())
    far -= direct + tail

    result = frac_constant(1, s).value * (near + middle + far)
    scale = float(np.abs(result).max())
    if scale > 0 and last_term > tol * scale:
        logger.warning(
            "PV tail expansion not converged: last term %.2e vs tolerance %.2e",
            last_term,
            tol * scale,
        )
    return result


def frac_laplacian_pv_1d(u: Field, s: float, index: int) -> float:
    """Oracle value of (-Laplacian)^s u at one grid index."""
    if u.grid.d != 1:
        raise UnsupportedDimensionError(f"principal-value oracle is 1D only, got d={u.grid.d}")
    if not 0 <= index < u.grid.n:
        raise RangeError(f"index {index} outside [0, {u.grid.n})")
    return float(frac_laplacian_pv_profile(u, s)[index])
