"""Named initial-data and forcing families sampled on a grid."""

import logging
import math
from enum import Enum
from typing import Any

import numpy as np

from app.errors import DomainError, RangeError
from app.field import Field, coordinates, radius
from app.models import Grid

logger = logging.getLogger(__name__)

# A Gaussian is treated as supported within this many widths of its centre
SUPPORT_WIDTHS = 8.0


class Family(str, Enum):
    """Named data families."""

    GAUSSIAN = "gaussian"
    """amp * exp(-|x - c|^2 / (2 width^2)); positive mass."""

    DIPOLE = "dipole"
    """Difference of two equal Gaussians sep apart along the first axis; zero mass."""

    RING = "ring"
    """Gaussian shell of the given radius (two bumps at +-radius in 1D)."""

    NEG_BUMP_POS_TAIL = "neg_bump_pos_tail"
    """Negative core under a broad positive tail; sign-changing with positive mass."""

    ZERO = "zero"
    """Identically zero."""


FAMILY_ALIASES = {"none": Family.ZERO}


def resolve_family(name: str) -> Family:
    key = name.strip().lower()
    if key in FAMILY_ALIASES:
        return FAMILY_ALIASES[key]
    try:
        return Family(key)
    except ValueError:
        known = ", ".join(f.value for f in Family)
        raise DomainError(f"unknown family {name!r} (known: {known})") from None


def gaussian_mass(amp: float, width: float, d: int) -> float:
    """amp * (2 pi)^{d/2} * width^d."""
    return amp * (2.0 * math.pi) ** (d / 2.0) * width**d


def _require_inside(grid: Grid, extent: float, name: str) -> None:
    if extent > 0.5 * grid.box_length:
        raise RangeError(
            f"{name} support reaches {extent:g} but the box half-length is {0.5 * grid.box_length:g}"
        )


def _bump(grid: Grid, shift: float, width: float) -> np.ndarray:
    """exp(-|x - shift e_1|^2 / (2 width^2))."""
    coords = coordinates(grid)
    r2 = (coords[0] - shift) ** 2
    for c in coords[1:]:
        r2 = r2 + c**2
    return np.exp(-r2 / (2.0 * width**2))


def make_family(name: str, parameters: dict[str, Any], grid: Grid) -> Field:
    """Sample the family ``name`` on ``grid``.

    Parameters (all optional): amp, mass (gaussian only), center, width,
    sep, radius, tail.  Unknown parameters are rejected.
    """
    family = resolve_family(name)
    params = dict(parameters)
    allowed = {
        Family.GAUSSIAN: {"amp", "mass", "center", "width"},
        Family.DIPOLE: {"amp", "sep", "width"},
        Family.RING: {"amp", "radius", "width"},
        Family.NEG_BUMP_POS_TAIL: {"amp", "width", "tail"},
        Family.ZERO: set(),
    }[family]
    unknown = set(params) - allowed
    if unknown:
        raise DomainError(f"family {family.value!r} does not take {', '.join(sorted(unknown))}")

    if family is Family.ZERO:
        return Field.zeros(grid)

    width = float(params.get("width", 1.0))
    if width <= 0:
        raise DomainError(f"width must be positive, got {width}")
    amp = float(params.get("amp", 1.0))
    reach = SUPPORT_WIDTHS * width

    if family is Family.GAUSSIAN:
        if "amp" in params and "mass" in params:
            raise DomainError("give either amp or mass for a gaussian, not both")
        if "mass" in params:
            amp = float(params["mass"]) / gaussian_mass(1.0, width, grid.d)
        center = float(params.get("center", 0.0))
        _require_inside(grid, abs(center) + reach, "gaussian")
        return Field(grid, amp * _bump(grid, center, width))

    if family is Family.DIPOLE:
        sep = float(params.get("sep", 10.0))
        _require_inside(grid, 0.5 * sep + reach, "dipole")
        return Field(grid, amp * (_bump(grid, 0.5 * sep, width) - _bump(grid, -0.5 * sep, width)))

    if family is Family.RING:
        rad = float(params.get("radius", 10.0))
        _require_inside(grid, rad + reach, "ring")
        if grid.d == 1:
            return Field(grid, amp * (_bump(grid, rad, width) + _bump(grid, -rad, width)))
        return Field(grid, amp * np.exp(-((radius(grid) - rad) ** 2) / (2.0 * width**2)))

    # NEG_BUMP_POS_TAIL: tail carries twice the core's mass
    tail = float(params.get("tail", 4.0))
    if tail ** grid.d <= 2.0:
        raise DomainError("tail must satisfy tail^d > 2 for a sign-changing profile")
    _require_inside(grid, tail * reach, "neg_bump_pos_tail")
    r = radius(grid)
    core = np.exp(-(r**2) / (2.0 * width**2))
    broad = (2.0 / tail**grid.d) * np.exp(-(r**2) / (2.0 * (tail * width) ** 2))
    return Field(grid, amp * (broad - core))


def normalize(field: Field, q: float, target: float) -> Field:
    """Rescale ``field`` so its L^q norm equals ``target``."""
    norm = field.lp_norm(q)
    if norm == 0:
        raise DomainError("cannot normalize a zero field")
    logger.debug("normalizing L^%g norm %.4g -> %.4g", q, norm, target)
    return field.scaled(target / norm)
