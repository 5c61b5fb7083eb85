"""FastAPI calculator over the closed-form parts of the lab."""

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware

from app.capacity import growth_functional
from app.config import settings
from app.errors import DomainError
from app.exponents import exponent_report, forcing_critical_exponent, fujita_exponent
from app.models import ExponentReport, FracConstant, OperatorParams
from app.operator import frac_constant, symbol

app = FastAPI(title="fujita-lab calculator")

app.add_middleware(
    CORSMiddleware,
    allow_origins=[o.strip() for o in settings.cors_origins.split(",") if o.strip()],
    allow_methods=["GET"],
    allow_headers=["*"],
)

PROFILES = {
    "one": lambda r: np.ones_like(r),
    "radius": lambda r: r,
}


def _unprocessable(e: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(e))


# ── Exponents ───────────────────────────────────────────────


@app.get("/exponents")
def get_exponents(
    d: int = Query(..., ge=1, description="Spatial dimension"),
    s: float = Query(..., description="Fractional order in (0, 1)"),
    p: Optional[float] = Query(None, description="Nonlinearity exponent; omit for p_F and p_crit only"),
):
    """Critical exponents for (d, s), plus the p-dependent parameters when p is given."""
    try:
        if p is None:
            p_crit = forcing_critical_exponent(d, s) if d > 2 * s else None
            return {"d": d, "s": s, "p_F": fujita_exponent(d, s), "p_crit": p_crit}
        report: ExponentReport = exponent_report(d, s, p)
    except DomainError as e:
        raise _unprocessable(e)
    return report


@app.get("/fractional-constant", response_model=FracConstant)
def get_fractional_constant(
    d: int = Query(..., ge=1),
    s: float = Query(...),
):
    try:
        return frac_constant(d, s)
    except DomainError as e:
        raise _unprocessable(e)


# ── Operator ────────────────────────────────────────────────


@app.get("/symbol")
def get_symbol(
    a: float = Query(..., ge=0, description="Local diffusivity"),
    b: float = Query(..., ge=0, description="Nonlocal coefficient"),
    s: float = Query(...),
    xi: list[float] = Query(..., description="Frequency vector, one value per axis"),
):
    """a|xi|^2 + b|xi|^{2s}."""
    try:
        params = OperatorParams(a=a, b=b, s=s)
    except ValueError as e:
        raise _unprocessable(e)
    return {"value": symbol(xi, params)}


# ── Growth functional ───────────────────────────────────────


@app.get("/growth")
def get_growth(
    sigma: float = Query(..., gt=0),
    R: float = Query(..., gt=0),
    d: int = Query(..., ge=1),
    profile: Literal["one", "radius"] = Query("one", description="Radial profile g(|x|)"),
):
    """R^{-sigma} times the integral of the profile over the ball of radius R."""
    try:
        value = growth_functional(PROFILES[profile], sigma, R, d=d)
    except DomainError as e:
        raise _unprocessable(e)
    return {"sigma": sigma, "R": R, "d": d, "profile": profile, "value": value}
