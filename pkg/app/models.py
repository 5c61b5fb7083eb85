from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Status(str, Enum):
    """Classification of a simulated trajectory."""

    GLOBAL = "Global"
    """Reached t_end with finite norms and a decaying (or baseline-bounded) sup norm."""

    BLOWUP = "BlowUp"
    """Sup norm crossed the blow-up threshold, or the time step hit its floor."""

    INDETERMINATE = "Indeterminate"
    """Neither verdict is supported by the run (resolution loss, no decay trend)."""


class Mode(str, Enum):
    """Experiment kinds selectable in a config file."""

    SIMULATE = "simulate"
    """One integration; writes series.csv and summary.csv."""

    SWEEP = "sweep"
    """One integration per p in the sweep list; writes sweep.csv."""

    CAPACITY = "capacity"
    """Capacity integrals over R_list with T = R^{2s}."""

    NONEXISTENCE = "nonexistence"
    """The forced nonexistence table over R_list."""

    DECAY = "decay"
    """Semigroup decay fit of the initial-data probe."""

    EXPONENTS = "exponents"
    """Critical exponents for the configured (d, s, p)."""

    VERIFY = "verify"
    """Randomized inequality suite."""


class OperatorParams(BaseModel):
    """Coefficients of L_{a,b} = -a*Laplacian + b*(-Laplacian)^s."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., ge=0, description="Local diffusivity")
    b: float = Field(..., ge=0, description="Nonlocal coefficient")
    s: float = Field(..., description="Fractional order, strictly inside (0, 1)")

    @field_validator("s")
    @classmethod
    def _s_open_unit(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("s must lie in (0,1)")
        return v

    @model_validator(mode="after")
    def _not_degenerate(self) -> "OperatorParams":
        if self.a + self.b <= 0:
            raise ValueError("a + b must be positive")
        return self


class Grid(BaseModel):
    """Uniform periodic grid on the box [-L/2, L/2)^d."""

    model_config = ConfigDict(frozen=True)

    d: int = Field(..., description="Spatial dimension (1, 2 or 3)")
    n: int = Field(..., description="Points per axis, a power of two >= 16")
    box_length: float = Field(..., gt=0, description="Period L of the truncation box")

    @field_validator("d")
    @classmethod
    def _d_supported(cls, v: int) -> int:
        if v not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        return v

    @field_validator("n")
    @classmethod
    def _n_power_of_two(cls, v: int) -> int:
        if v < 16 or v & (v - 1):
            raise ValueError("n must be a power of two >= 16")
        return v

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d


class FracConstant(BaseModel):
    """Normalisation C_{d,s} of the singular-integral fractional Laplacian."""

    d: int
    s: float
    value: float = Field(..., gt=0)


class ExponentReport(BaseModel):
    """Critical exponents and global-existence parameters for (d, s, p)."""

    d: int
    s: float
    p: float
    p_F: float = Field(..., description="Fujita exponent 1 + 2s/d")
    p_crit: Optional[float] = Field(
        None, description="Forcing critical exponent d/(d-2s); only when d > 2s"
    )
    p_c_s: float = Field(..., description="Weissler exponent d(p-1)/(2s)")
    k: float = Field(..., description="p_c_s / p")
    q: Optional[float] = Field(None, description="Auxiliary integrability (p > p_crit)")
    rho: Optional[float] = Field(None, description="Decay rate 1/(p-1) - d/(2qs)")


class TimeIntegralBounds(BaseModel):
    """Time exponents and beta factors of the global-existence Duhamel bounds."""

    nonlinear_exponent: float = Field(
        ..., description="1 - rho*p - d(p-1)/(2qs); equals -rho"
    )
    nonlinear_beta: float = Field(
        ..., description="B(1 - rho*p, 1 - d(p-1)/(2qs))"
    )
    forcing_exponent: float = Field(
        ..., description="e_f = (d/2s)(1/k - 1/q); the time singularity (t-tau)^(-e_f)"
    )
    forcing_beta: Optional[float] = Field(
        None, description="B(1, 1 - e_f) when 1 - e_f > 0, otherwise absent"
    )
    identity_residual: float = Field(
        ..., description="rho - e_f + 1, zero up to rounding"
    )


# ── Solver ──────────────────────────────────────────────────


class SolverConfig(BaseModel):
    """Runtime thresholds for the Picard map and the exponential-Euler integrator."""

    model_config = ConfigDict(extra="forbid")

    dt_init: float = Field(0.05, gt=0)
    dt_min: float = Field(1e-10, gt=0)
    t_end: float = Field(1e3, gt=0)
    blowup_threshold: float = Field(1e8, gt=0, description="L-infinity cap M")
    picard_tol: float = Field(1e-10, gt=0, description="Sup distance between iterates")
    picard_max_iter: int = Field(200, ge=1)
    adapt_factor: float = Field(
        0.5, gt=0, lt=1, description="Time-step shrink after a rejected step"
    )
    growth_tol: float = Field(
        0.005, gt=0, lt=1, description="Largest relative sup-norm growth per step"
    )
    check_every: int = Field(25, ge=1, description="Steps between resolution checks")

    @model_validator(mode="after")
    def _dt_order(self) -> "SolverConfig":
        if self.dt_min > self.dt_init:
            raise ValueError("dt_min must not exceed dt_init")
        return self


class NormSample(BaseModel):
    t: float
    l1: float
    l2: float
    linf: float
    mass: float


class SolveOutcome(BaseModel):
    """Classified trajectory with its norm series."""

    status: Status
    t_star: Optional[float] = Field(None, description="Threshold-crossing time")
    t_max_estimate: Optional[float] = Field(
        None, description="Extrapolated maximal existence time"
    )
    series: list[NormSample] = Field(default_factory=list)
    dt_floor_hit: bool = False
    baseline_linf: Optional[float] = Field(
        None, description="Sup norm of the forced linear evolution at t_end"
    )
    diagnostics: list[str] = Field(default_factory=list)


# ── Capacity ────────────────────────────────────────────────


class CapacityReport(BaseModel):
    """Test-function integrals I1, I2 at one (R, T)."""

    I1: float = Field(..., ge=0)
    I2: float = Field(..., ge=0)
    R: float
    T: float
    slope_I1_R: Optional[float] = None
    slope_I1_T: Optional[float] = None
    slope_I2_R: Optional[float] = None


class ScalingFit(BaseModel):
    """Log-log slopes of I1/T and I2/T against R under T = R^{2s}."""

    slope_I1: float
    slope_I2: float
    stderr_I1: float
    stderr_I2: float
    expected: float = Field(..., description="d - 2sp/(p-1)")
    reports: list[CapacityReport] = Field(default_factory=list)


class NonexistenceRow(BaseModel):
    R: float
    T: float
    forcing_term: float = Field(..., description="integral of f*phi")
    initial_term: float = Field(..., description="R^{-2s} * integral over |x|<R of |u0|")
    capacity_term: float = Field(..., description="R^{d - 2sp/(p-1)}")


class NonexistenceTable(BaseModel):
    rows: list[NonexistenceRow]
    exponent: float
    contradiction_trend: bool


class FujitaRow(BaseModel):
    R: float
    T: float
    initial_term: float = Field(..., description="integral of u0*phi")
    capacity_term: float = Field(..., description="R^{d - 2s/(p-1)}")


class FujitaTable(BaseModel):
    rows: list[FujitaRow]
    exponent: float
    contradiction_trend: bool


class CriticalRow(BaseModel):
    R: float
    forcing_term: float = Field(..., description="R^{-sigma} * integral of f*phi")
    initial_term: float = Field(..., description="R^{-2s-sigma} * integral of |u0|")
    constant_term: float = Field(..., description="R^{-sigma}")


class GrowthCheck(BaseModel):
    """Growth functional over increasing R for the instantaneous blow-up criterion."""

    sigma: float
    radii: list[float]
    values: list[float]
    criterion_met: bool


# ── Estimates ───────────────────────────────────────────────


class DecayFit(BaseModel):
    q: float = Field(..., ge=1)
    r: float
    t_window: tuple[float, float]
    fitted_slope: float
    theory_slope: float
    rel_error: float
    stderr: float = 0.0
    points: int = 0

    @model_validator(mode="after")
    def _window_order(self) -> "DecayFit":
        if not self.t_window[0] < self.t_window[1]:
            raise ValueError("t_window must satisfy t_lo < t_hi")
        if self.r < self.q:
            raise ValueError("r must be >= q")
        return self


class InequalityReport(BaseModel):
    """Largest violations of the pointwise and product inequalities (<= 0 means none)."""

    qwe_violation: float
    product_violation: float
    max_violation: float


class CheckResult(BaseModel):
    name: str
    cases: int
    max_violation: float
    tolerance: float
    passed: bool


class VerifyReport(BaseModel):
    seed: int
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ── Harness ─────────────────────────────────────────────────


class RunSummary(BaseModel):
    p: float
    status: Status
    t_star: Optional[float] = None
    t_max_estimate: Optional[float] = None
    final_linf: Optional[float] = None
    t_end: float
    expected: Optional[Status] = Field(
        None, description="Gated expectation; None for ungated runs"
    )
    slow_regime: bool = False
    diagnostics: list[str] = Field(default_factory=list)


class RunRecord(BaseModel):
    """One integration of a sweep."""

    run_id: str = Field(..., description="First 16 hex digits of sha256(config snapshot)")
    config: dict
    outcome: RunSummary
    wall_time: float
