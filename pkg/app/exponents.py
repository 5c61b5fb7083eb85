"""Critical exponents and global-existence parameters from (d, s, p) alone."""

from typing import Optional

from scipy.special import beta as Beta

from app.errors import DomainError, ParameterDomainError, UndefinedExponentError
from app.models import ExponentReport, TimeIntegralBounds


def _check_ds(d: int, s: float) -> None:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if not 0 < s < 1:
        raise DomainError("s must lie in (0,1)")


def fujita_exponent(d: int, s: float) -> float:
    """p_F = 1 + 2s/d."""
    _check_ds(d, s)
    return 1.0 + 2.0 * s / d


def forcing_critical_exponent(d: int, s: float) -> float:
    """p_crit = d/(d - 2s); undefined unless d > 2s."""
    _check_ds(d, s)
    if d <= 2 * s:
        raise UndefinedExponentError(
            f"forcing critical exponent needs d > 2s (d={d}, s={s})"
        )
    return d / (d - 2.0 * s)


def weissler_exponent(d: int, s: float, p: float) -> float:
    """p_c^s = d(p - 1)/(2s); exceeds 1 exactly when p > p_F."""
    _check_ds(d, s)
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    return d * (p - 1.0) / (2.0 * s)


def admissible_q_interval(d: int, s: float, p: float) -> tuple[float, float]:
    """Open interval of admissible 1/q: (2s/(dp(p-1)), 2s/(d(p-1)))."""
    return 2.0 * s / (d * p * (p - 1.0)), 2.0 * s / (d * (p - 1.0))


def global_existence_parameters(
    d: int, s: float, p: float, q_override: Optional[float] = None
) -> tuple[float, float, float, float]:
    """Return (p_c_s, k, q, rho) for p > p_crit.

    q defaults to the midpoint of the admissible interval in 1/q; an
    override must lie strictly inside it.
    """
    p_crit = forcing_critical_exponent(d, s)
    if p <= p_crit:
        raise ParameterDomainError(
            f"global-existence parameters need p > p_crit = {p_crit:g}, got p = {p:g}"
        )
    p_c_s = weissler_exponent(d, s, p)
    k = p_c_s / p
    lo, hi = admissible_q_interval(d, s, p)
    if q_override is None:
        inv_q = 0.5 * (lo + hi)
    else:
        inv_q = 1.0 / q_override
        if not lo < inv_q < hi:
            raise ParameterDomainError(
                f"q = {q_override:g} outside the admissible range ({1 / hi:g}, {1 / lo:g})"
            )
    q = 1.0 / inv_q
    rho = 1.0 / (p - 1.0) - d / (2.0 * q * s)
    return p_c_s, k, q, rho


def rho_identity_residual(d: int, s: float, p: float, q: float, rho: float) -> float:
    """rho - (d/2s)(1/p_c^s - 1/q); zero when rho is consistent with q."""
    p_c_s = weissler_exponent(d, s, p)
    return rho - d / (2.0 * s) * (1.0 / p_c_s - 1.0 / q)


def time_integral_bounds(
    d: int, s: float, p: float, q: Optional[float] = None
) -> TimeIntegralBounds:
    """Exponents and beta factors of the Duhamel time integrals in the global-existence bound.

    The nonlinear term integrates (t - tau)^{-d(p-1)/(2qs)} tau^{-rho p}; the
    forcing term carries (t - tau)^{-e_f} with e_f = (d/2s)(1/k - 1/q).
    Since e_f = 1 + rho > 1, the forcing beta factor does not exist and is
    reported as None.
    """
    _, k, q, rho = global_existence_parameters(d, s, p, q_override=q)
    a_tau = 1.0 - rho * p
    a_gap = 1.0 - d * (p - 1.0) / (2.0 * q * s)
    e_f = d / (2.0 * s) * (1.0 / k - 1.0 / q)
    return TimeIntegralBounds(
        nonlinear_exponent=a_tau + a_gap - 1.0,
        nonlinear_beta=float(Beta(a_tau, a_gap)),
        forcing_exponent=e_f,
        forcing_beta=float(Beta(1.0, 1.0 - e_f)) if e_f < 1 else None,
        identity_residual=rho - e_f + 1.0,
    )


def exponent_report(d: int, s: float, p: float) -> ExponentReport:
    p_F = fujita_exponent(d, s)
    p_c_s = weissler_exponent(d, s, p)
    p_crit: Optional[float] = None
    q: Optional[float] = None
    rho: Optional[float] = None
    if d > 2 * s:
        p_crit = forcing_critical_exponent(d, s)
        if p > p_crit:
            _, _, q, rho = global_existence_parameters(d, s, p)
    return ExponentReport(
        d=d, s=s, p=p, p_F=p_F, p_crit=p_crit, p_c_s=p_c_s, k=p_c_s / p, q=q, rho=rho
    )
