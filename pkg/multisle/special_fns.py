# special_fns.py - exponents b and c, the hypergeometric F and the two-link factor G

import math
from functools import lru_cache

import structlog
from pydantic import BaseModel, ConfigDict
from scipy import special

from errors import DomainError, KappaRangeError

logger = structlog.get_logger(__name__)

# Below this distance from an integer, c-a-b makes the 1-x connection formula ill-conditioned
_INTEGER_GAP = 1e-4
_SERIES_CUTOFF = 0.7
_MAX_TERMS = 20000


class KappaParams(BaseModel):
    """kappa with its boundary scaling exponent b and central charge c"""

    model_config = ConfigDict(frozen=True)

    kappa: float
    b: float
    c: float

    @property
    def regime(self) -> str:
        if self.kappa <= 4:
            return "simple"
        if self.kappa <= 6:
            return "non-simple"
        return "non-simple, finiteness open"


def kappa_params(kappa: float) -> KappaParams:
    kappa = float(kappa)
    if not (0.0 < kappa < 8.0) or math.isnan(kappa):
        raise KappaRangeError(kappa)
    b = (6.0 - kappa) / (2.0 * kappa)
    c = (6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa)
    return KappaParams(kappa=kappa, b=b, c=c)


def hypergeometric_parameters(kappa: float):
    """(a, b, c) of F = 2F1(4/k, 1-4/k; 8/k; .)"""
    return 4.0 / kappa, 1.0 - 4.0 / kappa, 8.0 / kappa


def _series(a: float, b: float, c: float, x: float) -> float:
    term = 1.0
    total = 1.0
    for k in range(_MAX_TERMS):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x
        total += term
        if term == 0.0 or abs(term) <= 1e-17 * abs(total):
            return total
    logger.warning("hypergeometric series hit the term cap", a=a, b=b, c=c, x=x)
    return total


@lru_cache(maxsize=256)
def _connection_coefficients(a: float, b: float, c: float):
    s = c - a - b
    first = special.gamma(c) * special.gamma(s) * special.rgamma(c - a) * special.rgamma(c - b)
    second = special.gamma(c) * special.gamma(-s) * special.rgamma(a) * special.rgamma(b)
    return first, second


def _check_kappa(kappa: float) -> None:
    if not (0.0 < kappa < 8.0):
        raise KappaRangeError(kappa)


def hyp_F(kappa: float, x: float) -> float:
    """2F1(4/k, 1-4/k; 8/k; x) on [0, 1)

    Power series up to x = 0.7; beyond that the 1-x connection formula, whose two
    series converge geometrically in 1-x. When c-a-b = 8/k - 1 is (nearly) an
    integer, or large, scipy's hyp2f1 takes over.
    """
    _check_kappa(kappa)
    x = float(x)
    if not (0.0 <= x < 1.0):
        raise DomainError(f"hyp_F needs x in [0, 1), got {x}", {"x": x})
    if kappa == 4.0 or x == 0.0:
        return 1.0

    a, b, c = hypergeometric_parameters(kappa)
    if x <= _SERIES_CUTOFF:
        return _series(a, b, c, x)

    s = c - a - b
    if abs(s - round(s)) < _INTEGER_GAP or s >= 3.0:
        return float(special.hyp2f1(a, b, c, x))

    y = 1.0 - x
    first, second = _connection_coefficients(a, b, c)
    value = first * _series(a, b, 1.0 - s, y)
    if second != 0.0:
        value += second * y**s * _series(c - a, c - b, 1.0 + s, y)
    return value


def g_factor(kappa: float, r: float) -> float:
    """G(r) = r^(2/k) F(r) for the cross ratio r in (0, 1)"""
    r = float(r)
    if not (0.0 < r < 1.0):
        raise DomainError(f"g_factor needs r in (0, 1), got {r}", {"r": r})
    return r ** (2.0 / kappa) * hyp_F(kappa, r)


def g_limit(kappa: float) -> float:
    """lim G(r) as r -> 1-, by Gauss's summation theorem"""
    _check_kappa(kappa)
    if kappa == 4.0:
        return 1.0
    a, b, c = hypergeometric_parameters(kappa)
    return float(special.gamma(c) * special.gamma(c - a - b) / (special.gamma(c - a) * special.gamma(c - b)))


def g_normalized(kappa: float, r: float) -> float:
    """G(r) / G(1-); the two-link factor, equal to 1 when the second link collapses"""
    r = float(r)
    if r <= 0.0:
        return 0.0
    if r >= 1.0:
        return 1.0
    return g_factor(kappa, r) / g_limit(kappa)


def one_side_avoidance(kappa: float, u: float, v: float) -> float:
    """P[a 0->inf chord avoids [u, v]] for 4 < k < 8 and 0 < u < v

    f(x) = int_0^x s^(-4/k) (1-s)^(8/k-2) ds, so f(u/v)/f(1) is the regularized
    incomplete beta function with parameters (1-4/k, 8/k-1).
    """
    if not (4.0 < kappa < 8.0):
        raise DomainError("one_side_avoidance is defined for 4 < kappa < 8", {"kappa": kappa})
    if not (0.0 < u < v):
        raise DomainError("one_side_avoidance needs 0 < u < v", {"u": u, "v": v})
    return float(special.betainc(1.0 - 4.0 / kappa, 8.0 / kappa - 1.0, u / v))


def series_oracle(a: float, b: float, c: float, x: float, tol: float = 1e-16, max_terms: int = 1_000_000) -> float:
    """Brute-force term-by-term 2F1 series; slow near 1 but independent of hyp_F"""
    term = 1.0
    total = 1.0
    k = 0
    while abs(term) >= tol and k < max_terms:
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x
        total += term
        k += 1
    return total
