"""Model parameters and the constants derived from them.

The model is the focusing NLS with inverse-square potential

    i u_t = (-Delta - c |x|^-2) u - |u|^(p-2) u,   x in R^d,

with ``c <= c_star = (d-2)^2 / 4``.  Every exponent used elsewhere in the
package (interpolation exponent, singular order at the origin, weight of the
nonlinearity in the regularized variable) is computed here once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .errors import InvalidParams

MASS_CRITICAL_RTOL = 1e-12


def critical_coupling(d: int) -> float:
    """Best constant in Hardy's inequality, ``(d-2)^2/4``."""
    return (d - 2) ** 2 / 4.0


def sobolev_exponent(d: int) -> float:
    return 2.0 * d / (d - 2)


def mass_critical_exponent(d: int) -> float:
    """Return ``2 + 4/d``."""
    if d < 3:
        raise InvalidParams(f"dimension must be >= 3, got {d}")
    return 2.0 + 4.0 / d


def parse_exponent(value: Union[str, float, int, Fraction]) -> float:
    """Accept ``4``, ``"10/3"``, ``3.3333`` and return a float."""
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParams(f"cannot parse exponent {value!r}") from exc
    return float(value)


def parse_coupling(value: Union[str, float, None], d: int) -> float:
    """``None`` or ``"critical"`` map to ``c_star``; anything else is parsed."""
    if value is None:
        return critical_coupling(d)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("critical", "c_star", "cstar", "c*"):
            return critical_coupling(d)
        try:
            return float(Fraction(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParams(f"cannot parse coupling {value!r}") from exc
    return float(value)


@dataclass(frozen=True)
class DerivedConstants:
    c_star: float
    theta: float
    kappa: float
    sigma: float
    n_eff: float
    q: Optional[float]
    mass_critical: bool


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``d``, nonlinearity exponent ``p`` and Hardy coupling ``c``.

    ``c`` defaults to the critical value.  Construction validates the
    admissible range, so a ``ModelParams`` instance is always usable.
    """

    d: int
    p: float
    c: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        d = self.d
        if int(d) != d or d < 3:
            raise InvalidParams(f"dimension must be an integer >= 3, got {d}")
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "p", parse_exponent(self.p))
        object.__setattr__(self, "c", parse_coupling(self.c, self.d))
        p_max = sobolev_exponent(self.d)
        if not (2.0 < self.p < p_max):
            raise InvalidParams(f"p must lie in (2, {p_max:g}), got {self.p:g}")
        c_star = critical_coupling(self.d)
        # tolerate round-off when c was typed as a decimal of c_star
        if self.c > c_star * (1 + 1e-14):
            raise InvalidParams(f"c must be <= c_star = {c_star:g}, got {self.c:g}")
        if self.c > c_star:
            object.__setattr__(self, "c", c_star)

    @classmethod
    def from_strings(cls, d, p, c=None) -> "ModelParams":
        return cls(int(d), parse_exponent(p), parse_coupling(c, int(d)))

    @property
    def c_star(self) -> float:
        return critical_coupling(self.d)

    @property
    def is_critical(self) -> bool:
        return self.c == self.c_star

    @property
    def theta(self) -> float:
        return self.d / 2.0 - self.d / self.p

    @property
    def kappa(self) -> float:
        """Singular order of the ground state at the origin, Q ~ r^-kappa."""
        half = (self.d - 2) / 2.0
        if self.is_critical:
            return half
        return half - math.sqrt(half * half - self.c)

    @property
    def n_eff(self) -> float:
        """Effective dimension of the regularized radial equation, ``d - 2 kappa``."""
        return self.d - 2.0 * self.kappa

    @property
    def sigma(self) -> float:
        """Power of the weight ``r^-sigma`` on the nonlinearity for ``v = r^kappa Q``."""
        return self.kappa * (self.p - 2.0)

    @property
    def mass_critical(self) -> bool:
        pc = mass_critical_exponent(self.d)
        return abs(self.p - pc) <= MASS_CRITICAL_RTOL * pc

    @property
    def q(self) -> Optional[float]:
        """Exponent pairing energy and mass in the supercritical thresholds."""
        d, p = self.d, self.p
        if p <= mass_critical_exponent(d) or self.mass_critical:
            return None
        return (4 * d + 4 * p - 2 * p * d) / (d * p - 2 * d - 4)

    def header(self) -> dict:
        return {"d": self.d, "p": self.p, "c": self.c}


def derive_constants(params: ModelParams) -> DerivedConstants:
    return DerivedConstants(
        c_star=params.c_star,
        theta=params.theta,
        kappa=params.kappa,
        sigma=params.sigma,
        n_eff=params.n_eff,
        q=params.q,
        mass_critical=params.mass_critical,
    )


def surface_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
