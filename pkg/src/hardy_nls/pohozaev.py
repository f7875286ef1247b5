"""Generalized Pohozaev functional for the regularized profile equation.

For ``v'' + (n-1)/r v' - v + r^-sigma v^(p-1) = 0`` the functional

    J(r, v) = a v'^2 / 2 + b v v' + (c - a) v^2 / 2 + a r^-sigma v^p / p

obeys ``dJ/dr = G v^2`` with ``G = b + c'/2 - a'/2`` when

    a = r^alpha,              alpha = 2 (p (n-1) + sigma) / (p + 2),
    b = beta r^(alpha-1),     beta  = n - 1 - alpha/2,
    c = beta (n - alpha) r^(alpha-2).

In the critical case (``n = 2``) with ``K = 2d + 2p - dp`` this is
``a = r^((d(p-2)+4)/(p+2))``, ``b = K/(2(p+2)) r^((d-1)(p-2)/(p+2))`` and
``c = K^2/(2(p+2)^2) r^(-K/(p+2))``.  The ``PRINTED`` variant keeps a second,
commonly quoted set of closed forms in which the exponent of ``c`` has
denominator ``d + 2`` and the second term of ``G`` has ``2(p+2)^3`` in place
of ``4(p+2)^3``; it does not satisfy the identity and is kept for comparison.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import GridTooCoarse, InvalidParams
from .params import ModelParams
from .profile import RadialGrid


class Variant(enum.Enum):
    CONSISTENT = "consistent"
    PRINTED = "printed"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        aliases = {"consistent": cls.CONSISTENT, "consistentexponent": cls.CONSISTENT,
                   "printed": cls.PRINTED, "asprinted": cls.PRINTED}
        if text not in aliases:
            raise InvalidParams(f"unknown variant {value!r}")
        return aliases[text]


def k_const(params: ModelParams) -> float:
    """``d + 2 - (d-2)(p-1)``, equal to ``2d + 2p - dp``."""
    d, p = params.d, params.p
    return d + 2 - (d - 2) * (p - 1)


def exponents(params: ModelParams) -> Tuple[float, float]:
    """``(alpha, beta)`` of the consistent coefficients."""
    n, s, p = params.n_eff, params.sigma, params.p
    alpha = 2.0 * (p * (n - 1.0) + s) / (p + 2.0)
    return alpha, n - 1.0 - alpha / 2.0


def eval_coeffs(params: ModelParams, r, variant=Variant.CONSISTENT):
    """Return ``(a, b, c, G)`` at radius ``r`` (scalar or array)."""
    variant = Variant.parse(variant)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InvalidParams("r must be positive")
    if variant is Variant.CONSISTENT:
        n = params.n_eff
        alpha, beta = exponents(params)
        a = r**alpha
        b = beta * r ** (alpha - 1)
        c = beta * (n - alpha) * r ** (alpha - 2)
        g = (beta - alpha / 2) * r ** (alpha - 1) + 0.5 * beta * (n - alpha) * (alpha - 2) * r ** (alpha - 3)
    else:
        d, p = params.d, params.p
        k = k_const(params)
        e_b = (d - 1) * (p - 2) / (p + 2)
        a = r ** ((d * (p - 2) + 4) / (p + 2))
        b = k / (2 * (p + 2)) * r**e_b
        c = k**2 / (2 * (p + 2) ** 2) * r ** (-k / (d + 2))
        g = -(d - 1) * (p - 2) / (p + 2) * r**e_b - k**3 / (2 * (p + 2) ** 3) * r ** (
            -(d + 5 - (d - 3) * (p - 1)) / (p + 2)
        )
    return a, b, c, g


def eval_coeff_derivatives(params: ModelParams, r, variant=Variant.CONSISTENT):
    """Closed-form ``a'`` and ``c'`` for the variant, used to test ``G = b + c'/2 - a'/2``."""
    variant = Variant.parse(variant)
    r = np.asarray(r, dtype=float)
    if variant is Variant.CONSISTENT:
        n = params.n_eff
        alpha, beta = exponents(params)
        da = alpha * r ** (alpha - 1)
        dc = beta * (n - alpha) * (alpha - 2) * r ** (alpha - 3)
    else:
        d, p = params.d, params.p
        k = k_const(params)
        ea = (d * (p - 2) + 4) / (p + 2)
        ec = -k / (d + 2)
        da = ea * r ** (ea - 1)
        dc = k**2 / (2 * (p + 2) ** 2) * ec * r ** (ec - 1)
    return da, dc


def eval_J(params: ModelParams, r, v, v_prime, variant=Variant.CONSISTENT):
    a, b, c, _ = eval_coeffs(params, r, variant)
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    vp = np.asarray(v_prime, dtype=float)
    return (0.5 * a * vp**2 + b * vp * v + 0.5 * (c - a) * v**2
            + a * r ** (-params.sigma) * np.abs(v) ** params.p / params.p)


@dataclass
class PohozaevReport:
    variant: Variant
    r: np.ndarray
    J: np.ndarray
    G: np.ndarray
    gv2: np.ndarray
    dJ: np.ndarray
    residual: np.ndarray
    relative_residual: np.ndarray
    interior: np.ndarray
    max_relative_residual: float
    coarse_max_relative_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_relative_residual < self.tol)

    def j_positive(self) -> bool:
        return bool(np.all(self.J[self.interior] > 0))

    def j_decreasing(self, skip_fraction: float = 0.0) -> bool:
        """Whether ``J`` is non-increasing across interior nodes, after ``skip_fraction`` of the grid."""
        idx = np.nonzero(self.interior)[0]
        start = max(idx[0], int(skip_fraction * self.r.size))
        seg = self.J[start:idx[-1] + 1]
        return bool(np.all(np.diff(seg) <= 0))

    def end_values(self) -> Tuple[float, float]:
        return float(self.J[0]), float(self.J[-1])

    def to_rows(self):
        for row in zip(self.r, self.J, self.gv2, self.residual):
            yield tuple(float(x) for x in row)


def _relative_residual(grid: RadialGrid, J, gv2, order):
    dj = grid.derivative(J, order)
    res = np.abs(dj - gv2)
    # scale by the size of the terms being compared; floor avoids 0/0 on v = 0
    scale = np.maximum(np.abs(gv2), np.abs(dj))
    floor = 1e-300 + 1e-12 * np.max(scale) if np.any(scale > 0) else 1.0
    return dj, res, res / np.maximum(scale, floor)


def verify_identity(
    params: ModelParams,
    r,
    v,
    vp,
    variant=Variant.CONSISTENT,
    grid: Optional[RadialGrid] = None,
    tol: float = 1e-5,
    order: int = 4,
    interior_fraction: float = 0.9,
) -> PohozaevReport:
    """Check ``dJ/dr = G v^2`` with finite differences of ``J`` along a solution.

    ``dJ/dr`` is differenced in the grid parameter (fourth order by default).
    The maximum relative residual is taken over the central
    ``interior_fraction`` of the nodes.  The same computation on every other
    node gives a second estimate; when the residual shrinks under that
    refinement yet stays above ``tol``, the differences rather than the
    identity are at fault and ``GridTooCoarse`` is raised.
    """
    variant = Variant.parse(variant)
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    vp = np.asarray(vp, dtype=float)
    if grid is None:
        grid = RadialGrid.from_nodes(r)
    J = eval_J(params, r, v, vp, variant)
    G = eval_coeffs(params, r, variant)[3]
    gv2 = G * v**2
    dj, res, rel = _relative_residual(grid, J, gv2, order)
    n = r.size
    cut = int(round(0.5 * (1 - interior_fraction) * n))
    interior = np.zeros(n, dtype=bool)
    interior[cut:n - cut] = True
    max_rel = float(np.max(rel[interior])) if np.any(interior) else 0.0

    cg = grid.coarsen()
    _, _, crel = _relative_residual(cg, J[::2], gv2[::2], order)
    cint = interior[::2]
    coarse_max = float(np.max(crel[cint])) if np.any(cint) else 0.0
    if max_rel >= tol and coarse_max > 4.0 * max_rel:
        raise GridTooCoarse(
            f"finite-difference error dominates: residual {max_rel:.3g} (coarse {coarse_max:.3g})"
        )
    return PohozaevReport(variant, r, J, G, gv2, dj, res, rel, interior, max_rel, coarse_max, tol)


def verify_ground_state(gs, variant=Variant.CONSISTENT, **kw) -> PohozaevReport:
    """``verify_identity`` along a computed ground state."""
    return verify_identity(gs.params, gs.r, gs.v, gs.vp, variant, grid=gs.grid, **kw)
