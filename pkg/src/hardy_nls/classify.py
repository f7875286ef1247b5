"""Sufficient conditions for global existence or finite-time blow-up.

The verdict compares the initial data with the ground state through the
sharp interpolation constant.  For ``p > 2 + 4/d`` the comparison runs
through ``f(s) = s/2 - s^(p theta/2) / (p C^p)``, which increases on
``[0, s0]`` and decreases afterwards, with ``f(s0) = E(Q) ||Q||^q``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional

from .errors import InvalidParams, ParamsMismatch
from .params import ModelParams
from .profile import RadialProfile

MASS_RTOL = 1e-9


class Verdict(enum.Enum):
    GLOBAL = "Global"
    BLOWUP = "BlowUp"
    INDETERMINATE = "Indeterminate"


class Condition(enum.Enum):
    NONE = "none"
    SUBCRITICAL = "mass-subcritical exponent"
    BELOW_GROUND_MASS = "mass below ground-state mass"
    BELOW_THRESHOLD = "energy and kinetic term below the ground-state threshold"
    NEGATIVE_ENERGY = "negative energy with finite variance"
    ABOVE_THRESHOLD = "energy below and kinetic term above the ground-state threshold"


@dataclass
class ThresholdData:
    params: ModelParams
    c_hgn: float
    ground_energy_scaled: Optional[float]  # E(Q) ||Q||^q
    s0: Optional[float]

    def f(self, s: float) -> float:
        return eval_f(s, self)


def thresholds(ground_state) -> ThresholdData:
    """Threshold data from a computed ground state."""
    params = ground_state.params
    c = ground_state.c_hgn
    q = params.q
    if q is None:
        return ThresholdData(params, c, None, None)
    return ThresholdData(params, c, ground_state.energy * ground_state.mass**q, s0_formula(c, params))


def s0_formula(c_hgn: float, params: ModelParams) -> float:
    """``(C^p / theta)^(2/(p theta - 2))``, the maximizer of ``f``."""
    p, th = params.p, params.theta
    if abs(p * th - 2.0) < 1e-12:
        raise InvalidParams("s0 is undefined in the mass-critical case")
    return (c_hgn**p / th) ** (2.0 / (p * th - 2.0))


def s0_from_ground_state(ground_state) -> float:
    """``<Q, H Q> ||Q||^q``, equal to ``s0`` by the Derrick and Nehari identities."""
    q = ground_state.params.q
    if q is None:
        raise InvalidParams("s0 needs p > 2 + 4/d")
    return ground_state.form_norm_sq * ground_state.mass**q


def eval_f(s: float, th: ThresholdData) -> float:
    if s < 0:
        raise InvalidParams("s must be nonnegative")
    p, theta = th.params.p, th.params.theta
    return 0.5 * s - s ** (p * theta / 2.0) / (p * th.c_hgn**p)


@dataclass
class Classification:
    verdict: Verdict
    condition: Condition
    energy: float
    mass: float
    form_norm_sq: float
    ground_mass: float
    scaled_energy: Optional[float] = None
    scaled_form: Optional[float] = None
    ground_scaled_energy: Optional[float] = None
    s0: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def summary(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "condition": self.condition.value,
            "energy": self.energy,
            "mass": self.mass,
            "form_norm_sq": self.form_norm_sq,
            "ground_mass": self.ground_mass,
        }
        for key in ("scaled_energy", "scaled_form", "ground_scaled_energy", "s0"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        for i, note in enumerate(self.notes):
            out[f"note_{i}"] = note
        return out


def _variance_converged(u0: RadialProfile, rtol: float = 1e-3) -> bool:
    """Does ``int |x|^2 |u|^2`` settle when every other node is dropped?"""
    fine = u0.second_moment()
    coarse_grid = u0.grid.coarsen()
    coarse = RadialProfile(coarse_grid, u0.values[::2], u0.d).second_moment()
    return abs(fine - coarse) <= rtol * max(abs(fine), 1e-300)


def classify(
    u0: RadialProfile,
    params: ModelParams,
    ground_state,
    has_finite_variance: bool = False,
    mass_rtol: float = MASS_RTOL,
) -> Classification:
    """Apply the global-existence and blow-up criteria in a fixed order.

    Masses within ``mass_rtol`` of ``||Q||_2`` count as equal to it, so data
    at exactly the ground-state mass is never declared below it because of
    quadrature noise.
    """
    if ground_state.params != params:
        raise ParamsMismatch(f"ground state is for {ground_state.params}, data for {params}")
    if u0.d != params.d:
        raise ParamsMismatch("profile dimension differs from params")
    mass = u0.l2_norm()
    form = u0.form_norm_sq(params)
    energy = 0.5 * form - u0.lp_norm_p(params.p) / params.p
    gm = ground_state.mass
    out = Classification(Verdict.INDETERMINATE, Condition.NONE, energy, mass, form, gm)
    pc = 2.0 + 4.0 / params.d
    q = params.q
    th = thresholds(ground_state)
    if q is not None:
        out.scaled_energy = energy * mass**q
        out.scaled_form = form * mass**q
        out.ground_scaled_energy = th.ground_energy_scaled
        out.s0 = th.s0

    if has_finite_variance and not _variance_converged(u0):
        out.notes.append("second moment not converged on this grid")

    below_mass = mass < gm * (1.0 - mass_rtol)
    if not params.mass_critical and params.p < pc:
        return _set(out, Verdict.GLOBAL, Condition.SUBCRITICAL)
    if params.mass_critical and below_mass:
        return _set(out, Verdict.GLOBAL, Condition.BELOW_GROUND_MASS)
    if q is not None and out.scaled_energy < th.ground_energy_scaled and out.scaled_form < th.s0:
        return _set(out, Verdict.GLOBAL, Condition.BELOW_THRESHOLD)
    if has_finite_variance and energy < 0:
        return _set(out, Verdict.BLOWUP, Condition.NEGATIVE_ENERGY)
    if (q is not None and has_finite_variance and out.scaled_energy < th.ground_energy_scaled
            and out.scaled_form > th.s0):
        return _set(out, Verdict.BLOWUP, Condition.ABOVE_THRESHOLD)
    if params.mass_critical and abs(mass - gm) <= mass_rtol * gm:
        out.notes.append("mass equals the ground-state mass; only the explicit blow-up family is known here")
    return out


def _set(out: Classification, verdict: Verdict, cond: Condition) -> Classification:
    out.verdict = verdict
    out.condition = cond
    return out
