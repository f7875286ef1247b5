"""Outward integration of the regularized ground-state profile equation.

With ``v = r^kappa Q`` the radial ground-state equation becomes

    v'' + (n-1)/r v' - v + r^-sigma v^(p-1) = 0,   v(0) = v0 > 0,

where ``n = d - 2 kappa`` and ``sigma = kappa (p-2)``.  In the critical case
``n = 2`` and ``sigma = (d-2)(p-2)/2``.  The singular weight at ``r = 0`` is
bridged by a two-term series, after which an embedded Dormand-Prince 5(4)
pair with step-size control takes over.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import InvalidParams, StepFailure
from .params import ModelParams


class Termination(enum.IntEnum):
    REACHED_RMAX = 0
    ZERO_CROSSING = 1
    TURNED_UP = 2
    STEP_FAILURE = 3


@dataclass(frozen=True)
class ProfileODE:
    """Coefficients of ``v'' + (n-1)/r v' - v + r^-sigma v^(p-1) = 0``."""

    sigma: float
    p: float
    n: float = 2.0

    def __post_init__(self):
        if not (self.sigma < 2.0 and self.sigma < self.n):
            raise InvalidParams(f"weight exponent sigma={self.sigma} must be < min(2, n)")

    @classmethod
    def from_params(cls, params: ModelParams) -> "ProfileODE":
        return cls(sigma=params.sigma, p=params.p, n=params.n_eff)

    def rhs(self, r, v, vp):
        """Second derivative implied by the equation."""
        r = np.asarray(r, dtype=float)
        return -(self.n - 1.0) * vp / r + v - r ** (-self.sigma) * np.abs(v) ** (self.p - 1.0) * np.sign(v)

    def residual(self, r, v, vp, vpp):
        return vpp + (self.n - 1.0) * vp / r - v + r ** (-self.sigma) * np.abs(v) ** (self.p - 1.0) * np.sign(v)


@dataclass
class Trajectory:
    r: np.ndarray
    v: np.ndarray
    vp: np.ndarray
    termination: Termination
    on_output: np.ndarray  # True where r coincides with a requested output node

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "v", "v_prime"])
            for row in zip(self.r, self.v, self.vp):
                writer.writerow([repr(float(x)) for x in row])


def seed_series(v0: float, r_seed: float, ode: ProfileODE):
    """Two-term expansion of ``(v, v')`` at a small radius.

    ``v ~ v0 + v0 r^2/(2n) - v0^(p-1) r^(2-sigma) / ((2-sigma)(n-sigma))``.
    For ``n = 2`` this is the familiar ``v0 r^2/4 - v0^(p-1) r^(2-sigma)/(2-sigma)^2``.
    """
    if v0 <= 0:
        raise InvalidParams("v0 must be positive")
    s, n = ode.sigma, ode.n
    if s >= 2.0:
        raise InvalidParams("sigma must be < 2")
    nl = v0 ** (ode.p - 1.0)
    v = v0 + v0 * r_seed**2 / (2.0 * n) - nl * r_seed ** (2.0 - s) / ((2.0 - s) * (n - s))
    vp = v0 * r_seed / n - nl * r_seed ** (1.0 - s) / (n - s)
    return v, vp


def auto_seed_radius(v0: float, ode: ProfileODE, tol: float) -> float:
    """Largest ``r`` whose first series corrections stay below ``1e-3 tol v0``."""
    target = 1e-3 * tol * v0
    s, n = ode.sigma, ode.n

    def size(r):
        return v0 * r**2 / (2 * n) + v0 ** (ode.p - 1) * r ** (2 - s) / ((2 - s) * (n - s))

    lo, hi = 1e-300, 1.0
    if size(hi) < target:
        return hi
    # geometric bisection; size is increasing in r
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if size(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-6:
            break
    return float(lo)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
        [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
)
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@njit(cache=True, nogil=True)
def _f(r, v, vp, nm1, sigma, pm1):
    av = abs(v)
    nl = r ** (-sigma) * av**pm1
    if v < 0:
        nl = -nl
    return vp, -nm1 * vp / r + v - nl


@njit(cache=True, nogil=True)
def _dopri(r0, v0, vp0, r_max, r_out, nm1, sigma, pm1, rtol, atol, stop_events, cap):
    rs = np.empty(cap)
    vs = np.empty(cap)
    vps = np.empty(cap)
    outs = np.zeros(cap, dtype=np.bool_)
    rs[0] = r0
    vs[0] = v0
    vps[0] = vp0
    k = 1
    r = r0
    v = v0
    vp = vp0
    h = 0.01 * r0
    j = 0
    while j < r_out.size and r_out[j] <= r0:
        j += 1
    kv = np.empty(7)
    kp = np.empty(7)
    flag = 0
    while r < r_max:
        target = r_max
        if j < r_out.size and r_out[j] < target:
            target = r_out[j]
        landing = False
        h_free = h
        if r + h >= target:
            h = target - r
            landing = True
        if h < 1e-13 * r:
            flag = 3
            break
        for s in range(7):
            vs_ = v
            vps_ = vp
            for m in range(s):
                vs_ += h * _A[s, m] * kv[m]
                vps_ += h * _A[s, m] * kp[m]
            a, b = _f(r + _C[s] * h, vs_, vps_, nm1, sigma, pm1)
            kv[s] = a
            kp[s] = b
        vn = v
        vpn = vp
        ev = 0.0
        ep = 0.0
        for s in range(7):
            vn += h * _B5[s] * kv[s]
            vpn += h * _B5[s] * kp[s]
            ev += h * _E[s] * kv[s]
            ep += h * _E[s] * kp[s]
        sv = atol + rtol * max(abs(v), abs(vn))
        sp = atol + rtol * max(abs(vp), abs(vpn))
        err = np.sqrt(0.5 * ((ev / sv) ** 2 + (ep / sp) ** 2))
        if err <= 1.0:
            r = target if landing else r + h
            v = vn
            vp = vpn
            if k >= cap:
                flag = 3
                break
            rs[k] = r
            vs[k] = v
            vps[k] = vp
            if landing and j < r_out.size and r == r_out[j]:
                outs[k] = True
                j += 1
            k += 1
            if stop_events:
                if v <= 0.0:
                    flag = 1
                    break
                # rising while below the nonlinear equilibrium v = r^(sigma/(p-2))
                if vp > 0.0 and v ** (pm1 - 1.0) < r**sigma:
                    flag = 2
                    break
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** (-0.2)))
            if landing:
                # a truncated landing step says nothing about the natural size
                h = max(h * fac, min(h_free, 5.0 * h))
            else:
                h = h * fac
        else:
            if not np.isfinite(err):
                h = 0.1 * h
            else:
                h = h * max(0.1, 0.9 * err ** (-0.2))
    return rs[:k], vs[:k], vps[:k], outs[:k], flag


def integrate(
    ode: ProfileODE,
    v0: float,
    r_max: float,
    tol: float = 1e-12,
    r_out: Optional[Sequence[float]] = None,
    r_seed: Optional[float] = None,
    stop_on_events: bool = True,
    max_records: int = 2_000_000,
) -> Trajectory:
    """Integrate outward from the series seed until a termination event.

    Termination is ``ZERO_CROSSING`` the first time ``v <= 0``,
    ``TURNED_UP`` the first time ``v' > 0`` while ``v`` lies below the
    nonlinear equilibrium ``r^(sigma/(p-2))`` (``v < 1`` when ``sigma = 0``), or
    ``REACHED_RMAX``.  Nodes listed in ``r_out`` are hit exactly and marked in
    ``Trajectory.on_output``.
    """
    if v0 <= 0:
        raise InvalidParams("v0 must be positive")
    if tol <= 0:
        raise InvalidParams("tol must be positive")
    if r_seed is None:
        r_seed = auto_seed_radius(v0, ode, tol)
    if r_max <= r_seed:
        raise InvalidParams("r_max must exceed the seed radius")
    v_s, vp_s = seed_series(v0, r_seed, ode)
    out = np.asarray(r_out if r_out is not None else [], dtype=float)
    if out.size and np.any(np.diff(out) <= 0):
        raise InvalidParams("r_out must be strictly increasing")
    rs, vs, vps, outs, flag = _dopri(
        float(r_seed), float(v_s), float(vp_s), float(r_max), out,
        float(ode.n - 1.0), float(ode.sigma), float(ode.p - 1.0),
        float(tol), float(tol * 1e-3), bool(stop_on_events), int(max_records),
    )
    if flag == 3:
        raise StepFailure(f"step size underflow near r={rs[-1]:.6g} (v0={v0!r})")
    return Trajectory(rs, vs, vps, Termination(flag), outs)


def terminal_flag(ode: ProfileODE, v0: float, r_max: float, tol: float) -> Termination:
    return integrate(ode, v0, r_max, tol).termination
