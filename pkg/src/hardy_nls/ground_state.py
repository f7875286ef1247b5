"""Ground state by shooting on the regularized profile, and the sharp constant.

The positive radial solution of ``H Q + Q = Q^(p-1)`` is found by bisection
on ``v0 = lim r^kappa Q(r)``: too large a ``v0`` makes the profile cross zero,
too small makes it turn back up.  The direction of the dichotomy is read off
the bracket rather than assumed.

In double precision the converged trajectory follows the decaying solution
only until the exponentially growing mode, seeded by round-off, takes over
(around ``r ~ 15-20``).  The outer part of the profile is therefore computed
by integrating inward from ``r_max``, where the decaying solution of the
linearized equation ``v = A r^-nu K_nu(r)`` (``nu = n/2 - 1``) is exact to far
below round-off.  Inward, that solution is the dominant one, so the
integration is stable; ``A`` is fixed by matching ``v`` with the outward
trajectory at a radius where the latter is still clean, and the mismatch of
``v'`` there is kept as a quality diagnostic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import special
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import BracketInvalid, InvalidParams, NoConvergence
from .params import ModelParams, surface_area
from .profile import RadialGrid, RadialProfile
from .radial_ode import ProfileODE, Termination, Trajectory, integrate, seed_series

log = logging.getLogger(__name__)

DEFAULT_BRACKET = (1e-2, 1e2)
DEFAULT_RMAX = 30.0


@dataclass
class QuadratureEstimate:
    value: float
    error: float


@dataclass
class GroundState:
    """Converged shooting result with norms and the sharp HGN constant."""

    params: ModelParams
    v0: float
    bracket: Tuple[float, float]
    grid: RadialGrid
    v: np.ndarray
    vp: np.ndarray
    r_match: float
    tail_amplitude: float
    trajectory: Trajectory
    mass: float
    lp_norm_p: float
    form_norm_sq: float
    energy: float
    c_hgn: float
    errors: dict = field(default_factory=dict)
    tol: float = 1e-12
    match_defect: float = 0.0

    # -- profiles ---------------------------------------------------------
    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def q(self) -> np.ndarray:
        return self.r ** (-self.params.kappa) * self.v

    @property
    def qp(self) -> np.ndarray:
        k = self.params.kappa
        return self.r ** (-k) * (self.vp - k * self.v / self.r)

    @property
    def v_profile(self) -> RadialProfile:
        return RadialProfile(self.grid, self.v, self.params.d, self.vp)

    @property
    def q_profile(self) -> RadialProfile:
        return RadialProfile(self.grid, self.q, self.params.d, self.qp)

    @property
    def mass_sq(self) -> float:
        return self.mass**2

    @property
    def on_trajectory(self) -> np.ndarray:
        """Grid nodes taken from the outward trajectory (the rest come from the inward tail)."""
        return self.r < self.r_match

    def _spline(self):
        if not hasattr(self, "_hermite"):
            self._hermite = CubicHermiteSpline(self.r, self.v, self.vp)
        return self._hermite

    def v_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        ode = ProfileODE.from_params(self.params)
        small = r <= self.r[0]
        tail = r > self.r[-1]
        mid = ~(small | tail)
        if np.any(small):
            out[small] = seed_series_vec(self.v0, r[small], ode)[0]
        if np.any(tail):
            out[tail] = _tail(self.tail_amplitude, r[tail], self.params.n_eff)[0]
        if np.any(mid):
            out[mid] = self._spline()(r[mid])
        return out

    def vp_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        ode = ProfileODE.from_params(self.params)
        small = r <= self.r[0]
        tail = r > self.r[-1]
        mid = ~(small | tail)
        if np.any(small):
            out[small] = seed_series_vec(self.v0, r[small], ode)[1]
        if np.any(tail):
            out[tail] = _tail(self.tail_amplitude, r[tail], self.params.n_eff)[1]
        if np.any(mid):
            out[mid] = self._spline()(r[mid], 1)
        return out

    def q_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return r ** (-self.params.kappa) * self.v_at(r)

    def qp_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        k = self.params.kappa
        return r ** (-k) * (self.vp_at(r) - k * self.v_at(r) / r)

    # -- diagnostics ------------------------------------------------------
    def ode_residual(self, order: int = 8) -> np.ndarray:
        """Residual of the profile equation with ``v''`` differenced from ``v'``."""
        ode = ProfileODE.from_params(self.params)
        vpp = self.grid.derivative(self.vp, order)
        return ode.residual(self.r, self.v, self.vp, vpp)

    def scaled_residual(self, order: int = 8) -> np.ndarray:
        """Residual divided by ``max(1, largest term)`` node by node.

        Near the origin the individual terms grow like ``r^-sigma`` and the
        absolute residual of any floating-point solution grows with them.
        """
        ode = ProfileODE.from_params(self.params)
        r, v, vp = self.r, self.v, self.vp
        vpp = self.grid.derivative(vp, order)
        terms = np.stack([
            np.abs(vpp), (ode.n - 1) * np.abs(vp) / r, np.abs(v),
            r ** (-ode.sigma) * np.abs(v) ** (ode.p - 1),
        ])
        res = ode.residual(r, v, vp, vpp)
        return np.abs(res) / np.maximum(1.0, terms.max(axis=0))

    def nehari_defect(self) -> float:
        return (self.form_norm_sq + self.mass**2 - self.lp_norm_p) / self.lp_norm_p

    def derrick_defect(self) -> float:
        return (self.form_norm_sq - self.params.theta * self.lp_norm_p) / self.lp_norm_p

    def summary(self) -> dict:
        alpha, beta = el_scaling(self.c_hgn, self.params, mass=self.mass)
        out = {
            "v0": self.v0,
            "bracket_lo": self.bracket[0],
            "bracket_hi": self.bracket[1],
            "mass": self.mass,
            "mass_sq": self.mass**2,
            "lp_norm_p": self.lp_norm_p,
            "form_norm_sq": self.form_norm_sq,
            "energy": self.energy,
            "c_hgn": self.c_hgn,
            "alpha": alpha,
            "beta": beta,
            "r_match": self.r_match,
            "match_defect": self.match_defect,
            "nehari_defect": self.nehari_defect(),
            "derrick_defect": self.derrick_defect(),
        }
        for k, v in self.errors.items():
            out[f"{k}_quad_err"] = v
        return out


def seed_series_vec(v0, r, ode: ProfileODE):
    s, n = ode.sigma, ode.n
    nl = v0 ** (ode.p - 1.0)
    v = v0 + v0 * r**2 / (2.0 * n) - nl * r ** (2.0 - s) / ((2.0 - s) * (n - s))
    vp = v0 * r / n - nl * r ** (1.0 - s) / (n - s)
    return v, vp


def _tail(amplitude, r, n):
    """Decaying solution ``A r^-nu K_nu(r)`` of ``v'' + (n-1)/r v' = v`` and its derivative."""
    nu = n / 2.0 - 1.0
    r = np.asarray(r, dtype=float)
    # exponentially scaled Bessel functions avoid underflow far out
    e = np.exp(-r)
    v = amplitude * r ** (-nu) * special.kve(nu, r) * e
    vp = -amplitude * r ** (-nu) * special.kve(nu + 1.0, r) * e
    return v, vp


def _classify(ode, v0, r_max, tol):
    return integrate(ode, v0, r_max, tol).termination


def _bisect(ode, lo, hi, r_max, tol, int_tol, max_iter):
    lo, hi = min(lo, hi), max(lo, hi)
    if not (0 < lo < hi):
        raise BracketInvalid(f"bracket ({lo:g}, {hi:g}) must be two distinct positive values")
    f_lo = _classify(ode, lo, r_max, int_tol)
    f_hi = _classify(ode, hi, r_max, int_tol)
    if f_lo == f_hi or Termination.REACHED_RMAX in (f_lo, f_hi):
        raise BracketInvalid(f"bracket ({lo:g}, {hi:g}) gives {f_lo.name} at both ends")
    for _ in range(max_iter):
        if hi - lo < tol:
            # keep narrowing while representable; tol is only an upper bound
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi or hi - lo <= 4 * np.spacing(hi):
                return lo, hi, f_lo, f_hi
        mid = math.sqrt(lo * hi) if hi > 4 * lo else 0.5 * (lo + hi)
        traj = integrate(ode, mid, r_max, int_tol)
        f_mid = traj.termination
        if f_mid == Termination.REACHED_RMAX:
            if abs(traj.v[-1]) < 1e-8:
                return mid, mid, f_lo, f_hi
            # a nontrivial stationary point such as v = const; step off it
            mid = lo + 0.618 * (hi - lo)
            f_mid = _classify(ode, mid, r_max, int_tol)
        if f_mid == f_lo:
            lo = mid
        elif f_mid == f_hi:
            hi = mid
        else:
            raise NoConvergence(f"ambiguous termination at v0={mid!r}")
    if hi - lo < tol:
        return lo, hi, f_lo, f_hi
    raise NoConvergence(f"bisection did not reach width {tol:g} in {max_iter} iterations")


def find_bracket(ode, r_max, int_tol, bracket=DEFAULT_BRACKET, widen=6):
    lo, hi = bracket
    for _ in range(widen + 1):
        f_lo = _classify(ode, lo, r_max, int_tol)
        f_hi = _classify(ode, hi, r_max, int_tol)
        if f_lo != f_hi and Termination.REACHED_RMAX not in (f_lo, f_hi):
            return lo, hi
        lo, hi = lo / 10.0, hi * 10.0
    raise BracketInvalid(f"no sign change found between {lo:g} and {hi:g}")


def _match_index(r, v, level=1e-3):
    """First node past ``r = 1`` where ``v`` has dropped below ``level * v[0]``."""
    idx = np.nonzero((r > 1.0) & (v < level * v[0]) & (v > 0))[0]
    if idx.size == 0:
        raise NoConvergence("outward trajectory never decayed enough to match a tail")
    return int(idx[0])


def _inward(ode: ProfileODE, amplitude, r_nodes, tol):
    """Integrate the full equation from ``r_nodes[-1]`` down to ``r_nodes[0]``."""
    v_end, vp_end = _tail(amplitude, r_nodes[-1:], ode.n)

    def rhs(r, y):
        return (y[1], ode.rhs(r, y[0], y[1]))

    scale = abs(v_end[0])
    sol = solve_ivp(
        rhs, (r_nodes[-1], r_nodes[0]), [v_end[0], vp_end[0]], method="DOP853",
        t_eval=r_nodes[::-1], rtol=tol, atol=1e-6 * tol * scale,
    )
    if not sol.success:
        raise NoConvergence(f"inward tail integration failed: {sol.message}")
    return sol.y[0][::-1], sol.y[1][::-1]


def _match_tail(ode: ProfileODE, r, v_out, i_match, tol, max_iter=30):
    """Amplitude of the inward solution that meets ``v_out`` at ``r[i_match]``."""
    nodes = r[i_match:]
    nu = ode.n / 2.0 - 1.0
    rm = r[i_match]
    target = v_out[i_match]

    def miss(a):
        vi, vpi = _inward(ode, a, nodes, tol)
        return vi[0] - target, vi, vpi

    a0 = target / (rm ** (-nu) * special.kve(nu, rm) * np.exp(-rm))
    a1 = a0 * (1.0 - 1e-3)
    f0, vi, vpi = miss(a0)
    f1, vi, vpi = miss(a1)
    for _ in range(max_iter):
        if abs(f1) <= 4 * np.finfo(float).eps * abs(target) or f1 == f0:
            return a1, vi, vpi
        a0, a1 = a1, a1 - f1 * (a1 - a0) / (f1 - f0)
        f0 = f1
        f1, vi, vpi = miss(a1)
    if abs(f1) <= 1e-12 * abs(target):
        return a1, vi, vpi
    raise NoConvergence("tail amplitude secant iteration did not converge")


def shoot(
    params: ModelParams,
    bracket: Optional[Tuple[float, float]] = None,
    tol: float = 1e-12,
    r_max: float = DEFAULT_RMAX,
    grid: Optional[RadialGrid] = None,
    int_tol: float = 1e-13,
    max_iter: int = 400,
) -> GroundState:
    """Shoot for the ground state and compute its norms.

    ``tol`` bounds the final bracket width on ``v0``; bisection keeps going
    until the bracket can no longer be split in floating point, so the
    achieved width is usually far smaller.
    """
    if tol <= 0:
        raise InvalidParams("tol must be positive")
    ode = ProfileODE.from_params(params)
    if grid is None:
        grid = RadialGrid.softplus(1e-14, r_max, 0.01)
    probe_rmax = max(r_max, 40.0)
    if bracket is None:
        bracket = find_bracket(ode, probe_rmax, int_tol)
    lo, hi, f_lo, f_hi = _bisect(ode, bracket[0], bracket[1], probe_rmax, tol, int_tol, max_iter)
    v0 = 0.5 * (lo + hi)

    traj = integrate(ode, v0, grid.r[-1], int_tol, r_out=grid.r, r_seed=None)
    r = grid.r
    on = traj.on_output
    r_seed = traj.r[0]
    v = np.empty_like(r)
    vp = np.empty_like(r)
    below = r <= r_seed
    v[below], vp[below] = seed_series_vec(v0, r[below], ode)
    n_traj = int(np.count_nonzero(on))
    start = int(np.count_nonzero(below))
    # nodes hit by the integrator, in order
    v[start:start + n_traj] = traj.v[on]
    vp[start:start + n_traj] = traj.vp[on]
    covered = start + n_traj
    i_match = _match_index(r[:covered], v[:covered])
    amp, tv, tvp = _match_tail(ode, r, v, i_match, int_tol)
    match_defect = abs(tvp[0] - vp[i_match]) / abs(vp[i_match])
    v[i_match:] = tv
    vp[i_match:] = tvp
    r_match = float(r[i_match])
    log.debug("v0=%r matched tail at r=%g, v' defect %.2e", v0, r_match, match_defect)

    mass_sq, e_mass = _quad(grid, params, v ** 2, params.d - 1 - 2 * params.kappa)
    lp, e_lp = _quad(grid, params, np.abs(v) ** params.p, params.d - 1 - params.p * params.kappa)
    form, e_form = _quad(grid, params, vp**2, params.d - 1 - 2 * params.kappa)
    mass = math.sqrt(mass_sq)
    energy = 0.5 * form - lp / params.p
    c = sharp_constant(mass, params)
    return GroundState(
        params=params, v0=v0, bracket=(lo, hi), grid=grid, v=v, vp=vp,
        r_match=r_match, tail_amplitude=float(amp), trajectory=traj,
        mass=mass, lp_norm_p=lp, form_norm_sq=form, energy=energy, c_hgn=c,
        errors={"mass_sq": e_mass, "lp_norm_p": e_lp, "form_norm_sq": e_form}, tol=tol,
        match_defect=float(match_defect),
    )


def _quad(grid: RadialGrid, params: ModelParams, f, power):
    """``omega int f r^power dr`` with a grid-halving error estimate."""
    omega = surface_area(params.d)
    g = f * grid.r**power
    fine = omega * float(np.sum(grid.line_weights() * g))
    coarse_grid = grid.coarsen()
    coarse = omega * float(np.sum(coarse_grid.line_weights() * g[::2]))
    return fine, abs(fine - coarse)


def mass_integral_critical(v_profile: RadialProfile, params: ModelParams) -> float:
    """``||Q||_2^2 = omega_d int v^2 r dr`` for ``v = r^((d-2)/2) Q``; critical case only."""
    if not params.is_critical:
        raise InvalidParams("mass_integral_critical requires c = c_star")
    r = v_profile.r
    omega = surface_area(params.d)
    return float(omega * np.sum(v_profile.grid.line_weights() * np.abs(v_profile.values) ** 2 * r))


def sharp_constant(mass: float, params: ModelParams) -> float:
    """Sharp Hardy-Gagliardo-Nirenberg constant from ``||Q||_2``."""
    if mass <= 0:
        raise InvalidParams("mass must be positive")
    d, p, th = params.d, params.p, params.theta
    c = mass ** ((p - 2) / p) * (1 - th) ** (1 / p) * (th / (1 - th)) ** (d * (p - 2) / (4 * p))
    if params.mass_critical:
        special_form = (d / (d + 2)) ** (d / (2 * (d + 2))) * mass ** (2 / (d + 2))
        if abs(c - special_form) > 1e-12 * special_form:
            raise AssertionError(f"mass-critical constant mismatch {c!r} vs {special_form!r}")
    return c


def sharp_constant_mass_critical(mass: float, d: int) -> float:
    return (d / (d + 2)) ** (d / (2 * (d + 2))) * mass ** (2 / (d + 2))


def el_scaling(c_hgn: float, params: ModelParams, mass: Optional[float] = None):
    """Amplitude and dilation taking ``Q`` to the normalized HGN optimizer ``alpha Q(beta x)``."""
    th, p, d = params.theta, params.p, params.d
    beta = math.sqrt((1 - th) / th)
    alpha = (1 - th) ** (1 / (p - 2)) * c_hgn ** (-p / (p - 2))
    if mass is not None:
        implied = beta ** (d / 2) / alpha
        if abs(implied - mass) > 1e-10 * mass:
            raise AssertionError(f"scaling inconsistent with mass: {implied!r} vs {mass!r}")
    return alpha, beta


def mass_from_constant(c_hgn: float, params: ModelParams) -> float:
    """Invert the sharp-constant formula for ``||Q||_2``."""
    th, p, d = params.theta, params.p, params.d
    return ((1 - th) / th) ** (d / 4) * (1 - th) ** (-1 / (p - 2)) * c_hgn ** (p / (p - 2))


def tail_check(q_profile: RadialProfile, m: float) -> float:
    """``max r^m Q(r)`` over the outer third of the grid."""
    d = q_profile.d
    if m <= (d + 2) / 2:
        raise InvalidParams(f"m must exceed (d+2)/2 = {(d + 2) / 2}")
    r = q_profile.r
    outer = r >= r[0] + (r[-1] - r[0]) * 2.0 / 3.0
    return float(np.max(r[outer] ** m * np.abs(q_profile.values[outer])))


def bisect_v0(params: ModelParams, bracket: Tuple[float, float], tol: float = 1e-12,
              r_max: float = 40.0, int_tol: float = 1e-13, max_iter: int = 400) -> float:
    """Shooting parameter from one bracket, without building the profile."""
    ode = ProfileODE.from_params(params)
    lo, hi, _, _ = _bisect(ode, bracket[0], bracket[1], r_max, tol, int_tol, max_iter)
    return 0.5 * (lo + hi)


def uniqueness_probe(params: ModelParams, brackets, tol: float = 1e-12, workers: Optional[int] = None) -> np.ndarray:
    """Converged ``v0`` from each bracket, computed concurrently."""
    from .parallel import map_threads

    return np.array(map_threads(lambda b: bisect_v0(params, b, tol), brackets, workers))
