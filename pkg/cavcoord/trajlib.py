#! /usr/bin/env python

"""
Library of functions for the unconstrained energy-optimal trajectory family

    u(t) = 6 a t + 2 b
    v(t) = 3 a t^2 + 2 b t + c
    p(t) = a t^3 + b t^2 + c t + d

Coefficients of a CubicTrajectory are stored relative to its own t_start
(local time s = t - t_start), which keeps boundary residuals near machine
precision when the simulation clock is in the hundreds of seconds.
absolute_coeffs() gives the constants in absolute time.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.optimize as optimization

from cavcoord.errors import ConfigError, TrajectoryDomainError, InfeasibleWindowError, EmptyWindowError

logger = logging.getLogger(__name__)

#Slack when comparing times against a validity interval (s)
domain_tol = 1e-9
#Slack on the u and v bounds
bound_tol = 1e-9
#Time trajectory root finding (s)
root_xtol = 1e-12
#Exit-time window endpoints (s)
window_tol = 1e-6
#Grid sizes tried when bracketing the exit-time window
window_grids = (101, 1001, 10001)

#Boundary conditions in normalized time sigma = s/T:
#p(0) = d, T*v(0) = gamma, p(1) = alpha + beta + gamma + d, T^2*u(1) = 6 alpha + 2 beta
_bc_matrix = np.array([[0., 0., 0., 1.],
                       [0., 0., 1., 0.],
                       [1., 1., 1., 1.],
                       [6., 2., 0., 0.]])


@dataclass(frozen=True)
class VehicleLimits:
    u_min: float
    u_max: float
    v_min: float
    v_max: float

    def __post_init__(self):
        if not self.u_min < 0 < self.u_max:
            raise ConfigError("Control limits must satisfy u_min < 0 < u_max, got [%s, %s]" % (self.u_min, self.u_max))
        if not 0 < self.v_min <= self.v_max:
            raise ConfigError("Speed limits must satisfy 0 < v_min <= v_max, got [%s, %s]" % (self.v_min, self.v_max))


@dataclass(frozen=True)
class CubicTrajectory:
    """Committed motion plan p(t) = a s^3 + b s^2 + c s + d, s = t - t_start, valid on [t_start, t_end]
    """
    a: float
    b: float
    c: float
    d: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise TrajectoryDomainError("Trajectory needs t_start < t_end, got [%s, %s]" % (self.t_start, self.t_end))

    @property
    def duration(self):
        return self.t_end - self.t_start

    def position_coeffs(self, origin=None):
        """Position polynomial (highest power first) in time relative to origin (default t_start)"""
        if origin is None or origin == self.t_start:
            return np.array([self.a, self.b, self.c, self.d])
        #Taylor shift by h
        h = origin - self.t_start
        a, b, c, d = self.a, self.b, self.c, self.d
        return np.array([a, 3*a*h + b, (3*a*h + 2*b)*h + c, ((a*h + b)*h + c)*h + d])

    def speed_coeffs(self, origin=None):
        return np.polyder(self.position_coeffs(origin))

    def control_coeffs(self, origin=None):
        return np.polyder(self.position_coeffs(origin), 2)

    def absolute_coeffs(self):
        """(a, b, c, d) of the cubic written in absolute time"""
        return tuple(float(x) for x in self.position_coeffs(origin=0.0))


@dataclass(frozen=True)
class ExitTimeWindow:
    lower: float
    upper: float

    @property
    def size(self):
        return self.upper - self.lower

    @property
    def is_empty(self):
        return self.lower > self.upper


def solve_cubic(t0, p0, v0, tf, pf):
    """Cubic meeting p(t0)=p0, v(t0)=v0, p(tf)=pf, u(tf)=0

    The same solve serves entry planning and replanning from an observed state
    """
    T = tf - t0
    if not T > 0:
        raise TrajectoryDomainError("Singular boundary-value system: tf (%s) must exceed t0 (%s)" % (tf, t0))
    alpha, beta, gamma, d = np.linalg.solve(_bc_matrix, np.array([p0, v0*T, pf, 0.0]))
    return CubicTrajectory(a=float(alpha/T**3), b=float(beta/T**2), c=float(gamma/T), d=float(d), \
            t_start=float(t0), t_end=float(tf))


def _check_domain(traj, t):
    if t < traj.t_start - domain_tol or t > traj.t_end + domain_tol:
        raise TrajectoryDomainError("t=%s outside trajectory interval [%s, %s]" % (t, traj.t_start, traj.t_end))


def evaluate(traj, t):
    """Position, speed and control input at t"""
    _check_domain(traj, t)
    s = t - traj.t_start
    a, b, c, d = traj.a, traj.b, traj.c, traj.d
    p = ((a*s + b)*s + c)*s + d
    v = (3*a*s + 2*b)*s + c
    u = 6*a*s + 2*b
    return float(p), float(v), float(u)


def evaluate_many(traj, t):
    """Vectorized evaluate for an array of times (no domain check)"""
    s = np.asarray(t, dtype=float) - traj.t_start
    a, b, c, d = traj.a, traj.b, traj.c, traj.d
    p = ((a*s + b)*s + c)*s + d
    v = (3*a*s + 2*b)*s + c
    u = 6*a*s + 2*b
    return p, v, u


def _real_roots(coeffs):
    """Real roots of a polynomial of degree <= 2 (highest power first)"""
    coeffs = np.trim_zeros(np.atleast_1d(np.asarray(coeffs, dtype=float)), 'f')
    if coeffs.size <= 1:
        return []
    if coeffs.size == 2:
        return [-coeffs[1]/coeffs[0]]
    if coeffs.size > 3:
        r = np.roots(coeffs)
        return sorted(float(x.real) for x in r if abs(x.imag) <= 1e-12*max(1.0, abs(x.real)))
    a, b, c = coeffs
    disc = b*b - 4*a*c
    if disc < 0:
        return []
    #Numerically stable form of the quadratic formula
    q = -0.5*(b + np.copysign(np.sqrt(disc), b))
    if q == 0:
        return [0.0]
    return sorted([q/a, c/q])


def poly_extremum_on_interval(coeffs, interval):
    """Maximum of a polynomial of degree <= 3 on a closed interval

    Candidates are the interval ends and the real critical points inside.
    Ties go to the earliest t.

    Returns:
    (t_at_max, max_value)
    """
    t1, t2 = float(interval[0]), float(interval[1])
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if t2 <= t1:
        return t1, float(np.polyval(coeffs, t1))
    cand = [t1, t2]
    if coeffs.size > 1:
        cand.extend(r for r in _real_roots(np.polyder(coeffs)) if t1 < r < t2)
    cand.sort()
    vals = np.polyval(coeffs, np.array(cand))
    vmax = vals.max()
    tie = 1e-12*max(1.0, abs(vmax))
    i = int(np.flatnonzero(vals >= vmax - tie)[0])
    return cand[i], float(vals[i])


def speed_range(traj):
    """(min, max) speed over the validity interval"""
    vc = traj.speed_coeffs()
    T = traj.duration
    vmax = poly_extremum_on_interval(vc, (0.0, T))[1]
    vmin = -poly_extremum_on_interval(-vc, (0.0, T))[1]
    return vmin, vmax


def feasibility_check(traj, limits, tol=bound_tol):
    """True iff control input and speed stay within limits over the whole interval

    u is affine so its ends suffice; v is quadratic so its ends plus vertex
    """
    u0 = 2*traj.b
    u1 = 6*traj.a*traj.duration + 2*traj.b
    if min(u0, u1) < limits.u_min - tol or max(u0, u1) > limits.u_max + tol:
        return False
    vmin, vmax = speed_range(traj)
    return vmin >= limits.v_min - tol and vmax <= limits.v_max + tol


def time_at_position(traj, p):
    """Time trajectory: the unique t with p(t) = p on a strictly increasing trajectory
    """
    pc = traj.position_coeffs()
    T = traj.duration
    p_start = pc[3]
    p_end = float(np.polyval(pc, T))
    if p < p_start - 1e-9 or p > p_end + 1e-9:
        raise TrajectoryDomainError("Position %s outside reachable range [%s, %s]" % (p, p_start, p_end))
    vmin = -poly_extremum_on_interval(-np.polyder(pc), (0.0, T))[1]
    if vmin <= 0:
        raise TrajectoryDomainError("Trajectory is not strictly increasing (min speed %s)" % vmin)
    if p <= p_start:
        return traj.t_start
    if p >= p_end:
        return traj.t_end
    pc_shift = pc - np.array([0., 0., 0., p])
    s = optimization.brentq(lambda x: np.polyval(pc_shift, x), 0.0, T, xtol=root_xtol)
    return traj.t_start + s


def control_effort(traj, t1=None, t2=None):
    """Integral of u^2/2 over [t1, t2] (defaults to the validity interval)"""
    s1 = 0.0 if t1 is None else t1 - traj.t_start
    s2 = traj.duration if t2 is None else t2 - traj.t_start
    if s2 <= s1:
        return 0.0
    integrand = np.polyint(0.5*np.polymul(traj.control_coeffs(), traj.control_coeffs()))
    return float(np.polyval(integrand, s2) - np.polyval(integrand, s1))


def _feasible_grid(T, L, v0, limits, tol=bound_tol):
    """Vectorized feasibility of the cubic reaching L after T, for an array of T"""
    rhs = np.vstack([np.zeros_like(T), v0*T, np.full_like(T, L), np.zeros_like(T)])
    alpha, beta, gamma, _ = np.linalg.solve(_bc_matrix, rhs)
    a = alpha/T**3
    b = beta/T**2
    c = gamma/T
    u0 = 2*b
    u1 = 6*a*T + 2*b
    ok = (np.minimum(u0, u1) >= limits.u_min - tol) & (np.maximum(u0, u1) <= limits.u_max + tol)
    v1 = (3*a*T + 2*b)*T + c
    vlo = np.minimum(c, v1)
    vhi = np.maximum(c, v1)
    #Vertex of v(s), only when it falls inside (0, T)
    with np.errstate(divide='ignore', invalid='ignore'):
        sv = np.where(a != 0, -b/(3*a), -1.0)
    inside = (sv > 0) & (sv < T)
    vv = np.where(inside, (3*a*sv + 2*b)*sv + c, c)
    vlo = np.minimum(vlo, vv)
    vhi = np.maximum(vhi, vv)
    ok &= (vlo >= limits.v_min - tol) & (vhi <= limits.v_max + tol)
    return ok


def exit_time_window(t0, p0, v0, pf, limits):
    """Feasible exit-time window from the state (t0, p0, v0)

    An exit time is feasible when the cubic it induces passes feasibility_check.
    Endpoints are bracketed on a grid over the mean-speed bounds
    [L/v_max, L/v_min] and bisected to window_tol, always returning the
    feasible side.
    """
    L = pf - p0
    if not L > 0:
        raise TrajectoryDomainError("Exit position %s must lie beyond %s" % (pf, p0))

    def ok(T):
        return feasibility_check(solve_cubic(0.0, 0.0, v0, T, L), limits)

    T_lo = L/limits.v_max
    T_hi = L/limits.v_min
    idx = None
    for n in window_grids:
        grid = np.linspace(T_lo, T_hi, n)
        #Confirm grid hits with the scalar check used everywhere else
        hits = np.flatnonzero(_feasible_grid(grid, L, v0, limits))
        first = next((i for i in hits if ok(grid[i])), None)
        if first is not None:
            idx = (first, next(i for i in hits[::-1] if ok(grid[i])))
            break
    if idx is None:
        raise InfeasibleWindowError("No feasible exit time for t0=%s, p0=%s, v0=%s, pf=%s" % (t0, p0, v0, pf))

    i, j = idx
    if i == 0:
        lower = T_lo
    else:
        lo, hi = grid[i-1], grid[i]
        while hi - lo > window_tol:
            mid = 0.5*(lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        lower = hi
    if j == grid.size - 1:
        upper = T_hi
    else:
        lo, hi = grid[j], grid[j+1]
        while hi - lo > window_tol:
            mid = 0.5*(lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        upper = lo
    return ExitTimeWindow(lower=float(t0 + lower), upper=float(t0 + upper))


def revise_window(window_at_entry, window_at_tau):
    """Keep the earliest exit time found at entry as a floor on the replanned window"""
    revised = ExitTimeWindow(lower=max(window_at_entry.lower, window_at_tau.lower), upper=window_at_tau.upper)
    if revised.is_empty:
        raise EmptyWindowError("Revised exit-time window is empty: [%s, %s]" % (revised.lower, revised.upper))
    return revised


class PiecewiseTrajectory:
    """Executed motion of one CAV: each committed piece is in force from its
    t_start until the next piece starts, the last one until exit.

    Outside [t_start, t_end] the motion is extrapolated at constant speed.
    """
    def __init__(self, pieces):
        if not pieces:
            raise TrajectoryDomainError("Executed trajectory needs at least one piece")
        self.pieces = sorted(pieces, key=lambda x: x.t_start)
        self.starts = np.array([x.t_start for x in self.pieces])
        self.ends = np.append(self.starts[1:], self.pieces[-1].t_end)
        self.t_start = float(self.starts[0])
        self.t_end = float(self.pieces[-1].t_end)

    def __len__(self):
        return len(self.pieces)

    def piece_index(self, t):
        return np.clip(np.searchsorted(self.starts, t, side='right') - 1, 0, len(self.pieces) - 1)

    def evaluate_many(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = np.empty_like(t)
        v = np.empty_like(t)
        u = np.empty_like(t)
        idx = self.piece_index(np.clip(t, self.t_start, self.t_end))
        for i in np.unique(idx):
            m = idx == i
            p[m], v[m], u[m] = evaluate_many(self.pieces[i], np.clip(t[m], self.t_start, self.t_end))
        p0, v0, _ = evaluate(self.pieces[0], self.t_start)
        p1, v1, _ = evaluate(self.pieces[-1], self.t_end)
        before = t < self.t_start
        after = t > self.t_end
        p[before] = p0 + v0*(t[before] - self.t_start)
        v[before] = v0
        u[before] = 0.0
        p[after] = p1 + v1*(t[after] - self.t_end)
        v[after] = v1
        u[after] = 0.0
        return p, v, u

    def time_at_position(self, p):
        """First time the executed motion reaches p

        A position skipped by a jump between pieces maps to the start of the
        piece beyond it
        """
        for traj, end in zip(self.pieces, self.ends):
            p_start = evaluate(traj, traj.t_start)[0]
            if p <= p_start:
                return traj.t_start
            p_end = evaluate(traj, end)[0]
            if p <= p_end:
                return time_at_position(traj, p)
        raise TrajectoryDomainError("Position %s never reached (final position %s)" % (p, p_end))

    def control_effort(self):
        return sum(control_effort(traj, traj.t_start, end) for traj, end in zip(self.pieces, self.ends))
