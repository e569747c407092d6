#! /usr/bin/env python

"""
Library of functions for the rear-end and lateral safety constraints

Margins are in meters. A margin <= 0 means the constraint is met.

Rear-end: follower keeps delta(t) = gamma + phi*v(t) behind its leader
Lateral: at a conflict point shared by two paths, whichever CAV crosses second
must still be delta short of the conflict when the first one crosses it
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from cavcoord.errors import ConfigError
from cavcoord import geomlib
from cavcoord.trajlib import evaluate, time_at_position, poly_extremum_on_interval

logger = logging.getLogger(__name__)

neg_inf = float('-inf')
#Largest margin still counted as safe (m)
safe_tol = 1e-9


@dataclass(frozen=True)
class SafetyParams:
    #Standstill distance (m)
    gamma: float
    #Reaction time (s)
    phi: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError("Safety gamma must be > 0, got %s" % self.gamma)
        if not self.phi > 0:
            raise ConfigError("Safety phi must be > 0, got %s" % self.phi)

    def distance(self, v):
        return self.gamma + self.phi*v

    def buffered(self, allowance):
        """Same reaction time with the standstill distance widened by allowance (m)"""
        if not allowance > 0:
            return self
        return SafetyParams(gamma=self.gamma + allowance, phi=self.phi)


@dataclass(frozen=True)
class CommittedPlan:
    cav_id: int
    path_id: int
    trajectory: object
    entry_time: float
    exit_time: float


def position_at(traj, t):
    """Position and speed at t, extrapolated at constant speed outside the validity interval"""
    if t > traj.t_end:
        p, v, _ = evaluate(traj, traj.t_end)
        return p + v*(t - traj.t_end), v
    if t < traj.t_start:
        p, v, _ = evaluate(traj, traj.t_start)
        return p + v*(t - traj.t_start), v
    p, v, _ = evaluate(traj, t)
    return p, v


@lru_cache(maxsize=65536)
def crossing_time(traj, p):
    """Time traj reaches p, or None if it started past p"""
    if p < traj.d:
        return None
    return time_at_position(traj, p)


def _delta_poly(traj, params, origin):
    """gamma + phi*v(t) + p(t) as a cubic in t - origin"""
    pc = traj.position_coeffs(origin)
    return np.polyadd(pc, params.phi*np.polyder(pc)) + np.array([0., 0., 0., params.gamma])


def rear_end_margin(follower, leader, params):
    """Max of delta_f + p_f - p_l from the later start to the follower's exit

    After the leader's exit its position is extrapolated at constant exit speed
    """
    return _rear_end(follower, leader.trajectory, params)


def _rear_end(follower, lt, params):
    t1 = max(follower.t_start, lt.t_start)
    t2 = follower.t_end
    if t2 < t1:
        return neg_inf
    f_poly = _delta_poly(follower, params, t1)
    margin = neg_inf
    #Piece where the leader follows its plan
    t_mid = min(t2, lt.t_end)
    if t_mid >= t1:
        poly = np.polysub(f_poly, lt.position_coeffs(t1))
        margin = max(margin, poly_extremum_on_interval(poly, (0.0, t_mid - t1))[1])
    #Piece after the leader's exit
    if t2 > lt.t_end:
        p_exit, v_exit, _ = evaluate(lt, lt.t_end)
        t3 = max(t1, lt.t_end)
        #p_l(t) = p_exit + v_exit*(t - t_end) in t - t1
        leader_line = np.array([0., 0., v_exit, p_exit + v_exit*(t1 - lt.t_end)])
        poly = np.polysub(f_poly, leader_line)
        margin = max(margin, poly_extremum_on_interval(poly, (t3 - t1, t2 - t1))[1])
    return float(margin)


def _branch_max(traj, p_n, t_until, params):
    """Max over [t_start, t_until] of delta + p - p_n, with the interval clamped to traj"""
    t1 = traj.t_start
    t2 = min(t_until, traj.t_end)
    if t2 < t1:
        return neg_inf
    poly = _delta_poly(traj, params, t1) - np.array([0., 0., 0., p_n])
    return poly_extremum_on_interval(poly, (0.0, t2 - t1))[1]


def lateral_margin(candidate, p_i_n, other, p_k_n, params):
    """min(g1, g2) at one conflict point

    g1: candidate crosses after other, g2: other crosses after candidate.
    A branch whose interval is empty is met vacuously (-inf).
    """
    ot = other.trajectory
    t_k = crossing_time(ot, p_k_n)
    if t_k is None:
        #Other already past the conflict
        return neg_inf
    t_i = crossing_time(candidate, p_i_n)
    if t_i is None:
        return neg_inf
    g1 = _branch_max(candidate, p_i_n, t_k, params)
    g2 = _branch_max(ot, p_k_n, t_i, params)
    return float(min(g1, g2))


def nearest_leader(candidate, cav_path, committed, cav_id=None):
    """Committed plan on the same path closest ahead of the candidate at its start"""
    return constraint_set(cav_path, candidate.t_start, candidate.d, committed, None, cav_id, lateral=False).leader


@dataclass
class ConstraintSet:
    """Committed plans that can bind a CAV starting at (t0, p0)

    crossings holds (plan, conflict_id, d_i, d_k) for every conflict neither
    CAV has passed at t0
    """
    leader: object = None
    follower: object = None
    crossings: list = field(default_factory=list)

    def __len__(self):
        return int(self.leader is not None) + int(self.follower is not None) + len(self.crossings)


def constraint_set(cav_path, t0, p0, committed, geometry, cav_id=None, lateral=True):
    """Nearest leader and follower on cav_path and the live conflicts with crossing paths"""
    cs = ConstraintSet()
    leader_p = follower_p = None
    for plan in committed:
        if plan.cav_id == cav_id:
            continue
        traj = plan.trajectory
        if plan.path_id == cav_path:
            p = position_at(traj, t0)[0]
            if p > p0 and (leader_p is None or p < leader_p):
                cs.leader, leader_p = plan, p
            elif p < p0 and (follower_p is None or p > follower_p):
                cs.follower, follower_p = plan, p
            continue
        if not lateral or traj.t_end <= t0:
            continue
        p_other = None
        for conflict_id, d_i, d_k in geomlib.conflicts_between(geometry, cav_path, plan.path_id):
            if d_i < p0:
                continue
            if p_other is None:
                p_other = position_at(traj, t0)[0]
            if p_other >= d_k:
                continue
            cs.crossings.append((plan, conflict_id, d_i, d_k))
    return cs


def _constraint_margin(candidate, cs, k, params):
    """Margin of the k-th constraint: leader, follower, then the crossings"""
    if cs.leader is not None:
        if k == 0:
            return rear_end_margin(candidate, cs.leader, params)
        k -= 1
    if cs.follower is not None:
        if k == 0:
            return _rear_end(cs.follower.trajectory, candidate, params)
        k -= 1
    plan, _, d_i, d_k = cs.crossings[k]
    return lateral_margin(candidate, d_i, plan, d_k, params)


def first_violation(candidate, cs, params, start=0, tol=None):
    """Index of the first constraint the candidate breaks, scanning from start, or None"""
    if tol is None:
        tol = safe_tol
    n = len(cs)
    for i in range(n):
        k = (start + i) % n
        if _constraint_margin(candidate, cs, k, params) > tol:
            return k
    return None


def worst_margin(candidate, cs, params):
    """Largest margin over the constraint set, -inf when it is empty"""
    worst = neg_inf
    for k in range(len(cs)):
        worst = max(worst, _constraint_margin(candidate, cs, k, params))
    return float(worst)


def check_candidate(candidate, cav_path, committed, geometry, params, cav_id=None):
    """Apply rear-end against the nearest leader and follower, lateral against every crossing plan

    Returns:
    (safe, worst_margin), worst_margin is -inf with nothing committed
    """
    cs = constraint_set(cav_path, candidate.t_start, candidate.d, committed, geometry, cav_id)
    worst = worst_margin(candidate, cs, params)
    return worst <= safe_tol, worst


def sampled_margins(executed, geometry, params, step=0.01, tol=1e-6):
    """Re-check executed motion on a sampled time grid

    executed is a list of (cav_id, path_id, PiecewiseTrajectory). Rear-end is
    checked between consecutive CAVs on each path (entry order), lateral for
    every pair on crossing paths that share time in the zone.

    Returns:
    dict with the worst rear-end and lateral margins and the list of violations above tol
    """
    out = {'rear_end_max': neg_inf, 'lateral_max': neg_inf, 'violations': []}

    def grid(t1, t2):
        n = max(int(np.ceil((t2 - t1)/step)), 1)
        return np.linspace(t1, t2, n + 1)

    by_path = {}
    for cav_id, path_id, traj in executed:
        by_path.setdefault(path_id, []).append((traj.t_start, cav_id, traj))

    for path_id, cavs in sorted(by_path.items()):
        cavs.sort()
        for (_, lead_id, lead), (_, fol_id, fol) in zip(cavs[:-1], cavs[1:]):
            t1 = max(lead.t_start, fol.t_start)
            if fol.t_end < t1:
                continue
            t = grid(t1, fol.t_end)
            pl = lead.evaluate_many(t)[0]
            pf, vf, _ = fol.evaluate_many(t)
            m = float(np.max(params.distance(vf) + pf - pl))
            out['rear_end_max'] = max(out['rear_end_max'], m)
            if m > tol:
                out['violations'].append({'kind': 'rear_end', 'path_id': path_id, 'leader': lead_id, \
                        'follower': fol_id, 'margin': m})

    def branch(traj, p_n, t_until):
        t2 = min(t_until, traj.t_end)
        if t2 < traj.t_start:
            return neg_inf
        t = grid(traj.t_start, t2)
        p, v, _ = traj.evaluate_many(t)
        return float(np.max(params.distance(v) + p - p_n))

    for n, (i_id, i_path, i_traj) in enumerate(executed):
        for k_id, k_path, k_traj in executed[n+1:]:
            if k_path == i_path:
                continue
            if k_traj.t_start > i_traj.t_end or i_traj.t_start > k_traj.t_end:
                continue
            for conflict_id, d_i, d_k in geomlib.conflicts_between(geometry, i_path, k_path):
                t_i = i_traj.time_at_position(d_i)
                t_k = k_traj.time_at_position(d_k)
                m = min(branch(i_traj, d_i, t_k), branch(k_traj, d_k, t_i))
                out['lateral_max'] = max(out['lateral_max'], m)
                if m > tol:
                    out['violations'].append({'kind': 'lateral', 'conflict_id': conflict_id, \
                            'cav_ids': [i_id, k_id], 'margin': m})
    if out['violations']:
        logger.warning("%i sampled safety violations", len(out['violations']))
    return out
