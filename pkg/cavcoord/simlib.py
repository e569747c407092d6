#! /usr/bin/env python

"""
Discrete-event simulation of CAVs crossing a signal-free intersection

Arrivals are generated per path from a seeded stream. A CAV enters the control
zone once the gap to the last CAV on its path allows it, plans a cubic
trajectory to its exit and commits it. At each replanning instance every
in-zone CAV observes its (possibly noisy) state, the decision sequence is
computed and the CAVs replan one after the other, each against the plans
committed earlier in that round.

Plans are made with the standstill distance widened by the noise allowance,
then with the configured one. A CAV still without a safe plan keeps its
current one. When that is unsafe too, the CAV moves up its chain in the
planning order and the round is retried. A round that cannot be planned
leaves every committed plan in place, or aborts the run with on_failure abort.
The last CAV to exit each path keeps binding its follower.

Random streams are keyed by purpose so a run is reproducible bit for bit and
paired runs with different policies see the same arrivals and the same
observation noise:
    [seed, 1, path_id]              arrivals on a path
    [seed, 2, cav_id, round]        observation noise
    [seed, 3, round]                FCFS tie draws
"""

import bisect
import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from cavcoord.errors import CavCoordError, InfeasibleWindowError, EmptyWindowError, PlannerInfeasibleError
from cavcoord import seqlib, safetylib
from cavcoord.safetylib import CommittedPlan, check_candidate
from cavcoord.trajlib import solve_cubic, evaluate, feasibility_check, exit_time_window, revise_window, \
        PiecewiseTrajectory

logger = logging.getLogger(__name__)

#Event priorities at equal times: exits free the zone before anyone enters or replans
EXIT = 0
ARRIVAL = 1
ADMIT = 1
TIMER = 2

#Exit-time refinement between the last unsafe and first safe grid point (s)
plan_bisect_tol = 1e-3
#Smallest delay before an admission retry (s)
min_retry_delay = 1e-3
#Previous exit time still tried when it falls this close outside the window (s)
hint_tol = 1e-6


@dataclass(frozen=True)
class Arrival:
    cav_id: int
    path_id: int
    t: float
    speed: float
    vehicle_class: str
    priority: float


@dataclass(frozen=True)
class Observation:
    cav_id: int
    tau: float
    p_observed: float
    v_observed: float


@dataclass
class CavRecord:
    cav_id: int
    path_id: int
    arrival_time: float
    vehicle_class: str
    priority: float
    desired_speed: float
    entry_time: float = None
    entry_speed: float = None
    entry_window: object = None
    #Scheduling weight at entry, used for weighted averages
    weight: float = None
    #Committed trajectories in order, each in force until the next one starts
    pieces: list = field(default_factory=list)
    exit_time: float = None

    @property
    def travel_time(self):
        if self.exit_time is None:
            return None
        return self.exit_time - self.entry_time

    def executed(self):
        return PiecewiseTrajectory(self.pieces)


@dataclass
class RoundRecord:
    index: int
    tau: float
    reason: str
    sequence: tuple
    fcfs_sequence: tuple
    j_chosen: float
    j_fcfs: float
    j_priority: float
    policy_used: str
    #Planning order after blocked CAVs were moved up their chain
    order_used: tuple = ()
    #CAVs that kept their plan because no safe replan existed
    n_held: int = 0


@dataclass
class SimulationLog:
    config: object
    policy: str
    events: list = field(default_factory=list)
    cavs: dict = field(default_factory=dict)
    rounds: list = field(default_factory=list)
    #Set by best_of_both
    chosen_policy: str = None

    @property
    def seed(self):
        return self.config.seed

    def record(self, t, event, **fields):
        d = {'t': float(t), 'event': event}
        d.update(fields)
        self.events.append(d)

    def exited(self):
        return [rec for rec in self.cavs.values() if rec.exit_time is not None]

    def executed(self):
        """[(cav_id, path_id, PiecewiseTrajectory), ...] of every CAV that entered"""
        return [(rec.cav_id, rec.path_id, rec.executed()) for rec in self.cavs.values() if rec.pieces]


def generate_arrivals(config):
    """Seeded arrivals on every path with traffic, sorted by time then path"""
    classes = config.vehicle_classes
    shares = np.array([c.share for c in classes], dtype=float)
    shares /= shares.sum()
    lo, hi = config.entry_speed
    raw = []
    for path_id, vph in config.volumes.items():
        rng = np.random.default_rng([config.seed, 1, path_id])
        headway = 3600.0/vph
        t = rng.uniform(0.0, headway) if config.arrival_model == 'uniform_headway' else 0.0
        n = 0
        while True:
            if config.arrival_model == 'poisson':
                t += rng.exponential(headway)
            elif n > 0:
                t += headway
            if config.horizon_s is not None and t >= config.horizon_s:
                break
            if config.max_cavs is not None and n >= config.max_cavs:
                break
            speed = rng.uniform(lo, hi)
            k = rng.choice(len(classes), p=shares)
            raw.append((float(t), path_id, float(speed), int(k)))
            n += 1
    raw.sort(key=lambda x: (x[0], x[1]))
    if config.max_cavs is not None:
        raw = raw[:config.max_cavs]
    arrivals = []
    for i, (t, path_id, speed, k) in enumerate(raw):
        arrivals.append(Arrival(cav_id=i+1, path_id=path_id, t=t, speed=speed, \
                vehicle_class=classes[k].name, priority=classes[k].priority))
    logger.info("Generated %i arrivals on %i paths", len(arrivals), len(config.volumes))
    return arrivals


def observe_state(plan, tau, noise, rng, limits=None, length=None):
    """State of a committed plan at tau plus uniform deviation on each channel

    Speed is clamped to [v_min, v_max] and position to [0, length] when given
    """
    p, v, _ = evaluate(plan.trajectory, tau)
    dp, dv = rng.uniform(-1.0, 1.0, size=2)
    p += dp*noise.position
    v += dv*noise.speed
    if limits is not None:
        v = min(max(v, limits.v_min), limits.v_max)
    if length is not None:
        p = min(max(p, 0.0), length)
    return Observation(cav_id=plan.cav_id, tau=float(tau), p_observed=float(p), v_observed=float(v))


def plan_with_margin(cav, observation, window, committed, geometry, params, grid_step, limits, hint_tf=None):
    """Earliest safe exit time in the window and the worst margin of its trajectory

    Scans {lower, lower + grid_step, ..., upper}, then bisects between the
    last unsafe and first safe point to plan_bisect_tol. hint_tf (previous
    exit time) is tried as an extra grid point, clamped into the window when it
    lies within hint_tol of it.
    """
    if window.is_empty:
        raise EmptyWindowError("CAV %s: empty exit-time window [%s, %s]" % (cav.cav_id, window.lower, window.upper))
    length = geometry.length(cav.path_id)
    tau, p0, v0 = observation.tau, observation.p_observed, observation.v_observed
    constraints = safetylib.constraint_set(cav.path_id, tau, p0, committed, geometry, cav.cav_id)
    #Constraint that rejected the previous candidate, checked first
    last_hit = 0

    def attempt(tf):
        nonlocal last_hit
        traj = solve_cubic(tau, p0, v0, tf, length)
        if not feasibility_check(traj, limits):
            return None
        if len(constraints):
            k = safetylib.first_violation(traj, constraints, params, start=last_hit)
            if k is not None:
                last_hit = k
                return None
        return traj

    n = int(np.floor((window.upper - window.lower)/grid_step + 1e-9))
    grid = [float(x) for x in window.lower + grid_step*np.arange(n + 1)]
    if grid[-1] < window.upper:
        grid.append(window.upper)
    if hint_tf is not None and window.lower - hint_tol <= hint_tf <= window.upper + hint_tol:
        hint_tf = min(max(float(hint_tf), window.lower), window.upper)
        if hint_tf not in grid:
            bisect.insort(grid, hint_tf)

    last_bad = None
    found = None
    for tf in grid:
        traj = attempt(tf)
        if traj is not None:
            found = tf
            break
        last_bad = tf
    if found is None:
        raise PlannerInfeasibleError("CAV %s: no safe exit time in [%0.3f, %0.3f]" % \
                (cav.cav_id, window.lower, window.upper))
    if last_bad is not None:
        lo, hi = last_bad, found
        while hi - lo > plan_bisect_tol:
            mid = 0.5*(lo + hi)
            t_mid = attempt(mid)
            if t_mid is not None:
                hi, traj = mid, t_mid
            else:
                lo = mid
    plan = CommittedPlan(cav_id=cav.cav_id, path_id=cav.path_id, trajectory=traj, \
            entry_time=cav.entry_time, exit_time=traj.t_end)
    return plan, safetylib.worst_margin(traj, constraints, params)


def plan(cav, observation, window, committed, geometry, params, grid_step, limits, hint_tf=None):
    """Solve the exit-time minimization for one CAV against the committed plans"""
    return plan_with_margin(cav, observation, window, committed, geometry, params, grid_step, limits, hint_tf)[0]


def promote(order, cav_id, chain_prev):
    """Move cav_id to the earliest position its chain predecessor allows"""
    order = list(order)
    order.remove(cav_id)
    prev = chain_prev.get(cav_id)
    order.insert(0 if prev is None else order.index(prev) + 1, cav_id)
    return order


def _plan_dict(plan):
    traj = plan.trajectory
    return {'cav_id': plan.cav_id, 'path_id': plan.path_id, 'entry_time': plan.entry_time, \
            'exit_time': plan.exit_time, 't_start': traj.t_start, 'coeffs_local': [traj.a, traj.b, traj.c, traj.d]}


class SequenceBlocked(PlannerInfeasibleError):
    """A CAV in the planning order found no safe plan; done holds the plans made before it"""
    def __init__(self, msg, cav_id, done, state=None):
        super().__init__(msg, state=state)
        self.cav_id = cav_id
        self.done = done


class Simulation:
    """Single run of one scenario under one sequencing policy (fcfs or priority)"""
    def __init__(self, config, policy=None):
        self.config = config
        self.policy = policy or config.policy
        if self.policy not in ('fcfs', 'priority'):
            raise CavCoordError("Simulation policy must be fcfs or priority, got %r" % (self.policy,))
        self.geometry = config.geometry
        self.log = SimulationLog(config=config, policy=self.policy)
        self.clock = 0.0
        #CAVs in the zone in entry order
        self.in_zone = {}
        self.committed = {}
        #Last CAV to leave each path, still binding its follower
        self.departed = {}
        #Planning margins widened by the observation noise allowance
        self.plan_safety = config.safety.buffered(config.noise.planning_allowance(config.safety.phi))
        self.holding = {path_id: deque() for path_id in self.geometry.path_ids}
        self.round_idx = 0
        self._queue = []
        self._counter = itertools.count()
        self._version = {}
        self._admit_pending = set()
        self._arrivals_left = 0
        self._timer_k = 0

    def schedule(self, t, priority, kind, payload=None):
        heapq.heappush(self._queue, (t, priority, next(self._counter), kind, payload))

    def run(self):
        cfg = self.config
        arrivals = generate_arrivals(cfg)
        for a in arrivals:
            self.log.cavs[a.cav_id] = CavRecord(cav_id=a.cav_id, path_id=a.path_id, arrival_time=a.t, \
                    vehicle_class=a.vehicle_class, priority=a.priority, desired_speed=a.speed)
            self.schedule(a.t, ARRIVAL, 'arrival', a)
        self._arrivals_left = len(arrivals)
        if cfg.replanning in ('periodic', 'both') and arrivals:
            self._schedule_timer()
        self.log.record(0.0, 'start', seed=cfg.seed, policy=self.policy, n_arrivals=len(arrivals))
        logger.info("Running seed %i, policy %s, %i arrivals", cfg.seed, self.policy, len(arrivals))
        while self._queue:
            t, _, _, kind, payload = heapq.heappop(self._queue)
            self.clock = t
            getattr(self, '_on_' + kind)(payload)
        self.log.record(self.clock, 'end', n_exited=len(self.log.exited()), n_rounds=self.round_idx)
        return self.log

    def _active(self):
        return self._arrivals_left > 0 or bool(self.in_zone) or any(self.holding.values())

    def _schedule_timer(self):
        self._timer_k += 1
        self.schedule(self._timer_k*self.config.replan_period, TIMER, 'timer')

    def _on_timer(self, payload):
        if self.in_zone:
            self.replan(self.clock, 'periodic')
        if self._active():
            self._schedule_timer()

    def _on_arrival(self, a):
        self._arrivals_left -= 1
        self.log.record(a.t, 'arrival', cav_id=a.cav_id, path_id=a.path_id, speed=a.speed, vehicle_class=a.vehicle_class)
        self.holding[a.path_id].append(a)
        if a.path_id not in self._admit_pending:
            self._try_admit(a.path_id)

    def _on_admit(self, path_id):
        self._admit_pending.discard(path_id)
        self._try_admit(path_id)

    def _on_exit(self, payload):
        cav_id, version = payload
        if self._version.get(cav_id) != version:
            return
        rec = self.log.cavs[cav_id]
        rec.exit_time = self.clock
        del self.in_zone[cav_id]
        self.departed[rec.path_id] = self.committed.pop(cav_id)
        self.log.record(self.clock, 'exit', cav_id=cav_id, path_id=rec.path_id, travel_time=rec.travel_time)
        logger.debug("t=%0.3f CAV %i exits, travel time %0.3f", self.clock, cav_id, rec.travel_time)

    def _in_force(self):
        """Plans a newly planned CAV must respect: everyone in the zone plus the departed"""
        return list(self.committed.values()) + list(self.departed.values())

    def _path_tail(self, path_id):
        """Plan of the last CAV that entered path_id, in the zone or departed"""
        for cav_id in reversed(self.in_zone):
            if self.in_zone[cav_id].path_id == path_id:
                return self.committed[cav_id]
        return self.departed.get(path_id)

    def _leader_time_at(self, plan, p):
        """When the leader's plan (extrapolated past exit) reaches p"""
        traj = plan.trajectory
        p_end, v_end, _ = evaluate(traj, traj.t_end)
        if p <= p_end:
            t = safetylib.crossing_time(traj, p)
            if t is None:
                t = self.clock
        else:
            t = traj.t_end + (p - p_end)/v_end
        return max(t, self.clock + min_retry_delay)

    def _raw_margin(self, margin, params):
        """Margin against the configured distances of a plan made with params"""
        return margin - (params.gamma - self.config.safety.gamma)

    def _try_admit(self, path_id):
        """Admit the head of the path's holding queue at its own speed or schedule a retry"""
        cfg = self.config
        queue = self.holding[path_id]
        while queue:
            a = queue[0]
            t = self.clock
            rec = self.log.cavs[a.cav_id]
            speed = a.speed
            retry = None
            tail = self._path_tail(path_id)
            if tail is not None:
                p_lead = safetylib.position_at(tail.trajectory, t)[0]
                need = self.plan_safety.distance(speed)
                if p_lead < need:
                    retry = self._leader_time_at(tail, need)
                    reason = 'gap'
            if retry is None:
                rec.entry_time = t
                try:
                    window = exit_time_window(t, 0.0, speed, self.geometry.length(path_id), cfg.limits)
                    obs = Observation(cav_id=a.cav_id, tau=t, p_observed=0.0, v_observed=speed)
                    entry_plan, margin = plan_with_margin(rec, obs, window, self._in_force(), \
                            self.geometry, self.plan_safety, cfg.grid_step, cfg.limits)
                except (InfeasibleWindowError, PlannerInfeasibleError):
                    rec.entry_time = None
                    retry = t + cfg.grid_step
                    reason = 'no_safe_plan'
            if retry is not None:
                self.log.record(t, 'deferral', cav_id=a.cav_id, path_id=path_id, reason=reason, retry_t=float(retry))
                logger.info("t=%0.3f CAV %i deferred on path %i (%s), retry at %0.3f", t, a.cav_id, path_id, reason, retry)
                self._admit_pending.add(path_id)
                self.schedule(retry, ADMIT, 'admit', path_id)
                return
            queue.popleft()
            self._admit(rec, t, speed, window, entry_plan, self._raw_margin(margin, self.plan_safety))

    def _base_weight(self, window):
        if self.config.weight_mode == 'uniform':
            return 1.0
        return seqlib.weight_from_window(window)

    def _admit(self, rec, t, speed, window, entry_plan, margin):
        rec.entry_time = t
        rec.entry_speed = speed
        rec.entry_window = window
        rec.weight = self._base_weight(window)*rec.priority
        self.in_zone[rec.cav_id] = rec
        self.log.record(t, 'enter', cav_id=rec.cav_id, path_id=rec.path_id, speed=speed, delay=t - rec.arrival_time, \
                window=[window.lower, window.upper], weight=rec.weight, vehicle_class=rec.vehicle_class)
        logger.debug("t=%0.3f CAV %i enters path %i at %0.2f m/s", t, rec.cav_id, rec.path_id, speed)
        self._commit(entry_plan, margin, t)
        if self.config.replanning in ('on_arrival', 'both'):
            self.replan(t, 'arrival')

    def _commit(self, plan, margin, tau, round_idx=None):
        rec = self.log.cavs[plan.cav_id]
        traj = plan.trajectory
        if rec.pieces and rec.pieces[-1].t_start == traj.t_start:
            rec.pieces[-1] = traj
        else:
            rec.pieces.append(traj)
        self.committed[plan.cav_id] = plan
        version = self._version.get(plan.cav_id, 0) + 1
        self._version[plan.cav_id] = version
        self.schedule(plan.exit_time, EXIT, 'exit', (plan.cav_id, version))
        self.log.record(tau, 'commit', cav_id=plan.cav_id, round=round_idx, p0=traj.d, v0=traj.c, \
                exit_time=plan.exit_time, margin=float(margin) if np.isfinite(margin) else None)

    def state_dump(self, tau, **extra):
        """JSON-serializable snapshot for diagnosing a failed round"""
        state = {'tau': tau, 'seed': self.config.seed, 'policy': self.policy, 'round': self.round_idx, \
                'in_zone': list(self.in_zone), 'committed': [_plan_dict(p) for p in self.committed.values()], \
                'departed': [_plan_dict(p) for p in self.departed.values()]}
        state.update(extra)
        return state

    def _observe(self, tau, idx):
        """Observations, windows and jobs of the CAVs that replan this round

        CAVs near their exit, and with on_round_failure keep those whose
        observed state has no feasible window, keep their plan
        """
        cfg = self.config
        fixed = []
        entries = {}
        for rec in self.in_zone.values():
            old = self.committed[rec.cav_id]
            length = self.geometry.length(rec.path_id)
            rng = np.random.default_rng([cfg.seed, 2, rec.cav_id, idx])
            obs = observe_state(old, tau, cfg.noise, rng, limits=cfg.limits, length=length)
            if length - obs.p_observed < cfg.min_replan_distance:
                fixed.append(old)
                continue
            try:
                window = revise_window(rec.entry_window, \
                        exit_time_window(tau, obs.p_observed, obs.v_observed, length, cfg.limits))
            except InfeasibleWindowError as e:
                if cfg.on_round_failure == 'abort':
                    raise PlannerInfeasibleError(str(e), state=self.state_dump(tau, cav_id=rec.cav_id, \
                            observation=[obs.p_observed, obs.v_observed])) from e
                self.log.record(tau, 'hold', round=idx, cav_id=rec.cav_id, reason='window')
                logger.info("t=%0.3f CAV %i keeps its plan: %s", tau, rec.cav_id, e)
                fixed.append(old)
                continue
            P = window.lower - tau if cfg.processing_time == 'residual' else window.lower
            job = seqlib.Job(cav_id=rec.cav_id, weight=self._base_weight(window)*rec.priority, processing_time=P)
            entries[rec.cav_id] = (rec, obs, window, job)
        return fixed, entries

    def _hold(self, rec, tau, committed):
        """The CAV's current plan restarted at tau, if it is still safe"""
        old = self.committed[rec.cav_id]
        traj = old.trajectory
        p, v, _ = evaluate(traj, tau)
        kept = solve_cubic(tau, p, v, traj.t_end, self.geometry.length(rec.path_id))
        ok, margin = check_candidate(kept, rec.path_id, committed, self.geometry, self.config.safety, rec.cav_id)
        if not ok:
            return None
        return replace(old, trajectory=kept), margin

    def _plan_one(self, tau, rec, obs, window, committed):
        """(plan, margin, kind) for one CAV of the round or None

        Tries the allowance-widened margins, then the configured ones, then
        (on_round_failure keep) holding the current plan
        """
        cfg = self.config
        old = self.committed[rec.cav_id]
        attempts = [self.plan_safety] if self.plan_safety is cfg.safety else [self.plan_safety, cfg.safety]
        for params in attempts:
            try:
                new, margin = plan_with_margin(rec, obs, window, committed, self.geometry, params, \
                        cfg.grid_step, cfg.limits, hint_tf=old.exit_time)
            except (InfeasibleWindowError, PlannerInfeasibleError):
                continue
            return new, self._raw_margin(margin, params), 'planned'
        if cfg.on_round_failure == 'keep':
            held = self._hold(rec, tau, committed)
            if held is not None:
                return held + ('held',)
        return None

    def _plan_sequence(self, tau, order, entries, base, previous=()):
        """Plan the CAVs one after the other, each against base and the plans made before it

        Plans in previous whose order prefix is unchanged are reused
        """
        n = 0
        while n < min(len(previous), len(order)) and previous[n][0].cav_id == order[n]:
            n += 1
        out = list(previous[:n])
        committed = list(base) + [p for p, _, _ in out]
        for cav_id in order[n:]:
            rec, obs, window, _ = entries[cav_id]
            res = self._plan_one(tau, rec, obs, window, committed)
            if res is None:
                raise SequenceBlocked("CAV %s: no safe exit time in [%0.3f, %0.3f]" % \
                        (cav_id, window.lower, window.upper), cav_id, out, state=self.state_dump(tau, \
                        cav_id=cav_id, sequence=list(order), observation=[obs.p_observed, obs.v_observed], \
                        window=[window.lower, window.upper], committed_this_round=[_plan_dict(p) for p in committed]))
            out.append(res)
            committed.append(res[0])
        return out

    def _solve_round(self, tau, idx, order, graph, entries, base):
        """Plan the round in order, moving a blocked CAV up its chain and retrying

        Returns:
        (order_used, [(plan, margin, kind), ...]) or (None, SequenceBlocked)
        """
        chain_prev = {b.cav_id: a.cav_id for c in graph.chains for a, b in zip(c.jobs[:-1], c.jobs[1:])}
        order = list(order)
        done = []
        for _ in range(len(order)):
            try:
                return tuple(order), self._plan_sequence(tau, order, entries, base, done)
            except SequenceBlocked as e:
                blocked = e
                done = e.done
            repaired = promote(order, blocked.cav_id, chain_prev)
            if repaired == order:
                break
            self.log.record(tau, 'sequence_repair', round=idx, cav_id=blocked.cav_id, order=repaired)
            logger.info("t=%0.3f round %i: CAV %i blocked, planning order %s", tau, idx, blocked.cav_id, repaired)
            order = repaired
        return None, blocked

    def replan(self, tau, reason):
        """One replanning instance over every CAV in the zone"""
        if not self.in_zone:
            return
        cfg = self.config
        self.round_idx += 1
        idx = self.round_idx
        fixed, entries = self._observe(tau, idx)
        self.log.record(tau, 'replan', round=idx, reason=reason, n_cavs=len(entries), n_fixed=len(fixed))
        if not entries:
            return

        positions = {}
        for rec, obs, window, job in entries.values():
            positions.setdefault(rec.path_id, []).append((obs.p_observed, job))
        graph = seqlib.precedence_graph(positions)
        jobs = graph.jobs
        fcfs = seqlib.fcfs_sequence([(rec.cav_id, rec.entry_time) for rec, _, _, _ in entries.values()], \
                rng=np.random.default_rng([cfg.seed, 3, idx]))
        for tie in fcfs.ties:
            self.log.record(tau, 'tie', round=idx, order=list(tie))
        prio = seqlib.resequence(graph)
        j_fcfs = seqlib.weighted_completion(fcfs, jobs)
        j_prio = seqlib.weighted_completion(prio, jobs)
        sequence = prio if self.policy == 'priority' else fcfs
        used = self.policy
        self.log.record(tau, 'sequence', round=idx, policy=self.policy, order=list(sequence.order), \
                fcfs_order=list(fcfs.order), j_chosen=j_prio if used == 'priority' else j_fcfs, j_fcfs=j_fcfs)
        logger.debug("t=%0.3f round %i sequence %s", tau, idx, sequence.order)

        base = fixed + list(self.departed.values())
        order, plans = self._solve_round(tau, idx, sequence.order, graph, entries, base)
        if order is None and used == 'priority' and sequence.order != fcfs.order:
            logger.warning("t=%0.3f round %i: priority sequence infeasible (%s), falling back to FCFS", tau, idx, plans)
            self.log.record(tau, 'sequence_fallback', round=idx, message=str(plans))
            used = 'fcfs'
            order, plans = self._solve_round(tau, idx, fcfs.order, graph, entries, base)
        if order is None:
            if cfg.on_round_failure == 'abort':
                raise PlannerInfeasibleError(str(plans), state=plans.state)
            logger.warning("t=%0.3f round %i skipped, committed plans kept (%s)", tau, idx, plans)
            self.log.record(tau, 'round_skipped', round=idx, cav_id=plans.cav_id, message=str(plans))
            return
        n_held = 0
        for new, margin, kind in plans:
            if kind == 'held':
                n_held += 1
                self.log.record(tau, 'hold', round=idx, cav_id=new.cav_id, reason='no_safe_plan')
            self._commit(new, margin, tau, round_idx=idx)
        self.log.rounds.append(RoundRecord(index=idx, tau=tau, reason=reason, \
                sequence=prio.order if used == 'priority' else fcfs.order, fcfs_sequence=fcfs.order, \
                j_chosen=j_prio if used == 'priority' else j_fcfs, j_fcfs=j_fcfs, j_priority=j_prio, policy_used=used, \
                order_used=order, n_held=n_held))


def average_travel_time(log):
    tt = [rec.travel_time for rec in log.exited()]
    if not tt:
        raise CavCoordError("No CAV exited the control zone")
    return float(np.mean(tt))


def choose_best(log_fcfs, log_priority):
    """Keep the priority run only if it lowers the average travel time"""
    if average_travel_time(log_priority) < average_travel_time(log_fcfs):
        chosen, name = log_priority, 'priority'
    else:
        chosen, name = log_fcfs, 'fcfs'
    logger.info("best_of_both: chose %s", name)
    return replace(chosen, policy='best_of_both', chosen_policy=name)


def best_of_both(config):
    return choose_best(Simulation(config, 'fcfs').run(), Simulation(config, 'priority').run())


def run(config, policy=None):
    """Simulate a scenario, returns the SimulationLog"""
    policy = policy or config.policy
    if policy == 'best_of_both':
        return best_of_both(config)
    return Simulation(config, policy).run()


def trajectory_table(log, step=None):
    """Executed trajectories sampled on multiples of step, columns t,cav_id,path_id,p,v,u"""
    if step is None:
        step = log.config.sample_step
    frames = []
    for cav_id in sorted(log.cavs):
        rec = log.cavs[cav_id]
        if not rec.pieces:
            continue
        ex = rec.executed()
        end = rec.exit_time if rec.exit_time is not None else ex.t_end
        k = np.arange(np.ceil(ex.t_start/step - 1e-9), np.floor(end/step + 1e-9) + 1)
        t = np.round(k*step, 9)
        p, v, u = ex.evaluate_many(t)
        frames.append(pd.DataFrame({'t': t, 'cav_id': cav_id, 'path_id': rec.path_id, 'p': p, 'v': v, 'u': u}))
    if not frames:
        return pd.DataFrame(columns=['t', 'cav_id', 'path_id', 'p', 'v', 'u'])
    df = pd.concat(frames, ignore_index=True)
    return df.sort_values(['t', 'cav_id'], kind='mergesort').reset_index(drop=True)
