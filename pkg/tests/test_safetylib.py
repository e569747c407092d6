import unittest

import numpy as np

from cavcoord import safetylib, geomlib, trajlib
from cavcoord.safetylib import SafetyParams, CommittedPlan
from cavcoord.trajlib import CubicTrajectory
from cavcoord.errors import ConfigError

params = SafetyParams(gamma=2.0, phi=0.6)

crossing_doc = {'paths': [{'id': 1, 'length_m': 212.0}, {'id': 2, 'length_m': 212.0}],
        'conflicts': [{'id': 1, 'locations': [{'path_id': 1, 'distance_m': 100.0}, {'path_id': 2, 'distance_m': 100.0}]}]}


def constant_speed(v, p0=0.0, t0=0.0, length=212.0):
    return CubicTrajectory(a=0.0, b=0.0, c=v, d=p0, t_start=t0, t_end=t0 + (length - p0)/v)


def committed(cav_id, path_id, traj):
    return CommittedPlan(cav_id=cav_id, path_id=path_id, trajectory=traj, entry_time=traj.t_start, exit_time=traj.t_end)


class TestSafetyParams(unittest.TestCase):
    def test_distance(self):
        self.assertAlmostEqual(params.distance(15.0), 11.0)

    def test_buffered(self):
        wide = params.buffered(1.5)
        self.assertEqual((wide.gamma, wide.phi), (3.5, 0.6))
        self.assertIs(params.buffered(0.0), params)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            SafetyParams(gamma=0.0, phi=0.6)
        with self.assertRaises(ConfigError):
            SafetyParams(gamma=2.0, phi=-1.0)


class TestRearEnd(unittest.TestCase):
    def test_constant_gap(self):
        m = safetylib.rear_end_margin(constant_speed(15), committed(1, 1, constant_speed(15, p0=100)), params)
        self.assertAlmostEqual(m, -89.0, places=9)

    def test_zero_gap(self):
        m = safetylib.rear_end_margin(constant_speed(15), committed(1, 1, constant_speed(15)), params)
        self.assertAlmostEqual(m, 11.0, places=9)

    def test_closing_in(self):
        m = safetylib.rear_end_margin(constant_speed(15), committed(1, 1, constant_speed(12, p0=40)), params)
        self.assertAlmostEqual(m, 13.4, places=6)

    def test_leader_exited(self):
        #Leader leaves the zone at 14 m/s, then keeps that speed
        leader = trajlib.solve_cubic(0.0, 150.0, 14.0, 4.5, 212.0)
        follower = trajlib.solve_cubic(0.0, 0.0, 15.0, 15.0, 212.0)
        m = safetylib.rear_end_margin(follower, committed(1, 1, leader), params)
        t = np.linspace(0.0, follower.t_end, 20001)
        pf, vf, _ = trajlib.evaluate_many(follower, t)
        p_exit, v_exit, _ = trajlib.evaluate(leader, leader.t_end)
        pl = np.where(t <= leader.t_end, trajlib.evaluate_many(leader, t)[0], p_exit + v_exit*(t - leader.t_end))
        dense = np.max(params.distance(vf) + pf - pl)
        self.assertAlmostEqual(m, dense, places=4)
        self.assertGreaterEqual(m, dense - 1e-9)

    def test_monotone_in_gamma(self):
        follower = trajlib.solve_cubic(0.0, 0.0, 15.0, 16.0, 212.0)
        leader = committed(1, 1, trajlib.solve_cubic(0.0, 30.0, 14.0, 14.0, 212.0))
        prev = None
        for gamma in (0.5, 1.0, 2.0, 4.0):
            m = safetylib.rear_end_margin(follower, leader, SafetyParams(gamma=gamma, phi=0.6))
            if prev is not None:
                self.assertGreater(m, prev)
            prev = m


class TestLateral(unittest.TestCase):
    def setUp(self):
        safetylib.crossing_time.cache_clear()

    def test_other_already_crossed(self):
        other = committed(1, 2, constant_speed(15, p0=25))
        candidate = constant_speed(15, t0=6.0)
        self.assertEqual(safetylib.lateral_margin(candidate, 100.0, other, 100.0, params), float('-inf'))

    def test_simultaneous(self):
        m = safetylib.lateral_margin(constant_speed(15), 100.0, committed(1, 2, constant_speed(15)), 100.0, params)
        self.assertAlmostEqual(m, 11.0, places=6)

    def test_other_ahead(self):
        other = committed(1, 2, constant_speed(15, t0=-2.0))
        m = safetylib.lateral_margin(constant_speed(15), 100.0, other, 100.0, params)
        self.assertAlmostEqual(m, 11 + 15*(100/15 - 2) - 100, places=6)
        self.assertAlmostEqual(m, -19.0, places=6)

    def test_symmetric(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            a = trajlib.solve_cubic(rng.uniform(0, 5), 0.0, rng.uniform(8, 18), rng.uniform(15, 25), 212.0)
            b = trajlib.solve_cubic(rng.uniform(0, 5), 0.0, rng.uniform(8, 18), rng.uniform(15, 25), 212.0)
            if not (trajlib.feasibility_check(a, trajlib.VehicleLimits(-3, 3, 1, 20)) and \
                    trajlib.feasibility_check(b, trajlib.VehicleLimits(-3, 3, 1, 20))):
                continue
            m_ab = safetylib.lateral_margin(a, 104.25, committed(2, 4, b), 107.75, params)
            m_ba = safetylib.lateral_margin(b, 107.75, committed(1, 1, a), 104.25, params)
            self.assertAlmostEqual(m_ab, m_ba, places=9)


class TestCheckCandidate(unittest.TestCase):
    def setUp(self):
        safetylib.crossing_time.cache_clear()
        self.geometry = geomlib.geometry_from_dict(crossing_doc)

    def test_empty(self):
        self.assertEqual(safetylib.check_candidate(constant_speed(15), 1, [], self.geometry, params), \
                (True, float('-inf')))

    def test_leader_far_ahead(self):
        ok, m = safetylib.check_candidate(constant_speed(15), 1, [committed(1, 1, constant_speed(15, p0=100))], \
                self.geometry, params)
        self.assertTrue(ok)
        self.assertAlmostEqual(m, -89.0, places=9)

    def test_simultaneous_arrival(self):
        ok, m = safetylib.check_candidate(constant_speed(15), 1, [committed(1, 2, constant_speed(15))], \
                self.geometry, params)
        self.assertFalse(ok)
        self.assertAlmostEqual(m, 11.0, places=6)

    def test_skips_own_plan(self):
        own = committed(7, 1, constant_speed(15))
        ok, m = safetylib.check_candidate(constant_speed(15), 1, [own], self.geometry, params, cav_id=7)
        self.assertTrue(ok)
        self.assertEqual(m, float('-inf'))

    def test_nearest_leader(self):
        near = committed(1, 1, constant_speed(15, p0=40))
        far = committed(2, 1, constant_speed(15, p0=100))
        earlier = committed(3, 1, constant_speed(15, t0=-5.0))
        #Ranked by position at the candidate start
        self.assertIs(safetylib.nearest_leader(constant_speed(15), 1, [far, near], None), near)
        self.assertIs(safetylib.nearest_leader(constant_speed(15, p0=50), 1, [far, near], None), far)
        self.assertIs(safetylib.nearest_leader(constant_speed(15), 1, [earlier], None), earlier)

    def test_follower_behind(self):
        #Slower candidate ahead of a committed CAV closing in
        follower = committed(1, 1, constant_speed(15))
        ok, m = safetylib.check_candidate(constant_speed(12, p0=40), 1, [follower], self.geometry, params)
        self.assertFalse(ok)
        self.assertAlmostEqual(m, 13.4, places=6)
        ok, _ = safetylib.check_candidate(constant_speed(15, p0=40), 1, [follower], self.geometry, params)
        self.assertTrue(ok)

    def test_departed_leader(self):
        #Exited at t=10 and 212 m, extrapolated at 3 m/s
        departed = committed(1, 1, CubicTrajectory(a=0.0, b=0.0, c=3.0, d=182.0, t_start=0.0, t_end=10.0))
        self.assertIs(safetylib.nearest_leader(constant_speed(12, p0=190, t0=11.0), 1, [departed]), departed)
        ok, m = safetylib.check_candidate(constant_speed(12, p0=190, t0=11.0), 1, [departed], self.geometry, params)
        self.assertFalse(ok)
        self.assertGreater(m, 0.0)


class TestConstraintSet(unittest.TestCase):
    def setUp(self):
        safetylib.crossing_time.cache_clear()
        self.geometry = geomlib.geometry_from_dict(crossing_doc)

    def test_skips_passed_conflicts(self):
        ahead = committed(1, 2, constant_speed(15, t0=-8.0))
        coming = committed(2, 2, constant_speed(15))
        cs = safetylib.constraint_set(1, 0.0, 0.0, [ahead, coming], self.geometry)
        self.assertEqual([c[0] for c in cs.crossings], [coming])
        self.assertEqual(cs.crossings[0][1:], (1, 100.0, 100.0))
        #Candidate already past the conflict
        self.assertEqual(len(safetylib.constraint_set(1, 0.0, 150.0, [coming], self.geometry)), 0)

    def test_exited_plans_bind_rear_end_only(self):
        exited = committed(1, 2, constant_speed(15, t0=-20.0))
        self.assertEqual(len(safetylib.constraint_set(1, 0.0, 0.0, [exited], self.geometry)), 0)
        same_path = committed(2, 1, constant_speed(15, t0=-20.0))
        cs = safetylib.constraint_set(1, 0.0, 0.0, [same_path], self.geometry)
        self.assertIs(cs.leader, same_path)
        self.assertEqual(cs.crossings, [])

    def test_leader_and_follower(self):
        near = committed(1, 1, constant_speed(15, p0=60))
        far = committed(2, 1, constant_speed(15, p0=120))
        behind = committed(3, 1, constant_speed(15, p0=10))
        further_behind = committed(4, 1, constant_speed(15))
        cs = safetylib.constraint_set(1, 0.0, 30.0, [far, behind, near, further_behind], self.geometry)
        self.assertIs(cs.leader, near)
        self.assertIs(cs.follower, behind)
        self.assertEqual(len(cs), 2)

    def test_first_violation(self):
        leader = committed(1, 1, constant_speed(15, p0=100))
        crossing = committed(2, 2, constant_speed(15))
        cs = safetylib.constraint_set(1, 0.0, 0.0, [leader, crossing], self.geometry)
        candidate = constant_speed(15)
        self.assertEqual(safetylib.first_violation(candidate, cs, params), 1)
        self.assertEqual(safetylib.first_violation(candidate, cs, params, start=1), 1)
        self.assertAlmostEqual(safetylib.worst_margin(candidate, cs, params), 11.0, places=6)
        self.assertIsNone(safetylib.first_violation(candidate, safetylib.constraint_set(1, 0.0, 0.0, [leader], \
                self.geometry), params))

    def test_agrees_with_full_check(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            others = [committed(k, int(rng.integers(1, 3)), constant_speed(float(rng.uniform(8, 18)), \
                    p0=float(rng.uniform(0, 150)), t0=float(rng.uniform(-5, 5)))) for k in range(1, 5)]
            candidate = constant_speed(float(rng.uniform(8, 18)), p0=float(rng.uniform(0, 50)))
            cs = safetylib.constraint_set(1, 0.0, candidate.d, others, self.geometry)
            leader = safetylib.nearest_leader(candidate, 1, others)
            full = float('-inf')
            if leader is not None:
                full = safetylib.rear_end_margin(candidate, leader, params)
            for plan in others:
                if plan.path_id == 2:
                    full = max(full, safetylib.lateral_margin(candidate, 100.0, plan, 100.0, params))
                elif plan is cs.follower:
                    full = max(full, safetylib.rear_end_margin(plan.trajectory, committed(0, 1, candidate), params))
            self.assertAlmostEqual(safetylib.worst_margin(candidate, cs, params), full, places=9)


class TestSampledMargins(unittest.TestCase):
    def setUp(self):
        self.geometry = geomlib.geometry_from_dict(crossing_doc)

    def test_agrees_with_analytic(self):
        follower = trajlib.PiecewiseTrajectory([constant_speed(15)])
        leader = trajlib.PiecewiseTrajectory([constant_speed(12, p0=40)])
        out = safetylib.sampled_margins([(1, 1, leader), (2, 1, follower)], self.geometry, params)
        self.assertAlmostEqual(out['rear_end_max'], 13.4, places=6)
        self.assertEqual(len(out['violations']), 1)
        self.assertEqual(out['violations'][0]['kind'], 'rear_end')

    def test_lateral(self):
        a = trajlib.PiecewiseTrajectory([constant_speed(15)])
        b = trajlib.PiecewiseTrajectory([constant_speed(15, t0=-2.0)])
        out = safetylib.sampled_margins([(1, 1, a), (2, 2, b)], self.geometry, params)
        self.assertAlmostEqual(out['lateral_max'], -19.0, places=6)
        self.assertEqual(out['violations'], [])


if __name__ == '__main__':
    unittest.main()
