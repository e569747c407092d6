import os
import shutil
import tempfile
import unittest

import yaml

from cavcoord import scenario
from cavcoord.errors import ConfigError


class TestLoadScenario(unittest.TestCase):
    def test_defaults(self):
        cfg = scenario.load_scenario()
        self.assertEqual(cfg.seed, 0)
        self.assertEqual(cfg.policy, 'priority')
        self.assertEqual(cfg.replanning, 'on_arrival')
        self.assertEqual(cfg.volumes, {i: 1200.0 for i in range(1, 7)})
        self.assertEqual(cfg.entry_speed, (12.0, 17.0))
        self.assertEqual((cfg.limits.u_min, cfg.limits.u_max, cfg.limits.v_min, cfg.limits.v_max), (-3.0, 3.0, 1.0, 20.0))
        self.assertEqual((cfg.safety.gamma, cfg.safety.phi), (2.0, 0.6))
        self.assertEqual(len(cfg.geometry.paths), 6)
        self.assertEqual(cfg.vehicle_classes[0].name, 'car')

    def test_empty_document(self):
        self.assertEqual(scenario.load_scenario('').seed, 0)

    def test_partial_override(self):
        cfg = scenario.load_scenario("seed: 5\nnoise: {speed_mps: 0.5}\nlimits: {v_max: 25}\n")
        self.assertEqual(cfg.seed, 5)
        self.assertEqual(cfg.noise.speed, 0.5)
        self.assertEqual(cfg.noise.position, 0.0)
        self.assertEqual(cfg.limits.v_max, 25.0)
        self.assertEqual(cfg.limits.u_min, -3.0)

    def test_volume_mapping(self):
        cfg = scenario.load_scenario("volume_vph: {1: 600, 3: 900}\n")
        self.assertEqual(cfg.volumes, {1: 600.0, 3: 900.0})

    def test_user_geometry_replaces_default(self):
        cfg = scenario.load_scenario("geometry:\n  paths: [{id: 7, length_m: 150}]\n")
        self.assertEqual(cfg.geometry.path_ids, (7,))
        self.assertEqual(cfg.volumes, {7: 1200.0})

    def test_geometry_fn(self):
        tmpdir = tempfile.mkdtemp()
        try:
            with open(os.path.join(tmpdir, 'layout.yaml'), 'w') as f:
                yaml.safe_dump({'paths': [{'id': 1, 'length_m': 100.0}, {'id': 2, 'length_m': 100.0}]}, f)
            fn = os.path.join(tmpdir, 'scenario.yaml')
            with open(fn, 'w') as f:
                f.write("geometry_fn: layout.yaml\n")
            cfg = scenario.load_scenario_fn(fn)
            self.assertEqual(cfg.geometry.path_ids, (1, 2))
        finally:
            shutil.rmtree(tmpdir)

    def test_invalid(self):
        bad = [
            "seed: -1\n",
            "seed: 1.5\n",
            "policy: random\n",
            "arrival_model: burst\n",
            "replanning: {mode: sometimes}\n",
            "replanning: {period_s: 0}\n",
            "replanning: {on_failure: retry}\n",
            "noise: {allowance_m: -1}\n",
            "volume_vph: 0\n",
            "volume_vph: {9: 600}\n",
            "entry_speed_mps: [12]\n",
            "entry_speed_mps: [12, 30]\n",
            "limits: {u_min: 1}\n",
            "safety: {gamma: 0}\n",
            "noise: {speed_mps: -1}\n",
            "horizon_s: null\n",
            "vehicle_classes: []\n",
            "vehicle_classes: [{name: car}, {name: car}]\n",
            "planner: {grid_step_s: 0}\n",
            "- a list\n",
            "seed: [",
        ]
        for text in bad:
            with self.assertRaises(ConfigError, msg=text):
                scenario.load_scenario(text)

    def test_noise_allowance(self):
        cfg = scenario.load_scenario("noise: {position_m: 2.0, speed_mps: 0.2}\n")
        self.assertIsNone(cfg.noise.allowance)
        self.assertAlmostEqual(cfg.noise.planning_allowance(cfg.safety.phi), 4.24)
        cfg = scenario.load_scenario("noise: {position_m: 2.0, allowance_m: 1.5}\n")
        self.assertEqual(cfg.noise.planning_allowance(cfg.safety.phi), 1.5)
        self.assertEqual(scenario.load_scenario().noise.planning_allowance(0.6), 0.0)

    def test_round_failure(self):
        self.assertEqual(scenario.load_scenario().on_round_failure, 'keep')
        self.assertEqual(scenario.load_scenario("replanning: {on_failure: abort}\n").on_round_failure, 'abort')

    def test_max_cavs_only(self):
        cfg = scenario.load_scenario("horizon_s: null\nmax_cavs: 4\n")
        self.assertIsNone(cfg.horizon_s)
        self.assertEqual(cfg.max_cavs, 4)


class TestOverrides(unittest.TestCase):
    def test_overrides(self):
        cfg = scenario.load_scenario("volume_vph: {1: 600, 3: 900}\n")
        out = scenario.with_overrides(cfg, seed=3, policy='fcfs', volume=1500, horizon_s=30)
        self.assertEqual((out.seed, out.policy, out.horizon_s), (3, 'fcfs', 30.0))
        self.assertEqual(out.volumes, {1: 1500.0, 3: 1500.0})
        #Original untouched
        self.assertEqual(cfg.seed, 0)

    def test_bad_override(self):
        cfg = scenario.load_scenario()
        with self.assertRaises(ConfigError):
            scenario.with_overrides(cfg, policy='lifo')
        with self.assertRaises(ConfigError):
            scenario.with_overrides(cfg, seed=-2)


if __name__ == '__main__':
    unittest.main()
