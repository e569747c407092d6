#! /usr/bin/env python

"""
Scenario configuration: loading, defaults and validation

Scenario documents are YAML. Every key is optional, missing keys take the
value from the shipped data/default_scenario.yaml.
"""

import os
import copy
import logging
from dataclasses import dataclass, replace

import yaml

from cavcoord.errors import ConfigError
from cavcoord import geomlib
from cavcoord.trajlib import VehicleLimits
from cavcoord.safetylib import SafetyParams

logger = logging.getLogger(__name__)

default_scenario_fn = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data', 'default_scenario.yaml')

arrival_models = ('poisson', 'uniform_headway')
replanning_modes = ('on_arrival', 'periodic', 'both', 'entry_only')
policies = ('fcfs', 'priority', 'best_of_both')
weight_modes = ('inverse_window', 'uniform')
processing_time_modes = ('absolute', 'residual')
round_failure_modes = ('keep', 'abort')


@dataclass(frozen=True)
class VehicleClass:
    name: str
    share: float
    priority: float


@dataclass(frozen=True)
class NoiseModel:
    #Half-ranges of the uniform observation deviation
    position: float = 0.0
    speed: float = 0.0
    #Extra standstill distance while planning (m), None derives it from the half-ranges
    allowance: float = None

    def planning_allowance(self, phi):
        """Standstill buffer covering two worst-case position errors and the reaction
        distance of two worst-case speed errors
        """
        if self.allowance is not None:
            return self.allowance
        return 2.0*self.position + 2.0*phi*self.speed


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: geomlib.IntersectionGeometry
    limits: VehicleLimits
    safety: SafetyParams
    #path_id -> veh/h, paths not listed get no traffic
    volumes: dict
    arrival_model: str
    entry_speed: tuple
    noise: NoiseModel
    replanning: str
    replan_period: float
    min_replan_distance: float
    policy: str
    weight_mode: str
    processing_time: str
    horizon_s: float
    max_cavs: int
    seed: int
    grid_step: float
    sample_step: float
    vehicle_classes: tuple
    #keep: a round with no safe plan keeps the committed plans, abort: raise
    on_round_failure: str = 'keep'

    def summary(self):
        """JSON-serializable description, used in logs and output headers"""
        return {'seed': self.seed, 'policy': self.policy, 'replanning': self.replanning, \
                'arrival_model': self.arrival_model, 'volumes_vph': {str(k): v for k, v in self.volumes.items()}, \
                'horizon_s': self.horizon_s, 'max_cavs': self.max_cavs, \
                'noise': {'position_m': self.noise.position, 'speed_mps': self.noise.speed, \
                    'allowance_m': self.noise.planning_allowance(self.safety.phi)}, \
                'on_round_failure': self.on_round_failure, \
                'weight_mode': self.weight_mode, 'processing_time': self.processing_time}


def _merge(base, override):
    """Recursive dict update, override wins; lists and scalars are replaced"""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _section(doc, key):
    val = doc.get(key)
    if not isinstance(val, dict):
        raise ConfigError("%s must be a mapping" % key)
    return val


def _number(val, what, positive=False, nonneg=False):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError("%s is not a number: %r" % (what, val))
    val = float(val)
    if positive and not val > 0:
        raise ConfigError("%s must be > 0, got %s" % (what, val))
    if nonneg and not val >= 0:
        raise ConfigError("%s must be >= 0, got %s" % (what, val))
    return val


def _choice(val, what, options):
    if val not in options:
        raise ConfigError("%s must be one of %s, got %r" % (what, options, val))
    return val


def _volumes(val, geometry):
    if isinstance(val, dict):
        volumes = {}
        for k, v in val.items():
            try:
                path_id = int(k)
            except (TypeError, ValueError):
                raise ConfigError("volume_vph key is not a path id: %r" % (k,)) from None
            geometry.path(path_id)
            volumes[path_id] = _number(v, "Volume on path %i" % path_id, positive=True)
        if not volumes:
            raise ConfigError("volume_vph mapping is empty")
        return dict(sorted(volumes.items()))
    v = _number(val, "volume_vph", positive=True)
    return {path_id: v for path_id in geometry.path_ids}


def _vehicle_classes(val):
    if not isinstance(val, list) or not val:
        raise ConfigError("vehicle_classes must be a non-empty list")
    classes = []
    for d in val:
        if not isinstance(d, dict) or 'name' not in d:
            raise ConfigError("vehicle class needs a name: %r" % (d,))
        name = str(d['name'])
        classes.append(VehicleClass(name=name, share=_number(d.get('share', 1.0), "Class %s share" % name, positive=True), \
                priority=_number(d.get('priority', 1.0), "Class %s priority" % name, positive=True)))
    if len(set(c.name for c in classes)) != len(classes):
        raise ConfigError("vehicle class names must be unique")
    return tuple(classes)


def scenario_from_dict(doc, base_dir=None):
    """Validate a full (defaults merged) scenario document into a ScenarioConfig"""
    if 'geometry_fn' in doc and doc['geometry_fn'] is not None:
        fn = doc['geometry_fn']
        if base_dir is not None and not os.path.isabs(fn):
            fn = os.path.join(base_dir, fn)
        geometry = geomlib.load_geometry_fn(fn)
    else:
        geometry = geomlib.geometry_from_dict(_section(doc, 'geometry'))

    lim = _section(doc, 'limits')
    limits = VehicleLimits(u_min=_number(lim.get('u_min'), 'limits.u_min'), u_max=_number(lim.get('u_max'), 'limits.u_max'), \
            v_min=_number(lim.get('v_min'), 'limits.v_min'), v_max=_number(lim.get('v_max'), 'limits.v_max'))
    saf = _section(doc, 'safety')
    safety = SafetyParams(gamma=_number(saf.get('gamma'), 'safety.gamma'), phi=_number(saf.get('phi'), 'safety.phi'))

    speed = doc.get('entry_speed_mps')
    if not isinstance(speed, (list, tuple)) or len(speed) != 2:
        raise ConfigError("entry_speed_mps must be [lo, hi]")
    lo, hi = (_number(x, 'entry_speed_mps') for x in speed)
    if not limits.v_min <= lo <= hi <= limits.v_max:
        raise ConfigError("entry_speed_mps [%s, %s] must lie within [v_min, v_max] = [%s, %s]" % \
                (lo, hi, limits.v_min, limits.v_max))

    nz = _section(doc, 'noise')
    noise = NoiseModel(position=_number(nz.get('position_m', 0.0), 'noise.position_m', nonneg=True), \
            speed=_number(nz.get('speed_mps', 0.0), 'noise.speed_mps', nonneg=True), \
            allowance=None if nz.get('allowance_m') is None else \
                    _number(nz.get('allowance_m'), 'noise.allowance_m', nonneg=True))

    rp = _section(doc, 'replanning')
    horizon_s = doc.get('horizon_s')
    max_cavs = doc.get('max_cavs')
    if horizon_s is None and max_cavs is None:
        raise ConfigError("Either horizon_s or max_cavs must be set")
    if horizon_s is not None:
        horizon_s = _number(horizon_s, 'horizon_s', positive=True)
    if max_cavs is not None:
        max_cavs = int(_number(max_cavs, 'max_cavs', positive=True))
    seed = doc.get('seed')
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer, got %r" % (seed,))

    return ScenarioConfig(geometry=geometry, limits=limits, safety=safety, \
            volumes=_volumes(doc.get('volume_vph'), geometry), \
            arrival_model=_choice(doc.get('arrival_model'), 'arrival_model', arrival_models), \
            entry_speed=(lo, hi), noise=noise, \
            replanning=_choice(rp.get('mode'), 'replanning.mode', replanning_modes), \
            replan_period=_number(rp.get('period_s'), 'replanning.period_s', positive=True), \
            min_replan_distance=_number(rp.get('min_distance_m'), 'replanning.min_distance_m', nonneg=True), \
            on_round_failure=_choice(rp.get('on_failure', 'keep'), 'replanning.on_failure', round_failure_modes), \
            policy=_choice(doc.get('policy'), 'policy', policies), \
            weight_mode=_choice(doc.get('weight_mode'), 'weight_mode', weight_modes), \
            processing_time=_choice(doc.get('processing_time'), 'processing_time', processing_time_modes), \
            horizon_s=horizon_s, max_cavs=max_cavs, seed=seed, \
            grid_step=_number(_section(doc, 'planner').get('grid_step_s'), 'planner.grid_step_s', positive=True), \
            sample_step=_number(_section(doc, 'output').get('sample_step_s'), 'output.sample_step_s', positive=True), \
            vehicle_classes=_vehicle_classes(doc.get('vehicle_classes')))


def default_document():
    with open(default_scenario_fn) as f:
        return yaml.safe_load(f)


def load_scenario(config_text=None, base_dir=None):
    """Parse a scenario (YAML text) over the defaults; None gives the default scenario
    """
    doc = {}
    if config_text is not None:
        try:
            doc = yaml.safe_load(config_text)
        except yaml.YAMLError as e:
            raise ConfigError("Unable to parse scenario: %s" % e) from None
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise ConfigError("Scenario document must be a mapping")
    base = default_document()
    #A user geometry replaces the default one entirely
    if 'geometry' in doc or 'geometry_fn' in doc:
        base.pop('geometry', None)
    config = scenario_from_dict(_merge(base, doc), base_dir=base_dir)
    logger.info("Scenario: %s", config.summary())
    return config


def load_scenario_fn(fn=None):
    if fn is None:
        return load_scenario()
    with open(fn) as f:
        text = f.read()
    return load_scenario(text, base_dir=os.path.dirname(os.path.abspath(fn)))


def with_overrides(config, seed=None, policy=None, volume=None, horizon_s=None):
    """Copy of config with command-line overrides applied"""
    changes = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed must be a non-negative integer, got %r" % (seed,))
        changes['seed'] = int(seed)
    if policy is not None:
        changes['policy'] = _choice(policy, 'policy', policies)
    if volume is not None:
        v = _number(volume, 'volume', positive=True)
        changes['volumes'] = {path_id: v for path_id in config.volumes}
    if horizon_s is not None:
        changes['horizon_s'] = _number(horizon_s, 'horizon_s', positive=True)
    return replace(config, **changes)
