#! /usr/bin/env python

"""
Library of functions for the intersection layout: paths, their lengths and the
conflict points shared between path pairs

Positions are distances in meters from the path entry (control zone entry).
A geometry is immutable after loading and can be shared read-only.
"""

import logging
from dataclasses import dataclass, field

import yaml

from cavcoord.errors import ConfigError

logger = logging.getLogger(__name__)

#Default control zone lengths, used when a path omits length_m
default_lengths = {'straight': 212.0, 'turn': 215.0}
path_kinds = tuple(default_lengths.keys())


@dataclass(frozen=True)
class PathGeometry:
    path_id: int
    length: float
    kind: str = 'straight'
    name: str = ''


@dataclass(frozen=True)
class ConflictPoint:
    conflict_id: int
    #path_id -> distance from that path's entry (m)
    locations: dict

    def distance_on(self, path_id):
        return self.locations[path_id]


@dataclass(frozen=True)
class IntersectionGeometry:
    paths: tuple
    conflicts: tuple
    _path_index: dict = field(init=False, repr=False, compare=False)
    _pair_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, '_path_index', {p.path_id: p for p in self.paths})
        pair_index = {}
        for c in self.conflicts:
            ids = sorted(c.locations)
            for i, a in enumerate(ids):
                for b in ids[i+1:]:
                    pair_index.setdefault((a, b), []).append(c)
        object.__setattr__(self, '_pair_index', pair_index)

    @property
    def path_ids(self):
        return tuple(p.path_id for p in self.paths)

    def path(self, path_id):
        try:
            return self._path_index[path_id]
        except KeyError:
            raise ConfigError("Unknown path_id: %s" % (path_id,)) from None

    def length(self, path_id):
        return self.path(path_id).length


def _as_float(val, what):
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError("%s is not a number: %r" % (what, val)) from None


def _as_int(val, what):
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError("%s is not an integer: %r" % (what, val))
    return int(val)


def _parse_path(d):
    if not isinstance(d, dict) or 'id' not in d:
        raise ConfigError("Path entry needs an id: %r" % (d,))
    path_id = _as_int(d['id'], 'path id')
    kind = d.get('kind', 'straight')
    if kind not in path_kinds:
        raise ConfigError("Path %i: kind must be one of %s, got %r" % (path_id, path_kinds, kind))
    #Kind only decides the default length
    if d.get('length_m') is None:
        length = default_lengths[kind]
    else:
        length = _as_float(d['length_m'], 'Path %i length_m' % path_id)
    if not length > 0:
        raise ConfigError("Path %i: length must be > 0, got %s" % (path_id, length))
    return PathGeometry(path_id=path_id, length=length, kind=kind, name=str(d.get('name', '')))


def _parse_conflict(d):
    if not isinstance(d, dict) or 'id' not in d:
        raise ConfigError("Conflict entry needs an id: %r" % (d,))
    conflict_id = _as_int(d['id'], 'conflict id')
    locs = d.get('locations')
    if not isinstance(locs, list):
        raise ConfigError("Conflict %i: locations must be a list" % conflict_id)
    locations = {}
    for loc in locs:
        if not isinstance(loc, dict) or 'path_id' not in loc or 'distance_m' not in loc:
            raise ConfigError("Conflict %i: location needs path_id and distance_m: %r" % (conflict_id, loc))
        path_id = _as_int(loc['path_id'], 'Conflict %i path_id' % conflict_id)
        if path_id in locations:
            raise ConfigError("Conflict %i: path %i listed twice" % (conflict_id, path_id))
        locations[path_id] = _as_float(loc['distance_m'], 'Conflict %i distance_m' % conflict_id)
    if len(locations) < 2:
        raise ConfigError("Conflict %i: needs at least 2 distinct paths" % conflict_id)
    return ConflictPoint(conflict_id=conflict_id, locations=dict(sorted(locations.items())))


def validate_geometry(paths, conflicts):
    """Check the type invariants, raising ConfigError naming the offending path/conflict
    """
    path_len = {}
    for p in paths:
        if p.path_id in path_len:
            raise ConfigError("Duplicate path_id: %i" % p.path_id)
        path_len[p.path_id] = p.length

    seen_ids = set()
    seen_pairs = set()
    seen_points = {}
    for c in conflicts:
        if c.conflict_id in seen_ids:
            raise ConfigError("Duplicate conflict_id: %i" % c.conflict_id)
        seen_ids.add(c.conflict_id)
        for path_id, d in c.locations.items():
            if path_id not in path_len:
                raise ConfigError("Conflict %i: unknown path_id %i" % (c.conflict_id, path_id))
            if not 0 < d < path_len[path_id]:
                raise ConfigError("Conflict %i: distance %s outside path %i (length %s)" % \
                        (c.conflict_id, d, path_id, path_len[path_id]))
            #Two conflicts at one spot of a path would be a shared segment or a merge
            key = (path_id, d)
            if key in seen_points:
                raise ConfigError("Conflict %i: path %i already crossed at %s m by conflict %i" % \
                        (c.conflict_id, path_id, d, seen_points[key]))
            seen_points[key] = c.conflict_id
        ids = sorted(c.locations)
        for i, a in enumerate(ids):
            for b in ids[i+1:]:
                pair = (a, c.locations[a], b, c.locations[b])
                if pair in seen_pairs:
                    raise ConfigError("Conflict %i: duplicates a crossing of paths %i and %i" % (c.conflict_id, a, b))
                seen_pairs.add(pair)


def geometry_from_dict(doc):
    """Build an IntersectionGeometry from a parsed document

    Accepts either a scenario document with a geometry section or the geometry
    section itself
    """
    if not isinstance(doc, dict):
        raise ConfigError("Geometry document must be a mapping")
    if 'geometry' in doc:
        doc = doc['geometry']
        if not isinstance(doc, dict):
            raise ConfigError("geometry section must be a mapping")
    if not isinstance(doc.get('paths'), list) or not doc['paths']:
        raise ConfigError("Geometry needs a non-empty list of paths")
    conflicts_doc = doc.get('conflicts') or []
    if not isinstance(conflicts_doc, list):
        raise ConfigError("Geometry conflicts must be a list")
    paths = [_parse_path(d) for d in doc['paths']]
    conflicts = [_parse_conflict(d) for d in conflicts_doc]
    validate_geometry(paths, conflicts)
    paths.sort(key=lambda p: p.path_id)
    conflicts.sort(key=lambda c: c.conflict_id)
    return IntersectionGeometry(paths=tuple(paths), conflicts=tuple(conflicts))


def load_geometry(config_text):
    """Parse and validate the geometry of a scenario (YAML text)
    """
    try:
        doc = yaml.safe_load(config_text)
    except yaml.YAMLError as e:
        raise ConfigError("Unable to parse geometry document: %s" % e) from None
    geometry = geometry_from_dict(doc)
    logger.debug("Loaded geometry with %i paths, %i conflicts", len(geometry.paths), len(geometry.conflicts))
    return geometry


def load_geometry_fn(fn):
    with open(fn) as f:
        return load_geometry(f.read())


def conflicts_between(geometry, path_a, path_b):
    """Conflicts shared by two paths as (conflict_id, distance_on_a, distance_on_b), sorted by id

    The same path never has lateral conflicts with itself
    """
    geometry.path(path_a)
    geometry.path(path_b)
    if path_a == path_b:
        return []
    key = (min(path_a, path_b), max(path_a, path_b))
    out = [(c.conflict_id, c.locations[path_a], c.locations[path_b]) for c in geometry._pair_index.get(key, [])]
    out.sort()
    return out


def crossing_paths(geometry, path_id):
    """Ids of paths sharing at least one conflict with path_id"""
    return sorted(b for b in geometry.path_ids if b != path_id and conflicts_between(geometry, path_id, b))


def geometry_summary(geometry):
    out = {'paths': [], 'conflicts': []}
    for p in geometry.paths:
        out['paths'].append({'id': p.path_id, 'length_m': p.length, 'kind': p.kind, 'name': p.name, \
                'crosses': crossing_paths(geometry, p.path_id)})
    for c in geometry.conflicts:
        out['conflicts'].append({'id': c.conflict_id, \
                'locations': [{'path_id': k, 'distance_m': v} for k, v in c.locations.items()]})
    return out
