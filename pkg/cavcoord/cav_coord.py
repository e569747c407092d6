#! /usr/bin/env python

"""
Command-line front end for intersection coordination runs

Verbs:
    run                 simulate one scenario, write trajectories.csv, metrics.json, events.jsonl
    compare             same seed under fcfs and priority, best_of_both picked from the pair
    sweep               compare over volumes x seeds, optionally in parallel
    validate-geometry   load and check a geometry, print its summary
    plot-data           per-path position, rear-end bound and conflict crossing tables of a finished run

Log verbosity comes from the CAVCOORD_LOG environment variable (default WARNING)
"""

import os
import sys
import json
import logging
import argparse
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
import yaml

from cavcoord import geomlib, scenario, simlib, travel_stats
from cavcoord.errors import CavCoordError, ConfigError, InfeasibleWindowError, PlannerInfeasibleError

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

float_format = '%.6f'
log_format = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def setup_logging():
    level = getattr(logging, os.environ.get('CAVCOORD_LOG', 'WARNING').upper(), None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format=log_format, stream=sys.stderr)


def parse_volumes(s):
    """'800,1200,2400' -> [800.0, 1200.0, 2400.0]"""
    try:
        volumes = [float(x) for x in s.split(',') if x.strip()]
    except ValueError:
        raise ConfigError("Invalid volume list: %r" % s) from None
    if not volumes or min(volumes) <= 0:
        raise ConfigError("Volumes must be a non-empty list of positive numbers: %r" % s)
    return volumes


def parse_seeds(s):
    """'0..29' (inclusive) or '0,3,7' -> list of seeds"""
    try:
        if '..' in s:
            a, b = s.split('..')
            seeds = list(range(int(a), int(b) + 1))
        else:
            seeds = [int(x) for x in s.split(',') if x.strip()]
    except ValueError:
        raise ConfigError("Invalid seed range: %r" % s) from None
    if not seeds or min(seeds) < 0:
        raise ConfigError("Seeds must be a non-empty range of non-negative integers: %r" % s)
    return seeds


def write_json(obj, fn):
    with open(fn, 'w') as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write('\n')


def write_events(log, fn):
    with open(fn, 'w') as f:
        for e in log.events:
            f.write(json.dumps(e, sort_keys=True))
            f.write('\n')


def write_run(log, outdir):
    if not os.path.exists(outdir):
        os.makedirs(outdir)
    traj_fn = os.path.join(outdir, 'trajectories.csv')
    simlib.trajectory_table(log).to_csv(traj_fn, index=False, float_format=float_format)
    m = travel_stats.metrics(log)
    m['config'] = log.config.summary()
    write_json(m, os.path.join(outdir, 'metrics.json'))
    write_events(log, os.path.join(outdir, 'events.jsonl'))
    logger.info("Wrote %s", outdir)
    return m


def load_config(args):
    cfg = scenario.load_scenario_fn(args.config)
    return scenario.with_overrides(cfg, seed=getattr(args, 'seed', None), policy=getattr(args, 'policy', None), \
            horizon_s=getattr(args, 'horizon', None))


def compare_logs(log_fcfs, log_priority):
    """Per-policy rows of a paired comparison, % change relative to fcfs"""
    log_best = simlib.choose_best(log_fcfs, log_priority)
    rows = {}
    for name, log in (('fcfs', log_fcfs), ('priority', log_priority), ('best_of_both', log_best)):
        m = travel_stats.metrics(log, baseline=log_fcfs, control_effort=False)
        rows[name] = {'seed': log.seed, 'n_cavs': m['n_cavs'], 'average_travel_time': m['average_travel_time'], \
                'weighted_average_travel_time': m['weighted_average_travel_time'], \
                'pct_change_vs_fcfs': m['pct_change'], 'weighted_pct_change_vs_fcfs': m['weighted_pct_change']}
    rows['best_of_both']['chosen_policy'] = log_best.chosen_policy
    return rows


def compare(cfg):
    """One simulation per policy, same seed"""
    log_fcfs = simlib.run(cfg, 'fcfs')
    log_priority = simlib.run(cfg, 'priority')
    return compare_logs(log_fcfs, log_priority)


def sweep_cell(cfg, volume, seed):
    """Row of the sweep table for one (volume, seed)"""
    cfg = scenario.with_overrides(cfg, seed=seed, volume=volume)
    row = {'volume_vph': volume, 'seed': seed}
    try:
        rows = compare(cfg)
    except (PlannerInfeasibleError, InfeasibleWindowError) as e:
        logger.warning("Sweep cell volume=%s seed=%i infeasible: %s", volume, seed, e)
        row['status'] = 'infeasible'
        return row
    row['status'] = 'ok'
    row['n_cavs'] = rows['fcfs']['n_cavs']
    for name in ('fcfs', 'priority', 'best_of_both'):
        row['avg_%s' % name] = rows[name]['average_travel_time']
        row['weighted_avg_%s' % name] = rows[name]['weighted_average_travel_time']
    for name in ('priority', 'best_of_both'):
        row['pct_change_%s' % name] = rows[name]['pct_change_vs_fcfs']
        row['weighted_pct_change_%s' % name] = rows[name]['weighted_pct_change_vs_fcfs']
    row['chosen_policy'] = rows['best_of_both']['chosen_policy']
    return row


def sweep_summary(df):
    summary = {}
    for volume, g in df.groupby('volume_vph', sort=True):
        ok = g[g['status'] == 'ok']
        d = {'n_seeds': int(len(g)), 'n_infeasible': int((g['status'] != 'ok').sum())}
        for col in ('pct_change_priority', 'pct_change_best_of_both', 'weighted_pct_change_priority'):
            d[col] = travel_stats.get_stats_dict(ok[col].values if col in ok else [])
        summary[str(volume)] = d
    return summary


def plot_tables(traj_df, events, path_id, geometry, safety):
    """Wide table of positions and rear-end bounds on one path, plus conflict crossing markers

    Bound of a CAV is p_leader - (gamma + phi*v) with the leader the previous CAV to enter the path
    """
    marker_cols = ['cav_id', 'path_id', 'conflict_id', 't_cross', 'p']
    geometry.path(path_id)
    sub = traj_df[traj_df['path_id'] == path_id]
    present = set(int(x) for x in sub['cav_id'].unique())
    order = [int(e['cav_id']) for e in events if e['event'] == 'enter' and e['path_id'] == path_id]
    cav_ids = [c for c in order if c in present]
    if not cav_ids:
        return pd.DataFrame(columns=['t', 'replan']), pd.DataFrame(columns=marker_cols)

    p = sub.pivot(index='t', columns='cav_id', values='p')
    v = sub.pivot(index='t', columns='cav_id', values='v')
    t0, t1 = p.index.min(), p.index.max()
    replan_t = sorted(set(e['t'] for e in events if e['event'] == 'replan' and t0 <= e['t'] <= t1))
    t_index = sorted(set(p.index) | set(replan_t))
    #Replan instants between samples take values interpolated from the neighbouring samples
    p = p.reindex(t_index).interpolate(method='index', limit_area='inside')
    v = v.reindex(t_index).interpolate(method='index', limit_area='inside')

    cols = {'t': t_index, 'replan': np.isin(t_index, replan_t).astype(int)}
    prev = None
    for cav_id in cav_ids:
        cols['p_%i' % cav_id] = p[cav_id].values
        if prev is None:
            cols['bound_%i' % cav_id] = np.full(len(t_index), np.nan)
        else:
            cols['bound_%i' % cav_id] = p[prev].values - safety.distance(v[cav_id].values)
        prev = cav_id
    table = pd.DataFrame(cols)

    markers = []
    for other in geomlib.crossing_paths(geometry, path_id):
        osub = traj_df[traj_df['path_id'] == other]
        for conflict_id, d_here, d_other in geomlib.conflicts_between(geometry, path_id, other):
            for cav_id, g in osub.groupby('cav_id', sort=True):
                pp = g['p'].values
                if pp.size == 0 or pp[0] > d_other or pp[-1] < d_other:
                    continue
                t_cross = float(np.interp(d_other, pp, g['t'].values))
                markers.append({'cav_id': int(cav_id), 'path_id': other, 'conflict_id': conflict_id, \
                        't_cross': t_cross, 'p': d_here})
    markers = pd.DataFrame(markers, columns=marker_cols)
    if not markers.empty:
        markers = markers.sort_values(['t_cross', 'cav_id'], kind='mergesort')
    return table, markers


def cmd_run(args):
    cfg = load_config(args)
    log = simlib.run(cfg)
    m = write_run(log, args.out)
    print("Average travel time: %0.3f s over %i CAVs" % (m['average_travel_time'], m['n_cavs']))
    return 0


def cmd_compare(args):
    cfg = load_config(args)
    rows = compare(cfg)
    if not os.path.exists(args.out):
        os.makedirs(args.out)
    write_json({'seed': cfg.seed, 'config': cfg.summary(), 'policies': rows}, os.path.join(args.out, 'comparison.json'))
    for name, row in rows.items():
        print("%s: %0.3f s (%+0.2f%%)" % (name, row['average_travel_time'], row['pct_change_vs_fcfs']))
    return 0


def cmd_sweep(args):
    cfg = load_config(args)
    volumes = parse_volumes(args.volumes) if args.volumes else sorted(set(cfg.volumes.values()))
    seeds = parse_seeds(args.seeds)
    cells = [(v, s) for v in volumes for s in seeds]
    logger.info("Sweep over %i cells with %i workers", len(cells), args.jobs)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(sweep_cell, [cfg]*len(cells), [v for v, _ in cells], [s for _, s in cells]))
    else:
        rows = [sweep_cell(cfg, v, s) for v, s in cells]
    if not os.path.exists(args.out):
        os.makedirs(args.out)
    df = pd.DataFrame(rows)
    df.to_csv(os.path.join(args.out, 'sweep.csv'), index=False, float_format=float_format)
    summary = sweep_summary(df)
    write_json(summary, os.path.join(args.out, 'sweep_summary.json'))
    for volume, d in summary.items():
        s = d['pct_change_priority']
        if s['count']:
            print("%s veh/h: priority %% change mean %0.2f, min %0.2f, max %0.2f over %i seeds" % \
                    (volume, s['mean'], s['min'], s['max'], s['count']))
    return 0


def cmd_validate_geometry(args):
    if args.config is None:
        geometry = scenario.load_scenario().geometry
    else:
        with open(args.config) as f:
            text = f.read()
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError("Unable to parse %s: %s" % (args.config, e)) from None
        #Geometry-only file, otherwise a scenario (which may use the default geometry)
        if isinstance(doc, dict) and 'paths' in doc:
            geometry = geomlib.geometry_from_dict(doc)
        else:
            geometry = scenario.load_scenario(text, base_dir=os.path.dirname(os.path.abspath(args.config))).geometry
    print(json.dumps(geomlib.geometry_summary(geometry), indent=2, sort_keys=True))
    return 0


def cmd_plot_data(args):
    cfg = scenario.load_scenario_fn(args.config)
    traj_df = pd.read_csv(os.path.join(args.out, 'trajectories.csv'))
    with open(os.path.join(args.out, 'events.jsonl')) as f:
        events = [json.loads(line) for line in f if line.strip()]
    table, markers = plot_tables(traj_df, events, args.path_id, cfg.geometry, cfg.safety)
    out_fn = os.path.join(args.out, 'plot_path%i.csv' % args.path_id)
    table.to_csv(out_fn, index=False, float_format=float_format)
    markers.to_csv(os.path.join(args.out, 'plot_path%i_conflicts.csv' % args.path_id), index=False, \
            float_format=float_format)
    print(out_fn)
    return 0


def getparser():
    parser = argparse.ArgumentParser(description="Signal-free intersection coordination of connected automated vehicles")
    sub = parser.add_subparsers(dest='verb')
    sub.required = True

    p = sub.add_parser('run', help='Simulate one scenario')
    p.add_argument('--config', default=None, help='Scenario YAML (default: shipped scenario)')
    p.add_argument('--seed', type=int, default=None, help='Override scenario seed')
    p.add_argument('--policy', choices=scenario.policies, default=None, help='Override sequencing policy')
    p.add_argument('--horizon', type=float, default=None, help='Override arrival horizon (s)')
    p.add_argument('--out', default='cavcoord_out', help='Output directory')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('compare', help='Paired fcfs / priority / best_of_both runs with one seed')
    p.add_argument('--config', default=None, help='Scenario YAML (default: shipped scenario)')
    p.add_argument('--seed', type=int, default=None, help='Override scenario seed')
    p.add_argument('--horizon', type=float, default=None, help='Override arrival horizon (s)')
    p.add_argument('--out', default='cavcoord_out', help='Output directory')
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('sweep', help='Paired comparisons over volumes x seeds')
    p.add_argument('--config', default=None, help='Scenario YAML (default: shipped scenario)')
    p.add_argument('--volumes', default=None, help='Comma-separated per-path volumes in veh/h, e.g. 800,1200,2400')
    p.add_argument('--seeds', default='0..29', help='Seed range a..b (inclusive) or comma-separated list')
    p.add_argument('--horizon', type=float, default=None, help='Override arrival horizon (s)')
    p.add_argument('--jobs', type=int, default=1, help='Number of worker processes')
    p.add_argument('--out', default='cavcoord_out', help='Output directory')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('validate-geometry', help='Check a geometry (scenario or geometry-only file)')
    p.add_argument('--config', default=None, help='Scenario or geometry YAML (default: shipped geometry)')
    p.set_defaults(func=cmd_validate_geometry)

    p = sub.add_parser('plot-data', help='Plot-ready tables for one path of a finished run')
    p.add_argument('--config', default=None, help='Scenario YAML the run used (geometry and safety parameters)')
    p.add_argument('--out', default='cavcoord_out', help='Directory of the finished run')
    p.add_argument('--path-id', dest='path_id', type=int, required=True, help='Path to extract')
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None):
    setup_logging()
    parser = getparser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print("Configuration error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG
    except (PlannerInfeasibleError, InfeasibleWindowError) as e:
        print("Planner infeasible: %s" % e, file=sys.stderr)
        state = getattr(e, 'state', None)
        outdir = getattr(args, 'out', None)
        if state and outdir:
            try:
                if not os.path.exists(outdir):
                    os.makedirs(outdir)
                write_json(state, os.path.join(outdir, 'failure_state.json'))
            except OSError:
                logger.exception("Unable to write failure state")
        return EXIT_INFEASIBLE
    except OSError as e:
        print("I/O error: %s" % e, file=sys.stderr)
        return EXIT_IO
    except CavCoordError as e:
        print("Error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
