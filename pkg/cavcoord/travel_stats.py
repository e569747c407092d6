#! /usr/bin/env python

#Travel-time metrics of a simulation log, and robust statistics of per-CAV
#travel times (metrics.json) or per-seed % change (sweep.csv)

import os
import sys
import json
import argparse

import numpy as np
import pandas as pd

from cavcoord.errors import CavCoordError


def percent_change(value, baseline):
    return 100.0*(value - baseline)/baseline


def travel_times(log):
    """cav_id -> travel time of every CAV that exited"""
    out = {rec.cav_id: rec.travel_time for rec in log.exited()}
    if not out:
        raise CavCoordError("No CAV exited the control zone")
    return out


def metrics(log, baseline=None, control_effort=True):
    """Summary of a completed run, optionally compared to a paired baseline run

    Averages are over CAVs that exited; the weighted average uses each CAV's
    weight at entry
    """
    tt = travel_times(log)
    recs = [log.cavs[cav_id] for cav_id in sorted(tt)]
    t = np.array([tt[rec.cav_id] for rec in recs])
    w = np.array([rec.weight for rec in recs])
    out = {'seed': log.seed, 'policy': log.policy, 'n_cavs': len(recs), \
            'average_travel_time': float(np.mean(t)), \
            'weighted_average_travel_time': float(np.sum(w*t)/np.sum(w))}
    if log.chosen_policy is not None:
        out['chosen_policy'] = log.chosen_policy
    per_cav = []
    for rec in recs:
        d = {'cav_id': rec.cav_id, 'path_id': rec.path_id, 'vehicle_class': rec.vehicle_class, \
                'entry_time': rec.entry_time, 'exit_time': rec.exit_time, 'travel_time': tt[rec.cav_id], \
                'weight': rec.weight, 'entry_delay': rec.entry_time - rec.arrival_time, 'n_pieces': len(rec.pieces)}
        if control_effort:
            d['control_effort'] = rec.executed().control_effort()
        per_cav.append(d)
    out['cavs'] = per_cav
    if control_effort:
        out['total_control_effort'] = float(sum(d['control_effort'] for d in per_cav))
    out['rounds'] = [{'round': r.index, 'tau': r.tau, 'reason': r.reason, 'policy_used': r.policy_used, \
            'j_chosen': r.j_chosen, 'j_fcfs': r.j_fcfs, 'j_priority': r.j_priority, 'n_held': r.n_held} for r in log.rounds]
    if baseline is not None:
        base = metrics(baseline, control_effort=False)
        out['baseline_policy'] = baseline.policy
        out['pct_change'] = percent_change(out['average_travel_time'], base['average_travel_time'])
        out['weighted_pct_change'] = percent_change(out['weighted_average_travel_time'], \
                base['weighted_average_travel_time'])
    return out


def get_stats_dict(a):
    """Robust statistics of a 1-D sample, NaN ignored"""
    a = np.asarray(a, dtype=float)
    a = a[~np.isnan(a)]
    if a.size == 0:
        return {'count': 0}
    med = np.median(a)
    p16, p84 = np.percentile(a, (15.9, 84.2))
    return {'count': int(a.size), 'mean': float(np.mean(a)), 'std': float(np.std(a)), 'median': float(med), \
            'nmad': float(1.4826*np.median(np.abs(a - med))), 'min': float(np.min(a)), 'max': float(np.max(a)), \
            'p16': float(p16), 'p84': float(p84)}


def getparser():
    parser = argparse.ArgumentParser(description="Compute robust stats of travel times (metrics.json) or % change (sweep.csv)")
    parser.add_argument('fn', type=str, help='Input filename')
    parser.add_argument('-col', type=str, default='pct_change_priority', help='Column of sweep.csv containing values for stats')
    return parser


def main(argv=None):
    parser = getparser()
    args = parser.parse_args(argv)

    fn = args.fn
    ext = os.path.splitext(fn)[1]

    if 'json' in ext:
        with open(fn) as f:
            m = json.load(f)
        a = [c['travel_time'] for c in m['cavs']]
        label = 'Travel time (s)'
    elif 'csv' in ext:
        df = pd.read_csv(fn)
        if args.col not in df.columns:
            sys.exit("Column %s not in %s" % (args.col, fn))
        a = df[args.col].values
        label = args.col
    else:
        sys.exit('Unsupported input type')

    stats = get_stats_dict(a)
    print(label)
    print("Count: %i" % stats['count'])
    if stats['count'] == 0:
        return
    print("Mean: %0.3f" % stats['mean'])
    print("Standard Deviation: %0.3f" % stats['std'])
    print("Median: %0.3f" % stats['median'])
    print("NMAD: %0.3f" % stats['nmad'])
    print("Min: %0.3f" % stats['min'])
    print("Max: %0.3f" % stats['max'])
    print("16th Percentile: %0.3f" % stats['p16'])
    print("84th Percentile: %0.3f" % stats['p84'])


if __name__ == "__main__":
    main()
