#! /usr/bin/env python

"""
Library of functions for the decision sequence at a replanning instance

Every in-zone CAV is a job with weight w and processing time P. CAVs on the
same path form a chain (leader first) that the sequence must respect. The
re-sequencing algorithm emits, chain by chain, the prefix with the largest
rho-factor (cumulative w over cumulative P), which minimizes the total
weighted completion time J = sum(w_i * C_i) under chain precedence.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from cavcoord.errors import SchedulingError

logger = logging.getLogger(__name__)

#Floor on the window size used for weights (s)
weight_eps = 1e-3
#Relative tolerance when comparing ratios
rho_rtol = 1e-12
#Largest instance brute_force_optimal will enumerate
brute_force_max_jobs = 10


@dataclass(frozen=True)
class Job:
    cav_id: int
    weight: float
    processing_time: float

    def __post_init__(self):
        if not self.weight > 0:
            raise SchedulingError("CAV %s: weight must be > 0, got %s" % (self.cav_id, self.weight))
        if not self.processing_time > 0:
            raise SchedulingError("CAV %s: processing time must be > 0, got %s" % (self.cav_id, self.processing_time))


@dataclass(frozen=True)
class Chain:
    path_id: int
    #Leader first
    jobs: tuple

    def __post_init__(self):
        if not self.jobs:
            raise SchedulingError("Chain on path %s is empty" % self.path_id)
        object.__setattr__(self, 'jobs', tuple(self.jobs))


@dataclass(frozen=True)
class PrecedenceGraph:
    chains: tuple

    def __post_init__(self):
        chains = tuple(sorted(self.chains, key=lambda c: c.path_id))
        seen = set()
        for c in chains:
            for j in c.jobs:
                if j.cav_id in seen:
                    raise SchedulingError("CAV %s appears in more than one chain position" % j.cav_id)
                seen.add(j.cav_id)
        object.__setattr__(self, 'chains', chains)

    @property
    def jobs(self):
        return {j.cav_id: j for c in self.chains for j in c.jobs}

    def __len__(self):
        return sum(len(c.jobs) for c in self.chains)


@dataclass(frozen=True)
class DecisionSequence:
    order: tuple
    #Groups of CAVs whose order was decided by a random draw
    ties: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'order', tuple(self.order))

    def __len__(self):
        return len(self.order)

    def __iter__(self):
        return iter(self.order)


def _greater(x, y):
    return x > y and not np.isclose(x, y, rtol=rho_rtol, atol=0.0)


def weight_from_window(window):
    """Inverse of the exit-time window size, floored at weight_eps"""
    return 1.0/max(window.upper - window.lower, weight_eps)


def precedence_graph(positions):
    """Build one chain per path from {path_id: [(position, Job), ...]}

    Leader (largest position) first
    """
    chains = []
    for path_id, entries in positions.items():
        if not entries:
            continue
        ordered = sorted(entries, key=lambda x: -x[0])
        chains.append(Chain(path_id=path_id, jobs=tuple(j for _, j in ordered)))
    return PrecedenceGraph(chains=tuple(chains))


def rho_factor(chain):
    """Largest prefix ratio of cumulative weight to cumulative processing time

    Returns:
    (rho, a) where a is the 1-based length of the determining prefix, ties go to the longest prefix
    """
    w = np.cumsum([j.weight for j in chain.jobs])
    p = np.cumsum([j.processing_time for j in chain.jobs])
    ratios = w/p
    best = 0
    for a in range(1, ratios.size):
        if not _greater(ratios[best], ratios[a]):
            best = a
    return float(ratios[best]), best + 1


def chain_blocks(chain):
    """Split a chain into consecutive blocks of strictly decreasing w/P ratio

    Each block is the largest rho prefix of what follows the blocks before it,
    so the first block is the prefix rho_factor picks.

    Returns:
    list of (ratio, jobs)
    """
    #(w, P, first index) per block, each block ends where the next one starts
    blocks = []
    for k, job in enumerate(chain.jobs):
        w, p, start = job.weight, job.processing_time, k
        #Merge while the newer block's ratio is not strictly below the one before it
        while blocks and not _greater(blocks[-1][0]/blocks[-1][1], w/p):
            w0, p0, start = blocks.pop()
            w, p = w0 + w, p0 + p
        blocks.append((w, p, start))
    ends = [b[2] for b in blocks[1:]] + [len(chain.jobs)]
    return [(w/p, chain.jobs[start:end]) for (w, p, start), end in zip(blocks, ends)]


def resequence(graph):
    """Re-sequencing algorithm: emit the best rho prefix until every chain is exhausted"""
    blocks = [chain_blocks(c) for c in graph.chains]
    heads = [0]*len(blocks)
    path_ids = [c.path_id for c in graph.chains]
    order = []
    while True:
        best = None
        for i, chain in enumerate(blocks):
            if heads[i] == len(chain):
                continue
            rho = chain[heads[i]][0]
            #Chains are sorted by path_id so the first of equal rho wins
            if best is None or _greater(rho, best[1]):
                best = (i, rho)
        if best is None:
            break
        i, rho = best
        block = blocks[i][heads[i]][1]
        heads[i] += 1
        order.extend(j.cav_id for j in block)
        logger.debug("Path %s: emit %s (rho=%0.6f)", path_ids[i], [j.cav_id for j in block], rho)
    return DecisionSequence(order=tuple(order))


def weighted_completion(sequence, jobs):
    """J = sum(w_i * C_i), C_i the running sum of processing times along the sequence"""
    C = 0.0
    J = 0.0
    for cav_id in sequence:
        try:
            job = jobs[cav_id]
        except KeyError:
            raise SchedulingError("Unknown cav_id in sequence: %s" % (cav_id,)) from None
        C += job.processing_time
        J += job.weight*C
    return J


def fcfs_sequence(cavs, rng=None):
    """First-come-first-serve order of [(cav_id, entry_time), ...]

    Exact entry-time ties are ordered by a draw from rng
    """
    if rng is None:
        rng = np.random.default_rng(0)
    cavs = list(cavs)
    draws = rng.random(len(cavs))
    keyed = sorted(zip(cavs, draws), key=lambda x: (x[0][1], x[1]))
    order = tuple(c[0] for c, _ in keyed)
    ties = []
    group = []
    for (cav_id, t), _ in keyed:
        if group and t == group[-1][1]:
            group.append((cav_id, t))
        else:
            if len(group) > 1:
                ties.append(tuple(c for c, _ in group))
            group = [(cav_id, t)]
    if len(group) > 1:
        ties.append(tuple(c for c, _ in group))
    for tie in ties:
        logger.info("FCFS entry-time tie decided by draw: %s", tie)
    return DecisionSequence(order=order, ties=tuple(ties))


def _interleavings(chains):
    """All merges of the chains that keep each chain's order"""
    if not any(chains):
        yield ()
        return
    for i, c in enumerate(chains):
        if not c:
            continue
        rest = chains[:i] + (c[1:],) + chains[i+1:]
        for tail in _interleavings(rest):
            yield (c[0],) + tail


def brute_force_optimal(graph, jobs=None):
    """Minimum J over every precedence-feasible sequence, ties to the lexicographically smallest

    Returns:
    (DecisionSequence, J_min)
    """
    n = len(graph)
    if n > brute_force_max_jobs:
        raise SchedulingError("Brute force limited to %i jobs, got %i" % (brute_force_max_jobs, n))
    if jobs is None:
        jobs = graph.jobs
    chains = tuple(tuple(j.cav_id for j in c.jobs) for c in graph.chains)
    best_seq = None
    best_J = None
    for seq in _interleavings(chains):
        J = weighted_completion(seq, jobs)
        if best_J is None or J < best_J and not np.isclose(J, best_J, rtol=rho_rtol, atol=0.0):
            best_seq, best_J = seq, J
        elif np.isclose(J, best_J, rtol=rho_rtol, atol=0.0) and seq < best_seq:
            best_seq, best_J = seq, min(J, best_J)
    if best_seq is None:
        return DecisionSequence(order=()), 0.0
    return DecisionSequence(order=best_seq), best_J
