"""Reading partitions off the marked path, and level-indexed evolutions.

The skewer of a marked point process at a level collects, in time order, the
masses of all spindles alive there — each spindle evaluated at the level's
offset from its jump's starting height — and slides them together into an
interval partition.  Diversity marks are the scaffolding local times at the
blocks' jump instants, so diversity comes for free and exactly.

`evolve` builds the partition-valued process started from an arbitrary
partition: one independent clade per initial block, concatenated, then
skewered on a caller-supplied grid of levels.  `transition_sample` draws a
single transition by concatenating per-block partitions instead; the two
agree in law, through genuinely different code paths.
"""

import json
import math

import numpy as np

from .ipcore import (
    IntervalPartition, dist_alpha, dist_hausdorff,
    concat as concat_partitions,
)
from .scaffold import SpindlePointProcess, build_scaffolding, concat_pp
from .spindles import ExcursionMeasureTable
from .clades import sample_clade_given_m0

# interpolation at a spindle's birth/death levels can emit float dust;
# anything this small is discarded as a block
MASS_FLOOR = 1e-12

DEFAULT_CLADE_BUDGET = 2_000_000


def aggregate_mass(pp, y, t=None, scaf=None):
    """Total spindle mass at level y from points up to time t.

    Sums, with exact (fsum) summation, each spindle's value at the level's
    offset from its pre-jump height; spindles not alive at the level
    contribute exact zeros.  The stored polylines are continuous, so the
    left/right values at the offset coincide even for broken spindles.
    """
    if scaf is None:
        scaf = build_scaffolding(pp)
    if t is None:
        t = pp.horizon
    if len(pp) == 0:
        return 0.0
    if t > pp.horizon:
        raise ValueError("query time beyond the horizon")
    n = int(np.searchsorted(pp.times, t, side="right"))
    return math.fsum(
        float(pp.spindles[i].value_at(y - scaf.pre[i])) for i in range(n))


class SkewerSnapshot:
    """One level's reading: the partition plus each block's source point.

    block_ids are the point-process times of the generating spindles, so an
    id persists across levels for as long as its spindle stays alive.
    """

    __slots__ = ("y", "partition", "block_ids")

    def __init__(self, y, partition, block_ids):
        self.y = float(y)
        self.partition = partition
        self.block_ids = np.asarray(block_ids, dtype=float)
        if len(self.block_ids) != len(partition.masses):
            raise ValueError("one id per block required")

    def to_row(self):
        return {"y": self.y, "partition": self.partition.to_dict(),
                "block_ids": self.block_ids.tolist()}

    @classmethod
    def from_row(cls, obj):
        return cls(obj["y"], IntervalPartition.from_dict(obj["partition"]),
                   obj["block_ids"])

    def __repr__(self):
        return ("SkewerSnapshot(y=%g, %d blocks, mass %.4g)"
                % (self.y, len(self.partition.masses),
                   self.partition.total_mass))


def skewer(pp, y, scaf=None, with_diversity=True):
    """Read the interval partition at level y off the marked process.

    One block per spindle alive at the level, in time order; mass is the
    spindle's value at the level offset, diversity mark the scaffolding
    local time at the block's jump instant, total diversity the local time
    at the horizon.  Blocks below the float-dust floor are dropped.
    """
    if scaf is None:
        scaf = build_scaffolding(pp)
    p = pp.params
    if len(pp) == 0:
        masses = np.empty(0)
        idx = np.empty(0, dtype=int)
    else:
        masses = np.array([f.value_at(y - h)
                           for f, h in zip(pp.spindles, scaf.pre)])
        idx = np.flatnonzero(masses >= MASS_FLOOR)
        masses = masses[idx]
    alpha_div = p.alpha / p.q
    if with_diversity:
        marks = scaf.local_time(y, pp.times[idx]) if len(idx) else []
        part = IntervalPartition(masses, divs=marks,
                                 total_diversity=scaf.local_time(y),
                                 alpha_div=alpha_div)
    else:
        part = IntervalPartition(masses, alpha_div=alpha_div)
    return SkewerSnapshot(y, part, pp.times[idx] if len(idx) else [])


class EvolutionPath:
    """Snapshots of the partition evolution on an increasing level grid."""

    __slots__ = ("levels", "snapshots", "config")

    def __init__(self, levels, snapshots, config=None):
        self.levels = np.asarray(levels, dtype=float)
        self.snapshots = list(snapshots)
        self.config = dict(config or {})
        if len(self.levels) != len(self.snapshots):
            raise ValueError("one snapshot per level required")
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        kinds = {s.partition.alpha_div for s in self.snapshots}
        if len(kinds) > 1:
            raise ValueError("snapshots disagree on the diversity exponent")

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def partitions(self):
        return [s.partition for s in self.snapshots]

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps({"config": self.config,
                                 "n_levels": len(self.levels)}) + "\n")
            for snap in self.snapshots:
                fh.write(json.dumps(snap.to_row()) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            header = json.loads(fh.readline())
            snaps = [SkewerSnapshot.from_row(json.loads(line))
                     for line in fh if line.strip()]
        return cls([s.y for s in snaps], snaps, header.get("config"))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("y,total_mass,total_diversity,block_count\n")
            for snap in self.snapshots:
                part = snap.partition
                td = (part.total_diversity
                      if part.total_diversity is not None else float("nan"))
                fh.write("%.17g,%.17g,%.17g,%d\n"
                         % (snap.y, part.total_mass, td, len(part.masses)))


def _initial_snapshot(beta0, offsets):
    """The level-0 reading is the initial state itself, marks and all."""
    part = IntervalPartition(beta0.masses, divs=beta0.divs,
                             total_diversity=beta0.total_diversity,
                             alpha_div=beta0.alpha_div, validate=False)
    return SkewerSnapshot(0.0, part, offsets)


def evolve(beta0, params, levels, cutoff, dt, rng, pool=None, pool_size=512,
           max_points=DEFAULT_CLADE_BUDGET, config=None):
    """Run the partition-valued evolution from beta0 over a level grid.

    One independent clade is grown per initial block and the concatenation
    is skewered at every requested level.  Each clade's scaffolding is an
    excursion that starts and ends exactly at level zero, so a clade that
    never climbs past the smallest positive level can be excised — span and
    all — without disturbing what any later clade shows at the queried
    levels.  Excised blocks keep a negative sentinel id at level 0 (they
    have no descendants to match).  The level-0 snapshot is the initial
    state itself (its diversity marks, when present, are kept — freshly
    started blocks have none to inherit otherwise).
    """
    levels = np.asarray(levels, dtype=float)
    if len(levels) == 0 or np.any(levels < 0):
        raise ValueError("levels must be nonnegative and nonempty")
    positive = levels[levels > 0.0]
    min_level = positive.min() if len(positive) else None
    masses = beta0.masses
    pieces = []
    dropped = []
    if len(masses) and min_level is not None:
        if pool is None:
            pool = ExcursionMeasureTable(params, pool_size, rng)
        for j, a in enumerate(masses):
            clade = sample_clade_given_m0(float(a), params, cutoff, rng,
                                          dt=dt, pool=pool,
                                          max_points=max_points)
            if build_scaffolding(clade).post.max() <= min_level:
                # dies below every queried level: removing its whole time
                # span keeps the base level of later clades at zero, which
                # keeping a jump-free span would not (the drift has no
                # jumps left to offset it)
                dropped.append(j)
                clade = SpindlePointProcess(np.empty(0), [], params, cutoff,
                                            0.0, validate=False)
            pieces.append(clade)
    if pieces:
        offsets = np.concatenate(
            [[0.0], np.cumsum([c.horizon for c in pieces])])[:len(masses)]
        for j in dropped:
            offsets[j] = -float(j + 1)
        combined = concat_pp(pieces)
    else:
        offsets = np.arange(len(masses), dtype=float)
        combined = SpindlePointProcess(np.empty(0), [], params, cutoff, 0.0,
                                       validate=False)
    scaf = build_scaffolding(combined)
    snaps = []
    for y in levels:
        if y == 0.0:
            snaps.append(_initial_snapshot(beta0, offsets))
        else:
            snaps.append(skewer(combined, y, scaf))
    cfg = dict(config or {})
    cfg.setdefault("cutoff", cutoff)
    cfg.setdefault("dt", dt)
    cfg.setdefault("alpha", params.alpha)
    cfg.setdefault("q", params.q)
    cfg.setdefault("c", params.c)
    return EvolutionPath(levels, snaps, cfg)


def transition_sample(beta0, params, y, cutoff, dt, rng, pool=None,
                      pool_size=512, max_points=DEFAULT_CLADE_BUDGET):
    """One transition draw: per-block evolutions at level y, concatenated.

    Each initial block runs its own single-block evolution to level y and
    the resulting partitions are concatenated in block order.  Agrees in
    law with reading `evolve` at the same level.
    """
    if y <= 0:
        raise ValueError("transition level must be positive")
    alpha_div = params.alpha / params.q
    masses = beta0.masses
    if len(masses) == 0:
        return IntervalPartition.empty(alpha_div=alpha_div,
                                       with_diversity=True)
    if pool is None:
        pool = ExcursionMeasureTable(params, pool_size, rng)
    parts = []
    for a in masses:
        clade = sample_clade_given_m0(float(a), params, cutoff, rng, dt=dt,
                                      pool=pool, max_points=max_points)
        parts.append(skewer(clade, y).partition)
    return concat_partitions(parts, alpha_div=alpha_div)


def holder_exponent_estimate(path, metric="alpha", max_pairs=50):
    """Fit the growth exponent of metric increments along the level grid.

    Regresses log mean distance against log level separation over dyadic
    lags of the grid.  A path whose increments are all zero has no exponent
    and raises.
    """
    if metric == "alpha":
        dist = dist_alpha
    elif metric == "hausdorff":
        dist = dist_hausdorff
    else:
        raise ValueError("metric must be 'alpha' or 'hausdorff'")
    n = len(path)
    if n < 50:
        raise ValueError("need at least 50 grid levels")
    parts = path.partitions()
    levels = path.levels
    lag, xs, ys = 1, [], []
    while lag <= (n - 1) // 4:
        starts = range(0, n - lag, max(1, (n - lag) // max_pairs))
        gaps = [dist(parts[i], parts[i + lag]) for i in starts]
        seps = [levels[i + lag] - levels[i] for i in starts]
        mean_gap = float(np.mean(gaps))
        if mean_gap > 0:
            xs.append(math.log(float(np.mean(seps))))
            ys.append(math.log(mean_gap))
        lag *= 2
    if len(xs) < 3:
        raise ValueError("path is degenerate: no usable metric increments")
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)
