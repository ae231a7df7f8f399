"""Excursion decomposition of a marked path about a level.

At a generic ("nice") level y, the scaffolding path decomposes into
excursions between successive downward passages of y.  Each complete
excursion starts at a passage, dips below, crosses back above by exactly one
jump — whose spindle straddles the level, carrying the crossing mass m0 —
and ends at the next passage.  The time axis splits cleanly at the
straddling jump into the part below the level and the part above it; the
straddling spindle splits at the level offset.  An incomplete first piece
(before the first touch) and last piece (after the last touch) can carry a
straddler too, or sit entirely on one side.

Everything here is arranged so that decompose -> split -> rejoin ->
reassemble returns the original marked process bit for bit: restriction
works by masking the original arrays, splits remember whether the cut node
was interpolated, and summed level identities use exact (fsum) summation.
"""

import math
from collections import namedtuple

import numpy as np

from .spindles import (
    Spindle, split_spindle, merge_spindles, reverse_spindle, scale_spindle,
    simulate_block_diffusion,
)
from .scaffold import (
    SpindlePointProcess, build_scaffolding, sample_prm, concat_pp,
    BudgetError,
)

import json


ExcursionInterval = namedtuple("ExcursionInterval",
                               ["start", "end", "kind", "label"])


def excursion_intervals(scaf, y):
    """Intervals of excursions about level y, with local-time labels.

    Complete excursions run between successive downward passages and are
    labelled by the local time at their start (the passage count so far over
    the slope). The piece before the first touch has kind "first" and label
    0; the piece after the last touch has kind "last".  A path that never
    touches the level yields a single piece of kind "whole".
    """
    u = scaf.passage_times(y)
    if len(u) == 0:
        return [ExcursionInterval(0.0, scaf.horizon, "whole", 0.0)]
    out = []
    if y != scaf.x0:
        out.append(ExcursionInterval(0.0, float(u[0]), "first", 0.0))
    for k in range(len(u) - 1):
        out.append(ExcursionInterval(float(u[k]), float(u[k + 1]),
                                     "complete", (k + 1) / scaf.slope))
    out.append(ExcursionInterval(float(u[-1]), scaf.horizon, "last",
                                 len(u) / scaf.slope))
    return out


class BiClade:
    """One excursion piece: its sub-process plus level-crossing summary.

    points keeps the parent's absolute times (window [start, end), last
    piece closed).  straddler is the local index of the unique point whose
    jump crosses the level, or None; m0 is that spindle's mass at the level
    (0 without a straddler); t0plus the crossing time relative to the piece
    start; zeta_plus how far above the level the piece reaches.
    """

    __slots__ = ("y", "interval", "points", "straddler", "m0", "t0plus",
                 "zeta_plus", "pre_values")

    def __init__(self, y, interval, points, straddler, m0, t0plus, zeta_plus,
                 pre_values):
        self.y = y
        self.interval = interval
        self.points = points
        self.straddler = straddler
        self.m0 = m0
        self.t0plus = t0plus
        self.zeta_plus = zeta_plus
        self.pre_values = pre_values

    @property
    def label(self):
        return self.interval.label

    @property
    def kind(self):
        return self.interval.kind

    def to_row(self):
        return {"s": self.label, "m0": self.m0, "T0plus": self.t0plus,
                "zeta_plus": self.zeta_plus}

    def __repr__(self):
        return ("BiClade(%s [%g, %g), label %g, m0 %g)"
                % (self.kind, self.interval.start, self.interval.end,
                   self.label, self.m0))


def decompose_biclades(pp, scaf, y):
    """Cut the marked process at level y into its excursion pieces.

    Restriction masks the parent arrays (times stay absolute) so that
    `reassemble_biclades` recovers the input exactly.  Each piece records
    its straddling point — the unique jump with pre-value below y and
    post-value at or above it — and crossing summary.
    """
    intervals = excursion_intervals(scaf, y)
    out = []
    for iv in intervals:
        last = iv.end >= scaf.horizon
        mask = (pp.times >= iv.start) & ((pp.times <= iv.end) if last
                                         else (pp.times < iv.end))
        idx = np.flatnonzero(mask)
        sub = SpindlePointProcess(pp.times[idx],
                                  [pp.spindles[i] for i in idx], pp.params,
                                  pp.cutoff, pp.horizon, validate=False)
        pre = scaf.pre[idx]
        post = scaf.post[idx]
        cross = np.flatnonzero((pre < y) & (post >= y))
        if len(cross) > 1:
            raise AssertionError("level is not nice: multiple straddlers "
                                 "in one excursion")
        if len(cross) == 1:
            j = int(cross[0])
            m0 = float(sub.spindles[j].value_at(y - pre[j]))
            t0plus = float(sub.times[j] - iv.start)
            straddler = j
        else:
            m0, t0plus, straddler = 0.0, math.inf, None
        # the path drifts down between jumps, so its supremum over the piece
        # is the larger of the entry value and the post-jump values; pieces
        # starting at a passage enter exactly at the level, so only the
        # piece at the origin has a different (exact) entry value
        top = scaf.x0 if iv.start == 0.0 else y
        if len(post):
            top = max(top, post.max())
        zeta_plus = float(max(top - y, 0.0))
        out.append(BiClade(y, iv, sub, straddler, m0, t0plus, zeta_plus, pre))
    return out


def biclades_to_jsonl(biclades, path):
    """One row per piece: local-time label s, crossing mass m0, crossing
    time T0plus, height above the level zeta_plus."""
    with open(path, "w") as fh:
        for bc in biclades:
            fh.write(json.dumps(bc.to_row()) + "\n")


BiCladeParts = namedtuple("BiCladeParts",
                          ["below", "above", "inserted", "straddler"])


def split_biclade(bc):
    """Split one piece at its straddling jump into below/above sub-processes.

    The straddling spindle is cut at the level offset; the lower piece stays
    at the straddler's time in `below`, the upper piece starts there in
    `above`.  Pieces without a straddler sit wholly on one side (decided by
    whether the piece reaches above the level); the other side is empty.
    `rejoin_biclade` inverts this exactly.
    """
    pts = bc.points
    if bc.straddler is None:
        empty = SpindlePointProcess(np.empty(0), [], pts.params, pts.cutoff,
                                    pts.horizon, validate=False)
        if bc.zeta_plus > 0.0:
            return BiCladeParts(empty, pts, False, None)
        return BiCladeParts(pts, empty, False, None)
    j = bc.straddler
    h = bc.y - bc.pre_values[j]
    low, high, inserted = split_spindle(pts.spindles[j], h)
    below = SpindlePointProcess(pts.times[:j + 1], pts.spindles[:j] + [low],
                                pts.params, pts.cutoff, pts.horizon,
                                validate=False)
    above = SpindlePointProcess(pts.times[j:], [high] + pts.spindles[j + 1:],
                                pts.params, pts.cutoff, pts.horizon,
                                validate=False)
    return BiCladeParts(below, above, inserted, j)


def rejoin_biclade(parts):
    """Undo `split_biclade`, restoring the piece's sub-process bitwise."""
    below, above = parts.below, parts.above
    if parts.straddler is None:
        return below if len(above) == 0 else above
    j = parts.straddler
    merged = merge_spindles(below.spindles[-1], above.spindles[0],
                            parts.inserted)
    times = np.concatenate([below.times, above.times[1:]])
    spindles = below.spindles[:-1] + [merged] + above.spindles[1:]
    return SpindlePointProcess(times, spindles, below.params, below.cutoff,
                               below.horizon, validate=False)


def reassemble_biclades(biclades):
    """Concatenate decomposition pieces back into the original process."""
    if not biclades:
        raise ValueError("nothing to reassemble")
    times = np.concatenate([bc.points.times for bc in biclades])
    spindles = [f for bc in biclades for f in bc.points.spindles]
    p0 = biclades[0].points
    return SpindlePointProcess(times, spindles, p0.params, p0.cutoff,
                               p0.horizon, validate=False)


def reverse_biclade(bc):
    """Upside-down time-reversal of one (complete) excursion piece.

    Point times reflect within [start, end] and each spindle is reversed.
    Read against the level, this turns the path upside down: what was below
    becomes above and vice versa, so the part-above height of the result is
    the original depth below, while the crossing mass m0 is invariant (the
    reversed straddler is queried at the reflected offset).  Applying it
    twice restores the piece up to float reflection round-trip.
    """
    iv = bc.interval
    s = iv.start + iv.end
    rev_times = (s - bc.points.times)[::-1]
    rev_spindles = [reverse_spindle(f) for f in bc.points.spindles[::-1]]
    pts = SpindlePointProcess(rev_times, rev_spindles, bc.points.params,
                              bc.points.cutoff, bc.points.horizon,
                              validate=False)
    lifetimes = bc.points.lifetimes()
    post = bc.pre_values + lifetimes if len(lifetimes) else bc.pre_values
    # in the reversed path, pre-jump values are the reflections 2y - post
    # of the original post-jump values, in reversed order
    rev_pre = (2.0 * bc.y - post)[::-1]
    depth = max(0.0, bc.y - (bc.pre_values.min() if len(bc.pre_values)
                             else bc.y))
    if bc.straddler is None:
        straddler, m0, t0plus = None, 0.0, math.inf
    else:
        j = bc.straddler
        straddler = len(bc.points) - 1 - j
        f = bc.points.spindles[j]
        h = bc.y - bc.pre_values[j]
        rf = rev_spindles[straddler]
        m0 = float(rf.value_at(rf.times[0] + (f.lifetime - h)))
        t0plus = float(iv.end - bc.points.times[j])
    return BiClade(bc.y, ExcursionInterval(iv.start, iv.end, iv.kind,
                                           iv.label),
                   pts, straddler, m0, t0plus, float(depth), rev_pre)


def scale_biclade(x, bc, params=None):
    """The scaling action: times by x**(1+alpha), levels by x, masses by
    the value map; the crossing mass transforms as x**q * m0."""
    p = params if params is not None else bc.points.params
    a = p.alpha
    tscale = x ** (1.0 + a)
    iv = ExcursionInterval(tscale * bc.interval.start,
                           tscale * bc.interval.end, bc.interval.kind,
                           bc.interval.label)
    pts = SpindlePointProcess(
        tscale * bc.points.times,
        [scale_spindle(x, f, p) for f in bc.points.spindles],
        p, bc.points.cutoff * x, bc.points.horizon * tscale, validate=False)
    m0 = p.from_underlying(x * p.to_underlying(bc.m0)) if bc.m0 else 0.0
    t0plus = bc.t0plus * tscale if math.isfinite(bc.t0plus) else math.inf
    return BiClade(bc.y * x, iv, pts, bc.straddler, float(m0), t0plus,
                   bc.zeta_plus * x, bc.pre_values * x)


# ----------------------------------------------------------------------
# cutoff processes: everything below / above a level, concatenated
# ----------------------------------------------------------------------

def cutoff(pp, scaf, y, side):
    """The sub-process living below (side="below") or above ("above") y.

    Excursion pieces are clipped at their straddling jump — the straddling
    spindle contributing its lower piece to the below-process at the jump
    time and its upper piece to the above-process at relative time zero —
    then concatenated in excursion order, with time measured only on the
    chosen side of the level.  The above-process is expressed relative to
    the level (its scaffolding starts at zero).
    """
    if side not in ("below", "above"):
        raise ValueError("side must be 'below' or 'above'")
    pieces = []
    for bc in decompose_biclades(pp, scaf, y):
        parts = split_biclade(bc)
        iv = bc.interval
        if side == "below":
            sub = parts.below
            t0 = iv.start
            span = (bc.t0plus if bc.straddler is not None
                    else (iv.end - iv.start if bc.zeta_plus == 0.0 else 0.0))
            if span == 0.0 and len(sub) == 0:
                continue
            times = sub.times - t0
            spindles = list(sub.spindles)
        else:
            sub = parts.above
            if bc.straddler is not None:
                t0 = bc.points.times[bc.straddler]
                span = iv.end - t0
                spindles = ([sub.spindles[0].shifted(-sub.spindles[0].start)]
                            + sub.spindles[1:])
            else:
                t0 = iv.start
                span = (iv.end - iv.start) if bc.zeta_plus > 0.0 else 0.0
                spindles = list(sub.spindles)
            if span == 0.0 and len(sub) == 0:
                continue
            times = sub.times - t0
        pieces.append(SpindlePointProcess(times, spindles, pp.params,
                                          pp.cutoff, float(span),
                                          validate=False))
    if not pieces:
        return SpindlePointProcess(np.empty(0), [], pp.params, pp.cutoff,
                                   0.0, validate=False)
    return concat_pp(pieces)


# ----------------------------------------------------------------------
# sampling the piece above the level through one crossing block
# ----------------------------------------------------------------------

def sample_clade_given_m0(m0, params, cutoff_lifetime, rng, dt=1e-3,
                          pool=None, max_points=None):
    """The marked process sprouting from one block of mass m0 at a level.

    The block's own diffusion (from m0 to absorption) becomes the initial
    spindle, placed at time zero; an independent marked path, truncated at
    the given spindle-lifetime cutoff, runs until it first reaches minus the
    initial spindle's lifetime — at which instant the combined scaffolding
    returns to the starting level and the piece ends.  The return time has
    no finite mean, so the path is grown in doubling chunks (extending, not
    resampling, to keep the law intact); `max_points` caps the work and
    raises BudgetError instead of truncating silently.
    """
    if m0 <= 0:
        raise ValueError("crossing mass must be positive")
    f0 = simulate_block_diffusion(m0, params, dt, rng)
    zeta0 = f0.lifetime
    chunk = max(4.0 * zeta0, 16.0 * cutoff_lifetime)
    t_parts, spindles, grown = [], [], 0.0
    while True:
        piece = sample_prm(params, cutoff_lifetime, chunk, rng, pool=pool)
        t_parts.append(piece.times + grown)
        spindles.extend(piece.spindles)
        grown += chunk
        tail = SpindlePointProcess(np.concatenate(t_parts), spindles,
                                   params, cutoff_lifetime, grown,
                                   validate=False)
        if max_points is not None and len(tail) > max_points:
            raise BudgetError("clade exceeded %d points before returning to "
                              "its level" % max_points)
        t_hit = build_scaffolding(tail).hitting_time(-zeta0)
        if np.isfinite(t_hit):
            break
        chunk *= 2.0
    keep = tail.restrict(0.0, t_hit, include_left=False, include_right=True)
    times = np.concatenate([[0.0], keep.times])
    spindles = [f0] + keep.spindles
    return SpindlePointProcess(times, spindles, params, cutoff_lifetime,
                               float(t_hit), validate=False)
