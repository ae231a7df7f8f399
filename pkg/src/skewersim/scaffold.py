"""Scaffolding paths: spectrally one-sided jump processes marked by spindles.

A marked point process carries pairs (t_i, spindle_i).  Above a lifetime
cutoff eps, spindles arrive as a Poisson process in time with rate
cnu * eps**(-1-alpha) / (1+alpha) and lifetime law eps * U**(-1/(1+alpha)).
The scaffolding is the path that jumps by each spindle's lifetime at its
arrival and drifts downward at the compensating slope cnu * eps**(-alpha) /
alpha between arrivals, so that as eps -> 0 it converges to a spectrally
positive stable process of index 1+alpha.

Level machinery: the path crosses a level y upward only by jumps and
downward only continuously, so its local time at y (occupation density) is
proportional to the count of downward passages — one passage per visit, each
contributing 1/slope.  All passage instants are exact affine functions of
the jump data, which downstream exact-identity tests rely on.
"""

import json

import numpy as np

from .spindles import DiffusionParams, Spindle, ExcursionMeasureTable


class BudgetError(RuntimeError):
    """A sampling routine exceeded its point budget."""


class SpindlePointProcess:
    """Finitely many marked points (t_i, spindle_i) on a time horizon."""

    __slots__ = ("times", "spindles", "params", "cutoff", "horizon", "seed")

    def __init__(self, times, spindles, params, cutoff, horizon, seed=None,
                 validate=True):
        self.times = np.asarray(times, dtype=float)
        self.spindles = list(spindles)
        self.params = params
        self.cutoff = float(cutoff)
        self.horizon = float(horizon)
        self.seed = seed
        if validate:
            if len(self.times) != len(self.spindles):
                raise ValueError("times and spindles must align")
            if len(self.times) and np.any(np.diff(self.times) < 0):
                raise ValueError("point times must be nondecreasing")
            if len(self.times) and (self.times[0] < 0
                                    or self.times[-1] > self.horizon):
                raise ValueError("point times must lie within the horizon")

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.spindles))

    def __eq__(self, other):
        return (isinstance(other, SpindlePointProcess)
                and np.array_equal(self.times, other.times)
                and self.params == other.params
                and self.cutoff == other.cutoff
                and self.horizon == other.horizon
                and all(a == b for a, b in zip(self.spindles, other.spindles)))

    def __repr__(self):
        return ("SpindlePointProcess(%d points, cutoff %g, horizon %g)"
                % (len(self), self.cutoff, self.horizon))

    def lifetimes(self):
        return np.array([f.lifetime for f in self.spindles])

    def restrict(self, t0, t1, include_left=False, include_right=True,
                 shift=False):
        """Points with t in (t0, t1) plus the chosen endpoints; optionally
        shift times so the window starts at zero."""
        t = self.times
        keep = (t >= t0) if include_left else (t > t0)
        keep &= (t <= t1) if include_right else (t < t1)
        idx = np.flatnonzero(keep)
        times = t[idx] - (t0 if shift else 0.0)
        return SpindlePointProcess(
            times, [self.spindles[i] for i in idx], self.params, self.cutoff,
            (t1 - t0) if shift else self.horizon, validate=False)

    # -- JSONL: one header object, then one row per point ---------------

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps({
                "alpha": self.params.alpha, "q": self.params.q,
                "c": self.params.c, "cutoff": self.cutoff,
                "horizon": self.horizon, "seed": self.seed,
            }) + "\n")
            for t, f in self:
                fh.write(json.dumps({"t": t, "spindle": f.to_dict()}) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            head = json.loads(fh.readline())
            times, spindles = [], []
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                times.append(row["t"])
                spindles.append(Spindle.from_dict(row["spindle"]))
        params = DiffusionParams(head["alpha"], head["q"], head["c"])
        return cls(times, spindles, params, head["cutoff"], head["horizon"],
                   seed=head.get("seed"))


def truncated_rate(params, cutoff):
    """Arrival rate of spindles with lifetime above the cutoff."""
    a = params.alpha
    return params.cnu * cutoff ** (-1.0 - a) / (1.0 + a)


def compensator_slope(params, cutoff):
    """Downward drift rate balancing the mean of jumps above the cutoff."""
    return params.cnu * cutoff ** -params.alpha / params.alpha


def sample_prm(params, cutoff, horizon, rng, pool=None, pool_size=512,
               seed=None):
    """Draw the marked point process above a lifetime cutoff.

    Lifetimes are exact inverse-power draws; spindle shapes come from a pool
    of unit-lifetime draws rescaled per point (pass `pool` to share one
    across calls — shapes are then reused, which is fine inside a single
    replicate but pools should be refreshed across replicates).
    """
    rate = truncated_rate(params, cutoff)
    k = int(rng.poisson(rate * horizon))
    times = np.sort(rng.random(k)) * horizon
    zetas = cutoff * rng.random(k) ** (-1.0 / (1.0 + params.alpha))
    if pool is None and k > 0:
        pool = ExcursionMeasureTable(params, min(pool_size, k), rng)
    spindles = [pool.sample_spindle(z, rng) for z in zetas]
    return SpindlePointProcess(times, spindles, params, cutoff, horizon,
                               seed=seed)


def concat_pp(pps):
    """Concatenate point processes end to end (horizons add; times shift)."""
    pps = list(pps)
    if not pps:
        raise ValueError("nothing to concatenate")
    p0 = pps[0]
    times, spindles, offset = [], [], 0.0
    for pp in pps:
        if pp.params != p0.params or pp.cutoff != p0.cutoff:
            raise ValueError("mixed parameters or cutoffs")
        times.append(pp.times + offset)
        spindles.extend(pp.spindles)
        offset += pp.horizon
    return SpindlePointProcess(np.concatenate(times), spindles, p0.params,
                               p0.cutoff, offset, validate=False)


class Scaffolding:
    """The piecewise-linear jump path read off a marked point process.

    Jumps up by each spindle lifetime at its arrival time, drifts down at
    constant `slope` in between.  Stores exact pre/post values at every jump;
    all level queries are affine in these, with no accumulation of rounding
    beyond the prefix sums themselves.
    """

    __slots__ = ("times", "jumps", "slope", "horizon", "x0", "pre", "post")

    def __init__(self, times, jumps, slope, horizon, x0=0.0):
        self.times = np.asarray(times, dtype=float)
        self.jumps = np.asarray(jumps, dtype=float)
        self.slope = float(slope)
        self.horizon = float(horizon)
        self.x0 = float(x0)
        if self.slope <= 0:
            raise ValueError("slope must be positive")
        cum = np.cumsum(self.jumps)
        self.pre = self.x0 - self.slope * self.times
        self.pre[1:] += cum[:-1]
        self.post = self.pre + self.jumps

    @property
    def final_value(self):
        if len(self.times) == 0:
            return self.x0 - self.slope * self.horizon
        return float(self.post[-1] - self.slope * (self.horizon
                                                   - self.times[-1]))

    def value(self, t, side="right"):
        """X(t) (cadlag) or X(t-) with side='left'; vectorised in t."""
        t = np.asarray(t, dtype=float)
        side_op = "right" if side == "right" else "left"
        k = np.searchsorted(self.times, t, side=side_op)
        base = np.where(k > 0, self.post[np.maximum(k - 1, 0)]
                        + self.slope * self.times[np.maximum(k - 1, 0)],
                        self.x0)
        return base - self.slope * t

    def segment_bounds(self):
        """Per drift segment: (start time, start value, end value).

        Segment i runs from event i (or zero) to the next event (or the
        horizon); values are the exact post/pre jump data.
        """
        t0 = np.concatenate([[0.0], self.times])
        s = np.concatenate([[self.x0], self.post])
        e = np.concatenate([self.pre, [self.final_value]])
        return t0, s, e

    # -- level machinery ------------------------------------------------

    def passage_times(self, y):
        """Instants of downward passages of level y, in increasing order.

        A drift segment from value s down to value e passes y exactly when
        s >= y > e, at the affine instant t0 + (s - y)/slope.
        """
        t0, s, e = self.segment_bounds()
        mask = (s >= y) & (e < y)
        return t0[mask] + (s[mask] - y) / self.slope

    def local_time(self, y, t=None):
        """Occupation density at level y up to time t: passages / slope."""
        u = self.passage_times(y)
        if t is None:
            return len(u) / self.slope
        return np.searchsorted(u, t, side="right") / self.slope

    def inverse_local_time(self, y, s):
        """First t with local time at y exceeding s; inf when never."""
        u = self.passage_times(y)
        k = int(np.floor(s * self.slope))
        if k >= len(u):
            return np.inf
        return float(u[k])

    def hitting_time(self, y):
        """First t with X(t) = y or X(t-) = y; inf if the level is missed.

        Levels at or below the start are reached continuously (first
        downward passage); levels above can only be hit exactly at the top
        or bottom of a jump, which happens on a null set of levels.
        """
        if y == self.x0:
            return 0.0
        t0, s, e = self.segment_bounds()
        hit = (s >= y) & (e <= y)
        if hit.any():
            i = int(np.argmax(hit))
            return float(t0[i] + (s[i] - y) / self.slope)
        return np.inf

    def crossing_time(self, y):
        """First t with X(t) >= y (upward crossings happen only by jumps)."""
        if y <= self.x0:
            return 0.0
        above = np.flatnonzero(self.post >= y)
        if len(above) == 0:
            return np.inf
        return float(self.times[above[0]])

    def last_exit_below(self, y):
        """sup{t : X(t-) <= y}, the last time the path leaves level y up."""
        if len(self.times) == 0 or self.final_value <= y:
            return self.horizon
        _, _, e = self.segment_bounds()
        reach = np.flatnonzero(e <= y)     # segments are decreasing: min = e
        if len(reach) == 0:
            return 0.0
        i = int(reach[-1])
        # the path is last at-or-below y just before the jump closing
        # segment i (or at the horizon when it is the final segment)
        return float(self.times[i]) if i < len(self.times) else self.horizon

    def to_csv(self, path):
        """Rows t, X(t-), X(t) at 0, each jump, and the horizon."""
        with open(path, "w") as fh:
            fh.write("t,x_left,x_right\n")
            fh.write("%.17g,%.17g,%.17g\n" % (0.0, self.x0, self.x0))
            for t, a, b in zip(self.times, self.pre, self.post):
                fh.write("%.17g,%.17g,%.17g\n" % (t, a, b))
            v = self.final_value
            fh.write("%.17g,%.17g,%.17g\n" % (self.horizon, v, v))


def build_scaffolding(pp, x0=0.0):
    """Assemble the drift-and-jump path of a marked point process."""
    return Scaffolding(pp.times, pp.lifetimes(),
                       compensator_slope(pp.params, pp.cutoff), pp.horizon,
                       x0=x0)


def concat_scaffolding(scafs):
    """Concatenate paths end to end, matching values at the joins."""
    scafs = list(scafs)
    if not scafs:
        raise ValueError("nothing to concatenate")
    s0 = scafs[0]
    times, jumps = [], []
    t_off = 0.0
    for sc in scafs:
        if sc.slope != s0.slope:
            raise ValueError("mixed slopes")
        times.append(sc.times + t_off)
        jumps.append(sc.jumps)
        t_off += sc.horizon
    return Scaffolding(np.concatenate(times), np.concatenate(jumps),
                       s0.slope, t_off, x0=s0.x0)
