"""Block diffusions and their excursions ("spindles").

A block's mass evolves as a squared Bessel process of negative dimension
-2*alpha, absorbed on hitting zero; its excursion away from zero, drawn as a
bow-tie-shaped function of the level, is what we call a spindle.  The
excursion measure nu over spindles is sigma-finite with power tails in both
lifetime and amplitude, normalised by the constant `DiffusionParams.cnu` so
that downstream mass aggregation has unit-rate stable Laplace exponent.

The generalised family (q, c) replaces each spindle value b by c * b**q while
keeping the lifetime axis; q = c = 1 is the standard squared-Bessel case.
Spindles store their (time, value) polyline on an absolute time axis so that
splitting at an interior level and re-merging is a bitwise round trip.
"""

import math
from collections import namedtuple

import numpy as np
from scipy.special import gamma as gamma_fn, gammaincc


class DiffusionParams:
    """Parameters of the marked-process family.

    alpha in (0,1): self-similarity index; block diffusions have dimension
    -2*alpha.  q in (alpha, inf) and c > 0 transform spindle values by
    x -> c * x**q.  Derived quantities: `cnu` (excursion-measure normaliser)
    and `psi_coefficient` (the constant k in the scaffolding Laplace exponent
    k * lam**(1+alpha)).
    """

    __slots__ = ("alpha", "q", "c")

    def __init__(self, alpha, q=1.0, c=1.0):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0,1)")
        if q <= alpha:
            raise ValueError("q must exceed alpha")
        if c <= 0.0:
            raise ValueError("c must be positive")
        self.alpha = float(alpha)
        self.q = float(q)
        self.c = float(c)

    @property
    def besq_dim(self):
        return -2.0 * self.alpha

    @property
    def is_standard(self):
        return self.q == 1.0 and self.c == 1.0

    @property
    def cnu(self):
        a, q, c = self.alpha, self.q, self.c
        return (a * (1.0 + a)
                / (gamma_fn(1.0 - a / q) * c ** (a / q)
                   * 2.0 ** a * gamma_fn(1.0 + a)))

    @property
    def psi_coefficient(self):
        a = self.alpha
        return self.cnu * gamma_fn(1.0 - a) / (a * (1.0 + a))

    def to_underlying(self, mass):
        """Invert the value map: mass c*b**q -> squared-Bessel value b."""
        return (np.asarray(mass, dtype=float) / self.c) ** (1.0 / self.q)

    def from_underlying(self, b):
        return self.c * np.asarray(b, dtype=float) ** self.q

    def __eq__(self, other):
        return (isinstance(other, DiffusionParams)
                and (self.alpha, self.q, self.c)
                == (other.alpha, other.q, other.c))

    def __repr__(self):
        return ("DiffusionParams(alpha=%g, q=%g, c=%g)"
                % (self.alpha, self.q, self.c))


class Spindle:
    """One excursion as a piecewise-linear (times, values) polyline.

    times is nondecreasing on an absolute axis (the level axis of the jump it
    marks); values are nonnegative masses.  A complete spindle starts and ends
    at value zero; pieces produced by splitting keep the interpolated value at
    the cut, so `split` and `merge` are exact inverses at array level.
    """

    __slots__ = ("times", "values")

    def __init__(self, times, values, validate=True):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if validate:
            if self.times.shape != self.values.shape or self.times.ndim != 1:
                raise ValueError("times and values must be equal-length 1-d")
            if len(self.times) < 2:
                raise ValueError("a spindle needs at least two nodes")
            if np.any(np.diff(self.times) < 0):
                raise ValueError("times must be nondecreasing")
            if np.any(self.values < 0):
                raise ValueError("values must be nonnegative")

    @property
    def start(self):
        return float(self.times[0])

    @property
    def end(self):
        return float(self.times[-1])

    @property
    def lifetime(self):
        return float(self.times[-1] - self.times[0])

    @property
    def amplitude(self):
        return float(self.values.max())

    @property
    def is_complete(self):
        return self.values[0] == 0.0 and self.values[-1] == 0.0

    def value_at(self, t):
        """Mass at level-offset t; zero outside the support interval."""
        return np.interp(t, self.times, self.values, left=0.0, right=0.0)

    def shifted(self, delta):
        return Spindle(self.times + delta, self.values, validate=False)

    def mass_integral(self):
        """Area under the polyline (trapezoid, exact for the stored shape)."""
        return float(np.trapezoid(self.values, self.times))

    def __eq__(self, other):
        return (isinstance(other, Spindle)
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return ("Spindle([%g, %g], amplitude %.4g, %d nodes)"
                % (self.start, self.end, self.amplitude, len(self.times)))

    def to_dict(self):
        return {"times": self.times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["times"], obj["values"])


def reverse_spindle(f):
    """Time-reversal about the midpoint of the support interval."""
    t0, t1 = f.times[0], f.times[-1]
    return Spindle((t0 + t1) - f.times[::-1], f.values[::-1], validate=False)


def scale_spindle(x, f, params=None):
    """The scaling operator: lifetime by x, values by c*(x*b)**q.

    For the standard case this is f(t) -> x * f(t/x).  In general the
    underlying squared-Bessel value scales linearly and the value map is
    re-applied, so masses scale by x**q.
    """
    if x <= 0:
        raise ValueError("scale factor must be positive")
    if params is None or params.is_standard:
        return Spindle(x * f.times, x * f.values, validate=False)
    b = params.to_underlying(f.values)
    return Spindle(x * f.times, params.from_underlying(x * b), validate=False)


SpindleSplit = namedtuple("SpindleSplit", ["low", "high", "inserted"])


def split_spindle(f, h):
    """Cut at interior level-offset h into (lower piece, upper piece).

    Both pieces keep absolute times: the lower ends at h and the upper starts
    there, sharing the cut node.  `inserted` records whether that node had to
    be interpolated (it was not an original sample); `merge_spindles` uses it
    to undo the cut bit-for-bit.
    """
    if not f.times[0] < h < f.times[-1]:
        raise ValueError("split point must be interior")
    k = int(np.searchsorted(f.times, h))          # first index with t >= h
    if f.times[k] == h:
        low = Spindle(f.times[:k + 1], f.values[:k + 1], validate=False)
        high = Spindle(f.times[k:], f.values[k:], validate=False)
        return SpindleSplit(low, high, False)
    vh = float(np.interp(h, f.times, f.values))
    low = Spindle(np.append(f.times[:k], h),
                  np.append(f.values[:k], vh), validate=False)
    high = Spindle(np.insert(f.times[k:], 0, h),
                   np.insert(f.values[k:], 0, vh), validate=False)
    return SpindleSplit(low, high, True)


def merge_spindles(low, high, inserted=False):
    """Inverse of `split_spindle`: concatenate, keeping one copy of the
    shared boundary node, or none of it when the split interpolated it."""
    if low.times[-1] != high.times[0] or low.values[-1] != high.values[0]:
        raise ValueError("pieces do not share their boundary node")
    if inserted:
        return Spindle(np.concatenate([low.times[:-1], high.times[1:]]),
                       np.concatenate([low.values[:-1], high.values[1:]]),
                       validate=False)
    return Spindle(np.concatenate([low.times[:-1], high.times]),
                   np.concatenate([low.values[:-1], high.values]),
                   validate=False)


# ----------------------------------------------------------------------
# Euler simulation of the block diffusion
# ----------------------------------------------------------------------

def _euler_absorption(z0, dim, dt, rng, t_max, record_path=False,
                      record_max=False):
    """Vectorised full-truncation Euler for dX = dim dt + 2 sqrt(X) dW.

    Runs each coordinate of z0 to absorption at 0 (or t_max).  Returns
    (times, exit_values) plus optionally running maxima and, for a single
    path, the stored trajectory.
    """
    x = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    n = len(x)
    t = np.zeros(n)
    sup = x.copy()
    alive = x > 0.0
    path = [x.copy()] if record_path else None
    steps = int(round(t_max / dt)) if np.isfinite(t_max) else None
    k = 0
    while alive.any():
        if steps is not None and k >= steps:
            break
        xa = x[alive]
        z = rng.standard_normal(len(xa))
        xa = xa + dim * dt + 2.0 * np.sqrt(xa * dt) * z
        np.maximum(xa, 0.0, out=xa)
        x[alive] = xa
        t[alive] += dt
        if record_max:
            sup[alive] = np.maximum(sup[alive], xa)
        if record_path:
            path.append(x.copy())
        alive = alive & (x > 0.0)
        k += 1
    out = {"times": t, "exit_values": x}
    if record_max:
        out["sup"] = sup
    if record_path:
        out["path"] = np.array(path)[:, 0]
    return out


def simulate_block_diffusion(x0, params, dt, rng, t_max=math.inf):
    """One Euler path of a block of initial mass x0, absorbed at zero.

    Full-truncation scheme on the underlying squared-Bessel coordinate with
    time step dt; the returned spindle carries the transformed masses
    c * b**q on nodes 0, dt, 2 dt, ...  If t_max is finite and absorption has
    not happened, the path is cut there (a broken spindle).
    """
    if x0 <= 0:
        raise ValueError("initial mass must be positive")
    z0 = float(params.to_underlying(x0))
    res = _euler_absorption(z0, params.besq_dim, dt, rng, t_max,
                            record_path=True)
    b = res["path"]
    times = dt * np.arange(len(b))
    return Spindle(times, params.from_underlying(b), validate=False)


def absorption_stats(x0, params, dt, n, rng, t_max=math.inf,
                     record_max=False):
    """n independent Euler absorption times from mass x0 (no path storage).

    Returns dict with `times` (capped at t_max for unabsorbed paths,
    `absorbed` boolean mask) and, when record_max, the running supremum of
    the underlying coordinate — enough for interval-exit statistics.
    """
    z0 = np.full(n, float(params.to_underlying(x0)))
    res = _euler_absorption(z0, params.besq_dim, dt, rng, t_max,
                            record_max=record_max)
    res["absorbed"] = res["exit_values"] <= 0.0
    if record_max:
        res["sup_mass"] = params.from_underlying(res.pop("sup"))
    return res


def sample_lifetime(x0, params, rng, size=None):
    """Exact absorption-time sample(s): (x0/c)**(1/q) / (2 * Gamma(1+alpha))."""
    z0 = params.to_underlying(x0)
    g = rng.gamma(1.0 + params.alpha, 1.0, size)
    return z0 / (2.0 * g)


def lifetime_cdf(y, x0, params):
    """Closed-form CDF of the absorption time from mass x0."""
    z0 = params.to_underlying(x0)
    return gammaincc(1.0 + params.alpha, z0 / (2.0 * np.asarray(y, dtype=float)))


def nu_tail(params, lifetime=None, amplitude=None):
    """Excursion-measure tails nu{zeta > y} and nu{amplitude > m}.

    The lifetime tail cnu * y**(-1-alpha) / (1+alpha) holds for every (q, c).
    The amplitude tail 2 alpha (1+alpha) m**(-1-alpha) / Gamma(1-alpha) is
    implemented for the standard case only (no closed form otherwise).
    """
    if (lifetime is None) == (amplitude is None):
        raise ValueError("pass exactly one of lifetime=, amplitude=")
    a = params.alpha
    if lifetime is not None:
        y = np.asarray(lifetime, dtype=float)
        return params.cnu * y ** (-1.0 - a) / (1.0 + a)
    if not params.is_standard:
        raise ValueError("amplitude tail needs the standard block diffusion")
    m = np.asarray(amplitude, dtype=float)
    return 2.0 * a * (1.0 + a) * m ** (-1.0 - a) / gamma_fn(1.0 - a)


# ----------------------------------------------------------------------
# conditioned spindle sampling
# ----------------------------------------------------------------------

def _sample_unit_underlying(alpha, n, rng, n_grid=256, a0=1e-3, rho=30.0,
                            dt_fall=3e-4, zeta_cap=3.0):
    """n squared-Bessel spindles conditioned on unit lifetime, on a uniform
    n_grid level grid.

    Construction: the excursion conditioned on amplitude >= a0 rises as a
    dimension 4+2*alpha squared Bessel from 0 to first passage of a0, then
    falls as the block diffusion from a0.  Paths whose realised lifetime is
    at least rho*a0 are kept and rescaled to unit lifetime — by the exact
    scaling disintegration the rescaled law does not depend on the realised
    lifetime, so both the acceptance threshold and the zeta_cap guard are
    bias-free up to the amplitude conditioning, whose total-variation cost is
    bounded by the probability that a unit spindle stays below 1/rho.
    """
    dim_fall = -2.0 * alpha
    dim_rise = 4.0 + 2.0 * alpha
    pre_steps = int(math.ceil(rho * a0 / dt_fall))
    grid = np.linspace(0.0, 1.0, n_grid)
    out = np.empty((n, n_grid))
    got = 0
    while got < n:
        batch = 8192
        # phase 1: record the first pre_steps of every fall densely
        x = np.full(batch, a0)
        head = np.empty((pre_steps + 1, batch))
        head[0] = x
        for k in range(pre_steps):
            z = rng.standard_normal(batch)
            x = np.maximum(x + dim_fall * dt_fall
                           + 2.0 * np.sqrt(x * dt_fall) * z, 0.0)
            head[k + 1] = x
        keep = np.flatnonzero(x > 0.0)
        if len(keep) == 0:
            continue
        # phase 2: run the few survivors to absorption, recording
        tails = [[] for _ in keep]
        xa = x[keep].copy()
        alive = xa > 0.0
        k = pre_steps
        max_steps = int(zeta_cap / dt_fall)
        while alive.any() and k < max_steps:
            z = rng.standard_normal(int(alive.sum()))
            xa[alive] = np.maximum(xa[alive] + dim_fall * dt_fall
                                   + 2.0 * np.sqrt(xa[alive] * dt_fall) * z,
                                   0.0)
            for i in np.flatnonzero(alive):
                tails[i].append(xa[i])
            alive = alive & (xa > 0.0)
            k += 1
        for i, idx in enumerate(keep):
            if got >= n:
                break
            if tails[i] and tails[i][-1] > 0.0:
                continue                    # hit the lifetime guard: drop
            fall = np.concatenate([head[:, idx], np.asarray(tails[i])])
            rise = _rise_to(a0, dim_rise, rng)
            t_rise = (len(rise) - 1) * (a0 / (dim_rise * 50.0))
            times = np.concatenate([
                np.linspace(0.0, t_rise, len(rise)),
                t_rise + dt_fall * np.arange(1, len(fall)),
            ])
            vals = np.concatenate([rise, fall[1:]])
            zeta = times[-1]
            out[got] = np.interp(grid, times / zeta, vals / zeta)
            out[got, 0] = 0.0
            out[got, -1] = 0.0
            got += 1
    return grid, out


def _rise_to(a0, dim_rise, rng):
    """Euler path of the rise diffusion from 0 until first passage of a0."""
    dt = a0 / (dim_rise * 50.0)
    vals = [0.0]
    x = 0.0
    while x < a0:
        z = rng.standard_normal()
        x = max(x + dim_rise * dt + 2.0 * math.sqrt(x * dt) * z, 0.0)
        vals.append(min(x, a0))
    return np.asarray(vals)


class ExcursionMeasureTable:
    """A pool of unit-lifetime underlying spindles for conditioned sampling.

    Holds `n_spindles` independent draws from the unit-lifetime excursion
    law on a uniform grid of n_grid levels.  `sample_spindle(zeta)` picks a
    pool member uniformly and rescales it exactly to the requested lifetime;
    the 2% lifetime-tolerance check guards grid integrity.
    """

    def __init__(self, params, n_spindles, rng, n_grid=256, a0=1e-3,
                 rho=30.0, dt_fall=3e-4, zeta_cap=3.0, tol_lifetime=0.02):
        self.params = params
        self.tol_lifetime = float(tol_lifetime)
        self.grid, self.unit_values = _sample_unit_underlying(
            params.alpha, n_spindles, rng, n_grid=n_grid, a0=a0, rho=rho,
            dt_fall=dt_fall, zeta_cap=zeta_cap)

    def __len__(self):
        return len(self.unit_values)

    def sample_spindle(self, zeta, rng):
        idx = int(rng.integers(len(self.unit_values)))
        return self.spindle_at(idx, zeta)

    def spindle_at(self, idx, zeta):
        times = zeta * self.grid
        vals = self.params.from_underlying(zeta * self.unit_values[idx])
        sp = Spindle(times, vals, validate=False)
        if abs(sp.lifetime - zeta) > self.tol_lifetime * zeta:
            raise AssertionError("pool grid lost lifetime integrity")
        return sp

    def level_values(self, idx, zeta, h):
        """Mass of pool spindle idx, rescaled to lifetime zeta, at offset h."""
        b = np.interp(np.asarray(h, dtype=float) / zeta, self.grid,
                      self.unit_values[idx], left=0.0, right=0.0)
        return self.params.from_underlying(zeta * b)

    def amplitudes(self, zeta=1.0):
        return self.params.from_underlying(zeta * self.unit_values.max(axis=1))


def sample_spindle_given_lifetime(zeta, params, rng, n_grid=256, a0=1e-3,
                                  rho=30.0, dt_fall=3e-4, tol=0.02):
    """One spindle from the excursion measure conditioned on lifetime zeta."""
    if zeta <= 0:
        raise ValueError("lifetime must be positive")
    table = ExcursionMeasureTable(params, 1, rng, n_grid=n_grid, a0=a0,
                                  rho=rho, dt_fall=dt_fall, tol_lifetime=tol)
    return table.spindle_at(0, zeta)


def sample_level_value(zeta, h, params, rng):
    """Mass of a conditioned spindle at offset h into its lifetime zeta.

    The underlying squared-Bessel value at interior time h, given absorption
    exactly at zeta, has density proportional to the excursion entrance
    density exp(-z/2h) times the absorption density z**(1+alpha)
    exp(-z/2(zeta-h)) of the remaining time — a Gamma(2 + alpha) variable
    with scale 2 h (zeta - h) / zeta.  The mass is its (q, c) transform.
    Broadcasts over zeta and h; endpoints give exactly zero.
    """
    z = np.asarray(zeta, dtype=float)
    u = np.asarray(h, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("lifetime must be positive")
    if np.any((u < 0.0) | (u > z)):
        raise ValueError("offset must lie within the lifetime")
    scale = 2.0 * u * (z - u) / z
    g = rng.gamma(2.0 + params.alpha, 1.0, size=np.broadcast(z, u).shape)
    return params.from_underlying(scale * g)
