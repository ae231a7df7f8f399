"""Shared oracles for the test suite.

Everything here is computed independently of the package under test: the
brute-force distance enumerates every order-preserving correspondence with its
own arithmetic, the reference laws are closed forms evaluated through scipy
special functions, and the frozen numeric constants below were derived by hand
from those closed forms (derivation sketched next to each).
"""

import itertools
import zlib

import numpy as np
import scipy.special as sp


# ----------------------------------------------------------------------
# deterministic seeding: independent streams per (seed, test, replicate)
# ----------------------------------------------------------------------

def make_rng(master_seed, test_name, replicate=0):
    key = zlib.crc32(test_name.encode())
    ss = np.random.SeedSequence((int(master_seed), key, int(replicate)))
    return np.random.Generator(np.random.Philox(ss))


# ----------------------------------------------------------------------
# closed-form reference laws
# ----------------------------------------------------------------------

def cnu(alpha, q=1.0, c=1.0):
    """Normalising constant of the excursion measure over scaled spindles.

    Chosen so that level-crossing mass aggregation is a subordinator with
    Laplace exponent lambda**(alpha/q) and unit rate constant:
        cnu = alpha*(1+alpha) / (Gamma(1-alpha/q) * c**(alpha/q)
                                 * 2**alpha * Gamma(1+alpha)).
    """
    return (alpha * (1.0 + alpha)
            / (sp.gamma(1.0 - alpha / q) * c ** (alpha / q)
               * 2.0 ** alpha * sp.gamma(1.0 + alpha)))


def psi_coefficient(alpha, q=1.0, c=1.0):
    """k in the scaffolding Laplace exponent psi(lam) = k * lam**(1+alpha)."""
    return cnu(alpha, q, c) * sp.gamma(1.0 - alpha) / (alpha * (1.0 + alpha))


def nu_tail_lifetime(y, alpha):
    """Excursion-measure tail of the spindle lifetime, standard case."""
    return alpha * y ** (-1.0 - alpha) / (
        2.0 ** alpha * sp.gamma(1.0 - alpha) * sp.gamma(1.0 + alpha))


def nu_tail_amplitude(m, alpha):
    """Excursion-measure tail of the spindle maximum, standard case."""
    return 2.0 * alpha * (1.0 + alpha) * m ** (-1.0 - alpha) / sp.gamma(1.0 - alpha)


def lifetime_cdf(y, a, alpha):
    """P(absorption time <= y) for the squared-Bessel block diffusion from a.

    The absorption time equals a / (2 G) with G ~ Gamma(1+alpha), hence the
    upper regularised incomplete gamma below.
    """
    return sp.gammaincc(1.0 + alpha, a / (2.0 * np.asarray(y, dtype=float)))


def clade_height_tail(y, a, q=1.0, c=1.0):
    """P(max level in the clade of one block of mass a exceeds y).

    Inverse-exponential law 1 - exp(-(a/c)**(1/q) / (2 y)); free of alpha.
    """
    return 1.0 - np.exp(-((a / c) ** (1.0 / q)) / (2.0 * np.asarray(y, dtype=float)))


def exit_low_probability(x, y, alpha):
    """P(block diffusion from x in (0, y) is absorbed at 0 before reaching y)."""
    return (1.0 - x / y) ** alpha


def total_mass_laplace(lam, a, y):
    """Laplace transform of the level-y skewer total mass of one block's clade.

    The total-mass process in level is a squared Bessel diffusion of
    dimension 0 started from a: E exp(-lam * M_y) = exp(-lam*a/(1+2*lam*y)).
    """
    return np.exp(-lam * a / (1.0 + 2.0 * lam * y))


def subordinator_laplace(lam, s, alpha, q=1.0):
    """E exp(-lam * aggregate mass at inverse local time s) = exp(-s lam^(a/q))."""
    return np.exp(-s * lam ** (alpha / q))


def stable_ip_expected_count(alpha, T, cutoff):
    """Mean number of blocks above the cutoff in a stable(alpha) partition."""
    return T * cutoff ** -alpha / sp.gamma(1.0 - alpha)


def stable_ip_windowed_mass(alpha, T, cutoff, K):
    """Mean total mass of blocks with mass in [cutoff, K)."""
    return (T * alpha / sp.gamma(1.0 - alpha)
            * (K ** (1.0 - alpha) - cutoff ** (1.0 - alpha)) / (1.0 - alpha))


def truncated_jump_rate(alpha, eps, q=1.0, c=1.0):
    """Arrival rate of spindles with lifetime > eps in the marked process."""
    return cnu(alpha, q, c) * eps ** (-1.0 - alpha) / (1.0 + alpha)


def truncated_drift_slope(alpha, eps, q=1.0, c=1.0):
    """Downward drift rate compensating jumps above the lifetime cutoff."""
    return cnu(alpha, q, c) * eps ** -alpha / alpha


# Frozen spot values, derived by hand from the closed forms above.
#   CNU_05:        0.75/(sqrt(2)*Gamma(.5)*Gamma(1.5)) = 1.5/(sqrt(2)*pi)
#   PSI_05:        cnu*Gamma(.5)/0.75 = 1/(sqrt(2)*Gamma(1.5)) = sqrt(2/pi)
#   ZETA_TAIL_05:  0.5/(sqrt(2)*pi/2) = 1/(sqrt(2)*pi)
#   AMP_TAIL_05:   2*0.5*1.5/sqrt(pi) = 1.5/sqrt(pi)
#   RATE_05_EM2:   ZETA_TAIL_05 * (1e-2)**-1.5
CNU_05 = 0.3376186185589148
PSI_05 = 0.7978845608028654
ZETA_TAIL_05 = 0.2250790790392765
AMP_TAIL_05 = 0.8462843753216345
RATE_05_EM2 = 225.0790790392765


# ----------------------------------------------------------------------
# brute-force distances: enumerate every order-preserving correspondence
# ----------------------------------------------------------------------

def _all_correspondences(n, m):
    for k in range(min(n, m) + 1):
        for left in itertools.combinations(range(n), k):
            for right in itertools.combinations(range(m), k):
                yield left, right


def brute_distortion(mb, db, tb, mg, dg, tg, left, right, use_diversity):
    mis = 0.0
    matched_b = 0.0
    matched_g = 0.0
    worst_gap = 0.0
    for i, j in zip(left, right):
        mis += abs(mb[i] - mg[j])
        matched_b += mb[i]
        matched_g += mg[j]
        if use_diversity:
            worst_gap = max(worst_gap, abs(db[i] - dg[j]))
    term1 = mis + (sum(mb) - matched_b)
    term2 = mis + (sum(mg) - matched_g)
    if not use_diversity:
        return max(term1, term2)
    return max(term1, term2, worst_gap, abs(tb - tg))


def brute_force_distance(beta, gamma, use_diversity=True):
    """Exact distance by exhaustive enumeration (small partitions only)."""
    mb = [float(x) for x in beta.masses]
    mg = [float(x) for x in gamma.masses]
    if use_diversity:
        db = [float(x) for x in beta.divs]
        dg = [float(x) for x in gamma.divs]
        tb, tg = float(beta.total_diversity), float(gamma.total_diversity)
    else:
        db = dg = None
        tb = tg = 0.0
    best = float("inf")
    for left, right in _all_correspondences(len(mb), len(mg)):
        val = brute_distortion(mb, db, tb, mg, dg, tg, left, right,
                               use_diversity)
        if val < best:
            best = val
    return best


# ----------------------------------------------------------------------
# independent squared-Bessel dimension-0 sampler (for total-mass checks)
# ----------------------------------------------------------------------

def besq0_euler(a, y, n, dt, rng):
    """n Euler paths of dX = 2 sqrt(X) dW from a, absorbed at 0, value at y."""
    x = np.full(n, float(a))
    steps = int(round(y / dt))
    for _ in range(steps):
        alive = x > 0
        if not alive.any():
            break
        z = rng.standard_normal(alive.sum())
        x[alive] = np.maximum(
            x[alive] + 2.0 * np.sqrt(x[alive] * dt) * z, 0.0)
    return x


def random_partition(rng, max_blocks=6, with_diversity=True, alpha=0.5):
    """A small random marked partition for metric cross-checks."""
    from skewersim.ipcore import IntervalPartition
    n = int(rng.integers(0, max_blocks + 1))
    masses = rng.gamma(1.5, 1.0, n) + 1e-3
    if not with_diversity:
        return IntervalPartition(masses, alpha_div=alpha)
    divs = np.sort(rng.gamma(1.0, 1.0, n))
    total = (divs.max() if n else 0.0) + rng.gamma(1.0, 0.5)
    return IntervalPartition(masses, divs=divs, total_diversity=float(total),
                             alpha_div=alpha)
