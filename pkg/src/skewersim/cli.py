"""Command-line front end.

Subcommands:

  simulate   draw a marked point process and write it with its scaffolding
  evolve     slice an interval partition through a ladder of levels
  metric     distance between two stored partitions
  verify     run the statistical self-test suites
  render     static SVG picture of a stored run

Every flag can instead be given in a TOML file passed via ``--config``;
values typed on the command line win over file values.  Outputs are
byte-for-byte reproducible: the same seed and flags always produce the
same files.

Exit codes: 0 success, 2 invalid input or configuration, 3 sampling
budget exhausted, 4 statistical failure (verify only).
"""

import dataclasses
import json
import sys
import zlib

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:          # python < 3.11
    import tomli as tomllib

from .ipcore import IntervalPartition, dist_alpha, dist_hausdorff
from .spindles import DiffusionParams, ExcursionMeasureTable
from .scaffold import (BudgetError, SpindlePointProcess, sample_prm,
                       build_scaffolding)
from .skewer import EvolutionPath, evolve, DEFAULT_CLADE_BUDGET
from .verify import run_suite, reports_to_json, suite_exit_code, stream_rng

EXIT_BAD_INPUT = 2
EXIT_BUDGET = 3
EXIT_STATISTICAL = 4


# ---------------------------------------------------------------------------
# configuration


@dataclasses.dataclass
class RunConfig:
    """Merged run parameters shared by the sampling subcommands.

    ``n_grid`` is the level-grid resolution used when drawing fresh spindle
    shapes; ``levels`` is only meaningful for `evolve`, ``horizon`` only for
    `simulate`.  A seed is mandatory for anything stochastic.
    """

    alpha: float = 0.5
    q: float = 1.0
    c: float = 1.0
    cutoff: float = 1e-3
    dt: float = 1e-3
    n_grid: int = 256
    horizon: float = 1.0
    levels: tuple = ()
    seed: int = None
    out: str = None

    def params(self):
        return DiffusionParams(self.alpha, self.q, self.c)

    def validate(self):
        self.params()                      # range checks on alpha, q, c
        if not self.cutoff > 0.0:
            raise ValueError("cutoff must be positive")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if int(self.n_grid) < 2:
            raise ValueError("n_grid must be at least 2")
        if self.seed is None:
            raise ValueError("a seed is required; pass --seed or set "
                             "seed in the config file")
        return self


def _read_toml(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _merge_config(ctx, config_path, values):
    """Fill in flags the user did not type from a TOML file.

    The file mirrors the command's flags (underscored keys).  Explicitly
    typed flags always win; unknown keys are an error so that typos do
    not silently fall back to defaults.
    """
    if not config_path:
        return values
    data = _read_toml(config_path)
    known = {p.name for p in ctx.command.params} - {"config"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError("unknown config key(s): %s" % ", ".join(unknown))
    merged = dict(values)
    for key, val in data.items():
        src = ctx.get_parameter_source(key)
        if src is None or src.name == "DEFAULT":
            merged[key] = val
    return merged


def _fail(code, message):
    click.echo("error: %s" % message, err=True)
    sys.exit(code)


def _guarded(fn):
    """Map exceptions to the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BudgetError as exc:
            _fail(EXIT_BUDGET, "sampling budget exhausted: %s" % exc)
        except (ValueError, KeyError) as exc:
            _fail(EXIT_BAD_INPUT, exc)
        except OSError as exc:
            _fail(EXIT_BAD_INPUT, exc)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _parse_levels(text):
    """Level ladder from 'start:stop:step' or a comma list."""
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if not text:
        raise ValueError("empty level list")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("level range must be start:stop:step")
        a, b, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("level step must be positive")
        n = int(np.floor((b - a) / step + 1e-9))
        return tuple(float(v) for v in (a + step * np.arange(n + 1)))
    return tuple(float(v) for v in text.split(","))


def _parse_masses(text):
    text = text.strip()
    if not text:
        return []
    return [float(v) for v in text.split(",")]


def _load_partition(path):
    with open(path) as fh:
        return IntervalPartition.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# group


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Interval-partition diffusions built from marked stable processes."""


# ---------------------------------------------------------------------------
# simulate


@main.command()
@click.option("--alpha", type=float, default=0.5, show_default=True,
              help="Self-similarity index in (0,1).")
@click.option("--q", type=float, default=1.0, show_default=True,
              help="Value-map exponent; must exceed alpha.")
@click.option("--c", type=float, default=1.0, show_default=True,
              help="Value-map scale factor.")
@click.option("--cutoff", type=float, default=1e-3, show_default=True,
              help="Smallest spindle lifetime kept.")
@click.option("--horizon", type=float, default=1.0, show_default=True,
              help="Length of the simulated time interval.")
@click.option("--n-grid", type=int, default=256, show_default=True,
              help="Levels per freshly drawn spindle shape.")
@click.option("--pool-size", type=int, default=512, show_default=True,
              help="Shared pool of unit-lifetime spindle shapes.")
@click.option("--seed", type=int, default=None, help="Random seed (required).")
@click.option("--out", type=str, default="run", show_default=True,
              help="Output prefix; writes PREFIX.points.jsonl and "
                   "PREFIX.scaffold.csv.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML file with defaults for these flags.")
@click.pass_context
@_guarded
def simulate(ctx, **opts):
    """Draw a marked point process and its scaffolding path.

    Writes the point process as JSON lines and the scaffolding as CSV, then
    prints a one-line summary.
    """
    opts = _merge_config(ctx, opts.pop("config"), opts)
    pool_size = int(opts.pop("pool_size"))
    cfg = RunConfig(alpha=opts["alpha"], q=opts["q"], c=opts["c"],
                    cutoff=opts["cutoff"], n_grid=opts["n_grid"],
                    horizon=opts["horizon"], seed=opts["seed"],
                    out=opts["out"]).validate()
    params = cfg.params()
    rng = stream_rng(int(cfg.seed), "cli-simulate")
    pool = ExcursionMeasureTable(params, pool_size, rng,
                                 n_grid=int(cfg.n_grid))
    pp = sample_prm(params, cfg.cutoff, cfg.horizon, rng, pool=pool,
                    seed=int(cfg.seed))
    scaf = build_scaffolding(pp)
    points_path = cfg.out + ".points.jsonl"
    scaffold_path = cfg.out + ".scaffold.csv"
    pp.to_jsonl(points_path)
    scaf.to_csv(scaffold_path)
    click.echo("simulate: %d spindles on [0, %g], final value %.6g -> %s, %s"
               % (len(pp), cfg.horizon, scaf.final_value, points_path,
                  scaffold_path))


# ---------------------------------------------------------------------------
# evolve


@main.command(name="evolve")
@click.option("--init", "init_text", type=str, default=None,
              help="Initial block masses as 'm1,m2,...'; '' for empty.")
@click.option("--init-file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Initial partition as a JSON file.")
@click.option("--levels", "levels_text", type=str, required=False,
              default=None, help="Level ladder 'start:stop:step' or "
                                 "'y1,y2,...'.")
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--q", type=float, default=1.0, show_default=True)
@click.option("--c", type=float, default=1.0, show_default=True)
@click.option("--cutoff", type=float, default=1e-3, show_default=True,
              help="Smallest spindle lifetime kept.")
@click.option("--dt", type=float, default=1e-3, show_default=True,
              help="Euler step for block diffusions.")
@click.option("--max-points", type=int, default=DEFAULT_CLADE_BUDGET,
              show_default=True, help="Abort past this many sampled points.")
@click.option("--seed", type=int, default=None, help="Random seed (required).")
@click.option("--out", type=str, default="evolution.jsonl", show_default=True,
              help="Output path for the evolution (JSON lines).")
@click.option("--csv", "csv_path", type=str, default=None,
              help="Optional per-level summary CSV.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML file with defaults for these flags.")
@click.pass_context
@_guarded
def evolve_cmd(ctx, **opts):
    """Run an interval partition through the level slicer.

    The initial state comes from --init (comma-separated masses) or
    --init-file (a stored partition); the result is one snapshot per level,
    written as JSON lines.
    """
    opts = _merge_config(ctx, opts.pop("config"), opts)
    init_text, init_file = opts["init_text"], opts["init_file"]
    if (init_text is None) == (init_file is None):
        raise ValueError("give exactly one of --init or --init-file")
    if opts["levels_text"] is None:
        raise ValueError("a level ladder is required; pass --levels")
    levels = _parse_levels(opts["levels_text"])
    cfg = RunConfig(alpha=opts["alpha"], q=opts["q"], c=opts["c"],
                    cutoff=opts["cutoff"], dt=opts["dt"],
                    levels=levels, seed=opts["seed"],
                    out=opts["out"]).validate()
    params = cfg.params()
    if init_file is not None:
        beta0 = _load_partition(init_file)
    else:
        beta0 = IntervalPartition(_parse_masses(init_text),
                                  alpha_div=params.alpha / params.q)
    rng = stream_rng(int(cfg.seed), "cli-evolve")
    path = evolve(beta0, params, levels, cfg.cutoff, cfg.dt, rng,
                  max_points=int(opts["max_points"]))
    path.to_jsonl(cfg.out)
    wrote = cfg.out
    if opts["csv_path"]:
        path.to_csv(opts["csv_path"])
        wrote += ", " + opts["csv_path"]
    last = path.snapshots[-1].partition
    click.echo("evolve: %d levels in [%g, %g], final state %d blocks, "
               "mass %.6g -> %s"
               % (len(levels), levels[0], levels[-1], len(last),
                  last.total_mass, wrote))


# ---------------------------------------------------------------------------
# metric


@main.command()
@click.option("--a", "path_a", type=click.Path(exists=True, dir_okay=False),
              required=True, help="First stored partition (JSON).")
@click.option("--b", "path_b", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Second stored partition (JSON).")
@click.option("--metric", "which",
              type=click.Choice(["alpha", "hausdorff"]),
              default="alpha", show_default=True,
              help="alpha: diversity-aware distance; hausdorff: the "
                   "mass-only distance d_H'.")
@click.option("--cutoff", type=float, default=0.0, show_default=True,
              help="Ignore blocks at or below this mass.")
@_guarded
def metric(path_a, path_b, which, cutoff):
    """Distance between two stored partitions, printed to stdout."""
    beta = _load_partition(path_a)
    gamma = _load_partition(path_b)
    if which == "alpha":
        if not (beta.has_diversity and gamma.has_diversity):
            raise ValueError(
                "the alpha metric needs diversity marks on both "
                "partitions; these files have none -- use the mass-only "
                "distance d_H' via --metric hausdorff")
        d = dist_alpha(beta, gamma, cutoff=cutoff)
    else:
        d = dist_hausdorff(beta, gamma, cutoff=cutoff)
    click.echo("%.17g" % d)


# ---------------------------------------------------------------------------
# verify


@main.command()
@click.option("--suite", type=str, default="all", show_default=True,
              help="all | fast | smoke | controls, or a test-name prefix.")
@click.option("--seed", type=int, default=None, help="Random seed (required).")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads; results do not depend on this.")
@click.option("--out", type=str, default=None,
              help="Also write the JSON report array to this file.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML file with defaults for these flags.")
@click.pass_context
@_guarded
def verify(ctx, **opts):
    """Run the statistical self-test suites.

    Emits a JSON array of test reports on stdout and a per-test line on
    stderr; exits 4 if any blocking test fails.
    """
    opts = _merge_config(ctx, opts.pop("config"), opts)
    if opts["seed"] is None:
        raise ValueError("a seed is required; pass --seed or set seed "
                         "in the config file")
    reports = run_suite(suite=opts["suite"], master_seed=int(opts["seed"]),
                        threads=int(opts["threads"]))
    text = reports_to_json(reports)
    click.echo(text)
    if opts["out"]:
        with open(opts["out"], "w") as fh:
            fh.write(text + "\n")
    for rep in reports:
        flag = "pass" if rep.passed else "FAIL"
        click.echo("[%s] %-28s stat %.5g vs ref %.5g (k=%g, se %.3g) "
                   "%.1fs" % (flag, rep.name, rep.statistic,
                              rep.reference_value, rep.k,
                              rep.standard_error, rep.runtime), err=True)
    code = suite_exit_code(reports)
    if code:
        sys.exit(code)


# ---------------------------------------------------------------------------
# render


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Stored run to draw (.points.jsonl for "
                                  "scaffolding, evolution .jsonl otherwise).")
@click.option("--mode", type=click.Choice(["scaffolding", "skewer",
                                           "massflow"]),
              default="scaffolding", show_default=True)
@click.option("--out", "out_path", type=str, required=True,
              help="Output SVG path.")
@click.option("--width", type=int, default=880, show_default=True)
@click.option("--height", type=int, default=520, show_default=True)
@_guarded
def render(in_path, mode, out_path, width, height):
    """Draw a stored run as a static SVG.

    scaffolding: the jump path with each spindle drawn as a shaded
    excursion shape across its jump.  skewer: one strip of blocks per
    level.  massflow: skewer strips plus ribbons joining each block to
    itself across consecutive levels.  Colours are keyed to block
    identity, so a block keeps its colour from level to level.
    """
    if width < 100 or height < 100:
        raise ValueError("canvas must be at least 100x100")
    if mode == "scaffolding":
        try:
            pp = SpindlePointProcess.from_jsonl(in_path)
        except (KeyError, TypeError) as exc:
            raise ValueError("%s is not a stored point process: %s"
                             % (in_path, exc))
        body = _draw_scaffolding(pp, width, height)
    else:
        try:
            path = EvolutionPath.from_jsonl(in_path)
        except (KeyError, TypeError) as exc:
            raise ValueError("%s is not a stored evolution: %s"
                             % (in_path, exc))
        body = _draw_levels(path, width, height, ribbons=mode == "massflow")
    with open(out_path, "w") as fh:
        fh.write(_svg_document(width, height, body))
    click.echo("render: %s -> %s" % (mode, out_path))


# ---------------------------------------------------------------------------
# SVG helpers.  Numbers are always written with %.2f, iteration order is
# the storage order, and nothing time- or path-dependent is emitted, so a
# given input yields identical bytes on every run.

_MARGIN = 46.0


def _svg_document(width, height, body):
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            '<svg xmlns="http://www.w3.org/2000/svg" width="%d" '
            'height="%d" viewBox="0 0 %d %d">\n' % (width, height,
                                                    width, height))
    return head + body + "</svg>\n"


def _axes_group(width, height):
    m = _MARGIN
    return ('<g class="axes" stroke="#222" stroke-width="1" fill="none">\n'
            '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f"/>\n'
            '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f"/>\n'
            '</g>\n'
            % (m, height - m, width - m, height - m,
               m, m, m, height - m))


def _block_color(block_id):
    """Deterministic colour keyed to a block's identity."""
    if isinstance(block_id, float):
        key = "%.12g" % block_id
    else:
        key = str(block_id)
    crc = zlib.crc32(key.encode("utf-8"))
    hue = crc % 360
    light = 38 + (crc >> 9) % 25
    return "hsl(%d,62%%,%d%%)" % (hue, light)


class _Frame:
    """Affine map from data coordinates to the pixel frame."""

    def __init__(self, width, height, x0, x1, y0, y1):
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        self.sx = (width - 2 * _MARGIN) / (x1 - x0)
        self.sy = (height - 2 * _MARGIN) / (y1 - y0)
        self.x0, self.y0 = x0, y0
        self.height = height

    def x(self, v):
        return _MARGIN + (v - self.x0) * self.sx

    def y(self, v):
        return self.height - _MARGIN - (v - self.y0) * self.sy


def _draw_scaffolding(pp, width, height):
    body = _axes_group(width, height)
    if len(pp) == 0:
        return body
    scaf = build_scaffolding(pp)
    t0, seg_start, seg_end = scaf.segment_bounds()
    t_end = np.concatenate([scaf.times, [scaf.horizon]])
    lo = min(float(seg_end.min()), 0.0)
    hi = float(seg_start.max())
    pad = 0.05 * (hi - lo or 1.0)
    fr = _Frame(width, height, 0.0, scaf.horizon, lo - pad, hi + pad)

    amax = max(f.amplitude for f in pp.spindles)
    wscale = 0.05 * scaf.horizon / (amax or 1.0)
    parts = ['<g class="spindles" stroke="none">\n']
    for t, f in pp:
        base = scaf.value(t, side="left")
        # decimate the outline; the peak is kept by construction below
        idx = np.unique(np.concatenate(
            [np.linspace(0, len(f.times) - 1, 40).round().astype(int),
             [int(np.argmax(f.values))]]))
        half = 0.5 * wscale * f.values[idx]
        lev = f.times[idx] - f.times[0]
        xs = np.concatenate([t + half, (t - half)[::-1]])
        ys = np.concatenate([base + lev, (base + lev)[::-1]])
        pts = " ".join("%.2f,%.2f" % (fr.x(a), fr.y(b))
                       for a, b in zip(xs, ys))
        parts.append('<polygon class="spindle" points="%s" fill="%s" '
                     'fill-opacity="0.55"/>\n'
                     % (pts, _block_color(float(t))))
    parts.append("</g>\n")

    parts.append('<g class="path" stroke="#13335c" stroke-width="1.2" '
                 'fill="none">\n')
    for a, b, s, e in zip(t0, t_end, seg_start, seg_end):
        parts.append('<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f"/>\n'
                     % (fr.x(a), fr.y(s), fr.x(b), fr.y(e)))
    parts.append("</g>\n")
    parts.append('<g class="jumps" stroke="#98a6bd" stroke-width="0.7" '
                 'stroke-dasharray="3,2">\n')
    for t, pre, post in zip(scaf.times, scaf.pre, scaf.post):
        parts.append('<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f"/>\n'
                     % (fr.x(t), fr.y(pre), fr.x(t), fr.y(post)))
    parts.append("</g>\n")
    return body + "".join(parts)


def _draw_levels(path, width, height, ribbons=False):
    body = _axes_group(width, height)
    snaps = path.snapshots
    if not snaps or all(len(s.partition) == 0 for s in snaps):
        return body
    levels = [s.y for s in snaps]
    mmax = max(s.partition.total_mass for s in snaps) or 1.0
    fr = _Frame(width, height, 0.0, mmax, min(levels), max(levels))
    n = len(snaps)
    strip_h = min(14.0, 0.8 * (height - 2 * _MARGIN) / max(n, 1))

    def intervals(snap):
        edges = np.concatenate([[0.0], np.cumsum(snap.partition.masses)])
        return list(zip(snap.block_ids, edges[:-1], edges[1:]))

    parts = []
    if ribbons and n > 1:
        parts.append('<g class="flows" stroke="none">\n')
        for lo_snap, hi_snap in zip(snaps[:-1], snaps[1:]):
            high = {bid: (a, b) for bid, a, b in intervals(hi_snap)}
            y_lo, y_hi = fr.y(lo_snap.y), fr.y(hi_snap.y)
            for bid, a, b in intervals(lo_snap):
                if bid not in high:
                    continue
                a2, b2 = high[bid]
                parts.append(
                    '<polygon class="flow" points="%.2f,%.2f %.2f,%.2f '
                    '%.2f,%.2f %.2f,%.2f" fill="%s" fill-opacity="0.35"/>\n'
                    % (fr.x(a), y_lo, fr.x(b), y_lo, fr.x(b2), y_hi,
                       fr.x(a2), y_hi, _block_color(bid)))
        parts.append("</g>\n")

    for snap in snaps:
        y_pix = fr.y(snap.y)
        parts.append('<g class="level" data-level="%.6g">\n' % snap.y)
        for bid, a, b in intervals(snap):
            parts.append('<rect class="block" x="%.2f" y="%.2f" '
                         'width="%.2f" height="%.2f" fill="%s" '
                         'stroke="white" stroke-width="0.4"/>\n'
                         % (fr.x(a), y_pix - 0.5 * strip_h,
                            max(fr.x(b) - fr.x(a), 0.01), strip_h,
                            _block_color(bid)))
        parts.append("</g>\n")
    return body + "".join(parts)


if __name__ == "__main__":
    main()
