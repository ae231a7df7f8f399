"""One simulation, three pictures.

Draws a marked point process, evolves a two-block state through a ladder
of levels, and renders the scaffolding, the per-level strips, and the
mass-flow ribbons as SVGs in ./demo_out.  Everything is seeded, so the
files come out identical on every run.

Run:  python demos/demo_skewer_picture.py
"""

import os
import subprocess
import sys

OUT = os.path.join(os.path.dirname(__file__), "demo_out")


def cli(*args):
    cmd = [sys.executable, "-m", "skewersim.cli", *args]
    print("$", " ".join(args))
    subprocess.run(cmd, check=True)


def main():
    os.makedirs(OUT, exist_ok=True)
    prefix = os.path.join(OUT, "walk")
    evo = os.path.join(OUT, "evolution.jsonl")

    # a two-unit horizon with a generous spindle cutoff keeps the picture
    # readable: a few hundred excursion shapes over the jump path
    cli("simulate", "--alpha", "0.5", "--cutoff", "0.01", "--horizon", "2",
        "--seed", "7", "--out", prefix)
    cli("render", "--in", prefix + ".points.jsonl", "--mode", "scaffolding",
        "--out", os.path.join(OUT, "scaffolding.svg"))

    # forty levels of a two-block evolution; block colours persist, so
    # the strips show blocks being born, growing, and dying as the level
    # rises, and the ribbons connect each block to itself
    cli("evolve", "--init", "1.0,0.5", "--levels", "0:1:0.025",
        "--cutoff", "0.005", "--seed", "3", "--out", evo)
    cli("render", "--in", evo, "--mode", "skewer",
        "--out", os.path.join(OUT, "levels.svg"))
    cli("render", "--in", evo, "--mode", "massflow",
        "--out", os.path.join(OUT, "massflow.svg"))
    print("wrote", OUT)


if __name__ == "__main__":
    main()
