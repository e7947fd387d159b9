"""Variation of the decimated 2D Ising measure at the checkerboard image, radius by radius.

Stops at the largest window the exact elimination engine accepts; prints radius, variation, seconds.
"""
import argparse
import time

from nongibbs.badness import ConfigGenerator, badness_profile, largest_exact_radius
from nongibbs.lattice import Interaction, Lattice, SpinModel
from nongibbs.transform import TransformSpec


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--beta", type=float, default=0.8)
    parser.add_argument("--min-radius", type=int, default=1)
    args = parser.parse_args()
    model = SpinModel(Lattice.centered(0, 2), Interaction.nearest_neighbor(2, 1.0), args.beta)
    decimate = TransformSpec.decimation("even")
    top = largest_exact_radius(model, decimate)
    for r in range(args.min_radius, top + 1):
        start = time.perf_counter()
        v = badness_profile(model, decimate, ConfigGenerator.checkerboard(2), [r]).floor
        print(f"{r}\t{v:.17g}\t{time.perf_counter() - start:.1f}", flush=True)


if __name__ == "__main__":
    main()
