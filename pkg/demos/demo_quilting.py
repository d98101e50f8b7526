"""Minimum-error boundary cuts in patch overlaps.

Two noisy textures are blended along a dynamic-programming seam: wherever the
overlap bands agree the seam is invisible, and wherever they disagree the cut
routes around the conflict instead of leaving a straight edge.

Run:  python3 demos/demo_quilting.py [out_dir]
"""

import sys

import numpy as np

from texinpaint import (composite_patch, min_cut_seam, overlap_error,
                        tensor_to_image, write_png)


def noisy(color, shape, seed):
    rng = np.random.default_rng(seed)
    base = np.array(color, dtype=float)[:, None, None]
    return np.clip(base + rng.normal(0, 18, (3,) + shape), 0, 255)


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "."
    canvas = noisy((180, 150, 60), (96, 96), seed=1)
    patch = noisy((60, 110, 190), (64, 64), seed=2)
    overlap = 16

    # inspect the vertical seam through the left overlap band
    band_existing = canvas[:, 16:80, 16 : 16 + overlap]
    band_patch = patch[:, :, :overlap]
    err = overlap_error(band_existing, band_patch)
    path, cost = min_cut_seam(err, "vertical")
    print(f"vertical seam cost {cost:.4g}, column range "
          f"[{path.min()}, {path.max()}]")

    naive = canvas.copy()
    naive[:, 16:80, 16:80] = patch
    quilted = composite_patch(canvas, patch, (16, 16), overlap,
                              np.ones((96, 96), dtype=bool))

    write_png(tensor_to_image(naive), f"{out_dir}/quilt_naive.png")
    write_png(tensor_to_image(quilted), f"{out_dir}/quilt_seamed.png")
    print(f"wrote quilt_naive.png and quilt_seamed.png to {out_dir}; the "
          "seamed version hides the straight paste boundary inside the "
          "overlap bands")


if __name__ == "__main__":
    main()
