"""Plain texture synthesis from Gramian statistics.

A random filter bank is enough to carry texture statistics: we take a small
checkerboard, record its per-layer Gramians, then optimize random noise until
its Gramians match. The result is not the checkerboard (Gramians discard
spatial phase) but it has the same local color statistics.

Run:  python3 demos/demo_texture_synthesis.py [out_dir]
"""

import sys

import numpy as np

from texinpaint import (OptimizerConfig, backward,
                        compute_statistics, forward, minimize, random_network,
                        small_topology, synthesis_loss, tensor_to_image,
                        write_png)


def checkerboard(size, cell):
    n = size // cell
    tile = (np.arange(n)[:, None] + np.arange(n)) % 2
    tile = np.kron(tile, np.ones((cell, cell), dtype=int))
    a, b = np.array([220, 40, 70]), np.array([30, 200, 120])
    return np.where(tile[..., None] == 0, a, b).astype(float).transpose(2, 0, 1)


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "."
    layers = ("conv1_1", "pool1", "conv3_1")
    net = random_network(9, small_topology((4, 4, 6), (1, 2)),
                         statistics_layers=layers)

    texture = checkerboard(64, 8)
    reference = compute_statistics(forward(net, texture, layers=layers))

    def objective(flat):
        x = flat.reshape(texture.shape)
        trace = forward(net, x, layers=layers)
        value, cots = synthesis_loss(reference, trace)
        return value, backward(net, trace, cots).ravel()

    rng = np.random.default_rng(0)
    x0 = rng.uniform(0, 255, texture.shape)
    v0, _ = objective(x0.ravel())
    print(f"initial statistics mismatch: {v0:.4g}")

    cfg = OptimizerConfig(max_iterations=200, lower=0.0, upper=255.0)
    report = minimize(objective, x0.ravel(), cfg)
    print(f"after {report.iterations} iterations: {report.value:.4g} "
          f"({100 * (1 - report.value / v0):.2f}% reduction, "
          f"stopped: {report.reason})")

    write_png(tensor_to_image(texture), f"{out_dir}/synthesis_target.png")
    write_png(tensor_to_image(x0), f"{out_dir}/synthesis_noise.png")
    write_png(tensor_to_image(report.x.reshape(texture.shape)),
              f"{out_dir}/synthesis_result.png")
    print(f"wrote synthesis_{{target,noise,result}}.png to {out_dir}")


if __name__ == "__main__":
    main()
