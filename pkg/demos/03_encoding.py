"""
From a solved drop to a training pair
=====================================

The network input is every user's CQI (scaled to [0, 1]) plus its
cell-edge flag. The target spells out each cell's power level and chosen
user per sub-band in binary, every bit followed by its complement.
"""

import numpy as np

from dlrra.dataset import decode_output, encode_input, encode_output, input_size, output_size
from dlrra.netmodel import ScenarioConfig
from dlrra.dataset import solve_one
from dlrra.solvers import GaConfig

cfg = ScenarioConfig()
print(f"input size {input_size(cfg)}, output size {output_size(cfg)}")

real, result = solve_one(cfg, GaConfig(), seed=4, method="ga")
alloc = result.allocation
print("power level index per cell and sub-band:")
print(alloc.power_idx)
print("served user per cell and sub-band:")
print(alloc.assign)

x = encode_input(real, cfg)
bits = encode_output(alloc, cfg)
print("first user's input features:", np.round(x[: cfg.subbands + 1], 3).tolist())
n = cfg.bits_per_field
print(f"cell 0, sub-band 0: power bits {bits[:n].tolist()} / {bits[n:2 * n].tolist()}, "
      f"user bits {bits[2 * n:3 * n].tolist()} / {bits[3 * n:4 * n].tolist()}")

# a noisy network output still decodes as long as each bit beats its complement
noisy = bits + np.random.default_rng(0).uniform(-0.3, 0.3, bits.size)
dec = decode_output(noisy, cfg)
print("decoded from noisy activations matches:",
      np.array_equal(dec.power_idx, alloc.power_idx) and np.array_equal(dec.assign, alloc.assign))
