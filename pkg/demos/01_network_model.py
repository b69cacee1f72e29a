"""
A random multi-cell drop
========================

Draw one network realization at full scale, look at the geometry and
the channel reports, and score a couple of power allocations.
"""

import numpy as np

from dlrra.netmodel import Allocation, ScenarioConfig, feasible_power_vectors, network_utility, sample_realization
from dlrra.solvers import fitness

cfg = ScenarioConfig()
print(f"{cfg.num_cells} cells, {cfg.users_per_cell} users per cell, {cfg.subbands} sub-bands")
print(f"noise per sub-band {cfg.noise_w:.3e} W, SNR gap alpha {cfg.alpha:.5f}")

real = sample_realization(cfg, seed=1)

# base stations sit on a hexagonal grid, users are dropped uniformly in each cell
print("base stations (m):")
print(np.round(real.bs_positions, 1))
print("distance of each user to its own base station (m):")
print(np.round(real.distance.reshape(cfg.num_cells, cfg.users_per_cell), 1))

# each user reports one CQI per sub-band plus a cell-edge flag
print("CQI of the users in cell 0:")
print(real.cqi[: cfg.users_per_cell])
print("cell-edge flags:", real.location.reshape(cfg.num_cells, cfg.users_per_cell).tolist())

# power vectors per cell that respect the 40 W budget
vectors = np.asarray(feasible_power_vectors(cfg))
print(f"{len(vectors)} feasible power vectors per cell, e.g. {vectors[:3].tolist()}")

# everyone at the lowest level, everyone served by their first user
low = Allocation(np.zeros((cfg.num_cells, cfg.subbands), int), np.zeros((cfg.num_cells, cfg.subbands), int))
print(f"utility, all low power:  {network_utility(real, low, cfg) / 1e6:.3f} Mbit/s")

# raising every cell together changes almost nothing: interference grows with the signal
high = Allocation(np.tile(vectors[-1], (cfg.num_cells, 1)), low.assign)
print(f"utility, {vectors[-1].tolist()} everywhere: {network_utility(real, high, cfg) / 1e6:.3f} Mbit/s")

# raising one cell alone helps that cell and hurts its neighbours
lone = Allocation(low.power_idx.copy(), low.assign)
lone.power_idx[0] = vectors[-1]
print(f"utility, only cell 0 raised: {network_utility(real, lone, cfg) / 1e6:.3f} Mbit/s")

# the solvers pick the best user per sub-band for a given power choice
print(f"best assignment at the reference powers: {fitness(real, real.ref_power_idx, cfg) / 1e6:.3f} Mbit/s")
