"""Feature/label encoding, sample generation, CSV persistence and splitting.

Input layout, per cell then per local user: ``F`` CQI values scaled by 1/15
followed by the cell-edge flag. Output layout, per cell then per sub-band:
``n`` bits of the power level index, their complement, ``n`` bits of the
assigned user index, their complement. Bits are big-endian.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .netmodel import Allocation, NetworkRealization, ScenarioConfig, sample_realization
from .solvers import GaConfig, exhaustive_search, ga_solve

__all__ = [
    "Sample",
    "Dataset",
    "Decoded",
    "DataFormatError",
    "input_size",
    "output_size",
    "encode_input",
    "encode_output",
    "decode_output",
    "generate",
    "split",
    "write_csv",
    "read_csv",
]

SCHEMA_VERSION = 1
CQI_MAX = 15.0


class DataFormatError(ValueError):
    """A dataset file does not match the expected layout."""


@dataclass
class Sample:
    input: np.ndarray
    target_bits: np.ndarray
    seed: int
    utility: float
    method: str


@dataclass
class Dataset:
    samples: list
    num_cells: int
    users_per_cell: int
    subbands: int
    bits_per_field: int
    scenario_fingerprint: str

    def __len__(self):
        return len(self.samples)

    @property
    def inputs(self) -> np.ndarray:
        return np.array([s.input for s in self.samples], dtype=float).reshape(len(self), -1)

    @property
    def targets(self) -> np.ndarray:
        return np.array([s.target_bits for s in self.samples], dtype=np.int8).reshape(len(self), -1)

    def subset(self, indices) -> "Dataset":
        return replace(self, samples=[self.samples[i] for i in indices])

    @classmethod
    def empty_like(cls, cfg: ScenarioConfig) -> "Dataset":
        return cls([], cfg.num_cells, cfg.users_per_cell, cfg.subbands, cfg.bits_per_field, cfg.fingerprint())


class Decoded(NamedTuple):
    power_idx: np.ndarray
    assign: np.ndarray
    ambiguous: np.ndarray
    clamped: np.ndarray


def input_size(cfg: ScenarioConfig) -> int:
    return cfg.num_cells * cfg.users_per_cell * (cfg.subbands + 1)


def output_size(cfg: ScenarioConfig) -> int:
    return 2 * 2 * cfg.bits_per_field * cfg.num_cells * cfg.subbands


def encode_input(real: NetworkRealization, cfg: ScenarioConfig) -> np.ndarray:
    cqi = np.asarray(real.cqi, dtype=float).reshape(cfg.total_users, cfg.subbands) / CQI_MAX
    loc = np.asarray(real.location, dtype=float).reshape(cfg.total_users, 1)
    return np.hstack([cqi, loc]).ravel()


def _bits(values: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1)
    return (values[..., None] >> shifts) & 1


def encode_output(alloc: Allocation, cfg: ScenarioConfig) -> np.ndarray:
    n = cfg.bits_per_field
    p = np.asarray(alloc.power_idx, dtype=np.int64)
    a = np.asarray(alloc.assign, dtype=np.int64)
    if p.shape != (cfg.num_cells, cfg.subbands) or a.shape != p.shape:
        raise ValueError("allocation shape does not match scenario")
    if min(p.min(), a.min()) < 0 or max(p.max(), a.max()) >= 2**n:
        raise ValueError(f"allocation index does not fit in {n} bits")
    pb, ab = _bits(p, n), _bits(a, n)
    out = np.concatenate([pb, 1 - pb, ab, 1 - ab], axis=-1)
    return out.reshape(-1).astype(np.int8)


def decode_output(activations, cfg: ScenarioConfig, *, rule: str = "complement") -> Decoded:
    """Turn ``2*2*n*K*F`` activations back into level and user indices.

    With ``rule="complement"`` a bit is 1 iff its activation beats the paired
    complement activation (ties give 0 and are flagged ambiguous); with
    ``rule="threshold"`` a bit is 1 iff its activation exceeds 0.5. Decoded
    indices beyond the valid range are clamped and flagged.
    """
    n = cfg.bits_per_field
    x = np.asarray(activations, dtype=float)
    if x.shape[-1] != output_size(cfg):
        raise ValueError(f"expected {output_size(cfg)} activations, got {x.shape[-1]}")
    x = x.reshape(*x.shape[:-1], cfg.num_cells, cfg.subbands, 2, 2, n)
    value, comp = x[..., 0, :], x[..., 1, :]
    if rule == "complement":
        bits = (value > comp).astype(np.int64)
        ambiguous = (value == comp).any(axis=-1)
    elif rule == "threshold":
        bits = (value > 0.5).astype(np.int64)
        ambiguous = (value == 0.5).any(axis=-1)
    else:
        raise ValueError(f"unknown decoding rule {rule!r}")
    idx = (bits << np.arange(n - 1, -1, -1)).sum(axis=-1)
    limits = np.array([cfg.num_levels - 1, cfg.users_per_cell - 1])
    clamped = idx > limits
    idx = np.minimum(idx, limits)
    return Decoded(idx[..., 0], idx[..., 1], ambiguous, clamped)


def sample_seed(seed: int, index: int) -> int:
    return int(seed) ^ int(index)


def solve_one(cfg: ScenarioConfig, ga: GaConfig, seed: int, method: str):
    """Steps 1-3 for one derived seed: realization plus solved allocation."""
    real = sample_realization(cfg, seed)
    if method == "ga":
        result = ga_solve(real, cfg, replace(ga, rng_seed=_ga_seed(ga.rng_seed, seed)))
    elif method == "exhaustive":
        result = exhaustive_search(real, cfg)
    else:
        raise ValueError(f"unknown method {method!r}")
    return real, result


def _ga_seed(ga_seed: int, sample_seed: int) -> int:
    return int(np.random.SeedSequence([ga_seed, sample_seed]).generate_state(1)[0])


def make_sample(real: NetworkRealization, alloc: Allocation, cfg: ScenarioConfig, method: str) -> Sample:
    return Sample(encode_input(real, cfg), encode_output(alloc, cfg), real.seed, alloc.utility, method)


def _generate_one(args) -> Sample:
    cfg, ga, seed, method = args
    real, result = solve_one(cfg, ga, seed, method)
    return make_sample(real, result.allocation, cfg, method)


def generate(cfg: ScenarioConfig, ga: GaConfig = GaConfig(), count: int = 1, seed: int = 0,
             method: str = "ga", *, workers: int = 1) -> Dataset:
    """Repeat realization + solve ``count`` times with seeds ``seed ^ i``.

    ``workers > 1`` uses a process pool; output order follows the index.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    jobs = [(cfg, ga, sample_seed(seed, i), method) for i in range(count)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            samples = list(pool.map(_generate_one, jobs, chunksize=32))
    else:
        samples = [_generate_one(j) for j in jobs]
    ds = Dataset.empty_like(cfg)
    ds.samples = samples
    return ds


def split(ds: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(ds))
    n_train = int(round(len(ds) * train_fraction))
    return ds.subset(order[:n_train]), ds.subset(order[n_train:])


def write_csv(ds: Dataset, path) -> None:
    """First row: ``schema_version,K,U,F,n,scenario_fingerprint`` values.

    Then one row per sample: ``seed,method,utility,<inputs...>,<bits...>``.
    Floats use ``repr`` so reading back is bit-exact.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([SCHEMA_VERSION, ds.num_cells, ds.users_per_cell, ds.subbands, ds.bits_per_field,
                    ds.scenario_fingerprint])
        for s in ds.samples:
            w.writerow([s.seed, s.method, repr(float(s.utility))]
                       + [repr(float(v)) for v in s.input]
                       + [int(b) for b in s.target_bits])


def read_csv(path) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        try:
            head = next(rows)
            version, k, u, f, n = (int(v) for v in head[:5])
            fingerprint = head[5]
        except (StopIteration, ValueError, IndexError) as exc:
            raise DataFormatError(f"{path}: bad header") from exc
        if version != SCHEMA_VERSION:
            raise DataFormatError(f"{path}: unsupported schema version {version}")
        n_in = k * u * (f + 1)
        n_out = 2 * 2 * n * k * f
        samples = []
        for lineno, row in enumerate(rows, 2):
            if len(row) != 3 + n_in + n_out:
                raise DataFormatError(f"{path}:{lineno}: expected {3 + n_in + n_out} fields, got {len(row)}")
            try:
                samples.append(Sample(
                    np.array([float(v) for v in row[3:3 + n_in]]),
                    np.array([int(v) for v in row[3 + n_in:]], dtype=np.int8),
                    int(row[0]), float(row[2]), row[1]))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    return Dataset(samples, k, u, f, n, fingerprint)
