"""Multi-cell downlink scenario: geometry, link gains, SINR and utility.

Users are indexed globally as ``u = k * U + j`` where ``k`` is the serving
cell and ``j`` the local index inside that cell. Gains are kept linear.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ScenarioConfig",
    "NetworkRealization",
    "Allocation",
    "alpha",
    "noise_power",
    "path_loss_db",
    "bs_positions",
    "sample_realization",
    "served_sinr",
    "sinr",
    "network_utility",
    "cqi_quantize",
    "location_indicator",
    "feasible_power_vectors",
]

BS_LAYOUTS = ("hex", "linear")
MIN_DISTANCE_M = 10.0
CQI_MIN_DB = -10.0
CQI_MAX_DB = 30.0
CQI_LEVELS = 16


@dataclass(frozen=True)
class ScenarioConfig:
    """Static dimensions and physical constants of one network scenario.

    Defaults are the five-cell setup: 500 m cells, 40 W per BS, three
    sub-bands of 2.88 MHz and power levels of 6.4/12.8/19.2 W.
    """

    num_cells: int = 5
    subbands: int = 3
    users_per_cell: int = 5
    cell_radius: float = 500.0
    max_power: float = 40.0
    power_levels: tuple[float, ...] = (6.4, 12.8, 19.2)
    subband_bandwidth: float = 2.88e6
    noise_density: float = -174.0
    target_ber: float = 1e-6
    shadowing_sigma: float = 8.0
    bits_per_field: int = 3
    bs_layout: str = "hex"
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "power_levels", tuple(float(p) for p in self.power_levels))
        for name in ("num_cells", "subbands", "users_per_cell", "bits_per_field"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        levels = self.power_levels
        if not levels or any(p <= 0 for p in levels):
            raise ValueError("power levels must be positive")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("power levels must be strictly increasing")
        if levels[0] * self.subbands > self.max_power:
            raise ValueError("no feasible power vector: min level * F exceeds max_power")
        if 2 ** self.bits_per_field <= max(self.users_per_cell, len(levels)):
            raise ValueError("bits_per_field too small for user/level indices")
        if not 0.0 < self.target_ber < 0.2:
            raise ValueError("target_ber must lie in (0, 0.2)")
        if self.cell_radius <= 0 or self.subband_bandwidth <= 0:
            raise ValueError("cell_radius and subband_bandwidth must be positive")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing_sigma must be non-negative")
        if self.bs_layout not in BS_LAYOUTS:
            raise ValueError(f"unknown bs_layout {self.bs_layout!r}")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")

    @property
    def num_levels(self) -> int:
        return len(self.power_levels)

    @property
    def total_users(self) -> int:
        return self.num_cells * self.users_per_cell

    @property
    def noise_w(self) -> float:
        return noise_power(self.noise_density, self.subband_bandwidth)

    @property
    def alpha(self) -> float:
        return alpha(self.target_ber)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        """Parse flat ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = _parse_field(types[key], value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def fingerprint(self) -> str:
        """Hash of every field except ``rng_seed``.

        Train and test sets drawn with different seeds from the same scenario
        share a fingerprint.
        """
        text = self.to_text()
        text = "\n".join(l for l in text.splitlines() if not l.startswith("rng_seed"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _parse_field(type_name, value: str):
    type_name = str(type_name)
    if type_name.startswith("tuple"):
        return tuple(float(v) for v in value.replace(",", " ").split())
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    return value


@dataclass
class NetworkRealization:
    """One random drop of users plus the derived channel reports.

    ``cqi`` and ``location`` are what users report (``[U_total, F]`` and
    ``[U_total]``); CQI is measured under the random reference power vector
    ``ref_power_idx``.
    """

    bs_positions: np.ndarray
    user_positions: np.ndarray
    serving: np.ndarray
    distance: np.ndarray
    gain: np.ndarray
    noise_w: float
    ref_power_idx: np.ndarray = None
    cqi: np.ndarray = None
    location: np.ndarray = None
    seed: int = 0

    @property
    def num_cells(self) -> int:
        return self.gain.shape[1]

    @property
    def subbands(self) -> int:
        return self.gain.shape[2]


@dataclass
class Allocation:
    """Per-cell power level indices and per-sub-band user choice."""

    power_idx: np.ndarray
    assign: np.ndarray
    utility: float = float("nan")

    def powers_w(self, cfg: ScenarioConfig) -> np.ndarray:
        return np.asarray(cfg.power_levels)[self.power_idx]

    def is_feasible(self, cfg: ScenarioConfig) -> bool:
        p = np.asarray(self.power_idx)
        a = np.asarray(self.assign)
        if p.shape != (cfg.num_cells, cfg.subbands) or a.shape != p.shape:
            return False
        if p.min() < 0 or p.max() >= cfg.num_levels:
            return False
        if a.min() < 0 or a.max() >= cfg.users_per_cell:
            return False
        return bool(np.all(self.powers_w(cfg).sum(axis=1) <= _power_budget(cfg)))


def alpha(target_ber: float) -> float:
    """SNR gap constant ``-1.5 / ln(5 * BER)``."""
    x = 5.0 * target_ber
    if not 0.0 < x < 1.0:
        raise ValueError(f"target_ber={target_ber} outside (0, 0.2)")
    return -1.5 / math.log(x)


def noise_power(noise_density: float, bandwidth: float) -> float:
    """Thermal noise in watts for a density in dBm/Hz over ``bandwidth`` Hz."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 ** ((noise_density + 10.0 * math.log10(bandwidth) - 30.0) / 10.0)


def path_loss_db(distance_m):
    d = np.maximum(np.asarray(distance_m, dtype=float), MIN_DISTANCE_M)
    return 128.1 + 37.6 * np.log10(d / 1000.0)


def bs_positions(cfg: ScenarioConfig) -> np.ndarray:
    """BS coordinates with inter-site distance equal to the cell radius."""
    k = cfg.num_cells
    isd = cfg.cell_radius
    if cfg.bs_layout == "linear":
        return np.column_stack([np.arange(k) * isd, np.zeros(k)])
    rings = 0
    while 1 + 3 * rings * (rings + 1) < k:
        rings += 1
    pts = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if abs(q + r) > rings:
                continue
            x = isd * (q + 0.5 * r)
            y = isd * (math.sqrt(3) / 2 * r)
            ring = max(abs(q), abs(r), abs(q + r))
            angle = round(math.atan2(y, x) % (2 * math.pi), 9)
            pts.append((ring, angle, x, y))
    pts.sort()
    return np.array([(x, y) for _, _, x, y in pts[:k]])


def sample_realization(cfg: ScenarioConfig, seed: int, *, fading: bool = True) -> NetworkRealization:
    """Draw users, shadowing, Rayleigh fading and the Step-1 reference powers.

    ``fading=False`` forces ``|H|^2 = 1`` (deterministic small-scale gain).
    The result depends only on ``(cfg, seed)``.
    """
    rng = np.random.default_rng(seed)
    k, u, f = cfg.num_cells, cfg.users_per_cell, cfg.subbands
    bs = bs_positions(cfg)

    radius = cfg.cell_radius * np.sqrt(rng.random((k, u)))
    theta = 2 * np.pi * rng.random((k, u))
    offsets = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=-1)
    users = (bs[:, None, :] + offsets).reshape(k * u, 2)
    serving = np.repeat(np.arange(k), u)

    dist = np.linalg.norm(users[:, None, :] - bs[None, :, :], axis=-1)
    shadow = rng.normal(0.0, cfg.shadowing_sigma, size=(k * u, k)) if cfg.shadowing_sigma > 0 else np.zeros((k * u, k))
    fade = rng.exponential(1.0, size=(k * u, k, f)) if fading else np.ones((k * u, k, f))
    large_scale = 10.0 ** (-(path_loss_db(dist) + shadow) / 10.0)
    gain = large_scale[:, :, None] * fade

    vectors = feasible_power_vectors(cfg)
    ref = np.array([vectors[i] for i in rng.integers(len(vectors), size=k)], dtype=int)

    real = NetworkRealization(
        bs_positions=bs,
        user_positions=users,
        serving=serving,
        distance=dist[np.arange(k * u), serving],
        gain=gain,
        noise_w=cfg.noise_w,
        ref_power_idx=ref,
        seed=seed,
    )
    ref_sinr = served_sinr(gain, serving, np.asarray(cfg.power_levels)[ref], real.noise_w)
    with np.errstate(divide="ignore"):
        real.cqi = cqi_quantize(10.0 * np.log10(ref_sinr))
    real.location = location_indicator(real.distance, cfg.cell_radius)
    return real


def served_sinr(gain, serving, powers_w, noise_w: float) -> np.ndarray:
    """SINR of every user from its own cell on every sub-band.

    ``powers_w`` has shape ``[..., K, F]``; the result is ``[..., U_total, F]``.
    """
    gain = np.asarray(gain, dtype=float)
    serving = np.asarray(serving)
    n_users, k, _ = gain.shape
    rx = np.asarray(powers_w, dtype=float)[..., None, :, :] * gain
    other = (np.arange(k)[None, :] != serving[:, None]).astype(float)
    interference = np.einsum("...ukf,uk->...uf", rx, other)
    signal = rx[..., np.arange(n_users), serving, :]
    return signal / (noise_w + interference)


def sinr(real: NetworkRealization, powers_w, u: int, k: int, f: int) -> float:
    """SINR of user ``u`` served by cell ``k`` on sub-band ``f``."""
    if real.serving[u] != k:
        raise ValueError(f"user {u} is not associated with cell {k}")
    p = np.asarray(powers_w, dtype=float)
    g = real.gain[u, :, f]
    interference = sum(p[l, f] * g[l] for l in range(len(g)) if l != k)
    return float(p[k, f] * g[k] / (real.noise_w + interference))


def network_utility(real: NetworkRealization, alloc: Allocation, cfg: ScenarioConfig) -> float:
    """Sum over cells and sub-bands of ``B * log2(1 + alpha * SINR)`` of the assigned user."""
    s = served_sinr(real.gain, real.serving, alloc.powers_w(cfg), real.noise_w)
    s = s.reshape(cfg.num_cells, cfg.users_per_cell, cfg.subbands)
    chosen = np.take_along_axis(s, np.asarray(alloc.assign)[:, None, :], axis=1)[:, 0, :]
    return float(cfg.subband_bandwidth * np.log2(1.0 + cfg.alpha * chosen).sum())


def cqi_quantize(sinr_db):
    """Map SINR in dB to a 16-level CQI over [-10, 30] dB.

    Accepts scalars or arrays; ``-inf`` maps to 0.
    """
    x = np.asarray(sinr_db, dtype=float)
    q = np.floor((x - CQI_MIN_DB) / (CQI_MAX_DB - CQI_MIN_DB) * CQI_LEVELS)
    q = np.clip(np.nan_to_num(q, neginf=0.0, posinf=CQI_LEVELS - 1), 0, CQI_LEVELS - 1).astype(int)
    return int(q) if q.ndim == 0 else q


def location_indicator(distance, radius: float):
    """1 for a cell-edge user (strictly beyond R/2), else 0."""
    v = (np.asarray(distance, dtype=float) > radius / 2.0).astype(int)
    return int(v) if v.ndim == 0 else v


def _power_budget(cfg: ScenarioConfig) -> float:
    # absorbs float rounding in sums like 12.8 * 3
    return cfg.max_power * (1.0 + 1e-12)


def feasible_power_vectors(cfg: ScenarioConfig) -> list[tuple[int, ...]]:
    """All per-cell level-index tuples within the power budget, lexicographic."""
    levels = cfg.power_levels
    budget = _power_budget(cfg)
    return [
        t
        for t in itertools.product(range(len(levels)), repeat=cfg.subbands)
        if sum(levels[i] for i in t) <= budget
    ]
