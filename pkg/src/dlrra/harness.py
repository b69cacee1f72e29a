"""Experiment runners behind the command-line interface.

Each runner is a pure function of its arguments and seeds, writes its
artifacts, and returns an :class:`ExperimentReport`. Wall-clock times are
only written when explicitly requested so that reruns stay byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dnn
from .dataset import Dataset, generate, read_csv, sample_seed, solve_one, split, write_csv
from .netmodel import ScenarioConfig
from .solvers import GaConfig, exhaustive_search

log = logging.getLogger(__name__)

MATCH_RTOL = 1e-9
METRIC_KEYS = ("field_accuracy", "exact_match", "bit_accuracy")


@dataclass
class ExperimentReport:
    command: str
    config: dict
    runs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    axes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    def write_json(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".json")


def ga_config_from_file(path) -> GaConfig:
    kinds = {f.name: f.type for f in dataclasses.fields(GaConfig)}
    kwargs = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ValueError(f"unknown GA config key {key!r}")
            kwargs[key] = int(value) if kinds[key] == "int" else float(value)
    return GaConfig(**kwargs)


def run_generate(cfg: ScenarioConfig, ga: GaConfig, samples: int, seed: int, method: str, out,
                 *, workers: int = 1) -> ExperimentReport:
    ds = generate(cfg, ga, samples, seed, method, workers=workers)
    write_csv(ds, out)
    utilities = [s.utility for s in ds.samples]
    return ExperimentReport(
        "generate",
        {"scenario": dataclasses.asdict(cfg), "ga": dataclasses.asdict(ga), "samples": samples,
         "seed": seed, "method": method, "fingerprint": ds.scenario_fingerprint},
        summary={"samples": len(ds), "mean_utility": float(np.mean(utilities))},
    )


def _pool_map(fn, jobs, workers: int) -> list:
    """``[fn(j) for j in jobs]``, in a process pool when ``workers > 1``."""
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _compare_one(job):
    cfg, ga, i, s = job
    real, g = solve_one(cfg, ga, s, "ga")
    ex = exhaustive_search(real, cfg)
    best = ex.allocation.utility
    optimal = abs(g.allocation.utility - best) <= MATCH_RTOL * abs(best)
    run = {"index": i, "seed": s, "exhaustive_utility": best, "ga_utility": g.allocation.utility,
           "ga_optimal": bool(optimal), "exhaustive_evals": ex.fitness_evals, "ga_evals": g.fitness_evals}
    return run, g.wall_time, ex.wall_time


def run_oracle_compare(cfg: ScenarioConfig, ga: GaConfig, samples: int, seed: int, out,
                       *, timings: bool = False, workers: int = 1) -> ExperimentReport:
    """GA against the exhaustive optimum on identical realizations."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    results = _pool_map(_compare_one, [(cfg, ga, i, sample_seed(seed, i)) for i in range(samples)], workers)
    runs = [r for r, _, _ in results]
    ga_times = [t for _, t, _ in results]
    ex_times = [t for _, _, t in results]
    rows = [[r["index"], r["seed"], repr(r["exhaustive_utility"]), repr(r["ga_utility"]), int(r["ga_optimal"]),
             r["exhaustive_evals"], r["ga_evals"]] for r in runs]
    _write_rows(out, ["index", "seed", "exhaustive_utility", "ga_utility", "ga_optimal",
                      "exhaustive_evals", "ga_evals"], rows)
    summary = {
        "samples": samples,
        "ga_optimality_rate": float(np.mean([r["ga_optimal"] for r in runs])),
        "mean_relative_gap": float(np.mean([1 - r["ga_utility"] / r["exhaustive_utility"] for r in runs])),
        "mean_ga_evals": float(np.mean([r["ga_evals"] for r in runs])),
        "max_ga_evals": int(max(r["ga_evals"] for r in runs)),
        "exhaustive_evals": int(runs[0]["exhaustive_evals"]),
        "ga_never_exceeds_exhaustive": all(r["ga_utility"] <= r["exhaustive_utility"] * (1 + MATCH_RTOL) for r in runs),
    }
    if timings:
        for name, t in (("ga", ga_times), ("exhaustive", ex_times)):
            summary[f"{name}_time_mean"] = float(np.mean(t))
            summary[f"{name}_time_max"] = float(np.max(t))
            summary[f"{name}_time_min"] = float(np.min(t))
    report = ExperimentReport(
        "oracle-compare",
        {"scenario": dataclasses.asdict(cfg), "ga": dataclasses.asdict(ga), "samples": samples, "seed": seed},
        runs=runs, summary=summary)
    report.write_json(summary_path(out))
    return report


def check_fingerprints(*datasets: Dataset) -> None:
    prints = {d.scenario_fingerprint for d in datasets}
    if len(prints) > 1:
        raise dnn.SchemaMismatch(f"datasets come from different scenarios: {sorted(prints)}")


def train_model(train: Dataset, hidden, tc: dnn.TrainConfig) -> dnn.NetParams:
    return dnn.build_network(train.inputs, train.targets, list(hidden), tc,
                             fingerprint=train.scenario_fingerprint)


def _metrics_row(net, train, test):
    return {"train": dnn.evaluate(net, train), "test": dnn.evaluate(net, test),
            "test_chance": dnn.evaluate_outputs(dnn.chance_outputs(test), test.targets, test.bits_per_field)}


def load_train_test(data, test_data=None, *, train_fraction: float = 0.8, split_seed: int = 0):
    ds = read_csv(data)
    if test_data is None:
        return split(ds, train_fraction, split_seed)
    test = read_csv(test_data)
    check_fingerprints(ds, test)
    return ds, test


def run_train(train: Dataset, test: Dataset, hidden, tc: dnn.TrainConfig, out, *, echo=None) -> ExperimentReport:
    check_fingerprints(train, test)
    net = train_model(train, hidden, tc)
    dnn.save_checkpoint(net, out)
    metrics = _metrics_row(net, train, test)
    rows = [[name] + [repr(metrics[name][k]) for k in METRIC_KEYS] for name in ("train", "test", "test_chance")]
    metrics_csv = Path(out).with_suffix(".metrics.csv")
    _write_rows(metrics_csv, ["split", *METRIC_KEYS], rows)
    report = ExperimentReport(
        "train",
        {"hidden": list(hidden), "train_config": dataclasses.asdict(tc), "train_samples": len(train),
         "test_samples": len(test), "fingerprint": train.scenario_fingerprint, **(echo or {})},
        summary=metrics)
    report.write_json(Path(out).with_suffix(".metrics.json"))
    return report


def _sweep_point(job):
    value, dims, size, train, test, tc = job
    subset = train if size == len(train) else train.subset(range(size))
    log.info("sweep point %s hidden=%s samples=%s", value, dims, size)
    net = train_model(subset, dims, tc)
    return {"value": value, "hidden": dims, "train_samples": size, **_metrics_row(net, subset, test)}


def run_sweep(axis: str, values, train: Dataset, test: Dataset, tc: dnn.TrainConfig, out, *,
              hidden=None, bottleneck: int = 64, echo=None, workers: int = 1) -> ExperimentReport:
    """One model per swept value, everything else fixed.

    ``axis="layers"``: value = number of hidden layers, widths from
    :func:`dnn.default_hidden_dims`. ``axis="samples"``: value = number of
    training samples taken from the front of ``train``.
    """
    if axis not in ("layers", "samples"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    check_fingerprints(train, test)
    input_dim = train.inputs.shape[1]
    jobs = []
    for v in values:
        if axis == "layers":
            dims, size = dnn.default_hidden_dims(input_dim, int(v), bottleneck), len(train)
        else:
            if int(v) > len(train):
                raise ValueError(f"sweep value {v} exceeds {len(train)} training samples")
            dims = list(hidden) if hidden else dnn.default_hidden_dims(input_dim, 4, bottleneck)
            size = int(v)
        jobs.append((int(v), dims, size, train, test, tc))
    runs = _pool_map(_sweep_point, jobs, workers)
    rows = [[r["value"], repr(r["train"]["field_accuracy"]), repr(r["test"]["field_accuracy"])] for r in runs]
    _write_rows(out, ["value", "train_accuracy", "test_accuracy"], rows)
    report = ExperimentReport(
        "sweep",
        {"train_config": dataclasses.asdict(tc), "bottleneck": bottleneck, "hidden": hidden,
         "train_samples": len(train), "test_samples": len(test), "fingerprint": train.scenario_fingerprint,
         **(echo or {})},
        runs=runs, axes={"axis": axis, "values": [int(v) for v in values]})
    report.write_json(summary_path(out))
    return report
