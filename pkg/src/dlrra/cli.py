"""``dlrra`` command line: generate, oracle-compare, train, sweep.

Exit codes: 0 success, 2 usage, 3 infeasible/refused, 4 data-format error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import dnn, harness
from .dataset import DataFormatError
from .netmodel import ScenarioConfig
from .solvers import GaConfig, SearchSpaceTooLarge

EXIT_USAGE = 2
EXIT_REFUSED = 3
EXIT_DATA = 4


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dlrra", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="solve random drops and write a dataset CSV")
    g.add_argument("config")
    g.add_argument("--samples", type=_positive, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--method", choices=("ga", "exhaustive"), default="ga")
    g.add_argument("--out", required=True)
    g.add_argument("--ga-config")
    g.add_argument("--workers", type=_positive, default=1)

    o = sub.add_parser("oracle-compare", help="GA against exhaustive search")
    o.add_argument("config")
    o.add_argument("--samples", type=_positive, required=True)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True)
    o.add_argument("--ga-config")
    o.add_argument("--timings", action="store_true", help="add wall times to the JSON summary")
    o.add_argument("--workers", type=_positive, default=1)

    for name, help_ in (("train", "pretrain, fine-tune and evaluate one model"),
                        ("sweep", "one model per hidden-layer count or sample count")):
        t = sub.add_parser(name, help=help_)
        t.add_argument("--data", required=True)
        t.add_argument("--test-data")
        t.add_argument("--train-config")
        t.add_argument("--train-fraction", type=float, default=0.8)
        t.add_argument("--split-seed", type=int, default=0)
        t.add_argument("--hidden", type=_int_list)
        t.add_argument("--bottleneck", type=_positive, default=64)
        t.add_argument("--out", required=True)
        if name == "sweep":
            t.add_argument("--axis", choices=("layers", "samples"), required=True)
            t.add_argument("--values", type=_int_list, required=True)
            t.add_argument("--workers", type=_positive, default=1)
    return p


def _ga(path):
    return harness.ga_config_from_file(path) if path else GaConfig()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except SearchSpaceTooLarge as exc:
        print(f"dlrra: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (DataFormatError, dnn.SchemaMismatch) as exc:
        print(f"dlrra: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"dlrra: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(args) -> int:
    if args.command == "generate":
        cfg = ScenarioConfig.from_file(args.config)
        r = harness.run_generate(cfg, _ga(args.ga_config), args.samples, args.seed, args.method, args.out,
                                 workers=args.workers)
        print(f"samples={r.summary['samples']} mean_utility={r.summary['mean_utility']:.6g}")
        return 0

    if args.command == "oracle-compare":
        cfg = ScenarioConfig.from_file(args.config)
        r = harness.run_oracle_compare(cfg, _ga(args.ga_config), args.samples, args.seed, args.out,
                                       timings=args.timings, workers=args.workers)
        s = r.summary
        print(f"ga_optimality_rate={s['ga_optimality_rate']:.4f} mean_ga_evals={s['mean_ga_evals']:.1f} "
              f"exhaustive_evals={s['exhaustive_evals']}")
        return 0

    tc = dnn.TrainConfig.from_file(args.train_config) if args.train_config else dnn.TrainConfig()
    train, test = harness.load_train_test(args.data, args.test_data, train_fraction=args.train_fraction,
                                          split_seed=args.split_seed)
    echo = {"data": args.data, "test_data": args.test_data, "train_fraction": args.train_fraction,
            "split_seed": args.split_seed}
    if args.command == "train":
        hidden = args.hidden or dnn.default_hidden_dims(train.inputs.shape[1], 4, args.bottleneck)
        r = harness.run_train(train, test, hidden, tc, args.out, echo=echo)
        for name in ("train", "test"):
            m = r.summary[name]
            print(f"{name}: field_accuracy={m['field_accuracy']:.4f} exact_match={m['exact_match']:.4f} "
                  f"bit_accuracy={m['bit_accuracy']:.4f}")
        return 0

    r = harness.run_sweep(args.axis, args.values, train, test, tc, args.out, hidden=args.hidden,
                          bottleneck=args.bottleneck, echo=echo, workers=args.workers)
    for run in r.runs:
        print(f"{args.axis}={run['value']} train={run['train']['field_accuracy']:.4f} "
              f"test={run['test']['field_accuracy']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
