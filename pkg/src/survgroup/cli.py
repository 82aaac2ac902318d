"""Command-line entry point: ``survgroup {discover,prune,validate,synth,bench}``.

Exit codes: 0 success, 1 usage or input validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench, pipeline
from .dataset import save_csv
from .errors import ConfigError, DataValidationError, SurvGroupError
from .learner import LearnerConfig
from .pruner import PruneConfig
from .rsf import ForestConfig
from .synth import SynthConfig, make_survival_data

log = logging.getLogger("survgroup")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """Argument parser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return int(text)


# key, flag, type, default, help; booleans are store_true flags
DISCOVER_OPTIONS = [
    ("input", "--input", str, None, "CSV file with a header row"),
    ("time_col", "--time-col", str, None, "name of the time column"),
    ("event_col", "--event-col", str, None, "name of the event indicator column"),
    ("one_hot", "--one-hot", _bool, False, "one-hot encode non-numeric columns"),
    ("gamma", "--gamma", float, 0.1, "size exponent of the objective (default 0.1)"),
    ("tau", "--tau", float, 0.2, "initial soft-rule temperature (default 0.2)"),
    ("epochs", "--epochs", int, 1000, "training epochs per subgroup (default 1000)"),
    ("lr", "--lr", float, 0.01, "Adam learning rate (default 0.01)"),
    ("subgroups", "--subgroups", int, 1, "number of subgroups to learn (default 1)"),
    ("trees", "--trees", int, 100, "trees in the population forest (default 100)"),
    ("max_depth", "--max-depth", _optional_int, None, "maximum tree depth (default 2p)"),
    ("min_split", "--min-split", int, 40, "minimum subjects to split a node (default 40)"),
    ("min_leaf", "--min-leaf", int, 20, "minimum subjects per leaf (default 20)"),
    ("max_per_tree", "--max-per-tree", int, 2000, "bootstrap size cap per tree (default 2000)"),
    ("seed", "--seed", int, 0, "master random seed (default 0)"),
    ("threads", "--threads", int, None, "worker threads (default: all cores)"),
    ("validate", "--validate", _bool, False, "compute permutation p-values"),
    ("null_runs", "--null-runs", int, 1000, "permutation runs for the null (default 1000)"),
    ("fast_null", "--fast-null", _bool, False, "use 25-tree forests for the null"),
    ("prune", "--prune", _bool, False, "prune redundant conditions"),
    ("prune_threshold", "--prune-threshold", float, 0.95, "Jaccard threshold (default 0.95)"),
    ("out_dir", "--out-dir", str, ".", "output directory (default .)"),
]
_TYPES = {key: typ for key, _, typ, _, _ in DISCOVER_OPTIONS}
_DEFAULTS = {key: default for key, _, _, default, _ in DISCOVER_OPTIONS}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Keys use the long flag names with or without dashes (``time-col`` and
    ``time_col`` are equivalent).
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in _TYPES:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _TYPES[key](value)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def merged_options(args) -> dict:
    """Defaults, then the config file, then flags given on the command line."""
    opts = dict(_DEFAULTS)
    if getattr(args, "config", None):
        opts.update(read_config_file(args.config))
    for key in _TYPES:
        if key in vars(args):
            opts[key] = getattr(args, key)
    if opts["threads"] is None:
        opts["threads"] = os.cpu_count() or 1
    missing = [f"--{k.replace('_', '-')}" for k in ("input", "time_col", "event_col") if not opts[k]]
    if missing:
        raise UsageError(f"the following arguments are required: {', '.join(missing)}")
    if opts["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return opts


def run_config(opts: dict, use_cache: bool = True) -> pipeline.RunConfig:
    forest = ForestConfig(n_trees=opts["trees"], max_depth=opts["max_depth"],
                          max_subjects_per_tree=opts["max_per_tree"], min_split=opts["min_split"],
                          min_leaf=opts["min_leaf"])
    learner = LearnerConfig(gamma=opts["gamma"], initial_temperature=opts["tau"],
                            epochs=opts["epochs"], learning_rate=opts["lr"],
                            n_subgroups=opts["subgroups"])
    prune = PruneConfig(opts["prune_threshold"]) if opts["prune"] else None
    return pipeline.RunConfig(
        input=opts["input"], time_col=opts["time_col"], event_col=opts["event_col"],
        one_hot=opts["one_hot"], seed=opts["seed"], forest=forest, learner=learner, prune=prune,
        validate=opts["validate"], null_runs=opts["null_runs"], fast_null=opts["fast_null"],
        out_dir=opts["out_dir"], threads=opts["threads"], use_cache=use_cache,
    )


def _progress(subgroup, epoch, loss, size):
    if epoch % 100 == 0:
        log.debug("subgroup %d epoch %d loss %.6f size %.3f", subgroup, epoch, loss, size)


def cmd_discover(args) -> int:
    rc = run_config(merged_options(args), use_cache=not args.no_cache)
    payload = pipeline.run_discover(rc, progress=_progress)
    out = Path(rc.out_dir)
    print((out / "report.txt").read_text(encoding="utf-8"), end="")
    print(f"wrote {out / 'subgroups.json'} and {len(payload['subgroups']) + 1} KM tables")
    return 0


def _print_prune(payload):
    for rec in payload["subgroups"]:
        pr = rec["pruned"]
        (s0, s1), (e0, e1) = pr["size_change"], pr["exceptionality_change"]
        print(f"subgroup {rec['index']}")
        print(f"  before: {rec['rule_text']}")
        print(f"  after:  {pr['rule_text']}")
        print(f"  size {s0} -> {s1} ({s1 - s0:+d})   "
              f"exceptionality {e0:.4f} -> {e1:.4f} ({e1 - e0:+.4f})")


def cmd_prune(args) -> int:
    payload = pipeline.load_payload(args.rules)
    new = pipeline.run_prune(payload, args.threshold, args.input, use_cache=not args.no_cache)
    out = args.out or args.rules
    pipeline.write_json(out, new)
    _print_prune(new)
    print(f"wrote {out}")
    return 0


def cmd_validate(args) -> int:
    payload = pipeline.load_payload(args.rules)
    threads = args.threads or os.cpu_count() or 1
    new = pipeline.run_validate(payload, args.null_runs, args.fast_null, threads, args.input,
                                use_cache=not args.no_cache)
    out = args.out or args.rules
    pipeline.write_json(out, new)
    null = new["null_model"]
    print(f"null: mu {null['mu']:.4f}  eta {null['eta']:.4f}  runs {null['runs']}")
    for rec in new["subgroups"]:
        flag = "significant" if rec["significant"] else "not significant"
        print(f"subgroup {rec['index']}: p {rec['p_value']:.4g}  "
              f"adjusted {rec['adjusted_p_value']:.4g}  {flag}")
    print(f"wrote {out}")
    return 0


def _synth_config(args, **override) -> SynthConfig:
    kw = dict(n=args.n, p=args.p, k=args.k, scale_nsg=args.scale_nsg, shape_nsg=args.shape_nsg,
              scale_sg=args.scale_sg, shape_sg=args.shape_sg, ratio_target=args.ratio_target,
              ratio_cens=args.ratio_cens, seed=args.seed)
    kw.update(override)
    return SynthConfig(**kw)


def cmd_synth(args) -> int:
    config = _synth_config(args)
    dataset, truth = make_survival_data(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(dataset, out / "data.csv")
    doc = {
        "config": config.to_dict(),
        "rule": truth.rule.to_dict(dataset.feature_names),
        "rule_text": truth.rule.render(dataset.feature_names),
        "members": [int(i) for i in truth.mask.nonzero()[0]],
        "psi": truth.psi,
    }
    pipeline.write_json(out / "truth.json", doc)
    print(f"planted: {doc['rule_text']} ({len(doc['members'])} of {dataset.n} subjects)")
    print(f"wrote {out / 'data.csv'} and {out / 'truth.json'}")
    return 0


def _points(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_bench(args) -> int:
    base = _synth_config(args, seed=0, require_separation=True)
    forest = ForestConfig(n_trees=args.trees)
    learner = LearnerConfig(gamma=args.gamma, initial_temperature=args.tau, epochs=args.epochs,
                            n_subgroups=args.subgroups)
    threads = args.threads or os.cpu_count() or 1
    f1_rows, time_rows = bench.run_sweep(args.sweep, args.points, args.repeats, base, forest,
                                         learner, seed=args.seed, n_jobs=threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_tsv(out / f"{args.sweep}_f1.tsv", f1_rows)
    bench.write_tsv(out / f"{args.sweep}_runtime.tsv", time_rows)
    print("x\tF1\tSE\tseconds")
    for (x, m, lo, _), (_, t, _, _) in zip(f1_rows, time_rows):
        print(f"{x:g}\t{m:.4f}\t{m - lo:.4f}\t{t:.2f}")
    print(f"wrote {out / (args.sweep + '_f1.tsv')} and {out / (args.sweep + '_runtime.tsv')}")
    return 0


def _add_synth_flags(p, n=10000):
    p.add_argument("--n", type=int, default=n, help=f"subjects (default {n})")
    p.add_argument("--p", type=int, default=10, help="features (default 10)")
    p.add_argument("--k", type=int, default=2, help="conditions in the planted rule (default 2)")
    p.add_argument("--scale-nsg", type=float, default=5.0, help="population Weibull scale")
    p.add_argument("--shape-nsg", type=float, default=1.5, help="population Weibull shape")
    p.add_argument("--scale-sg", type=float, default=1.0, help="subgroup Weibull scale")
    p.add_argument("--shape-sg", type=float, default=1.5, help="subgroup Weibull shape")
    p.add_argument("--ratio-target", type=float, default=0.2, help="subgroup fraction")
    p.add_argument("--ratio-cens", type=float, default=0.1, help="censored fraction")


def build_parser() -> Parser:
    parser = Parser(prog="survgroup", description="Discover subgroups with exceptional survival.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to standard error (-vv for per-epoch detail)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS,
                        help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("discover", parents=[common], help="learn subgroup rules from a CSV file")
    p.add_argument("--config", help="flat key = value file; command-line flags take precedence")
    for key, flag, typ, _, help_ in DISCOVER_OPTIONS:
        if typ is _bool:
            p.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=help_)
        else:
            p.add_argument(flag, dest=key, type=typ, default=argparse.SUPPRESS, help=help_)
    p.add_argument("--no-cache", action="store_true", help="neither read nor write the model cache")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("prune", parents=[common], help="remove redundant conditions from discovered rules")
    p.add_argument("--rules", required=True, help="subgroups.json written by discover")
    p.add_argument("--threshold", type=float, default=0.95, help="Jaccard threshold (default 0.95)")
    p.add_argument("--input", help="override the data path recorded in the rules file")
    p.add_argument("--out", help="output JSON (default: update the rules file)")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("validate", parents=[common], help="permutation p-values for discovered rules")
    p.add_argument("--rules", required=True, help="subgroups.json written by discover")
    p.add_argument("--null-runs", type=int, default=1000, help="permutation runs (default 1000)")
    p.add_argument("--fast-null", action="store_true", help="use 25-tree forests for the null")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--input", help="override the data path recorded in the rules file")
    p.add_argument("--out", help="output JSON (default: update the rules file)")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", parents=[common], help="generate a dataset with a planted subgroup")
    _add_synth_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", parents=[common], help="planted-subgroup recovery sweeps")
    p.add_argument("--sweep", required=True, choices=bench.SWEEPS)
    p.add_argument("--points", required=True, type=_points, help="comma-separated sweep values")
    p.add_argument("--repeats", type=int, default=10, help="seeds per point (default 10)")
    _add_synth_flags(p, n=5000)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--gamma", type=float, default=bench.BENCH_GAMMA)
    p.add_argument("--tau", type=float, default=bench.BENCH_TEMPERATURE,
                   help="initial temperature (default %(default)s)")
    p.add_argument("--subgroups", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="first seed; point r uses seed + r")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"survgroup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, ConfigError) as exc:
        print(f"survgroup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SurvGroupError as exc:
        print(f"survgroup: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"survgroup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RuntimeError) as exc:
        print(f"survgroup: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
