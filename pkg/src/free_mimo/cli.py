"""Command line entry point: ``free-mimo estimate|experiment|oracle``.

Exit codes: 0 on success, 1 for unreadable input or invalid configs, 2 when
an estimator does not apply to the data (or an oracle order is too large).
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

from . import estimators as est
from . import oracle
from .fileio import MatrixFormatError, read_matrix, sweep_csv
from .simulation import ConfigError, ExperimentConfig, run_experiment, verify_lemma1

EXIT_DATA = 1
EXIT_APPLICABILITY = 2


def _fail(code, msg):
    print(f"free-mimo: {msg}", file=sys.stderr)
    return code


def _estimator_list(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [s for s in names if s not in est.ESTIMATORS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown estimators: {', '.join(unknown)}")
    return names


def cmd_estimate(args):
    try:
        matrices = [read_matrix(p) for p in args.observations]
        batch = est.ObservationBatch.from_list(matrices, args.sigma2, args.model)
    except (OSError, MatrixFormatError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    try:
        reports = est.estimate(batch, args.estimators, r=args.rank,
                               sigma2_eval=args.capacity_sigma2, force=args.force)
    except est.StackingError as exc:
        return _fail(EXIT_APPLICABILITY, f"{exc} (use --force to run anyway)")
    except ValueError as exc:
        return _fail(EXIT_APPLICABILITY, str(exc))
    json.dump([r.to_dict() for r in reports], sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def load_config(name):
    """Load a config from a path or a bundled name such as ``fig2``."""
    path = Path(name)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        stem = name if name.endswith(".json") else f"{name}.json"
        bundled = resources.files("free_mimo") / "configs" / stem
        if not bundled.is_file():
            raise ConfigError(f"no config file or bundled config named {name!r}")
        text = bundled.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


def bundled_configs():
    folder = resources.files("free_mimo") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def cmd_experiment(args):
    try:
        cfg = load_config(args.config)
        if args.trials is not None:
            cfg.trials = args.trials
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except ConfigError as exc:
        return _fail(EXIT_DATA, str(exc))
    text = sweep_csv(run_experiment(cfg))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _fmt_tuple(t):
    return "(" + ",".join(map(str, t)) + ")"


def cmd_oracle(args):
    out = sys.stdout
    if args.table:
        try:
            p = int(args.table.lower().lstrip("s"))
        except ValueError:
            return _fail(EXIT_DATA, f"bad table name {args.table!r}")
        if p > oracle.MAX_P:
            return _fail(EXIT_APPLICABILITY, f"p must be <= {oracle.MAX_P}")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["pi", "pi_hat", "classes", "k", "l"])
        for pp in oracle.class_table(p):
            classes = "{" + ",".join("{" + ",".join(map(str, c)) + "}"
                                     for c in pp.classes) + "}"
            writer.writerow([_fmt_tuple(pp.pi), _fmt_tuple(pp.pi_hat), classes,
                             pp.k_classes, pp.l_classes])
    elif args.moments:
        n, N, p = args.moments
        if p > oracle.MAX_P:
            return _fail(EXIT_APPLICABILITY, f"p must be <= {oracle.MAX_P}")
        try:
            out.write(f"{oracle.expected_wishart_moment(n, N, p)}\n")
        except ValueError as exc:
            return _fail(EXIT_DATA, str(exc))
    else:
        n, m, sigma2, trials, seed = args.lemma1
        try:
            checks = verify_lemma1(int(n), int(m), float(sigma2), int(trials),
                                   int(seed), rank=args.rank)
        except ValueError as exc:
            return _fail(EXIT_DATA, str(exc))
        json.dump([asdict(c) for c in checks], out, indent=2)
        out.write("\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="free-mimo",
        description="MIMO capacity estimation by free deconvolution")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate capacity from observation files")
    p.add_argument("observations", nargs="+", help="matrix CSV files, one per observation")
    p.add_argument("--sigma2", type=float, required=True, help="known noise variance")
    p.add_argument("--rank", type=int, help="assumed channel rank (needed for Cf/CG)")
    p.add_argument("--model", default="plain", choices=["plain", "phase", "phase_impaired"])
    p.add_argument("--estimators", type=_estimator_list, default=list(est.ESTIMATORS),
                   help="comma separated subset of Cf,CG,C1,C2,C3")
    p.add_argument("--capacity-sigma2", type=float,
                   help="noise variance at which capacity is evaluated")
    p.add_argument("--force", action="store_true",
                   help="run stacked Cf even where stacking is invalid")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="run a simulation sweep")
    p.add_argument("config", help=f"JSON config path or bundled name "
                                  f"({', '.join(bundled_configs())})")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--seed", type=int, help="override the seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", help="exact combinatorial checks")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--table", metavar="sP", help="permutation class table, e.g. s3")
    g.add_argument("--moments", nargs=3, type=int, metavar=("n", "N", "p"),
                   help="exact E[tr_n((XX^H/N)^p)]")
    g.add_argument("--lemma1", nargs=5, metavar=("n", "m", "sigma2", "trials", "seed"),
                   help="Monte Carlo check of the mixed-moment expectations")
    p.add_argument("--rank", type=int, default=3, help="rank of R for --lemma1")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
