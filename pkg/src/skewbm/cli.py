"""Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 I/O error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import habitat, limit_dist, stats_harness as sh
from .likelihood import mle
from .num_core import DomainError, RngStream
from .sbm_sim import GridPath, SbmParams, simulate_path

EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _int_list(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: all cores)")
    common.add_argument("--output-dir", type=Path, default=None,
                        help="write files here instead of printing to stdout")
    common.add_argument("--config", type=Path, default=None,
                        help="JSON file with default values; flags override it")

    p = _Parser(prog="skewbm", description="Skew Brownian motion simulation and inference")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate one path (CSV)")
    _path_args(s)
    s.add_argument("--stream", type=int, default=0)

    s = sub.add_parser("estimate", parents=[common], help="estimate theta from a path CSV")
    s.add_argument("--input", type=Path, required=True)
    s.add_argument("--p", type=int, default=1, help="order of the expansion")

    s = sub.add_parser("mu-table", parents=[common], help="limit constants mu_k")
    s.add_argument("--K", type=int, default=6)

    s = sub.add_parser("limit-sample", parents=[common], help="samples of the limit law")
    s.add_argument("--count", type=int, default=10_000)

    s = sub.add_parser("study", parents=[common], help="Monte Carlo studies")
    s.add_argument("name", choices=["table1", "table2", "rate", "var-scaling", "power"])
    s.add_argument("--n", dest="n_list", type=_int_list, default=None)
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--pool", type=int, default=10_000, help="size of the Upsilon pool")
    s.add_argument("--theta", type=float, default=0.5)
    s.add_argument("--bins", type=int, default=80)

    s = sub.add_parser("test", parents=[common], help="test theta = 0 on a path CSV")
    s.add_argument("--input", type=Path, required=True)
    s.add_argument("--level", type=float, default=0.05)
    s.add_argument("--mode", choices=["mc", "asymptotic"], default="mc")
    s.add_argument("--calib-reps", type=int, default=5000)

    s = sub.add_parser("rejection", parents=[common], help="rejection rates of the test")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--level", type=float, default=0.05)
    s.add_argument("--thetas", type=_float_list, default=[0.0, 0.5])
    s.add_argument("--calib-reps", type=int, default=20_000)

    s = sub.add_parser("habitat-simulate", parents=[common], help="simulate a habitat path")
    s.add_argument("--a-plus", type=float, required=True)
    s.add_argument("--a-minus", type=float, required=True)
    s.add_argument("--generator", choices=["L", "A"], default="L")
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--stream", type=int, default=0)

    s = sub.add_parser("habitat-decide", parents=[common], help="decide L or A for a path CSV")
    s.add_argument("--input", type=Path, required=True)
    return p


def _path_args(s):
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--n", type=int, default=1000)


def _resolved(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("output_dir", "config", "threads"):
            continue  # do not affect results
        if isinstance(v, Path):
            v = str(v)
        out[k] = v
    return out


def _emit(args, files: dict):
    """Write ``{filename: text}``; the first file goes to stdout without --output-dir."""
    if args.output_dir is None:
        sys.stdout.write(next(iter(files.values())))
        return
    args.output_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(args.output_dir / name, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)


def _header(args) -> str:
    return "# " + json.dumps(_resolved(args), sort_keys=True) + "\n"


def _read_path(path: Path) -> GridPath:
    return GridPath.from_csv(path.read_text(encoding="utf-8"))


def _json(args, payload: dict) -> str:
    return json.dumps({"config": _resolved(args), **payload}, indent=2) + "\n"


def _cmd_simulate(args):
    params = SbmParams(args.theta, args.x0, args.T, args.n)
    path = simulate_path(params, RngStream(args.seed, args.stream))
    _emit(args, {"path.csv": path.to_csv({"config": _resolved(args)})})


def _cmd_estimate(args):
    report = mle(_read_path(args.input), p=args.p)
    _emit(args, {"estimate.json": _json(args, report.to_dict())})


def _cmd_mu_table(args):
    _emit(args, {"mu_table.csv": _header(args) + limit_dist.mu_table(args.K).to_csv()})


def _cmd_limit_sample(args):
    values, h = limit_dist.draw_upsilon_many(RngStream(args.seed, 0), args.count)
    lines = [_header(args), "i,upsilon,h\n"]
    lines += [f"{i},{v:.17g},{x:.17g}\n" for i, (v, x) in enumerate(zip(values, h))]
    _emit(args, {"upsilon.csv": "".join(lines)})


_STUDY_DEFAULTS = {
    "table1": ([100, 1000, 10000], 100),
    "table2": ([100, 1000], 10_000),
    "rate": ([100, 300, 1000, 3000, 10000, 30000, 100000], 500),
    "var-scaling": ([50, 100, 300, 1000, 3000, 10000, 30000, 100000], 10_000),
    "power": ([1000], 10_000),
}


def _cmd_study(args):
    n_default, reps_default = _STUDY_DEFAULTS[args.name]
    args.n_list = args.n_list or n_default
    args.reps = args.reps or reps_default
    w = args.threads
    if args.name == "table1":
        res = sh.table1_study(args.n_list, args.reps, args.seed, workers=w)
    elif args.name == "table2":
        res = sh.table2_study(args.n_list, args.reps, args.pool, args.seed, workers=w)
    elif args.name == "rate":
        res = sh.rate_regression(args.n_list, args.reps, args.seed, workers=w)
    elif args.name == "var-scaling":
        res = sh.variance_scaling(args.n_list, args.reps, args.seed, workers=w)
    else:
        res = sh.power_histogram(args.theta, args.n_list[0], args.reps, args.bins, args.seed,
                                 workers=w)
    res.config = _resolved(args)
    files = {f"{res.name}.csv": res.to_csv(), f"{res.name}.json": res.to_json() + "\n"}
    if res.name == "power":
        null_rows = "".join(f"{r['center']:.17g},{r['density_null']:.17g}\n" for r in res.rows)
        files["power_null.csv"] = _header(args) + "center,density\n" + null_rows
    if res.records:
        files[f"{res.name}_records.csv"] = res.records_csv()
    _emit(args, files)


def _cmd_test(args):
    path = _read_path(args.input)
    cal = sh.calibrate(path.n, args.calib_reps, args.seed, workers=args.threads)
    out = sh.hypothesis_test(path, args.level, cal, mode=args.mode)
    payload = {"reject": out.reject, "statistic": out.statistic, "threshold": out.threshold,
               "boundary": out.boundary, "n": path.n}
    _emit(args, {"test.json": _json(args, payload)})


def _cmd_rejection(args):
    res = sh.rejection_study(args.n, args.trials, args.level, args.seed, args.thetas,
                             args.calib_reps, workers=args.threads)
    res.config = _resolved(args)
    _emit(args, {"test.csv": res.to_csv(), "test.json": res.to_json() + "\n",
                 "test_records.csv": res.records_csv()})


def _cmd_habitat_simulate(args):
    model = habitat.HabitatModel(args.a_plus, args.a_minus, args.generator)
    path = habitat.simulate_habitat(model, args.x0, args.T, args.n,
                                    RngStream(args.seed, args.stream))
    _emit(args, {"habitat_path.csv": path.to_csv({"config": _resolved(args)})})


def _cmd_habitat_decide(args):
    d = habitat.decide_generator(_read_path(args.input))
    payload = json.loads(d.to_json())
    _emit(args, {"habitat_decision.json": _json(args, payload)})


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "mu-table": _cmd_mu_table,
    "limit-sample": _cmd_limit_sample,
    "study": _cmd_study,
    "test": _cmd_test,
    "rejection": _cmd_rejection,
    "habitat-simulate": _cmd_habitat_simulate,
    "habitat-decide": _cmd_habitat_decide,
}


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        # re-parse with the file as defaults so explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def run(argv=None) -> int:
    try:
        args = _parse(argv if argv is not None else sys.argv[1:])
    except UsageError:
        return EXIT_USAGE
    except OSError as exc:
        print(f"skewbm: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"skewbm: bad config file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _COMMANDS[args.command](args)
    except OSError as exc:
        print(f"skewbm: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ValueError) as exc:
        print(f"skewbm: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


def main():
    sys.exit(run())
