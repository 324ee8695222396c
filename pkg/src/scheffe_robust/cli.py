"""Command-line entry point: ``scheffe-robust {test,estimate,net,experiment,report}``.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
"""

import argparse
import json
import sys

import numpy as np

from .errors import ConfigurationError, ContractError, DegenerateSetError, DomainError, EmptyNetError
from .harness import ExperimentConfig, format_summary, report, run_experiment
from .measures import ContaminatedSource, EmpiricalMeasure, contaminant_from_dict, make_model, sample
from .nets import CoveringNet, build_greedy_packing, record_probe_radius, space_from_spec
from .scheffe import build_scheffe_set, scheffe_test
from .tournament import ScheffeTournament

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CONFIG_ERRORS = (ConfigurationError, ContractError, DomainError, DegenerateSetError, EmptyNetError,
                 json.JSONDecodeError, FileNotFoundError, KeyError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None


def _emit(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_test(args):
    cfg = _load_config(args.config)
    family = args.family or cfg.get("family", "gaussian-location")
    nuisance = cfg.get("nuisance", {})
    theta0 = np.asarray(args.theta0 if args.theta0 is not None else cfg.get("theta0", [0.0]), dtype=float)
    theta1 = np.asarray(args.theta1 if args.theta1 is not None else cfg.get("theta1", [1.0]), dtype=float)
    p0 = make_model(family, theta0, **nuisance)
    p1 = make_model(family, theta1, **nuisance)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if args.data:
        data = EmpiricalMeasure(np.loadtxt(args.data, delimiter=",", ndmin=2))
    else:
        eps = args.eps if args.eps is not None else cfg.get("eps", 0.0)
        n = args.n if args.n is not None else cfg.get("n", 100)
        q = contaminant_from_dict(args.q or cfg.get("Q", {"kind": "point-mass", "location": 0.0}))
        truth = p1 if (args.truth or cfg.get("truth", "h0")) == "h1" else p0
        data = sample(ContaminatedSource(eps, truth, q), n, seed=seed)
    sset = build_scheffe_set(p0, p1, seed=seed)
    d = scheffe_test(sset, data)
    _emit({"phi": d.phi, "stat0": d.stat0, "stat1": d.stat1, "empirical": d.empirical,
           "prob0": sset.prob0, "prob1": sset.prob1, "n": data.n}, args.out)


def _cmd_estimate(args):
    net = CoveringNet.load(args.net)
    data = EmpiricalMeasure(np.loadtxt(args.data, delimiter=",", ndmin=2))
    tour = ScheffeTournament(net)
    if args.estimator == "yatracos":
        j = tour.yatracos(data)
        out = {"winner_index": j}
    else:
        out = tour.run(data).to_dict()
    out["center"] = net.centers[out["winner_index"]].tolist()
    _emit(out, args.out)


def _cmd_net(args):
    cfg = _load_config(args.config)
    family = args.family or cfg.get("family")
    if family is None:
        raise ConfigurationError("net needs --family or a config with a family")
    spec = dict(args.space or cfg.get("space", {}), family=family)
    delta = args.delta if args.delta is not None else cfg.get("delta")
    if delta is None:
        raise ConfigurationError("net needs --delta")
    space = space_from_spec(spec)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    net = build_greedy_packing(space, delta, budget=args.budget or cfg.get("budget", 10_000), seed=seed)
    if args.probes:
        record_probe_radius(net, space, args.probes, seed + 1)
    out = args.out or cfg.get("out")
    if out is None:
        raise ConfigurationError("net needs --out")
    net.save(out)
    print(json.dumps({"m": net.m, "delta": net.delta, "min_separation": net.min_separation(),
                      "probe_radius": net.probe_radius, "out": out}))


def _cmd_experiment(args):
    if args.config is None:
        raise ConfigurationError("experiment needs --config")
    with open(args.config) as fh:
        cfg = json.load(fh)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    config = ExperimentConfig.from_dict(cfg)
    result = run_experiment(config)
    errors = sum(r.get("status") != "ok" for r in result.rows)
    print(json.dumps({"rows": result.n_rows, "errors": errors, "out": result.path, "summary": result.summary_path}))


def _cmd_report(args):
    summary = report(args.csv, out=args.out, eta=args.eta)
    print(format_summary(summary, tuple(args.loss)))


def build_parser():
    parser = _Parser(prog="scheffe-robust", description="Robust testing and tournament estimation in TV.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out", default=None, help="output path")

    p = sub.add_parser("test", parents=[common], help="one robust two-point test")
    p.add_argument("--family", default=None)
    p.add_argument("--theta0", type=_json_arg, default=None)
    p.add_argument("--theta1", type=_json_arg, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--q", type=_json_arg, default=None, help="contaminant as JSON")
    p.add_argument("--truth", choices=("h0", "h1"), default=None)
    p.add_argument("--data", default=None, help="CSV of observations instead of simulating")
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("estimate", parents=[common], help="tournament on a data file")
    p.add_argument("--net", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--estimator", choices=("tournament", "yatracos"), default="tournament")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("net", parents=[common], help="build and save a greedy TV packing")
    p.add_argument("--family", default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--space", type=_json_arg, default=None, help="parameter space as JSON")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--probes", type=int, default=0, help="held-out probes for the covering radius")
    p.set_defaults(func=_cmd_net)

    p = sub.add_parser("experiment", parents=[common], help="full sweep from a config file")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", parents=[common], help="summarise a result CSV")
    p.add_argument("csv")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--loss", action="append", default=None)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "report" and args.loss is None:
        args.loss = ["tv_loss"]
    try:
        args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
