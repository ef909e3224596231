"""Command-line entry points.

Every command writes a JSON report (``<command>.json``) holding a run
manifest and the result, plus flat CSV files for tables and plots, into the
``--out`` directory.  Wall-clock timings go to a separate
``<command>.timing.json`` so that the report itself is reproducible byte for
byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import datetime as dt
import json
import logging
import sys
import time
from dataclasses import asdict, fields, replace

import numpy as np

from . import __version__
from .data import descriptive_stats, dumps_csv, dumps_json, file_digest, load_dataset, write_outputs
from .em import EhmmParams, FitConfig, e_step, fit
from .errors import DataError, EstimationError
from .evaluation import best_by, decode, information_criteria, parametric_bootstrap, select_states
from .simulation import DESIGN_TAUS, two_state_spec, run_mc_study, simulate_dgp

log = logging.getLogger("exphmm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fit_options(p, states=True):
    p.add_argument("--tau", type=float, action="append", help="expectile level (repeatable where a grid is allowed)")
    if states:
        p.add_argument("--states", type=int, help="number of hidden states K")
    p.add_argument("--starts", type=int, help="random starts per fit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, help="EM log-likelihood tolerance")
    p.add_argument("--config", help="JSON file with FitConfig fields")
    p.add_argument("--out", required=True, help="output directory")


def _data_options(p, required=True):
    p.add_argument("--data", required=required,
                   help="wide CSV: date,<series1>,<series2>,... with ISO dates (wide format only)")
    p.add_argument("--response", help="response column")
    p.add_argument("--covariates", nargs="+", help="covariate columns")
    p.add_argument("--input-kind", choices=("prices", "returns"), default=None,
                   help="columns hold closing prices (default; converted to 100*log returns) or returns")


def build_parser():
    parser = _Parser(prog="exphmm", description="Expectile hidden Markov regression")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="estimate an EHMM by multi-start EM")
    _data_options(p)
    _fit_options(p)

    p = sub.add_parser("select", help="information criteria over a grid of K and tau")
    _data_options(p)
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=int, default=4)
    _fit_options(p, states=False)

    p = sub.add_parser("bootstrap", help="parametric bootstrap standard errors for a saved fit")
    p.add_argument("--fit", required=True, help="fit.json written by the fit command")
    _data_options(p, required=False)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--align", choices=("distance", "sigma"), default="distance",
                   help="match replicate states to the estimate by parameter distance or by ascending scale")
    _fit_options(p, states=False)

    p = sub.add_parser("decode", help="per-date decoded states and smoothed probabilities")
    p.add_argument("--fit", required=True, help="fit.json written by the fit command")
    _data_options(p, required=False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="simulate the two-state design to CSV")
    p.add_argument("--scenario", choices=("gaussian", "skewt"), default="gaussian")
    p.add_argument("--t", type=int, default=500, dest="T")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mc-study", help="Monte Carlo bias/std tables and ARI distribution")
    p.add_argument("--scenario", choices=("gaussian", "skewt"), default="gaussian")
    p.add_argument("--t", type=int, default=500, dest="T")
    p.add_argument("--replications", type=int, default=100)
    _fit_options(p, states=False)
    return parser


def fit_config_from_args(args, **overrides):
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            values.update(json.load(fh))
        known = {f.name for f in fields(FitConfig)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config field(s): {sorted(unknown)}")
    if getattr(args, "states", None) is not None:
        values["K"] = args.states
    if getattr(args, "tau", None):
        values["tau"] = args.tau[0]
    if getattr(args, "starts", None) is not None:
        values["n_starts"] = args.starts
    if getattr(args, "tolerance", None) is not None:
        values["em_tolerance"] = args.tolerance
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    values.update(overrides)
    return FitConfig(**values)


def manifest(args, config=None, inputs=()):
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "verbose")}
    return {"command": args.command, "options": opts, "seed": getattr(args, "seed", None),
            "config": asdict(config) if config is not None else None,
            "inputs": {path: file_digest(path) for path in inputs if path},
            "version": __version__}


def _data_spec(args, saved=None):
    saved = saved or {}
    spec = {"data": args.data or saved.get("data"),
            "response": args.response or saved.get("response"),
            "covariates": args.covariates or saved.get("covariates"),
            "input_kind": args.input_kind or saved.get("input_kind") or "prices"}
    for key in ("data", "response", "covariates"):
        if not spec[key]:
            raise UsageError(f"--{key} is required")
    return spec


def _load(spec):
    data, dropped = load_dataset(spec["data"], spec["response"], spec["covariates"], spec["input_kind"])
    log.info("loaded T=%d observations, dropped dates per series: %s", data.T, dropped)
    return data, dropped


def _fit_summary(res, data):
    crit = information_criteria(res, data.T)
    return {"params": res.params.to_dict(), "loglik": res.loglik, "n_iterations": res.n_iterations,
            "converged": res.converged, "start_index": res.start_index,
            "loglik_trace": res.loglik_trace, "criteria": crit.to_dict(),
            "diagnostics": {k: v for k, v in res.diagnostics.items()}}


def _load_fit(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        params = EhmmParams.from_dict(doc["result"]["params"])
        saved = doc["result"]["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a fit report ({exc})") from None
    return doc, params, saved


def cmd_fit(args):
    spec = _data_spec(args)
    config = fit_config_from_args(args)
    data, dropped = _load(spec)
    res = fit(data, config)
    summary = {"T": data.T, "P": data.P, "names": data.names, "dropped": dropped,
               "first_date": data.dates[0], "last_date": data.dates[-1],
               "descriptive": {n: descriptive_stats(data.X[:, j]) for j, n in enumerate(data.names) if j > 0},
               **spec}
    summary["descriptive"][spec["response"]] = descriptive_stats(data.y)
    result = {"data": summary, **_fit_summary(res, data)}
    return {"fit.json": {"manifest": manifest(args, config, [spec["data"], args.config]), "result": result}}


def cmd_select(args):
    spec = _data_spec(args)
    config = fit_config_from_args(args)
    taus = args.tau or [config.tau]
    if not 1 <= args.kmin <= args.kmax:
        raise UsageError("need 1 <= --kmin <= --kmax")
    data, _ = _load(spec)
    rows, _ = select_states(data, config, range(args.kmin, args.kmax + 1), taus)
    best = {str(tau): {c: best_by(rows, c, tau) for c in ("aic", "bic", "icl")} for tau in taus}
    header = ["tau", "K", "loglik", "n_params", "aic", "bic", "icl", "entropy"]
    table = dumps_csv(header, [[r.tau, r.K, r.loglik, r.n_params, r.aic, r.bic, r.icl, r.entropy] for r in rows])
    report = {"manifest": manifest(args, config, [spec["data"], args.config]),
              "result": {"rows": [r.to_dict() for r in rows], "selected": best}}
    return {"select.json": report, "criteria.csv": table}


def cmd_bootstrap(args):
    doc, params, saved = _load_fit(args.fit)
    spec = _data_spec(args, saved)
    data, _ = _load(spec)
    if data.P != params.P:
        raise DataError(f"fit has P={params.P} coefficients but data give P={data.P}")
    cfg_saved = doc.get("manifest", {}).get("config") or {}
    config = fit_config_from_args(args, **{k: v for k, v in cfg_saved.items() if k in ("irls_tolerance", "max_em_iterations", "max_irls_iterations", "scale_floor")})
    config = replace(config, K=params.K, tau=params.tau)
    if args.replicates < 2:
        raise UsageError("--replicates must be at least 2")
    res = fit(data, replace(config, n_starts=1), init_params=[params])
    rep = parametric_bootstrap(res, data, args.replicates, args.seed, config, align=args.align)
    names = list(data.names)
    rows = []
    sig = rep.significant()
    for k in range(params.K):
        for j, name in enumerate(names):
            rows.append([k + 1, params.tau, name, rep.estimate.beta[k, j], rep.se_beta[k, j], int(sig[k, j])])
        rows.append([k + 1, params.tau, "sigma", rep.estimate.sigma[k], rep.se_sigma[k], ""])
    table = dumps_csv(["state", "tau", "parameter", "estimate", "se", "significant"], rows)
    report = {"manifest": manifest(args, config, [spec["data"], args.fit, args.config]),
              "result": {"parameter_names": names, **rep.to_dict()}}
    return {"bootstrap.json": report, "bootstrap.csv": table}


def cmd_decode(args):
    _, params, saved = _load_fit(args.fit)
    spec = _data_spec(args, saved)
    data, _ = _load(spec)
    if data.P != params.P:
        raise DataError(f"fit has P={params.P} coefficients but data give P={data.P}")
    post = e_step(data, params)
    states = decode(post)
    header = ["date", "state"] + [f"gamma_{k + 1}" for k in range(params.K)]
    rows = [[d, s + 1, *g] for d, s, g in zip(data.dates, states, post.gamma.tolist())]
    report = {"manifest": manifest(args, None, [spec["data"], args.fit]),
              "result": {"T": data.T, "loglik": post.loglik,
                         "state_counts": np.bincount(states, minlength=params.K).tolist()}}
    return {"decode.json": report, "decode.csv": dumps_csv(header, rows)}


def cmd_simulate(args):
    spec = two_state_spec(args.scenario, args.T)
    data, states = simulate_dgp(spec, np.random.default_rng(args.seed))
    start = dt.date(2000, 1, 1)
    dates = [(start + dt.timedelta(days=t)).isoformat() for t in range(data.T)]
    csv_text = dumps_csv(["date", "y", "x"], [[d, y, x] for d, y, x in zip(dates, data.y, data.X[:, 1])])
    states_text = dumps_csv(["date", "state"], [[d, s + 1] for d, s in zip(dates, states)])
    report = {"manifest": manifest(args),
              "result": {"errors": str(spec.errors), "T": spec.T, "beta": spec.beta_true, "Pi": spec.Pi_true,
                         "pi": spec.pi_true, "columns": {"response": "y", "covariates": ["x"]},
                         "input_kind": "returns"}}
    return {"simulate.json": report, "simulated.csv": csv_text, "simulated_states.csv": states_text}


def cmd_mc_study(args):
    spec = two_state_spec(args.scenario, args.T)
    config = fit_config_from_args(args, K=spec.K)
    taus = tuple(args.tau) if args.tau else DESIGN_TAUS
    if args.replications < 2:
        raise UsageError("--replications must be at least 2")
    rep = run_mc_study(spec, taus, args.replications, config, args.seed)
    table = dumps_csv(["tau", "state", "coef", "truth", "bias", "std"],
                      [[r["tau"], r["state"], r["coef"], r["truth"], r["bias"], r["std"]] for r in rep.table_rows()])
    ari = dumps_csv(["replication", *[f"tau_{t:g}" for t in taus]],
                    [[i + 1, *row] for i, row in enumerate(rep.ari.tolist())])
    report = {"manifest": manifest(args, config), "result": rep.to_dict()}
    return {"mc-study.json": report, "mc_table.csv": table, "mc_ari.csv": ari}


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "bootstrap": cmd_bootstrap, "decode": cmd_decode,
            "simulate": cmd_simulate, "mc-study": cmd_mc_study}


def main(argv=None):
    t0 = time.time()
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        outputs = COMMANDS[args.command](args)
        files = {name: (dumps_json(body) if name.endswith(".json") else body) for name, body in outputs.items()}
        timing = {"command": args.command, "started": started,
                  "finished": dt.datetime.now(dt.timezone.utc).isoformat(), "seconds": time.time() - t0}
        files[f"{args.command}.timing.json"] = dumps_json(timing)
        write_outputs(args.out, files)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid setting: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
