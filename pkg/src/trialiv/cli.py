"""Command-line front end.

Subcommands: ``simulate`` (draw a trial dataset), ``estimate`` (estimands
from a CSV), ``replicate`` (run a canned replication study and compare
against its reference targets), ``sensitivity`` (defier sensitivity grid),
``check-iv`` (IV assumption checks on a DAG file), and ``serve`` (start
the HTTP service).

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical or
estimation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .configfile import campaign_spec_from_text, dgp_config_from_text
from .dag import Dag, check_iv
from .datasets import ColumnRoles, read_records, write_records
from .dgp import DgpConfig, DgpModel, Variant, generate_with_report
from .errors import DataError, EstimationError, InvalidParamError, TrialIVError
from .estimators import compliance_profile, defier_sensitivity, iv_ratio
from .montecarlo import run_campaign, summary_lines
from .report import build_report, config_hash
from .studies import build_studies, comparison_rows

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4

MODEL_ALIASES = {
    "a": DgpModel.PAIN_TRIAL_A,
    "pain_trial_a": DgpModel.PAIN_TRIAL_A,
    "b": DgpModel.BIOMARKER_B,
    "biomarker_b": DgpModel.BIOMARKER_B,
    "c": DgpModel.ADHERENCE_C,
    "adherence_c": DgpModel.ADHERENCE_C,
}

DEFAULT_ESTIMATORS = "policy,complier_fraction,iv_ratio"


def _parse_model(raw: str) -> DgpModel:
    try:
        return MODEL_ALIASES[raw.lower()]
    except KeyError:
        raise InvalidParamError(
            f"--model must be one of {sorted(MODEL_ALIASES)}, got {raw!r}"
        ) from None


def _parse_overrides(pairs: Sequence[str]) -> Dict[str, float]:
    overrides: Dict[str, float] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise InvalidParamError(f"--param expects key=value, got {pair!r}")
        try:
            overrides[key] = float(value)
        except ValueError:
            raise InvalidParamError(
                f"--param {key}: {value!r} is not a number"
            ) from None
    return overrides


def _roles_from_args(args) -> ColumnRoles:
    return ColumnRoles(
        r=args.r_col, t=args.t_col, y=args.y_col, a=args.a_col, z=args.z_col
    )


def _add_role_flags(parser) -> None:
    parser.add_argument("--r-col", default="r", help="randomization column name")
    parser.add_argument("--t-col", default="t", help="treatment/event column name")
    parser.add_argument("--y-col", default="y", help="outcome column name")
    parser.add_argument("--a-col", default="a", help="adherence column name")
    parser.add_argument("--z-col", default="z", help="biomarker-response column name")


def _full(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


# --- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.config:
        with open(args.config) as fh:
            config = dgp_config_from_text(
                fh.read(),
                model=args.model,
                n=args.n,
                seed=args.seed,
                variant=args.variant,
                extra_params=_parse_overrides(args.param),
            )
    else:
        if args.model is None or args.n is None:
            raise InvalidParamError(
                "--model and --n are required when no --config file is given"
            )
        config = DgpConfig(
            model=_parse_model(args.model),
            n=args.n,
            seed=args.seed if args.seed is not None else 0,
            params=_parse_overrides(args.param),
            variant=Variant(args.variant) if args.variant else Variant.CONFOUNDED,
        )
    records, report = generate_with_report(config)
    write_records(records, args.out, emit_latent=args.emit_latent)
    print(f"wrote {len(records)} records to {args.out}")
    if report.clamp_count:
        print(
            f"note: {report.clamp_count} outcome probabilities "
            f"({report.clamp_fraction:.3%}) were clamped to [0, 1]"
        )
    return EXIT_OK


# --- estimate ---------------------------------------------------------------


def _estimator_requests(args, records) -> List[Tuple[str, Dict[str, object]]]:
    covariates = set(records[0].covariates.keys())
    interaction = args.interaction_covariate
    if interaction is None:
        interaction = "s" if "s" in covariates else ("x" if "x" in covariates else None)
    responder_covs = tuple(c for c in args.responder_covariates.split(",") if c)
    requests: List[Tuple[str, Dict[str, object]]] = []
    for name in args.estimators.split(","):
        name = name.strip()
        if not name:
            continue
        options: Dict[str, object] = {}
        if name in ("psi_t", "psi_at", "psi_c", "homogeneity_diff"):
            if interaction is None:
                raise DataError(
                    f"estimator {name} needs --interaction-covariate; "
                    f"dataset has covariates {sorted(covariates)}"
                )
            options = {"covariate": interaction, "link": args.link}
        elif name.startswith("adherence_"):
            if interaction is None:
                raise DataError(f"estimator {name} needs --interaction-covariate")
            options = {"covariate": interaction}
        elif name == "policy_in_s_plus_star":
            options = {"event": args.event, "arm": args.arm}
        elif name == "responder":
            options = {"covariates": responder_covs}
        requests.append((name, options))
    return requests


def cmd_estimate(args) -> int:
    records = read_records(args.data, _roles_from_args(args))
    with open(args.data, "rb") as fh:
        digest = config_hash(fh.read(), args.estimators.encode())
    report = build_report(
        records,
        _estimator_requests(args, records),
        bootstrap_reps=args.bootstrap,
        seed=args.seed,
        command="trialiv estimate",
        input_hash=digest,
    )
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote report to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- replicate and campaign ---------------------------------------------------


def _write_replication_csv(path: str, result) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replication", *result.columns])
        for i in range(result.values.shape[0]):
            writer.writerow([i, *[_full(v) for v in result.values[i]]])


def _write_campaign_outputs(base: str, result, extra_doc=None) -> None:
    _write_replication_csv(f"{base}_replications.csv", result)
    doc = {
        "replications": result.spec.replications,
        "n": result.spec.dgp.n,
        "master_seed": result.spec.master_seed,
        "summary": result.summary(),
        "failures": result.failures,
        "note": "failed replications are excluded from means and SDs; "
        "counts are reported per error kind",
    }
    if extra_doc:
        doc.update(extra_doc)
    with open(f"{base}_summary.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_campaign(args) -> int:
    with open(args.config) as fh:
        spec = campaign_spec_from_text(fh.read())
    result = run_campaign(spec, workers=args.workers)
    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.join(args.out_dir, args.name)
    _write_campaign_outputs(base, result)
    for line in summary_lines(result):
        print(line)
    print(f"wrote {base}_replications.csv and {base}_summary.json")
    return EXIT_OK


def cmd_replicate(args) -> int:
    studies = build_studies()
    if args.study not in studies:
        raise InvalidParamError(
            f"unknown study {args.study!r}; choose from {sorted(studies)}"
        )
    study = studies[args.study]
    if args.reps is not None:
        study = study.with_replications(args.reps)

    result = run_campaign(study.spec, workers=args.workers)
    rows = comparison_rows(study, result)

    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.join(args.out_dir, study.name)
    _write_campaign_outputs(base, result, extra_doc={"study": study.name})
    with open(f"{base}_comparison.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    width = max(len(r["estimator"]) for r in rows)
    for r in rows:
        mean = "" if r["mean"] is None else f"{r['mean']:+.4f}"
        target = "" if r["mean_target"] is None else f"{r['mean_target']:+.4f}"
        print(
            f"{r['estimator']:<{width}}  mean {mean:>8}  target {target:>8}  "
            f"{r['status']}"
        )
    print(f"wrote {base}_replications.csv, {base}_summary.json, {base}_comparison.csv")
    return EXIT_OK


# --- sensitivity ------------------------------------------------------------


def cmd_sensitivity(args) -> int:
    records = read_records(args.data, _roles_from_args(args))
    profile = compliance_profile(records, monotonicity=False)
    observed = iv_ratio(records).value
    grid = defier_sensitivity(
        profile,
        observed,
        np.linspace(args.dace_min, args.dace_max, args.steps),
        np.linspace(args.pi_d_min, args.pi_d_max, args.steps),
    )
    rows = list(grid.cells())
    out = args.out or "sensitivity.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dace", "pi_d", "implied_cace", "defined"])
        for dace, pi_d, implied, defined in rows:
            writer.writerow(
                [_full(dace), _full(pi_d), _full(implied) if defined else "",
                 "true" if defined else "false"]
            )
    print(
        f"observed IV estimate {observed:.6f}; wrote {len(rows)} grid cells to {out}"
    )
    return EXIT_OK


# --- check-iv ---------------------------------------------------------------


def cmd_check_iv(args) -> int:
    with open(args.dag) as fh:
        graph = Dag.from_text(fh.read())
    confounders = tuple(c for c in args.confounders.split(",") if c)
    report = check_iv(
        graph, args.instrument, args.treatment, args.outcome, confounders
    )
    print(f"IV1 relevance: {'PASS' if report.iv1 else 'FAIL'}")
    if not report.iv1:
        print(f"  no directed path {args.instrument} -> {args.treatment}")
    print(f"IV2 randomization: {'PASS' if report.iv2 else 'FAIL'}")
    for confounder, paths in report.iv2_open_paths.items():
        for verdict in paths:
            print(f"  open path to {confounder}: {graph.render_path(verdict.path)}")
    print(f"IV3 exclusion restriction: {'PASS' if report.iv3 else 'FAIL'}")
    for verdict in report.iv3_open_paths:
        print(f"  open path: {graph.render_path(verdict.path)}")
    return EXIT_OK


# --- serve ------------------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialiv",
        description="IV estimation of trial estimands, sensitivity analyses, "
        "and seeded simulation studies",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a trial dataset from one generator")
    p.add_argument("--model", default=None, help="A, B, or C (or full names)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--variant",
        default=None,
        choices=[v.value for v in Variant],
    )
    p.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a generator parameter (repeatable)",
    )
    p.add_argument("--config", default=None,
                   help="key-value config file with model/n/seed/param.* entries")
    p.add_argument("--emit-latent", action="store_true",
                   help="include latent columns in the CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate estimands from a dataset CSV")
    p.add_argument("data")
    p.add_argument("--estimators", default=DEFAULT_ESTIMATORS)
    p.add_argument("--interaction-covariate", default=None)
    p.add_argument("--link", default="linear", choices=["linear", "logistic"])
    p.add_argument("--event", default="z")
    p.add_argument("--arm", default="r")
    p.add_argument("--responder-covariates", default="")
    p.add_argument("--bootstrap", type=int, default=0, metavar="REPS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_role_flags(p)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("replicate", help="run a canned replication study")
    p.add_argument("study", help="section_5_4, setting_1, or setting_2")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_replicate)

    p = sub.add_parser("campaign", help="run a campaign described by a config file")
    p.add_argument("config", help="key-value campaign spec file")
    p.add_argument("--name", default="campaign", help="basename for output files")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_campaign)

    p = sub.add_parser("sensitivity", help="defier sensitivity grid from a dataset")
    p.add_argument("data")
    p.add_argument("--dace-min", type=float, required=True)
    p.add_argument("--dace-max", type=float, required=True)
    p.add_argument("--pi-d-min", type=float, required=True)
    p.add_argument("--pi-d-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--out", default=None)
    _add_role_flags(p)
    p.set_defaults(fn=cmd_sensitivity)

    p = sub.add_parser("check-iv", help="check IV assumptions on a DAG file")
    p.add_argument("dag")
    p.add_argument("--instrument", required=True)
    p.add_argument("--treatment", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--confounders", default="", help="comma-separated node names")
    p.set_defaults(fn=cmd_check_iv)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EstimationError as exc:
        print(f"estimation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except DataError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrialIVError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
