"""
Command line entry point ``forensics``.

Every subcommand writes ``report.json`` (plus plot-data CSVs where relevant)
into ``--out``. Exit status is 0 on success, 1 on data errors and 2 on usage
errors. Stochastic subcommands require ``--seed``; nothing is ever seeded
from the clock, so two runs with the same arguments give byte-identical
reports.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import (NOT_RANDOM, bootstrap_t_distribution, interaction_regression, naive_checks,
                    randomness_verdict)
from .diagnostics import binomial_dispersion, repeat_max_randomness_check, repeated_counts
from .domain import POLLSTERS, Dataset, validate_dataset
from .exceptions import DataError, ForensicsError
from .fraudtest import DEFAULT_THRESHOLD, run_fraud_test
from .ingest import compare_polls_to_votes, input_files, load_directory, write_dataset
from .regression import CovarianceTest, RegressionFit
from .simulator import PRESETS, simulate_preset

SCHEMA_VERSION = "1"
STOCHASTIC = ("audit-test", "simulate", "full-report")


# ----------------------------------------------------------------------------
# JSON with 17 significant digits

def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "null" if not math.isfinite(x) else format(x, ".17g")
    if isinstance(obj, str):
        return _json_str(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_str(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def dumps(obj) -> str:
    """Serialize ``obj`` with every float at 17 significant digits and
    non-finite floats as ``null``."""
    return _encode(obj) + "\n"


# ----------------------------------------------------------------------------
# report sections

def _fit(f: RegressionFit) -> dict:
    out = f.summary()
    out["t_classical"] = dict(zip(f.names, f.t_classical))
    out["t_robust"] = dict(zip(f.names, f.t_robust))
    return out


def _cov(c: CovarianceTest) -> dict:
    return {"covariance": c.covariance, "correlation": c.correlation,
            "se_covariance": c.se_covariance, "t_statistic": c.t_statistic, "n": c.n}


def _validation(d: Dataset) -> dict:
    rep = validate_dataset(d)
    return {
        "ok": rep.ok,
        "n_violations": len(rep),
        "rules": dict(sorted(rep.rules().items())),
        "violations": [dataclasses.asdict(v) for v in rep.violations],
        "notes": [dataclasses.asdict(v) for v in rep.notes],
        "counts": {"machines": len(d.machines), "precincts": len(d.precincts), "poll_rows": len(d.polls),
                   "polled_precincts": sum(p.polled for p in d.precincts),
                   "audited_precincts": sum(p.audited for p in d.precincts)},
    }


def _comparison(d: Dataset, pollster: str, out: Path) -> dict:
    c = compare_polls_to_votes(d, pollster)
    _write_csv(out / "poll_scatter.csv", ("precinct_id", "official_share", "poll_share"),
               ((pid, _num(o), _num(s)) for pid, o, s in c.per_precinct_pairs))
    body = dataclasses.asdict(c)
    body.pop("per_precinct_pairs")
    return body


def _diagnostics(d: Dataset, out: Path) -> dict:
    rep = repeated_counts(d.machines)
    section = {"repeats": {
        "total_machines": rep.total_machines,
        "machines_in_yes_repeats": rep.machines_in_yes_repeats,
        "machines_in_no_repeats": rep.machines_in_no_repeats,
        "yes_repeat_frequency": rep.yes_repeat_frequency,
        "no_repeat_frequency": rep.no_repeat_frequency,
        "distinct_yes_repeats": rep.distinct_yes_repeats,
        "rows": [dataclasses.asdict(r) for r in rep.per_precinct_size_rows],
    }}
    if rep.per_precinct_size_rows:
        section["repeat_max_checks"] = [dict(dataclasses.asdict(c), expected_in_ci=c.expected_in_ci)
                                        for c in repeat_max_randomness_check(rep)]
    disp = binomial_dispersion(d.machines)
    _write_csv(out / "dispersion_hist.csv", ("bin_left", "bin_right", "count", "reference_density"),
               ((_num(a), _num(b), c, _num(r)) for a, b, c, r in disp.histogram_rows()))
    section["dispersion"] = {
        "n_machines": disp.n,
        "fraction_above_2sd": disp.fraction_above_2sd,
        "finite_population": disp.finite_population,
        "ks_statistic": disp.ks_statistic,
        "ks_pvalue": disp.ks_pvalue,
        "excluded_single_machine_precincts": disp.excluded_single_machine_precincts,
        "excluded_degenerate_precincts": disp.excluded_degenerate_precincts,
        "excluded_machines": disp.excluded_machines,
    }
    return section


def _fraud(d: Dataset, threshold: float) -> dict:
    r = run_fraud_test(d, threshold)
    return {
        "verdict": r.verdict,
        "threshold": r.threshold,
        "n_precincts": r.n_precincts,
        "exclusions": r.exclusions,
        "ols_signatures": _fit(r.signature_fit),
        "ols_exitpoll": _fit(r.exitpoll_fit),
        "iv_signatures": _fit(r.iv_signature_fit),
        "iv_exitpoll": _fit(r.iv_exitpoll_fit),
        "ols_covariance": _cov(r.ols_cov_test),
        "iv_covariance": _cov(r.iv_cov_test),
    }


def _audit(d: Dataset, args, out: Path) -> dict:
    fit = interaction_regression(d)
    dist = bootstrap_t_distribution(d, args.replicates, args.sample_size, args.seed,
                                    args.include_audited)
    verdict = randomness_verdict(fit, dist, args.level)
    _write_csv(out / "bootstrap_t.csv", ("replicate", "t"),
               ((i, _num(t)) for i, t in enumerate(dist.t_values)))
    naive = naive_checks(d)
    return {
        "verdict": verdict,
        "level": args.level,
        "interaction_coefficient": fit.interaction_coefficient,
        "interaction_se": fit.interaction_se,
        "interaction_t": fit.interaction_t,
        "n_audited": fit.n_audited,
        "exclusions": fit.exclusions,
        "regression": _fit(fit.fit),
        "bootstrap": {
            "replicates": dist.replicates, "sample_size": dist.sample_size, "seed": dist.seed,
            "include_audited": dist.include_audited, "mean": dist.mean, "sd": dist.sd,
            "skewness": dist.skewness, "kurtosis": dist.kurtosis,
            "percentiles": {str(k): v for k, v in dist.percentiles.items()},
        },
        "naive_checks": dataclasses.asdict(naive),
        "flagged": verdict == NOT_RANDOM,
    }


# ----------------------------------------------------------------------------
# plumbing

def _num(x) -> str:
    x = float(x)
    return "" if not math.isfinite(x) else format(x, ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _digests(paths) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(paths)}


def _run_config(args) -> dict:
    return {k: getattr(args, k) for k in sorted(vars(args)) if k != "func"}


def _load(args) -> tuple[Dataset, dict]:
    d = load_directory(args.data)
    validation = _validation(d)
    if args.strict and not validation["ok"]:
        first = validation["violations"][0]
        raise DataError(f"{validation['n_violations']} validation violation(s); first: "
                        f"{first['record']}: {first['rule']} {first['detail']}".rstrip())
    return d, validation


def _handle(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    report: dict = {}
    if cmd == "simulate":
        sim = simulate_preset(args.preset, args.seed)
        paths = write_dataset(sim.dataset, out, truth=sim.truth)
        report["simulation"] = {"preset": args.preset, "seed": args.seed,
                                "provenance": sim.dataset.provenance,
                                "n_tampered": int(sim.truth.tampered.sum()),
                                "files": [p.name for p in paths]}
        report["validation"] = _validation(sim.dataset)
        report["input_digests"] = {}
        report["output_digests"] = _digests(paths)
        return report

    d, validation = _load(args)
    report["input_digests"] = _digests(input_files(args.data))
    report["validation"] = validation
    if cmd in ("compare-polls", "full-report"):
        if cmd == "compare-polls" or any(p.polled for p in d.precincts):
            report["comparison"] = _comparison(d, args.pollster, out)
    if cmd in ("diagnose", "full-report") and (cmd == "diagnose" or d.machines):
        report.update(_diagnostics(d, out))
    if cmd in ("fraud-test", "full-report"):
        if cmd == "fraud-test" or any(p.polled for p in d.precincts):
            report["fraud"] = _fraud(d, args.threshold)
    if cmd in ("audit-test", "full-report"):
        if cmd == "audit-test" or any(p.audited for p in d.precincts):
            report["audit"] = _audit(d, args, out)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forensics", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"forensics {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "ingest-check": "load and validate a data directory",
        "compare-polls": "official YES share against exit polls",
        "diagnose": "repeated machine totals and binomial dispersion",
        "fraud-test": "OLS/2SLS residual-covariance fraud test",
        "audit-test": "audit-sample randomness test with bootstrap",
        "simulate": "write a synthetic election from a preset",
        "full-report": "every analysis the data supports",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--out", required=True, help="output directory")
        if name == "simulate":
            p.add_argument("--preset", required=True, choices=sorted(PRESETS), help="synthetic scenario")
        else:
            p.add_argument("--data", required=True, help="directory with the input CSV files")
            p.add_argument("--strict", action="store_true",
                           help="treat validation violations as errors")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (required for stochastic subcommands)")
        if name in ("compare-polls", "full-report"):
            p.add_argument("--pollster", choices=POLLSTERS, default="merged",
                           help="exit poll source (default merged)")
        if name in ("fraud-test", "full-report"):
            p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                           help="IV covariance t above which fraud is flagged")
        if name in ("audit-test", "full-report"):
            p.add_argument("--replicates", type=int, default=1000, help="pseudo-audits (default 1000)")
            p.add_argument("--sample-size", type=int, default=200,
                           help="precincts per pseudo-audit (default 200)")
            p.add_argument("--level", type=float, default=0.01, help="one-sided test level (default 0.01)")
            p.add_argument("--include-audited", action="store_true",
                           help="keep the audited precincts in bootstrap regressions")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in STOCHASTIC and args.seed is None:
        parser.error(f"{args.command} needs --seed")
    if getattr(args, "replicates", 1) < 1 or getattr(args, "sample_size", 1) < 1:
        parser.error("--replicates and --sample-size must be positive")
    try:
        body = _handle(args)
    except (ForensicsError, OSError) as exc:
        print(f"forensics {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:  # argument values the analyses reject
        print(f"forensics {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    report = {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
              "command": args.command, "run_config": _run_config(args)}
    report.update(body)
    (Path(args.out) / "report.json").write_text(dumps(report), encoding="utf-8")
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
