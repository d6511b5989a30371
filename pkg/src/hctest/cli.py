"""Command-line front end.

Every command prints a JSON report with the seed, the merged configuration,
the library version and the result; wall-clock time is kept under its own
``timing`` key so the rest is reproducible byte for byte. ``--config FILE``
reads flat JSON keys named like the flags; flags given on the command line win.

Exit codes: 0 for success or a YES verdict, 3 for a NO verdict, 1 when a
dominance check fails, 2 for usage and parameter errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    DiscreteDistribution,
    HCTestError,
    Histogram,
    load_json,
    sample_multinomial,
    substream,
    uniform,
    validate,
)

EXIT_YES = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NO = 3

DEFAULT_TRIALS = 2000
DEFAULT_DOMINANCE_TRIALS = 100_000


class UsageError(Exception):
    pass


# -- argument plumbing ----------------------------------------------------------


def _add(p: argparse.ArgumentParser, *flags, **kw):
    # SUPPRESS keeps unspecified flags out of the namespace so the config file
    # and the per-command defaults can fill them in
    kw.setdefault("default", argparse.SUPPRESS)
    p.add_argument(*flags, **kw)


def _common(p: argparse.ArgumentParser, seed=True):
    _add(p, "--config", metavar="FILE", help="JSON file with flat keys mirroring the flags")
    _add(p, "--output", metavar="FILE", help="also write the JSON report here")
    if seed:
        _add(p, "--seed", type=int, help="64-bit seed (default 0)")


def _tester_flags(p: argparse.ArgumentParser):
    _add(p, "--n", type=int, help="domain size")
    _add(p, "--epsilon", type=float, help="proximity parameter in (0, 1)")
    _add(p, "--delta", type=float, help="failure probability in (0, 1)")
    _add(p, "--m", help="sample size or 'auto' (default)")
    _add(p, "--C", dest="constant_C", type=float, help="threshold constant (default: calibrated)")
    _add(p, "--sample-constant", dest="sample_constant", type=float, help="sample-size multiplier")
    _add(p, "--calibration", metavar="FILE", help="calibration file to take default constants from")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hctest", description="High-confidence uniformity and identity testing.")
    parser.add_argument("--version", action="version", version=f"hctest {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("test-uniformity", help="run the empirical-TV uniformity tester")
    _tester_flags(p)
    _add(p, "--from", dest="source", help="uniform | point | family:k=K[,middle] | file:PATH (default uniform)")
    _common(p)

    p = sub.add_parser("test-identity", help="test samples against a known distribution q")
    _tester_flags(p)
    _add(p, "--q", help="JSON distribution file or 'uniform' (default uniform)")
    _add(p, "--from", dest="source", help="q | uniform | point | family:k=K | file:PATH (default q)")
    _common(p)

    p = sub.add_parser("eval-worst-case", help="worst-case type-II error over the candidate family")
    _tester_flags(p)
    _add(p, "--statistic", help="empirical_tv | collisions | distinct | chi_squared | all")
    _add(p, "--trials", type=int, help=f"trials per family member (default {DEFAULT_TRIALS})")
    _add(p, "--csv", metavar="FILE", help="per-member CSV (default: --output with .csv suffix)")
    _common(p)

    p = sub.add_parser("dominance-check", help="check stochastic domination between two laws")
    _add(p, "--p", help="uniform | point | family:k=K | file:PATH")
    _add(p, "--q", help="uniform | two-level | file:PATH (default two-level average of p)")
    _add(p, "--n", type=int, help="domain size for generated laws")
    _add(p, "--epsilon", type=float, help="distance for family members")
    _add(p, "--m", type=int, help="sample size")
    _add(p, "--statistic", help="convex statistic (default empirical_tv)")
    _add(p, "--trials", type=int, help=f"trials per law (default {DEFAULT_DOMINANCE_TRIALS})")
    _common(p)

    p = sub.add_parser("lb-instance", help="draw a lower-bound pseudo-distribution")
    _add(p, "--n", type=int, help="domain size")
    _add(p, "--epsilon", type=float, help="perturbation size")
    _add(p, "--witness", action="store_true", help="also run the threshold-rule witness")
    _add(p, "--delta", type=float, help="delta for the witness (default 0.01)")
    _add(p, "--m", type=float, help="Poisson rate for the witness (default 0.2 sqrt(n ln(1/delta))/eps^2)")
    _add(p, "--trials", type=int, help="witness trials per hypothesis (default 10000)")
    _common(p)

    p = sub.add_parser("exact", help="exact expectations, Hessian entries, gaps and tail bounds")
    esub = p.add_subparsers(dest="query", metavar="QUERY")
    esub.required = True
    q = esub.add_parser("mu-uniform")
    _add(q, "--n", type=int)
    _add(q, "--m", type=int)
    _common(q, seed=False)
    q = esub.add_parser("mu-t")
    _add(q, "--p", help="JSON distribution file or uniform:N")
    _add(q, "--m", type=int)
    _add(q, "--t", type=float)
    _common(q, seed=False)
    q = esub.add_parser("hessian")
    _add(q, "--m", type=int)
    _add(q, "--t", type=float)
    _add(q, "--p", type=float)
    _common(q, seed=False)
    for name in ("gap", "threshold"):
        q = esub.add_parser(name)
        _add(q, "--n", type=int)
        _add(q, "--m", type=int)
        _add(q, "--epsilon", type=float)
        _add(q, "--C", dest="constant_C", type=float, help="constant (default 1)")
        _common(q, seed=False)
    q = esub.add_parser("tail")
    _add(q, "--form", choices=["mcdiarmid", "bernstein"])
    _add(q, "--z", type=float)
    _add(q, "--m", type=int)
    _add(q, "--B", type=float)
    _add(q, "--sum-sigma2", dest="sum_sigma2", type=float)
    _common(q, seed=False)

    p = sub.add_parser("calibrate", help="calibrate the tester constants on a grid")
    _add(p, "--grid", help="cells 'n,eps,delta;n,eps,delta;...' (default: built-in grid)")
    _add(p, "--trials", type=int, help=f"trials per cell and family member (default {DEFAULT_TRIALS})")
    _add(p, "--margin", type=float, help="safety factor on the sample constant (default 1.25)")
    _add(p, "--save", metavar="FILE", help="where to store the calibration (default ./calibration.json)")
    _common(p)
    parser.commands = sub.choices
    return parser


DEFAULTS = {
    "test-uniformity": {"seed": 0, "m": "auto", "source": "uniform", "delta": 0.05},
    "test-identity": {"seed": 0, "m": "auto", "source": "q", "q": "uniform", "delta": 0.05},
    "eval-worst-case": {"seed": 0, "m": "auto", "statistic": "empirical_tv", "trials": DEFAULT_TRIALS, "delta": 0.05},
    "dominance-check": {"seed": 0, "statistic": "empirical_tv", "trials": DEFAULT_DOMINANCE_TRIALS, "q": "two-level"},
    "lb-instance": {"seed": 0, "witness": False, "delta": 0.01, "trials": 10_000},
    "exact": {"constant_C": 1.0},
    "calibrate": {"seed": None, "trials": None, "margin": None, "save": "calibration.json"},
}


def merged_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS.get(args.command, {}))
    given = vars(args)
    if "config" in given:
        data = load_json(given["config"])
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in data.items()})
    opts.update(given)
    return opts


def _need(opts: dict, *keys: str):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


# -- sources -----------------------------------------------------------------------


def parse_family(spec: str, n: int, epsilon: float) -> DiscreteDistribution:
    from .majorization import family_member

    body = spec.split(":", 1)[1]
    k, middle = None, False
    for part in body.split(","):
        part = part.strip()
        if part.startswith("k="):
            k = int(part[2:])
        elif part == "middle":
            middle = True
        elif part:
            raise UsageError(f"cannot parse family spec {spec!r}")
    if k is None:
        raise UsageError("family spec needs k=K")
    if epsilon is None:
        raise UsageError("family members need --epsilon")
    return family_member(n, epsilon, k, middle)


def named_distribution(spec: str, n: int | None, epsilon: float | None = None) -> DiscreteDistribution:
    """Resolve ``uniform``, ``uniform:N``, ``point``, ``family:k=K`` or a JSON file."""
    if spec.startswith("uniform"):
        if ":" in spec:
            n = int(spec.split(":", 1)[1])
        if n is None:
            raise UsageError("uniform needs --n")
        return uniform(n)
    if spec == "point":
        if n is None:
            raise UsageError("point needs --n")
        w = np.zeros(n)
        w[0] = 1.0
        return validate(w)
    if spec.startswith("family:"):
        if n is None:
            raise UsageError("family members need --n")
        return parse_family(spec, n, epsilon)
    path = spec[5:] if spec.startswith("file:") else spec
    return DiscreteDistribution.from_json(load_json(path))


def read_samples(path: str, n: int) -> Histogram | np.ndarray:
    """A JSON histogram object, a JSON list of sample indices, or whitespace-separated indices."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = [int(tok) for tok in text.split()]
    if isinstance(data, dict):
        return Histogram.from_json(data)
    raw = np.asarray(data, dtype=np.int64)
    if raw.size and (raw.min() < 0 or raw.max() >= n):
        raise HCTestError(f"sample indices must lie in [0, {n})")
    return raw


# -- commands ------------------------------------------------------------------------


def _config_from(opts: dict, n: int | None = None):
    from .calibration import load_calibration
    from .testers import TesterConfig

    _need(opts, "n", "epsilon", "delta")
    C, s = opts.get("constant_C"), opts.get("sample_constant")
    if (C is None or s is None) and opts.get("calibration"):
        cal = load_calibration(opts["calibration"])
        C = cal.constant_C if C is None else C
        s = cal.sample_constant if s is None else s
    return TesterConfig(int(opts["n"] if n is None else n), float(opts["epsilon"]), float(opts["delta"]), C, s)


def _resolve_m(opts: dict, auto: int) -> int:
    m = opts.get("m", "auto")
    if m is None or str(m) == "auto":
        return auto
    m = int(m)
    if m < 1:
        raise HCTestError("m must be positive")
    return m


def cmd_test_uniformity(opts: dict):
    from .testers import required_samples, test_uniformity

    config = _config_from(opts)
    src = str(opts["source"])
    if src.startswith("file:"):
        data = read_samples(src[5:], config.n)
        hist = data if isinstance(data, Histogram) else Histogram.from_samples(data, config.n)
    else:
        dist = named_distribution(src, config.n, config.epsilon)
        hist = sample_multinomial(dist, _resolve_m(opts, required_samples(config)), opts["seed"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        verdict = test_uniformity(hist, config, seed=opts["seed"])
    result = verdict.to_json()
    result["constants"] = {"constant_C": config.constant_C, "sample_constant": config.sample_constant}
    return result, EXIT_YES if verdict.accepted else EXIT_NO


def cmd_test_identity(opts: dict):
    from .testers import identity_config, required_samples, test_identity

    q_spec = str(opts["q"])
    q = named_distribution(q_spec, opts.get("n"))
    config = _config_from(opts, n=q.n)
    src = str(opts["source"])
    if src.startswith("file:"):
        samples = read_samples(src[5:], q.n)
    else:
        dist = q if src == "q" else named_distribution(src, q.n, config.epsilon)
        m = _resolve_m(opts, required_samples(identity_config(config)))
        hist = sample_multinomial(dist, m, opts["seed"])
        samples = np.repeat(np.arange(q.n), hist.counts)
        # shuffle so the raw stream looks like i.i.d. draws
        substream(opts["seed"], 0x5A).shuffle(samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        verdict = test_identity(samples, q, config, seed=opts["seed"])
    result = verdict.to_json()
    result["source_n"] = q.n
    result["source_epsilon"] = config.epsilon
    return result, EXIT_YES if verdict.accepted else EXIT_NO


def _quantile_threshold(stat, n: int, m: int, delta: float, trials: int, seed: int) -> float:
    """Smallest value above the empirical ``1 - delta`` quantile under ``U_n``."""
    from .montecarlo import simulate_statistic

    values = simulate_statistic(stat.code, uniform(n), m, trials, seed, key=(0xA11,))
    return float(np.nextafter(np.quantile(values, 1.0 - delta, method="higher"), np.inf))


def worst_case_reports(opts: dict):
    from .majorization import Side, empirical_error_estimate, worst_case_type2
    from .testers import StatisticKind, required_samples, tester_threshold

    config = _config_from(opts)
    m = _resolve_m(opts, required_samples(config))
    trials = int(opts["trials"])
    seed = int(opts["seed"])
    name = str(opts["statistic"])
    stats = list(StatisticKind) if name == "all" else [StatisticKind.parse(name)]
    reports = []
    for stat in stats:
        if stat is StatisticKind.EMPIRICAL_TV:
            thr, rule = tester_threshold(config, m), "tester"
        else:
            thr, rule = _quantile_threshold(stat, config.n, m, config.delta, trials, seed), "null-quantile"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = worst_case_type2(stat, config.n, m, config.epsilon, thr, trials, seed, key=(stat.code,))
        type1 = empirical_error_estimate(stat, uniform(config.n), m, thr, Side.ABOVE, trials, seed, key=(0x71, stat.code))
        summary = report.to_json()
        summary.update(
            threshold_rule=rule,
            convex=stat.convex,
            type1_rate=type1.rate,
            type1_ci_upper=type1.ci_upper,
        )
        reports.append((summary, report))
    return config, m, reports


def cmd_eval_worst_case(opts: dict):
    config, m, reports = worst_case_reports(opts)
    csv_path = opts.get("csv")
    if csv_path is None and opts.get("output"):
        csv_path = str(Path(opts["output"]).with_suffix(".csv"))
    if csv_path:
        write_csv(csv_path, [dict(statistic=s["statistic"], **row) for s, r in reports for row in r.csv_rows()])
    result = {
        "n": config.n,
        "m": m,
        "epsilon": config.epsilon,
        "delta": config.delta,
        "constants": {"constant_C": config.constant_C, "sample_constant": config.sample_constant},
        "statistics": [s for s, _ in reports],
    }
    if csv_path:
        result["csv"] = csv_path
    return result, EXIT_YES


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_dominance_check(opts: dict):
    from .majorization import NotMajorized, dominance_check, two_level_average
    from .testers import StatisticKind

    _need(opts, "p", "m")
    p = named_distribution(str(opts["p"]), opts.get("n"), opts.get("epsilon"))
    q_spec = str(opts["q"])
    q = two_level_average(p) if q_spec == "two-level" else named_distribution(q_spec, p.n, opts.get("epsilon"))
    stat = StatisticKind.parse(str(opts["statistic"]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotMajorized)
        report = dominance_check(p, q, stat, int(opts["m"]), int(opts["trials"]), int(opts["seed"]))
    result = report.to_json()
    result.update(statistic=stat.value, n=p.n, m=int(opts["m"]))
    return result, EXIT_YES if report.passed else EXIT_FAIL


def cmd_lb_instance(opts: dict):
    from .hardness import indistinguishability_witness, lb_instance

    _need(opts, "n", "epsilon")
    n, eps, seed = int(opts["n"]), float(opts["epsilon"]), int(opts["seed"])
    result = {"instance": lb_instance(n, eps, seed).to_json()}
    if opts.get("witness"):
        delta = float(opts["delta"])
        m = opts.get("m")
        if m is None:
            m = 0.2 * math.sqrt(n * math.log(1.0 / delta)) / eps**2
        result["witness"] = indistinguishability_witness(n, eps, delta, float(m), int(opts["trials"]), seed).to_json()
    return result, EXIT_YES


def cmd_exact(opts: dict):
    from . import exact

    query = opts["query"]
    if query == "mu-uniform":
        _need(opts, "n", "m")
        value = exact.mu_uniform(int(opts["n"]), int(opts["m"]))
    elif query == "mu-t":
        _need(opts, "p", "m", "t")
        value = exact.mu_t_exact(named_distribution(str(opts["p"]), None), int(opts["m"]), float(opts["t"]))
    elif query == "hessian":
        _need(opts, "m", "t", "p")
        value = exact.hessian_entry(int(opts["m"]), float(opts["t"]), float(opts["p"]))
    elif query == "gap":
        _need(opts, "n", "m", "epsilon")
        gap = exact.expectation_gap_bound(int(opts["n"]), int(opts["m"]), float(opts["epsilon"]), float(opts["constant_C"]))
        return {"query": query, "value": gap.value, "regime": gap.regime.value, "constant_used": gap.constant_used}, EXIT_YES
    elif query == "threshold":
        _need(opts, "n", "m", "epsilon")
        n, m, eps = int(opts["n"]), int(opts["m"]), float(opts["epsilon"])
        value = exact.threshold(n, m, eps, float(opts["constant_C"]))
        return {"query": query, "value": value, "regime": exact.regime(n, m, eps).value}, EXIT_YES
    else:
        _need(opts, "form", "z", "B")
        if opts["form"] == "mcdiarmid":
            _need(opts, "m")
            value = exact.mcdiarmid_bound(float(opts["z"]), int(opts["m"]), float(opts["B"]))
        else:
            _need(opts, "sum_sigma2")
            value = exact.bernstein_mcdiarmid_bound(float(opts["z"]), float(opts["B"]), float(opts["sum_sigma2"]))
    return {"query": query, "value": value}, EXIT_YES


def parse_grid(text: str) -> list[tuple[int, float, float]]:
    cells = []
    for chunk in text.replace(" ", "").split(";"):
        if not chunk:
            continue
        n, e, d = chunk.split(",")
        cells.append((int(n), float(e), float(d)))
    return cells


def cmd_calibrate(opts: dict):
    from . import calibration as cal

    grid = opts.get("grid")
    if grid is None:
        grid = cal.DEFAULT_GRID
    elif isinstance(grid, str):
        grid = parse_grid(grid)
    kwargs = {
        "trials": cal.DEFAULT_TRIALS if opts.get("trials") is None else int(opts["trials"]),
        "seed": cal.DEFAULT_SEED if opts.get("seed") is None else int(opts["seed"]),
        "margin": cal.DEFAULT_MARGIN if opts.get("margin") is None else float(opts["margin"]),
    }
    opts["seed"] = kwargs["seed"]
    result = cal.calibrate(grid, log=lambda msg: print(msg, file=sys.stderr), **kwargs)
    result.save(opts["save"])
    out = result.to_json()
    out["saved_to"] = str(opts["save"])
    return out, EXIT_YES


COMMANDS = {
    "test-uniformity": cmd_test_uniformity,
    "test-identity": cmd_test_identity,
    "eval-worst-case": cmd_eval_worst_case,
    "dominance-check": cmd_dominance_check,
    "lb-instance": cmd_lb_instance,
    "exact": cmd_exact,
    "calibrate": cmd_calibrate,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        opts = merged_options(args)
        result, code = COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.commands[args.command].print_usage(sys.stderr)
        print(f"hctest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HCTestError, OSError, ValueError, KeyError) as exc:
        print(f"hctest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {
        "command": args.command,
        "version": __version__,
        "seed": opts.get("seed"),
        "config": {k: v for k, v in sorted(opts.items())},
        "result": result,
        "exit_code": code,
        "timing": {"duration_s": time.perf_counter() - start},
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=False)
    print(text)
    if opts.get("output"):
        Path(opts["output"]).write_text(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
