"""Command line entry point: ``vecgp <subcommand> --config FILE --out DIR``."""
import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .runs import (
    run_chebyshev_check,
    run_convergence,
    run_divergence_certificate,
    run_kernel_check,
    run_power_map,
    run_sample,
)

log = logging.getLogger("vecgp")


def fmt(x):
    """Floats with 17 significant digits; NaN written as an empty field."""
    if isinstance(x, float):
        return "" if math.isnan(x) else "%.17g" % x
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _coords(d, prefix):
    return [f"{prefix}{i + 1}" for i in range(d)]


def cmd_convergence(cfg, out):
    res = run_convergence(cfg)
    write_csv(
        out / "convergence.csv",
        ["level", "N", "h", "q_sep", "rho", "norm_tag", "error", "observed_rate", "predicted_rate", "jitter"],
        ([r.level, r.N, r.h, r.q_sep, r.rho, r.norm_tag, r.error, r.observed_rate, r.predicted_rate, r.jitter]
         for r in res.rows),
    )
    if res.final_model is not None:
        res.final_model.save(out / "model.json")
    log.info("tau = %s, beta = %s", res.tau, res.beta)
    for tag, slope in res.fitted_rates.items():
        pred = next(r.predicted_rate for r in res.rows if r.norm_tag == tag)
        log.info("%-22s fitted rate %6.3f   predicted %6.3f", tag, slope, pred)
    trend = res.monotone_trend()
    if not all(trend.values()):
        log.warning("error did not decrease from coarsest to finest level: %s", trend)
    return 0 if all(trend.values()) else 1


def cmd_certificate(cfg, out):
    rep = run_divergence_certificate(cfg)
    write_csv(out / "certificate.csv", ["structure", "max_defect", "tolerance", "n_points", "pass"],
              [[rep.structure, rep.max_defect, rep.tolerance, rep.n_points, int(rep.passed)]])
    log.info("%s certificate: max scaled defect %.3e (tolerance %.1e) -> %s",
             rep.structure, rep.max_defect, rep.tolerance, "PASS" if rep.passed else "FAIL")
    return 0 if rep.passed else 1


def cmd_chebyshev(cfg, out):
    rows, model = run_chebyshev_check(cfg)
    n = cfg.chebyshev.n_samples
    d = model.dim
    write_csv(
        out / "chebyshev.csv",
        ["point_id", *_coords(d, "x"), "component", "eps", "variance", "empirical", "bound", "pass"],
        ([r.point_id, *map(float, r.x), r.component, r.eps, r.variance, r.empirical, r.bound, int(r.passed(n))]
         for r in rows),
    )
    ok = all(r.passed(n) for r in rows)
    vacuous = sum(r.bound > 1 for r in rows)
    log.info("chebyshev: %d checks, %d with vacuous bound, all pass: %s", len(rows), vacuous, ok)
    return 0 if ok else 1


def cmd_powermap(cfg, out):
    res = run_power_map(cfg)
    d = res.points.shape[1]
    write_csv(out / "powermap.csv", [*_coords(d, "x"), "lambda_max"],
              ([*map(float, p), float(v)] for p, v in zip(res.points, res.lambda_max)))
    write_csv(out / "powermap_levels.csv", ["level", "N", "h", "max_lambda_max"],
              ([i, n, h, m] for i, (n, h, m) in enumerate(zip(res.counts, res.fill_distances, res.level_maxima))))
    decreasing = all(b < a for a, b in zip(res.level_maxima, res.level_maxima[1:]))
    log.info("power function maxima per level: %s (strictly decreasing: %s)",
             ", ".join("%.3e" % m for m in res.level_maxima), decreasing)
    if res.sup_bound_violations is not None:
        log.info("sup-error bound violations: %d (worst error/bound ratio %.3f)",
                 res.sup_bound_violations, res.sup_bound_ratio)
    return 0 if decreasing and not res.sup_bound_violations else 1


def cmd_sample(cfg, out):
    pts, samples = run_sample(cfg)
    d = pts.shape[1]
    rows = []
    for sid, s in enumerate(samples):
        for p, v in zip(pts, s.values):
            rows.append([sid, *map(float, p), *map(float, v)])
    write_csv(out / "samples.csv", ["sample_id", *_coords(d, "x"), *_coords(d, "v")], rows)
    log.info("wrote %d samples of %s on %d points", len(samples), samples[0].source, len(pts))
    return 0


def cmd_kernel_check(cfg, out):
    rows = run_kernel_check(cfg)
    write_csv(out / "kernel_check.csv", ["check", "value", "tolerance", "pass"],
              ([r.check, r.value, r.tolerance, int(r.passed)] for r in rows))
    for r in rows:
        log.info("%-30s %.3e <= %.1e  %s", r.check, r.value, r.tolerance, "PASS" if r.passed else "FAIL")
    return 0 if all(r.passed for r in rows) else 1


COMMANDS = {
    "convergence": cmd_convergence,
    "certificate": cmd_certificate,
    "chebyshev": cmd_chebyshev,
    "powermap": cmd_powermap,
    "sample": cmd_sample,
    "kernel-check": cmd_kernel_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="vecgp", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="TOML experiment config (defaults used if omitted)")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory for CSV files")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stdout, force=True)
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise SystemExit("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    args.out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
