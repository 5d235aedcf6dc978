"""Observed convergence rates across kernel families and modes.

Prints, for each case, the fitted log-log slope of each error norm next
to the predicted exponent min(beta, tau) - s - d (1/2 - 1/q)_+.
"""
import argparse
import math

from vecgp.experiments.config import ExperimentConfig, FieldConfig, KernelConfig, PointsConfig
from vecgp.experiments.runs import run_convergence

CASES = [
    KernelConfig("matern", nu=1.5, kappa=3.0),
    KernelConfig("matern", nu=2.5, kappa=3.0),
    KernelConfig("matern", nu=3.5, kappa=3.0),
    KernelConfig("wendland", nu=None, k=2, kappa=1.0),
    KernelConfig("matern", nu=2.5, kappa=3.0, mode="curl_free"),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ladder", type=int, nargs="+", default=[5, 9, 17, 33])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for kc in CASES:
        cfg = ExperimentConfig(seed=args.seed, kernel=kc, field=FieldConfig(kind="kernel_combo"),
                               points=PointsConfig(ladder=args.ladder))
        res = run_convergence(cfg)
        label = f"{kc.family}({kc.nu if kc.family == 'matern' else kc.k}) {kc.mode}"
        for tag, slope in res.fitted_rates.items():
            pred = next(r.predicted_rate for r in res.rows if r.norm_tag == tag)
            flag = "" if math.isnan(pred) or slope >= pred - 0.5 else "  below prediction"
            print(f"{label:32s} {tag:22s} observed {slope:6.3f} predicted {pred:6.3f}{flag}")


if __name__ == "__main__":
    main()
