"""Run every subcommand on every config in configs/, writing to results/<config>/<command>/."""
import argparse
from pathlib import Path

from vecgp.experiments.cli import COMMANDS, main

ROOT = Path(__file__).resolve().parent.parent


def run(config_dir, out_dir, seed=None):
    status = {}
    for cfg in sorted(config_dir.glob("*.toml")):
        for cmd in COMMANDS:
            argv = [cmd, "--config", str(cfg), "--out", str(out_dir / cfg.stem / cmd), "--quiet"]
            if seed is not None:
                argv += ["--seed", str(seed)]
            status[(cfg.stem, cmd)] = main(argv)
    return status


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    for (name, cmd), code in run(args.configs, args.out, args.seed).items():
        print(f"{name:24s} {cmd:14s} {'ok' if code == 0 else 'check failed'}")
