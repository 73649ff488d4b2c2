#!/usr/bin/env python3
"""Run every canned recipe and print a one-line verdict per claim.

Artifacts land in out/<recipe-name>/ (results.csv + manifest.json).
"""

import sys
import time
from pathlib import Path

from latscat.cli import run
from latscat.config import parse_config
from latscat.recipes import RECIPES, recipe_config


def main():
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    failures = 0
    for name in sorted(RECIPES):
        t0 = time.time()
        cfg = parse_config(recipe_config(name))
        code = run(cfg, out_dir=out_root / name, quiet=True)
        verdict = "ok" if code == 0 else f"exit {code}"
        print(f"{name:24s} {verdict:8s} {time.time() - t0:6.1f}s  {RECIPES[name]['claim']}")
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
