#!/usr/bin/env python3
"""Run every bundled config into <out-root>/<config-name>/ and summarize.

Usage: run_all_configs.py [out-root]   (default: ./out next to the repo)
"""

import sys
from pathlib import Path

from memvisco.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out"
    failures = []
    for cfg in sorted((ROOT / "configs").glob("*.cfg")):
        out = out_root / cfg.stem
        code = main(["run", str(cfg), "--out", str(out)])
        print(f"{cfg.name}: exit {code}")
        if code != 0:
            failures.append(cfg.name)
    if failures:
        raise SystemExit(f"failed: {', '.join(failures)}")
    print("all configs passed")
