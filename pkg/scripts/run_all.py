"""Run every config in configs/ through the CLI and print the summaries.

    python3 scripts/run_all.py [PATTERN]
"""

import sys
from pathlib import Path

from marketgames.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(pattern: str = "*.yaml") -> int:
    failures = 0
    for cfg in sorted((ROOT / "configs").glob(pattern)):
        print(f"== {cfg.name}")
        failures += main(["run", str(cfg)]) != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:2]))
