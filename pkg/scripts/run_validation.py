"""Run the validation checks and write validate-report.json.

Usage: python3 scripts/run_validation.py [--out results] [--quick]
"""

import sys

from fcsreadout.cli import main

if __name__ == "__main__":
    sys.exit(main(["validate", *sys.argv[1:]]))
