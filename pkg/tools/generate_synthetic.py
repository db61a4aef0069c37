"""
Generate a synthetic regression CSV for trying out fit / predict / benchmark.

Same generator as `blrs_regression.py gen-synthetic`; this wrapper only
exists so the file can be produced without going through the main CLI.

Usage:
    python tools/generate_synthetic.py --out syn.csv                  # defaults
    python tools/generate_synthetic.py --rows 5000 --features 5 --out big.csv
    python tools/generate_synthetic.py --help                         # show all options
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.synthetic import write_synthetic_csv  # noqa: E402

DEFAULTS = {
    "rows": 500,
    "features": 10,
    "alpha_true": 1.0,
    "beta_true": 100.0,
    "seed": 7,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic BLRS regression dataset")
    parser.add_argument("--rows", type=int, default=DEFAULTS["rows"])
    parser.add_argument("--features", type=int, default=DEFAULTS["features"])
    parser.add_argument("--alpha-true", type=float, default=DEFAULTS["alpha_true"])
    parser.add_argument("--beta-true", type=float, default=DEFAULTS["beta_true"])
    parser.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    try:
        write_synthetic_csv(args.out, args.rows, args.features, args.alpha_true, args.beta_true, args.seed)
    except (ValueError, OSError) as e:
        print(f"ERROR: {e}")
        return 1
    print(f"Wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
