#!/usr/bin/env python3
"""
Tabulate the sup join error for two 1-D centers as the steepness and the
center shift vary, and print it as an alpha x shift grid
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from config.config import OUT_DIR  # noqa: E402
from koopman_sill.error_analysis import shift_error_grid  # noqa: E402
from koopman_sill.model_io import write_table_csv  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alphas", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0, 20.0, 50.0])
    parser.add_argument("--shifts", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.25, 0.5, 1.0])
    parser.add_argument("--density", type=int, default=64)
    parser.add_argument("--output", default=str(OUT_DIR / "shift_error_grid.csv"))
    args = parser.parse_args()

    print("📊 COMPUTING SHIFT ERROR GRID...")
    rows = shift_error_grid(args.alphas, args.shifts, args.density)
    path = write_table_csv(args.output, rows)

    table = pd.DataFrame([(r.alpha, r.shift, r.sup_error) for r in rows], columns=["alpha", "shift", "sup_error"])
    print(table.pivot(index="alpha", columns="shift", values="sup_error").to_string(float_format=lambda v: f"{v:.3e}"))
    print(f"\n📁 Grid written to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
