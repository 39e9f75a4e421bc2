"""Quick profile end to end, plus the headline volume/error relationship.

Usage: python scripts/run_quick.py [--out DIR] [--seed N]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from maupscope.config import quick_config
from maupscope.metrics import diagnostics_from_csv
from maupscope.pipeline import global_table, run_pipeline


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    cfg = quick_config(args.out, seed=args.seed)
    t0 = time.perf_counter()
    store = run_pipeline(cfg)
    elapsed = time.perf_counter() - t0

    print(global_table(store))
    print()
    for combo in store.combos():
        diags = diagnostics_from_csv(store.read_text(f"{combo}/diagnostics.csv"))
        volume = np.array([d.mean_volume for d in diags])
        mae = np.array([d.mean_abs_error for d in diags])
        r = float(np.corrcoef(mae, volume)[0, 1])
        nonzero = int((volume > 0).sum())
        print(f"{combo:<16} corr(mae, volume) = {r:+.4f}   active cells {nonzero}/{len(diags)}")
    print()
    print(f"sealed {store.run_id} at {store.root} in {elapsed:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
