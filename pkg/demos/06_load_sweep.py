"""A small load sweep on the outdoor preset, with CSV export.

Sweeps concurrent calls against background load, ten seeds per cell, and
prints the resulting PDR and delay surfaces with 95% confidence
intervals. A trend check then verifies that PDR does not climb as load
grows, modulo CI overlap. The run takes a minute or two.
"""

import tempfile
from pathlib import Path

from meshsim import load_preset
from meshsim.harness import count_trend_violations, export, sweep

CALLS_GRID = [1, 5]
BG_GRID = [2, 10, 20]
SEEDS = range(1, 11)


def main():
    scn = load_preset("outdoor7")
    print(f"scenario {Path(scn.name).stem}: {len(scn.topology.nodes)} nodes, "
          f"{len(scn.topology.links)} links")
    print(f"grid: calls {CALLS_GRID} x background {BG_GRID}, "
          f"{len(list(SEEDS))} seeds per cell\n")

    result = sweep(scn, CALLS_GRID, BG_GRID, SEEDS)

    print("calls  bg   pdr             delay (ms)")
    for (calls, bg) in sorted(result.cells):
        cell = result.cells[(calls, bg)]
        pdr_m, pdr_h, _ = cell["pdr"]
        d_m, d_h, _ = cell["delay"]
        print(f"{calls:5d} {bg:3d}   {pdr_m:.4f} +- {pdr_h:.4f}"
              f"   {d_m * 1e3:6.2f} +- {d_h * 1e3:.2f}")

    print("\ntrend check (PDR should not rise with background load):")
    for calls in CALLS_GRID:
        v = count_trend_violations(result, calls, BG_GRID, metric="pdr")
        print(f"  {calls} calls: {v} violations")

    out = Path(tempfile.mkdtemp()) / "sweep.csv"
    written = export(result, "csv", out)
    print(f"\nexported {written[0]} "
          f"({sum(1 for _ in open(written[0])) - 1} data rows)")


if __name__ == "__main__":
    main()
