"""Build (or top up) the desk-scale pulse library used by the studies.

Every reference campaign is run once and stored as ``pulse_library/<name>.npz``.
Existing files with matching settings are reused, so the script can be
interrupted and restarted.

    python demos/build_pulse_library.py [--only PREFIX] [--jobs N]
"""

import argparse
import time

from robustpulse.experiments.reference import library_dir, reference_cell, reference_cells

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--only", default="", help="build only names starting with this prefix")
parser.add_argument("--jobs", type=int, default=1)
args = parser.parse_args()

print(f"library: {library_dir().resolve()}")
for name in reference_cells():
    if not name.startswith(args.only):
        continue
    t0 = time.perf_counter()
    cell = reference_cell(name, jobs=args.jobs)
    inf = cell.worst_case_infidelities()
    print(f"{name:40s} starts={len(inf):3d} best={inf.min():.2e} "
          f"median={sorted(inf)[len(inf) // 2]:.2e} ({time.perf_counter() - t0:.0f} s)",
          flush=True)
