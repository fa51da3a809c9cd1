"""End-to-end command line workflow on a small grid.

Writes a run configuration, solves, verifies the stored fields, and shows
the exit-code contract (0 pass / 2 diagnostic failure / 4 infeasible).

Run:  python demos/cli_workflow.py
"""

import json
import math
import tempfile
from pathlib import Path

from csvortex.cli import main

work = Path(tempfile.mkdtemp(prefix="csvortex_demo_"))
print(f"working under {work}")

plane_cfg = work / "plane.json"
plane_cfg.write_text(json.dumps({
    "schema_version": 1,
    "mode": "plane",
    "params": {"alpha": 1.0, "beta": 1.0, "species": 1, "lambda_bg": 2.0},
    "domain": {"kind": "box", "half_width": 8.0, "n": 64},
    "vortices": [{"species": 0, "x": 0.0, "y": 0.0}],
    "opts": {"tol": 1e-9},
}, indent=2))

out = work / "plane_run"
print("\n$ csvortex solve-plane --config plane.json --out plane_run")
code = main(["solve-plane", "--config", str(plane_cfg), "--out", str(out)])
print(f"exit code {code}; artifacts: "
      + ", ".join(sorted(p.name for p in out.iterdir())))

print("\n$ csvortex verify --config plane.json --out plane_run")
code = main(["verify", "--config", str(plane_cfg), "--out", str(out)])
print(f"exit code {code}")

print("\n$ csvortex decay-fit --config plane.json --out plane_run")
code = main(["decay-fit", "--config", str(plane_cfg), "--out", str(out)])
print(f"exit code {code}")

infeasible_cfg = work / "torus_infeasible.json"
infeasible_cfg.write_text(json.dumps({
    "schema_version": 1,
    "mode": "torus",
    "params": {"alpha": 0.5, "beta": 1.0, "sigma": 3.0},
    "domain": {"kind": "torus", "periods": [2 * math.pi, 2 * math.pi],
               "n": [32, 32]},
    "vortices": [{"species": 0, "x": math.pi, "y": math.pi}],
}, indent=2))
print("\n$ csvortex solve-torus --config torus_infeasible.json   "
      "# violates 8*pi*n <= alpha*beta*|Omega|")
code = main(["solve-torus", "--config", str(infeasible_cfg),
             "--out", str(work / "t")])
print(f"exit code {code} (4 = infeasible, margin reported above)")
