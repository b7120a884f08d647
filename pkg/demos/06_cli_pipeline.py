"""The full pipeline through the command line.

Each step reads the same YAML file; outputs accumulate in one directory:
spectrum, CGPTs of the true particle, sweeps, measurements, recovery and
reconstruction.
"""

import os
import subprocess
import sys

here = os.path.dirname(os.path.abspath(__file__))
config = os.path.join(here, "pipeline.yaml")
out = os.path.join(here, "output", "pipeline")

for command in ("spectrum", "cgpt", "sweep", "measure", "recover", "reconstruct"):
    print(f"$ plasmosense {command} --config pipeline.yaml --out {os.path.relpath(out, here)}")
    result = subprocess.run([sys.executable, "-m", "plasmosense.cli", command, "--config", config,
                             "--out", out, "--workers", "2"], capture_output=True, text=True, check=False)
    lines = result.stdout.strip().splitlines()
    if len(lines) > 8:
        lines = lines[:4] + ["..."] + lines[-3:]
    print("\n".join(lines))
    if result.returncode:
        print(result.stderr, file=sys.stderr)
        sys.exit(result.returncode)
print(f"\nfiles in {out}:")
for name in sorted(os.listdir(out)):
    print("  ", name)
