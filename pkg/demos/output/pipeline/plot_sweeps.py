"""Plot resonance sweeps written by `plasmosense sweep` (needs matplotlib)."""
import csv
import glob
import json
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "sweep_summary.json")) as fh:
    summary = json.load(fh)
fig, ax = plt.subplots()
for path in sorted(glob.glob(os.path.join(here, "sweep_*.csv"))):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r["re_lambda"]) for r in rows]
    y = [float(r["abs_M11"]) for r in rows]
    ax.semilogy(x, y, lw=0.8)
for rec in summary["positions"]:
    if rec["status"] == "ok":
        ax.axvline(rec["lambda_r"], color="k", lw=0.3)
ax.set_xlabel("Re lambda_D2")
ax.set_ylabel("|M11|")
fig.savefig(os.path.join(here, "sweeps.png"), dpi=150)
