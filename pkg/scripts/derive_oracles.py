"""Derive the clairvoyant-bound fixture used by the acceptance suite.

For each scenario and each sweep Doppler far enough from the clutter notch,
average the output SCR (linear mean over trials, then dB) of the optimum
filter, the clairvoyant D3SR filter and, in the side-looking scene, the
solver-driven D3SR filter. The gaps are written to
tests/fixtures/oracles.json; rerun after changing the simulator or solver.

    python3 scripts/derive_oracles.py [--trials 20] [--out tests/fixtures/oracles.json]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from d3sr.config import load_config
from d3sr.dictionary import DictionaryGrid, build_dictionary
from d3sr.metrics import (
    clairvoyant_filter,
    doppler_distance,
    notch_dopplers,
    optimum_filter,
    output_scr,
    power_db,
    trial_rngs,
)
from d3sr.pipeline import make_soi, run_method
from d3sr.scene import synthesize_snapshot

ROOT = Path(__file__).resolve().parents[1]
NOTCH_CLEARANCE = 0.15


def ratio(flt, snap, cfg):
    r = output_scr(flt, snap, cfg)
    return r.numerator / r.denominator


def scenario(name: str, trials: int, with_solver: bool) -> dict:
    exp = load_config(ROOT / "configs" / f"{name}.cfg")
    cfg, base = exp.radar, exp.scene
    grid = DictionaryGrid.for_radar(cfg, *exp.rho)
    dictionary = build_dictionary(cfg, grid) if with_solver else None
    cell = base.target.range_cell
    notches = notch_dopplers(cfg, base, cell, base.target.spatial_freq(cfg))
    rows = []
    for fd in exp.metrics.doppler_axis():
        if min(doppler_distance(fd, n) for n in notches) < NOTCH_CLEARANCE:
            continue
        scene = base.with_target(normalized_doppler=float(fd))
        soi = make_soi(cfg, scene, exp.settings)
        acc = {"optimum": [], "clairvoyant": [], "d3sr": []}
        for t in range(trials):
            snap_rng, method_rng = trial_rngs(exp.seed, t)
            snap = synthesize_snapshot(cfg, scene, cell, True, snap_rng)
            acc["optimum"].append(ratio(optimum_filter(cfg, snap, soi, scene.noise_power), snap, cfg))
            acc["clairvoyant"].append(ratio(clairvoyant_filter(cfg, snap, soi, grid, exp.settings.loading), snap, cfg))
            if with_solver:
                res = run_method("d3sr-focuss", cfg, scene, snap, soi, dictionary, exp.settings, method_rng)
                acc["d3sr"].append(ratio(res.filter, snap, cfg))
        mean = {k: power_db(np.mean(v)) for k, v in acc.items() if v}
        row = {"doppler": float(fd), **{f"{k}_db": float(v) for k, v in mean.items()}}
        db_mean = {k: float(np.mean(power_db(np.array(v)))) for k, v in acc.items() if v}
        row["clairvoyant_gap_db"] = float(mean["optimum"] - mean["clairvoyant"])
        row["clairvoyant_gap_dbmean"] = db_mean["optimum"] - db_mean["clairvoyant"]
        if with_solver:
            row["solver_gap_db"] = float(mean["optimum"] - mean["d3sr"])
            row["solver_gap_dbmean"] = db_mean["optimum"] - db_mean["d3sr"]
        rows.append(row)
        print(name, {k: round(v, 2) for k, v in row.items()})
    return {"notch_dopplers": [float(n) for n in notches], "points": rows}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--out", default=str(ROOT / "tests" / "fixtures" / "oracles.json"))
    args = ap.parse_args()
    doc = {
        "trials": args.trials,
        "notch_clearance": NOTCH_CLEARANCE,
        "sidelook": scenario("sidelook", args.trials, with_solver=True),
        "nonsidelook": scenario("nonsidelook", args.trials, with_solver=False),
    }
    for name in ("sidelook", "nonsidelook"):
        pts = doc[name]["points"]
        doc[name]["max_clairvoyant_gap_db"] = max(p["clairvoyant_gap_db"] for p in pts)
        if name == "sidelook":
            doc[name]["max_solver_gap_db"] = max(p["solver_gap_db"] for p in pts)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print("wrote", args.out)


if __name__ == "__main__":
    main()
