#!/usr/bin/env python3
"""Regenerate crates/core/data/gamma_reference.json.

Evaluates Gamma(z) with mpmath at 30 significant digits on a fixed grid
covering the strip the library promises (0.5 <= Re z <= 50, |Im z| <= 50)
plus points in the reflection region Re z < 0.5. The JSON file is checked
in; the test suite only reads it, it never runs this script.
"""

import json
import pathlib

import mpmath as mp

mp.mp.dps = 40

POINTS = []
# right half-plane grid
for re in [0.5, 0.75, 1.0, 1.5, 2.0, 3.5, 5.0, 8.0, 12.5, 20.0, 35.0, 50.0]:
    for im in [0.0, 0.25, 1.0, 3.0, 10.0, 27.5, 50.0, -1.0, -10.0, -50.0]:
        POINTS.append((re, im))
# reflection region (Re z < 0.5), avoiding the poles at 0, -1, -2, ...
for re in [0.25, 0.1, -0.5, -1.5, -2.7, -5.3, -9.1]:
    for im in [0.0, 0.5, 2.0, -4.0, 15.0]:
        POINTS.append((re, im))

records = []
for re, im in POINTS:
    z = mp.mpc(re, im)
    g = mp.gamma(z)
    records.append(
        {
            "z_re": mp.nstr(mp.mpf(re), 30),
            "z_im": mp.nstr(mp.mpf(im), 30),
            "gamma_re": mp.nstr(g.real, 30),
            "gamma_im": mp.nstr(g.imag, 30),
        }
    )

out = pathlib.Path(__file__).resolve().parents[1] / "crates/core/data/gamma_reference.json"
out.write_text(json.dumps(records, indent=1) + "\n")
print(f"wrote {len(records)} records to {out}")
