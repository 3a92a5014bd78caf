"""Depth error against distance: rectified fisheye pair versus ideal pinholes.

Runs a reduced version of the default sweep (three distances, one texture)
and prints the error table with its quadratic trend.

Run: python3 demos/sweep_demo.py [OUTPUT_DIR]
"""

import sys

from vpcstereo import SweepConfig, fit_error_curve, run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out/sweep"
cfg = SweepConfig.from_dict({"distances_baselines": [5, 10, 15, 20], "textures": ["noise"],
                             "output_dir": out, "write_ply": False})
result = run_sweep(cfg)

for name, row in result.rms_table().items():
    c0, c1, c2 = fit_error_curve(row.items())
    cells = "  ".join(f"{d:g}b {1000 * v:6.1f} mm" for d, v in row.items())
    print(f"{name:<10} {cells}   fit {c0:.4f} + {c1:.4f} x + {c2:.6f} x^2")
print(f"per-cell results in {cfg.output_dir / 'errors.csv'}")
