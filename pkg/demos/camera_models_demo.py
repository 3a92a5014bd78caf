"""Project and back-project one ray through every shipped fisheye calibration.

Run: python3 demos/camera_models_demo.py
"""

import math

import numpy as np

from vpcstereo import incidence_angle, load_model, tables

# a ray 60 degrees off the optical axis, pointing right and slightly down
theta, phi = math.radians(60), math.radians(20)
ray = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
print(f"ray incidence angle: {math.degrees(incidence_angle(ray)):.3f} deg\n")

print(f"{'table':<28}{'pixel (u, v)':>24}{'radius px':>12}{'round trip rad':>16}")
for name in tables.available():
    model = load_model(tables.table_path(name))
    pix = model.project(ray)
    back = model.unproject(pix)
    err = math.acos(min(1.0, float(back @ ray)))
    radius = math.hypot(pix[0] - model.intrinsics.cx, pix[1] - model.intrinsics.cy)
    print(f"{name:<28}{f'({pix[0]:.2f}, {pix[1]:.2f})':>24}{radius:>12.2f}{err:>16.2e}")

# the equidistant law: radius grows linearly with the incidence angle
atan = load_model(tables.table_path("table1_atan"))
for deg in (15, 30, 45, 60, 75, 90):
    t = math.radians(deg)
    pix = atan.project([math.sin(t), 0.0, math.cos(t)])
    print(f"ATAN {deg:>2} deg -> radius {pix[0] - atan.intrinsics.cx:8.2f} px "
          f"(f * theta = {atan.intrinsics.fx * t:8.2f})")
