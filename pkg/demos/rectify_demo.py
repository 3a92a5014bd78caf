"""Carve distortion-free virtual pinhole views out of one fisheye image.

Renders a checkerboard wall through a 180 degree equidistant fisheye, then
rectifies three virtual cameras (straight ahead, 45 degrees right, 30 degrees
up) through reusable lookup tables and compares each with an ideal pinhole
render of the same view.

Run: python3 demos/rectify_demo.py [OUTPUT_DIR]
"""

import math
import sys
from pathlib import Path

import numpy as np

from vpcstereo import (PlanarTarget, RigidTransform, Scene, VpcSpec, build_lut, image_difference,
                       load_model, make_texture, remap, render_view, save_lut, tables)
from vpcstereo.camera_models import PinholeModel
from vpcstereo.image_io import save_image
from vpcstereo.vpc_rectify import rot_x, rot_y

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/rectify")
out.mkdir(parents=True, exist_ok=True)

fisheye = load_model(tables.table_path("sim_atan_400"))
# a large wall two metres ahead fills most of the hemisphere
scene = Scene(PlanarTarget.fronto_parallel(2.0, 8.0, make_texture("checkerboard", 1024)))
fish_img = render_view(scene, fisheye, supersample=2)
save_image(out / "fisheye.png", fish_img)

views = {"ahead": np.eye(3), "right45": rot_y(math.radians(45)), "up30": rot_x(math.radians(30))}
for name, rotation in views.items():
    vpc = VpcSpec.from_fov(math.radians(60), 200, 200, rotation)
    lut = build_lut(vpc, fisheye)
    save_lut(lut, out / f"{name}.lut")
    rectified = remap(fish_img, lut)
    truth = render_view(scene, PinholeModel(vpc.intrinsics), RigidTransform(rotation), supersample=2)
    save_image(out / f"{name}_vpc.png", rectified)
    save_image(out / f"{name}_pinhole.png", truth)
    diff = image_difference(rectified, truth, lut.valid)
    print(f"{name:<8} valid {lut.valid.mean():6.1%}  mean |VPC - pinhole| = {diff:.4f}")

print(f"images and tables written to {out}")
