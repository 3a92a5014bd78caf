"""One stereo measurement with an orthogonally divergent fisheye rig.

Two 180 degree fisheyes 20 cm apart look 45 degrees outwards each. A rectified
pair of virtual pinhole cameras is carved from their shared field of view, a
textured wall at 2 m is matched and triangulated, and the depth error is
measured against the known wall.

Run: python3 demos/stereo_depth_demo.py [OUTPUT_DIR]
"""

import math
import sys
from pathlib import Path

import numpy as np

from vpcstereo import (Plane, PlanarTarget, Scene, StereoRig, compute_disparity, disparity_to_depth,
                       evaluate_depth_error, load_model, make_stereo_vpcs, make_texture,
                       reconstruct_pointcloud, remap_direct, render_view, tables)
from vpcstereo.image_io import save_image
from vpcstereo.stereo_depth import write_ply

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/stereo")
out.mkdir(parents=True, exist_ok=True)

fisheye = load_model(tables.table_path("sim_atan_400"))
rig = StereoRig.divergent(fisheye, baseline=0.2, divergence=math.pi / 2)
left_vpc, right_vpc = make_stereo_vpcs(rig, math.radians(60), (200, 200))

# the rectified pair looks along the world z axis; put the wall there
z = 10 * rig.baseline
scene = Scene(PlanarTarget.fronto_parallel(z, z + rig.baseline, make_texture("noise", 512, seed=1)))

left, lmask = remap_direct(render_view(scene, fisheye, rig.left_pose), left_vpc, fisheye)
right, rmask = remap_direct(render_view(scene, fisheye, rig.right_pose), right_vpc, fisheye)
save_image(out / "left.png", left)
save_image(out / "right.png", right)

disp = compute_disparity(left, right, lmask, rmask, max_disparity=48)
expected = left_vpc.intrinsics.fx * rig.baseline / z
print(f"disparity: {disp.valid.mean():.1%} valid, median {np.nanmedian(disp.disparity):.2f} px "
      f"(ideal {expected:.2f} px)")

depth = disparity_to_depth(disp, left_vpc.intrinsics.fx, rig.baseline)
cloud = reconstruct_pointcloud(depth, left_vpc.intrinsics)
write_ply(out / "cloud.ply", cloud)

# the wall in the left VPC frame: this symmetric rig's rectified orientation is
# the world orientation, so only the left camera centre has to be subtracted
plane = Plane(np.array([0.0, 0.0, z]) - rig.left_pose.translation, [0.0, 0.0, -1.0])
report = evaluate_depth_error(cloud, plane, baseline=rig.baseline)
print(f"wall at {report.distance_baselines:g} baselines: rms {1000 * report.rms_m:.1f} mm, "
      f"stddev {1000 * report.stddev_m:.1f} mm over {report.n_points} points")
print(f"point cloud written to {out / 'cloud.ply'}")
