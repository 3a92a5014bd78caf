"""Virtual pinhole rectification for divergent fisheye stereo.

Camera models map rays to fisheye pixels and back; a virtual pinhole camera
(VPC) carved out of a fisheye view by rotation gives a distortion-free image
through a precomputed lookup table; two VPCs sharing one orientation turn an
orthogonally divergent fisheye rig into a row-aligned stereo pair whose depth
error can be measured on synthetic scenes.
"""

from .camera_models import (
    AtanModel,
    CameraModel,
    KannalaBrandtModel,
    MeiModel,
    PinholeIntrinsics,
    PinholeModel,
    ScaramuzzaModel,
    incidence_angle,
    load_model,
    model_from_dict,
    model_to_dict,
    project,
    save_model,
    unproject,
)
from .errors import *  # noqa: F401,F403
from .scene_sim import PlanarTarget, Scene, image_difference, make_texture, render_view
from .stereo_depth import (
    DepthErrorReport,
    Plane,
    PointCloud,
    compute_disparity,
    disparity_to_depth,
    evaluate_depth_error,
    fit_error_curve,
    reconstruct_pointcloud,
)
from .sweep import SweepConfig, run_sweep
from .vpc_rectify import (
    RemapTable,
    RigidTransform,
    StereoRig,
    VpcSpec,
    build_lut,
    load_lut,
    make_stereo_vpcs,
    rectified_rotation,
    remap,
    remap_direct,
    save_lut,
)

__version__ = "0.1.0"
