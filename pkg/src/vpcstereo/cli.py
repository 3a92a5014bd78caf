"""``vpcstereo`` command-line front end.

Every subcommand reads JSON parameter files and PNG images and writes its
results below ``--out-dir`` (default: the working directory). Input paths are
taken as given. Camera arguments accept either a parameter file or
``builtin:NAME`` for one of the shipped tables.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import tables
from .camera_models import (
    CameraModel,
    PinholeIntrinsics,
    PinholeModel,
    load_model,
    model_to_dict,
)
from .errors import DimensionMismatchError, ModelFileError, VpcError
from .image_io import load_image, load_mask, save_image, save_mask
from .scene_sim import PlanarTarget, Scene, image_difference, make_texture, render_view
from .sweep import SweepConfig, run_sweep
from .vpc_rectify import (
    RemapTable,
    RigidTransform,
    VpcSpec,
    build_lut,
    load_lut,
    remap,
    remap_direct,
    rot_x,
    rot_y,
    rot_z,
    save_lut,
    vpc_source_coords,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger("vpcstereo")

_SCENE_KEYS = {"distance", "distance_baselines", "baseline", "texture", "extent", "background",
               "seed", "texture_size"}


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def conv(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not value > 0 or not math.isfinite(value):
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return value
    return conv


def _model(ref: str) -> CameraModel:
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in tables.available():
            raise ModelFileError(f"no builtin table {name!r}; choose from {tables.available()}")
        return load_model(tables.table_path(name))
    path = Path(ref)
    if not path.is_file():
        raise ModelFileError(f"camera-parameter file not found: {path}")
    return load_model(path)


def _rotation(args) -> np.ndarray:
    """Yaw about y (towards +x), then pitch about x (towards -y, up), then roll about z."""
    yaw, pitch, roll = (math.radians(a) for a in (args.yaw, args.pitch, args.roll))
    return rot_y(yaw) @ rot_x(pitch) @ rot_z(roll)


def _vpc(args) -> VpcSpec:
    if args.fov >= 180:
        raise UsageError("VPC field of view must be below 180 degrees")
    return VpcSpec.from_fov(math.radians(args.fov), args.width, args.height, _rotation(args))


def _out(args, name: str | Path) -> Path:
    path = Path(args.out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _add_orientation(p):
    p.add_argument("--yaw", type=float, default=0.0, help="degrees, positive turns right")
    p.add_argument("--pitch", type=float, default=0.0, help="degrees, positive looks up")
    p.add_argument("--roll", type=float, default=0.0, help="degrees about the optical axis")


def _add_vpc(p, required: bool):
    p.add_argument("--fov", type=_positive(float), required=required,
                   help="VPC horizontal field of view in degrees")
    p.add_argument("--width", type=_positive(int), default=200, help="VPC width in pixels")
    p.add_argument("--height", type=_positive(int), default=200, help="VPC height in pixels")
    _add_orientation(p)


def _check_image_shape(image: np.ndarray, model: CameraModel, what: str):
    if image.shape != (model.height, model.width):
        raise DimensionMismatchError(f"{what} is {image.shape[1]}x{image.shape[0]} but the camera "
                                     f"model is {model.width}x{model.height}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_lut(args) -> int:
    model = _model(args.model)
    if args.image:
        _check_image_shape(load_image(args.image), model, args.image)
    vpc = _vpc(args)
    lut = build_lut(vpc, model, workers=args.workers)
    out = _out(args, args.output)
    save_lut(lut, out)
    print(f"wrote {out} ({lut.width}x{lut.height}, {int(lut.valid.sum())} valid entries)")
    if args.check:
        stored = load_lut(out)
        q = vpc_source_coords(vpc, model)
        direct = RemapTable(q[..., 0], q[..., 1])
        if stored != direct:
            raise NumericalFailure("stored table differs from direct evaluation")
        print("check: pass")
    return EXIT_OK


def cmd_rectify(args) -> int:
    model = _model(args.model)
    image = load_image(args.input)
    _check_image_shape(image, model, args.input)
    if args.lut:
        lut = load_lut(args.lut, source_shape=(model.height, model.width))
        out, mask = remap(image, lut), lut.valid
    else:
        if args.fov is None:
            raise UsageError("rectify needs --lut or --fov")
        out, mask = remap_direct(image, _vpc(args), model)
    dest = _out(args, args.output)
    mask_dest = _out(args, args.mask or dest.with_name(dest.stem + "_mask.png").name)
    save_image(dest, out)
    save_mask(mask_dest, mask)
    print(f"wrote {dest} and {mask_dest} ({int(mask.sum())} valid pixels)")
    return EXIT_OK


def _scene(path: Path) -> Scene:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: expected a JSON object")
    unknown = set(doc) - _SCENE_KEYS
    if unknown:
        raise ModelFileError(f"{path}: unknown scene keys {sorted(unknown)}")
    if "distance" in doc:
        z = float(doc["distance"])
    elif "distance_baselines" in doc:
        z = float(doc["distance_baselines"]) * float(doc.get("baseline", 0.2))
    else:
        raise ModelFileError(f"{path}: scene needs 'distance' or 'distance_baselines'")
    if not z > 0:
        raise ModelFileError(f"{path}: distance must be positive")
    tex = make_texture(doc.get("texture", "checkerboard"), int(doc.get("texture_size", 512)),
                       int(doc.get("seed", 0)))
    target = PlanarTarget.fronto_parallel(z, float(doc.get("extent", z)), tex)
    return Scene(target, float(doc.get("background", 0.0)))


def cmd_render(args) -> int:
    scene = _scene(Path(args.scene))
    if args.model:
        model = _model(args.model)
    elif args.fov is not None:
        if args.fov >= 180:
            raise UsageError("pinhole field of view must be below 180 degrees")
        model = PinholeModel(PinholeIntrinsics.from_fov(math.radians(args.fov), args.width,
                                                        args.height))
    else:
        raise UsageError("render needs a camera model or --fov for a pinhole camera")
    pose = RigidTransform(_rotation(args), np.asarray(args.position, dtype=np.float64))
    image = render_view(scene, model, pose, supersample=args.supersample)
    dest = _out(args, args.output)
    save_image(dest, image)
    print(f"wrote {dest} ({model.width}x{model.height})")
    return EXIT_OK


def cmd_diff(args) -> int:
    a, b = load_image(args.a), load_image(args.b)
    mask = load_mask(args.mask) if args.mask else None
    print(f"{image_difference(a, b, mask):.6f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = SweepConfig.load(args.config)
    if args.out_dir_given:
        cfg.output_dir = Path(args.out_dir)
    result = run_sweep(cfg)
    failed = sum(c.report is None for c in result.cells)
    print(f"{len(result.cells)} cells, {failed} failed; results in {cfg.output_dir}")
    for name, row in result.rms_table().items():
        cells = "  ".join(f"{d:g}b={v:.4f}" for d, v in row.items())
        print(f"  {name:<12} rms_m  {cells}")
    if result.all_failed:
        raise NumericalFailure("every sweep cell failed")
    return EXIT_OK


def cmd_models_validate(args) -> int:
    status = EXIT_OK
    rng = np.random.default_rng(0)
    for ref in args.files:
        try:
            model = _model(ref)
        except (ModelFileError, OSError) as exc:
            print(f"{ref}: INVALID: {exc}")
            status = max(status, EXIT_DATA)
            continue
        # round trip a handful of rays inside the field of view
        theta = rng.uniform(0, 0.95 * min(model.half_fov, math.radians(89)), 200)
        phi = rng.uniform(-math.pi, math.pi, 200)
        rays = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
                         np.cos(theta)], axis=-1)
        back = model.unproject(model.project(rays, check=False), check=False)
        back /= np.linalg.norm(back, axis=-1, keepdims=True)
        err = np.arccos(np.clip(np.sum(back * rays, axis=-1), -1, 1))
        doc = model_to_dict(model)
        summary = f"{doc['model']} {model.width}x{model.height} fov {math.degrees(model.fov):g} deg"
        if not np.all(err < 1e-6):
            print(f"{ref}: FAILED round trip ({summary}, max error {np.nanmax(err):.3g} rad)")
            status = max(status, EXIT_NUMERIC)
        else:
            print(f"{ref}: ok ({summary})")
    return status


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out-dir", default=argparse.SUPPRESS,
                        help="directory that output paths are relative to (default: .)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress")
    parser = _Parser(prog="vpcstereo", parents=[common],
                     description="Virtual pinhole rectification and divergent fisheye stereo.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("lut", parents=[common], help="build and save a VPC lookup table")
    p.add_argument("model", help="camera-parameter file or builtin:NAME")
    _add_vpc(p, required=True)
    p.add_argument("-o", "--output", default="vpc.lut", help="table file (default: vpc.lut)")
    p.add_argument("--check", action="store_true",
                   help="reload the file and compare with direct evaluation")
    p.add_argument("--image", help="fisheye image whose size must match the camera model")
    p.add_argument("--workers", type=_positive(int), default=1)
    p.set_defaults(func=cmd_lut)

    p = sub.add_parser("rectify", parents=[common], help="rectify a fisheye PNG through a VPC")
    p.add_argument("model", help="camera-parameter file or builtin:NAME")
    p.add_argument("input", help="fisheye PNG")
    p.add_argument("--lut", help="lookup table from 'vpcstereo lut'")
    _add_vpc(p, required=False)
    p.add_argument("-o", "--output", default="rectified.png")
    p.add_argument("--mask", help="validity mask PNG (default: <output>_mask.png)")
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("render", parents=[common], help="ray-cast a textured plane through a camera")
    p.add_argument("scene", help="scene JSON: distance or distance_baselines (+baseline), "
                                 "texture, extent, background, seed, texture_size")
    p.add_argument("model", nargs="?", help="camera-parameter file or builtin:NAME")
    p.add_argument("--fov", type=_positive(float),
                   help="render through an ideal pinhole with this field of view instead")
    p.add_argument("--width", type=_positive(int), default=200)
    p.add_argument("--height", type=_positive(int), default=200)
    _add_orientation(p)
    p.add_argument("--position", type=float, nargs=3, default=(0.0, 0.0, 0.0),
                   metavar=("X", "Y", "Z"), help="camera centre in metres")
    p.add_argument("--supersample", type=_positive(int), default=1)
    p.add_argument("-o", "--output", default="render.png")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("diff", parents=[common], help="mean absolute difference of two PNGs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("mask", nargs="?", help="optional mask PNG (white = compared)")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("sweep", parents=[common], help="run the depth-quality sweep")
    p.add_argument("config", help="sweep configuration JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("models", parents=[common], help="camera-parameter file utilities")
    msub = p.add_subparsers(dest="models_command", parser_class=_Parser, metavar="ACTION")
    msub.required = True
    v = msub.add_parser("validate", parents=[common], help="load and round-trip check parameter files")
    v.add_argument("files", nargs="+")
    v.set_defaults(func=cmd_models_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    args.out_dir_given = hasattr(args, "out_dir")
    if not args.out_dir_given:
        args.out_dir = "."
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vpcstereo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"vpcstereo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"vpcstereo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VpcError, ValueError, OSError) as exc:
        print(f"vpcstereo: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
