"""Depth-quality sweep over target distances, rectification models and textures.

For every cell (distance, model, texture) the two fisheye views of a
fronto-parallel textured plane are rendered through the rig's own cameras,
rectified through the model's virtual pinhole pair, matched, triangulated and
scored. A pinhole stereo pair placed exactly where the VPCs are, with the same
intrinsics, runs alongside under the model name ``reference``.

The target's half extent grows with its distance so the texture keeps the
same angular size in every cell.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import tables
from .camera_models import CameraModel, PinholeIntrinsics, PinholeModel, load_model
from .errors import ModelFileError, VpcError
from .scene_sim import TEXTURES, PlanarTarget, Scene, make_texture, render_view
from .stereo_depth import (
    DepthErrorReport,
    Plane,
    ReportWriter,
    compute_disparity,
    disparity_to_depth,
    evaluate_depth_error,
    fit_error_curve,
    reconstruct_pointcloud,
    write_ply,
)
from .vpc_rectify import (
    RemapTable,
    RigidTransform,
    StereoRig,
    VpcSpec,
    build_lut,
    make_stereo_vpcs,
    rectified_rotation,
    remap,
)

logger = logging.getLogger(__name__)

__all__ = ["SweepConfig", "ModelPair", "SweepResult", "CellResult", "run_sweep", "REFERENCE"]

REFERENCE = "reference"

_CONFIG_KEYS = {"rig", "models", "vpc", "distances_baselines", "textures", "matcher", "target",
                "vicinity_fraction", "seed", "output_dir", "write_ply"}


@dataclass(frozen=True)
class ModelPair:
    name: str
    left: CameraModel
    right: CameraModel


@dataclass
class SweepConfig:
    """Everything a sweep needs; build from JSON with :meth:`from_dict`/:meth:`load`."""

    left_camera: CameraModel
    right_camera: CameraModel
    models: list[ModelPair]
    baseline: float = 0.20
    divergence_deg: float = 90.0
    vpc_fov_deg: float = 60.0
    vpc_width: int = 200
    vpc_height: int = 200
    distances_baselines: list[float] = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0])
    textures: list[str] = field(default_factory=lambda: list(TEXTURES))
    block_size: int = 9
    max_disparity: int = 64
    uniqueness: float = 1.05
    extent_factor: float = 1.0
    texture_size: int = 512
    background: float = 0.0
    supersample: int = 1
    vicinity_fraction: float = 0.2
    seed: int = 0
    output_dir: Path = Path("sweep_out")
    write_ply: bool = True

    def __post_init__(self):
        if not self.distances_baselines or any(d <= 0 for d in self.distances_baselines):
            raise ValueError("distances must be positive")
        if self.baseline <= 0:
            raise ValueError("baseline must be positive")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")
        unknown = [t for t in self.textures if t not in TEXTURES]
        if unknown:
            raise ValueError(f"unknown textures {unknown}")
        names = [m.name for m in self.models]
        if REFERENCE in names or len(set(names)) != len(names):
            raise ValueError("model names must be unique and must not be 'reference'")

    @classmethod
    def from_dict(cls, doc: dict[str, Any], base_dir: str | Path = ".") -> "SweepConfig":
        base = Path(base_dir)
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        rig = doc.get("rig", {})
        bad = set(rig) - {"left", "right", "baseline", "divergence_deg"}
        if bad:
            raise ValueError(f"unknown rig keys: {sorted(bad)}")
        left = _load(rig.get("left", "builtin:sim_atan_400"), base)
        right = _load(rig.get("right", rig.get("left", "builtin:sim_atan_400")), base)
        models = []
        for entry in doc.get("models", []):
            bad = set(entry) - {"name", "left", "right"}
            if bad:
                raise ValueError(f"unknown model entry keys: {sorted(bad)}")
            m_left = _load(entry["left"], base)
            m_right = _load(entry.get("right", entry["left"]), base)
            models.append(ModelPair(entry.get("name", m_left.kind), m_left, m_right))
        if not models:
            models = [ModelPair(left.kind, left, right)]
        vpc = doc.get("vpc", {})
        matcher = doc.get("matcher", {})
        target = doc.get("target", {})
        for name, sub, keys in (("vpc", vpc, {"fov_deg", "width", "height"}),
                                ("matcher", matcher, {"block_size", "max_disparity", "uniqueness"}),
                                ("target", target, {"extent_factor", "texture_size", "background",
                                                      "supersample"})):
            if set(sub) - keys:
                raise ValueError(f"unknown {name} keys: {sorted(set(sub) - keys)}")
        kwargs: dict[str, Any] = dict(left_camera=left, right_camera=right, models=models)
        opt = {
            "baseline": rig.get("baseline"),
            "divergence_deg": rig.get("divergence_deg"),
            "vpc_fov_deg": vpc.get("fov_deg"),
            "vpc_width": vpc.get("width"),
            "vpc_height": vpc.get("height"),
            "distances_baselines": doc.get("distances_baselines"),
            "textures": doc.get("textures"),
            "block_size": matcher.get("block_size"),
            "max_disparity": matcher.get("max_disparity"),
            "uniqueness": matcher.get("uniqueness"),
            "extent_factor": target.get("extent_factor"),
            "texture_size": target.get("texture_size"),
            "background": target.get("background"),
            "supersample": target.get("supersample"),
            "vicinity_fraction": doc.get("vicinity_fraction"),
            "seed": doc.get("seed"),
            "write_ply": doc.get("write_ply"),
        }
        kwargs.update({k: v for k, v in opt.items() if v is not None})
        if "output_dir" in doc:
            kwargs["output_dir"] = base / doc["output_dir"]
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SweepConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)


def _load(ref: str, base: Path) -> CameraModel:
    if ref.startswith("builtin:"):
        return load_model(tables.table_path(ref.split(":", 1)[1]))
    path = base / ref
    if not path.exists():
        raise ModelFileError(f"camera-parameter file not found: {path}")
    return load_model(path)


@dataclass(frozen=True)
class CellResult:
    distance_baselines: float
    model: str
    texture: str
    report: DepthErrorReport | None
    error: str | None = None


@dataclass
class SweepResult:
    cells: list[CellResult]
    summary: dict[str, Any]

    @property
    def all_failed(self) -> bool:
        return all(c.report is None for c in self.cells)

    def rms_table(self) -> dict[str, dict[float, float]]:
        """Texture-averaged RMS per model and distance."""
        return {name: {float(d): v["rms_m"] for d, v in s["per_distance"].items()}
                for name, s in self.summary.items()}


def _summarise(cells: list[CellResult]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in dict.fromkeys(c.model for c in cells):
        per_d: dict[float, dict[str, float]] = {}
        for d in sorted({c.distance_baselines for c in cells if c.model == name}):
            reps = [c.report for c in cells
                    if c.model == name and c.distance_baselines == d and c.report is not None]
            if reps:
                per_d[d] = {
                    "rms_m": float(np.mean([r.rms_m for r in reps])),
                    "stddev_m": float(np.mean([r.stddev_m for r in reps])),
                    "n_textures": len(reps),
                }
        entry: dict[str, Any] = {"per_distance": per_d}
        pts = [(d, v["rms_m"]) for d, v in per_d.items()]
        if len({d for d, _ in pts}) >= 3:
            c = fit_error_curve(pts)
            x = np.array([d for d, _ in pts])
            y = np.array([r for _, r in pts])
            fit = c[0] + c[1] * x + c[2] * x * x
            entry["fit"] = list(c)
            entry["fit_residual_rms"] = float(np.sqrt(np.mean((y - fit) ** 2)))
        out[name] = entry
    return out


class _Pipeline:
    def __init__(self, cfg: SweepConfig):
        self.cfg = cfg
        self.rig = StereoRig.divergent(cfg.left_camera, cfg.right_camera, baseline=cfg.baseline,
                                       divergence=math.radians(cfg.divergence_deg))
        self.world = rectified_rotation(self.rig)
        self.fov = math.radians(cfg.vpc_fov_deg)
        self.res = (cfg.vpc_width, cfg.vpc_height)
        self.left_vpc_pose = RigidTransform(self.world, self.rig.left_pose.translation)
        self.right_vpc_pose = RigidTransform(self.world, self.rig.right_pose.translation)
        self._luts: dict[str, tuple[RemapTable, RemapTable, VpcSpec]] = {}

    def luts(self, pair: ModelPair):
        if pair.name not in self._luts:
            rig = StereoRig(pair.left, pair.right, self.rig.left_pose, self.rig.right_pose)
            lv, rv = make_stereo_vpcs(rig, self.fov, self.res)
            self._luts[pair.name] = (build_lut(lv, pair.left), build_lut(rv, pair.right), lv)
        return self._luts[pair.name]

    def scene(self, distance_b: float, texture: np.ndarray) -> tuple[Scene, float]:
        cfg = self.cfg
        z = distance_b * cfg.baseline
        mid = 0.5 * (self.rig.left_pose.translation + self.rig.right_pose.translation)
        centre = mid + z * self.world[:, 2]
        half = cfg.extent_factor * z + cfg.baseline
        target = PlanarTarget(centre, -self.world[:, 2], half, half, texture, u_axis=self.world[:, 0])
        return Scene(target, cfg.background), z

    def evaluate(self, left, right, lmask, rmask, vpc: VpcSpec, scene: Scene, distance_b: float):
        cfg = self.cfg
        disp = compute_disparity(left, right, lmask, rmask, block_size=cfg.block_size,
                                 max_disparity=cfg.max_disparity, uniqueness=cfg.uniqueness)
        depth = disparity_to_depth(disp, vpc.intrinsics.fx, self.rig.baseline)
        cloud = reconstruct_pointcloud(depth, vpc.intrinsics)
        plane = Plane.from_target(scene.target, self.left_vpc_pose)
        report = evaluate_depth_error(cloud, plane, cfg.vicinity_fraction * plane.distance,
                                      cfg.seed, baseline=self.rig.baseline)
        return report, cloud


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run every cell, write ``errors.csv``, PLY clouds and ``summary.json``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "errors.csv"
    if csv_path.exists():
        csv_path.unlink()
    writer = ReportWriter(csv_path)
    if cfg.write_ply:
        (out / "clouds").mkdir(exist_ok=True)

    pipe = _Pipeline(cfg)
    ref_model = PinholeModel(PinholeIntrinsics.from_fov(pipe.fov, *pipe.res))
    textures = {t: make_texture(t, cfg.texture_size, cfg.seed) for t in cfg.textures}
    cells: list[CellResult] = []
    ss = cfg.supersample

    def record(d, name, tex, fn):
        try:
            report, cloud = fn()
        except (VpcError, ValueError, ArithmeticError) as exc:
            logger.warning("cell %s/%s/%s failed: %s", d, name, tex, exc)
            writer.write(name, tex, distance_baselines=d, seed=cfg.seed)
            cells.append(CellResult(d, name, tex, None, str(exc)))
            return
        writer.write(name, tex, report)
        if cfg.write_ply:
            write_ply(out / "clouds" / f"{name}_{tex}_{d:g}b.ply", cloud)
        cells.append(CellResult(d, name, tex, report))

    for d in cfg.distances_baselines:
        for tex_name, tex in textures.items():
            scene, _ = pipe.scene(d, tex)
            views = {}

            def fisheye_views():
                if not views:
                    rig = pipe.rig
                    views["l"] = render_view(scene, rig.left_model, rig.left_pose, supersample=ss)
                    views["r"] = render_view(scene, rig.right_model, rig.right_pose, supersample=ss)
                return views["l"], views["r"]

            for pair in cfg.models:
                def cell(pair=pair):
                    llut, rlut, lv = pipe.luts(pair)
                    fl, fr = fisheye_views()
                    return pipe.evaluate(remap(fl, llut), remap(fr, rlut), llut.valid, rlut.valid,
                                         lv, scene, d)
                record(d, pair.name, tex_name, cell)

            def ref_cell():
                left = render_view(scene, ref_model, pipe.left_vpc_pose, supersample=ss)
                right = render_view(scene, ref_model, pipe.right_vpc_pose, supersample=ss)
                vpc = VpcSpec(ref_model.intrinsics)
                return pipe.evaluate(left, right, None, None, vpc, scene, d)
            record(d, REFERENCE, tex_name, ref_cell)

    summary = _summarise(cells)
    summary_doc = {
        name: {
            "per_distance": {f"{d:g}": v for d, v in s["per_distance"].items()},
            **({"fit": s["fit"], "fit_residual_rms": s["fit_residual_rms"]} if "fit" in s else {}),
        }
        for name, s in summary.items()
    }
    (out / "summary.json").write_text(json.dumps(summary_doc, indent=2) + "\n")
    return SweepResult(cells, summary)

