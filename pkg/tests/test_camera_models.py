"""Projection models: worked examples, independent oracles and properties."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import angle_between, random_rays
from vpcstereo import tables
from vpcstereo.camera_models import (
    AtanModel,
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
from vpcstereo.errors import ModelFileError, OutOfFovError, OutOfImageError


def _table(name):
    return load_model(tables.table_path(name))


# ---------------------------------------------------------------------------
# incidence angle


def test_incidence_angle_axis_and_orthogonal():
    assert incidence_angle([0, 0, 1]) == 0.0
    assert incidence_angle([1, 0, 0]) == pytest.approx(math.pi / 2, abs=1e-15)
    assert incidence_angle([0, 0, -3]) == pytest.approx(math.pi)


def test_incidence_angle_matches_dot_product_oracle():
    assert incidence_angle([1, 1, math.sqrt(2)]) == pytest.approx(math.pi / 4, abs=1e-15)
    rng = np.random.default_rng(3)
    rays = rng.normal(size=(500, 3))
    oracle = np.arccos(rays[:, 2] / np.linalg.norm(rays, axis=1))
    np.testing.assert_allclose(incidence_angle(rays), oracle, atol=1e-12)


# ---------------------------------------------------------------------------
# ATAN


def test_atan_on_axis_maps_to_principal_point(atan_f100):
    np.testing.assert_array_equal(atan_f100.project([0, 0, 1]), [200.0, 200.0])


def test_atan_orthogonal_ray(atan_f100):
    # offset f * theta = 100 * pi / 2, signed like x
    np.testing.assert_allclose(atan_f100.project([1, 0, 0]), [200 + 50 * math.pi, 200.0],
                               atol=1e-12)
    np.testing.assert_allclose(atan_f100.project([-1, 0, 0]), [200 - 50 * math.pi, 200.0],
                               atol=1e-12)
    np.testing.assert_allclose(atan_f100.project([0, -2, 0]), [200.0, 200 - 50 * math.pi],
                               atol=1e-12)


def test_atan_unproject_inverse_example(atan_f100):
    ray = atan_f100.unproject([200 + 50 * math.pi, 200.0])
    np.testing.assert_allclose(ray, [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(atan_f100.unproject([357.0796, 200.0]), [1, 0, 0], atol=1e-6)


def test_atan_out_of_fov_rejected(atan_f100):
    with pytest.raises(OutOfFovError):
        atan_f100.project([1.0, 0.0, -0.01])
    assert np.isnan(atan_f100.project([1.0, 0.0, -0.01], check=False)).all()


def test_atan_outside_image_circle_rejected(atan_f100):
    with pytest.raises(OutOfImageError):
        atan_f100.unproject([200 + 50 * math.pi + 1.0, 200.0])


def test_functional_aliases(atan_f100):
    ray = np.array([0.2, -0.1, 1.0])
    np.testing.assert_array_equal(project(atan_f100, ray), atan_f100.project(ray))
    pix = np.array([250.0, 180.0])
    np.testing.assert_array_equal(unproject(atan_f100, pix), atan_f100.unproject(pix))


# ---------------------------------------------------------------------------
# Kannala-Brandt


def test_kb_table1_theta_08_polynomial_oracle():
    kb = _table("table1_kannala_brandt")
    t = 0.8
    # independent expansion of the odd polynomial, term by term
    rho = 1.0 * t + 7.58e-4 * t**3 - 3.26e-4 * t**5 + 4.03e-5 * t**7 - 1.86e-6 * t**9
    phi = 0.3
    ray = [math.sin(t) * math.cos(phi), math.sin(t) * math.sin(phi), math.cos(t)]
    expected = [544 + 345.1 * rho * math.cos(phi), 544 + 345.1 * rho * math.sin(phi)]
    np.testing.assert_allclose(kb.project(ray), expected, atol=1e-9)
    assert rho == pytest.approx(0.8002894742, abs=1e-10)


def test_kb_reduces_to_atan():
    intr = PinholeIntrinsics(120.0, 120.0, 150.0, 150.0, 300, 300)
    kb = KannalaBrandtModel(intr, math.pi)
    at = AtanModel(intr, math.pi)
    rays = random_rays(300, math.pi / 2, seed=4)
    np.testing.assert_allclose(kb.project(rays), at.project(rays), atol=1e-9)
    # rho == theta exactly in normalised units
    t = np.linspace(0, math.pi / 2, 50)
    np.testing.assert_array_equal(kb.radius(t), t)


def test_kb_non_monotone_rejected():
    intr = PinholeIntrinsics(100.0, 100.0, 100.0, 100.0, 200, 200)
    with pytest.raises(ValueError, match="increasing"):
        KannalaBrandtModel(intr, math.pi, k1=1.0, k2=-0.5)


def test_kb_solve_theta_inverts_radius():
    kb = _table("table1_kannala_brandt")
    t = np.linspace(0, kb.half_fov, 200)
    theta, ok = kb.solve_theta(kb.radius(t))
    assert ok.all()
    np.testing.assert_allclose(theta, t, atol=1e-12)


# ---------------------------------------------------------------------------
# Mei


def test_mei_table1_parameters_and_axis():
    mei = _table("table1_mei")
    assert (mei.xi, mei.k1, mei.k2, mei.p1, mei.p2) == (1.474, -0.208, 0.153, 1.66e-4, 8e-5)
    np.testing.assert_array_equal(mei.project([0, 0, 1]), [544.0, 544.0])
    np.testing.assert_array_equal(mei.project([0, 0, 7.5]), [544.0, 544.0])


def test_mei_reduces_to_pinhole():
    intr = PinholeIntrinsics(300.0, 280.0, 320.0, 240.0, 640, 480)
    mei = MeiModel(intr, math.radians(120), xi=0.0)
    pin = PinholeModel(intr)
    rays = random_rays(400, math.radians(55), seed=5)
    np.testing.assert_allclose(mei.project(rays), pin.project(rays), atol=1e-9)
    # the pinhole oracle written out
    oracle = np.stack([300 * rays[:, 0] / rays[:, 2] + 320, 280 * rays[:, 1] / rays[:, 2] + 240],
                      axis=-1)
    np.testing.assert_allclose(mei.project(rays), oracle, atol=1e-9)


def test_mei_distortion_terms_oracle():
    intr = PinholeIntrinsics(100.0, 100.0, 100.0, 100.0, 200, 200)
    mei = MeiModel(intr, math.pi, xi=1.0, k1=-0.2, k2=0.15, p1=1e-3, p2=-2e-3)
    x, y = 0.3, -0.2
    r2 = x * x + y * y
    radial = -0.2 * r2 + 0.15 * r2 * r2
    dx = x * radial + 2 * 1e-3 * x * y + (-2e-3) * (r2 + 2 * x * x)
    dy = y * radial + 1e-3 * (r2 + 2 * y * y) + 2 * (-2e-3) * x * y
    got = mei.distortion(np.array(x), np.array(y))
    assert float(got[0]) == pytest.approx(dx, abs=1e-15)
    assert float(got[1]) == pytest.approx(dy, abs=1e-15)


def test_mei_behind_the_sphere_centre_rejected():
    intr = PinholeIntrinsics(100.0, 100.0, 100.0, 100.0, 200, 200)
    mei = MeiModel(intr, 2 * math.pi, xi=0.5)
    # Z_s + xi <= 0 once the ray points far enough backwards
    assert np.isnan(mei.project([0.1, 0.0, -1.0], check=False)).all()
    with pytest.raises(OutOfFovError):
        mei.project([0.1, 0.0, -1.0])


def test_mei_newton_fallback_table2_right():
    mei = _table("table2_right_mei")
    rays = random_rays(2000, 0.95 * mei.half_fov, seed=9)
    back = mei.unproject(mei.project(rays))
    assert angle_between(back, rays).max() < 1e-9


# ---------------------------------------------------------------------------
# Scaramuzza


def test_scaramuzza_principal_point_unprojects_to_axis():
    sc = _table("table1_scaramuzza")
    assert sc.a0 == 345.1
    np.testing.assert_allclose(sc.unproject([544.0, 544.0]), [0, 0, 1], atol=0)


def test_scaramuzza_back_projection_formula():
    sc = _table("table2_left_scaramuzza")
    du, dv = 300.0, -140.0
    rho = math.hypot(du, dv)
    fz = 647 - 6.46e-4 * rho**2 + 3.31e-7 * rho**3 - 3.02e-10 * rho**4
    expected = np.array([du, dv, fz]) / math.sqrt(du * du + dv * dv + fz * fz)
    np.testing.assert_allclose(sc.unproject([1024 + du, 768 + dv]), expected, atol=1e-14)


def test_scaramuzza_negative_a0_is_sign_normalised():
    base = _table("table1_scaramuzza")
    neg = ScaramuzzaModel(base.intrinsics, base.fov, -base.a0, -base.a1, -base.a2, -base.a3,
                          -base.a4)
    rays = random_rays(100, 1.3, seed=2)
    np.testing.assert_allclose(neg.project(rays), base.project(rays), atol=1e-9)


def test_scaramuzza_newton_residual_and_iterations():
    sc = _table("table1_scaramuzza")
    rays = random_rays(3000, sc.half_fov, seed=1)
    sol = sc.solve_rho(rays)
    assert sol.converged.all()
    assert sol.residual.max() < 1e-9
    assert sol.iterations.max() <= 20


def test_scaramuzza_never_reaching_fov_rejected():
    intr = PinholeIntrinsics(1.0, 1.0, 200.0, 200.0, 400, 400)
    with pytest.raises(ValueError, match="field of view"):
        ScaramuzzaModel(intr, math.pi, a0=50.0, a2=0.01)


# ---------------------------------------------------------------------------
# shared properties


def test_round_trip_every_shipped_table(table_model):
    name, model = table_model
    rays = random_rays(1000, 0.95 * model.half_fov, seed=11)
    back = model.unproject(model.project(rays))
    assert np.all(np.abs(np.linalg.norm(back, axis=-1) - 1) < 1e-12)
    assert angle_between(back, rays).max() < 1e-6, name


def test_reprojection_within_1e6_px(table_model):
    _, model = table_model
    rays = random_rays(500, 0.9 * model.half_fov, seed=12)
    pix = model.project(rays)
    np.testing.assert_allclose(model.project(model.unproject(pix)), pix, atol=1e-6)


def test_unproject_check_false_marks_outside(table_model):
    _, model = table_model
    out = model.unproject([[-1e4, -1e4]], check=False)
    assert np.isnan(out).all()


@pytest.mark.parametrize("name", ["table1_kannala_brandt", "table1_atan", "table1_scaramuzza"])
@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.0, 1.4), phi=st.floats(-math.pi, math.pi),
       rot=st.floats(-math.pi, math.pi))
def test_radial_symmetry(name, theta, phi, rot):
    model = _table(name)
    c = np.array([model.intrinsics.cx, model.intrinsics.cy])

    def ray(p):
        return [math.sin(theta) * math.cos(p), math.sin(theta) * math.sin(p), math.cos(theta)]

    a = model.project(ray(phi)) - c
    b = model.project(ray(phi + rot)) - c
    R = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    np.testing.assert_allclose(b, R @ a, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-3, 3), y=st.floats(-3, 3), z=st.floats(0.05, 3))
def test_pinhole_round_trip(x, y, z):
    pin = PinholeModel(PinholeIntrinsics(200.0, 200.0, 1000.0, 1000.0, 2000, 2000))
    p = np.array([x, y, z])
    pix = pin.project(p, check=False)
    if np.isnan(pix).any():
        return
    back = pin.unproject(pix, check=False)
    assert angle_between(back, p / np.linalg.norm(p)) < 1e-9


def test_projection_is_scale_invariant(table_model):
    _, model = table_model
    rays = random_rays(50, 0.8 * model.half_fov, seed=13)
    np.testing.assert_allclose(model.project(rays * 3.7), model.project(rays), atol=1e-9)


# ---------------------------------------------------------------------------
# parameter documents


def test_shipped_tables_hold_published_values():
    assert _table("table1_kannala_brandt").coefficients == (1.0, 7.58e-4, -3.26e-4, 4.03e-5,
                                                            -1.86e-6)
    left = _table("table2_left_scaramuzza")
    assert left.a0 == 647.0 and (left.width, left.height) == (2048, 1536)
    assert _table("table1_atan").fov == pytest.approx(math.pi)


def test_document_round_trip(tmp_path, table_model):
    _, model = table_model
    path = tmp_path / "m.json"
    save_model(model, path)
    again = load_model(path)
    assert model_to_dict(again) == model_to_dict(model)


def _doc(**over):
    doc = {"model": "atan", "width": 400, "height": 400, "fx": 127.0, "fy": 127.0,
           "cx": 200.0, "cy": 200.0, "fov_deg": 180.0, "params": {}}
    doc.update(over)
    return doc


@pytest.mark.parametrize("bad", [
    {"model": "fisheye62"},
    {"colour": "red"},
    {"fx": float("nan")},
    {"fx": -1.0},
    {"fov_deg": 0.0},
    {"width": 400.5},
    {"params": {"k2": 0.1}},
    {"cx": 500.0},
])
def test_invalid_documents_rejected(bad):
    with pytest.raises(ModelFileError):
        model_from_dict(_doc(**bad))


def test_missing_keys_rejected():
    doc = _doc()
    del doc["fov_deg"]
    with pytest.raises(ModelFileError, match="fov_deg"):
        model_from_dict(doc)
    with pytest.raises(ModelFileError, match="xi"):
        model_from_dict(_doc(model="mei", params={"k1": 0.1}))


def test_invalid_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelFileError):
        load_model(p)
    p.write_text(json.dumps(_doc(model="kannala_brandt", params={"k1": 1.0, "k2": -0.5})))
    with pytest.raises(ModelFileError, match="increasing"):
        load_model(p)
