import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from lfdepth import evaluate, synth
from lfdepth.lightfield import DimensionMismatchError, DisparityMap, LightField
from lfdepth.refine import SparsePointSet


def interior(gt, band=4, border=8):
    m = ~ndimage.binary_dilation(evaluate.depth_edges(gt), iterations=band)
    m[:border] = m[-border:] = False
    m[:, :border] = m[:, -border:] = False
    return m


# --- metrics ---

def test_identity_metrics():
    gt = np.random.default_rng(0).uniform(-1, 1, (20, 30))
    r = evaluate.compute_metrics(gt, gt)
    assert r.mse_x100 == 0 and r.q25 == 0 and r.rmse == 0
    assert all(v == 1.0 for v in r.boundary_recall.values())


def test_constant_offset_metrics():
    gt = np.random.default_rng(1).uniform(-1, 1, (20, 30))
    r = evaluate.compute_metrics(gt + 0.1, gt)
    assert r.mse_x100 == pytest.approx(1.0, abs=1e-9)
    assert r.q25 == pytest.approx(0.1, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3))
def test_translation_adds_b_squared(b):
    gt = np.random.default_rng(2).uniform(-1, 1, (10, 10))
    assert evaluate.compute_metrics(gt + b, gt).mse_x100 == pytest.approx(100 * b * b, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_percentile_ordering(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(-1, 1, (12, 12))
    r = evaluate.compute_metrics(gt + rng.normal(0, 0.3, gt.shape), gt)
    assert 0 <= r.q25 <= r.q50 <= r.abs_error.max()
    assert r.mse_x100 >= 0 and np.sqrt(r.mse_x100 / 100) == pytest.approx(r.rmse)
    assert all(0 <= v <= 1 for v in r.boundary_recall.values())


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        evaluate.compute_metrics(np.zeros((4, 4)), np.zeros((4, 5)))


def test_boundary_recall_tolerance():
    gt = np.zeros((20, 20))
    gt[:, 10:] = 1.0
    pred = np.zeros((20, 20))
    pred[:, 12:] = 1.0  # boundary moved by two pixels
    r = evaluate.compute_metrics(pred, gt, tolerances=(0, 1, 2, 3))
    assert r.gt_edge_pixels == 40
    assert r.boundary_recall[0] == 0.0
    assert r.boundary_recall[1] == pytest.approx(0.5)
    assert r.boundary_recall[3] == 1.0
    flat = evaluate.compute_metrics(np.zeros((20, 20)), gt)
    assert all(v == 0.0 for v in flat.boundary_recall.values())


def test_report_serializable():
    import json
    gt = np.zeros((5, 5))
    d = evaluate.compute_metrics(gt, gt).to_dict()
    assert "abs_error" not in d
    json.dumps(d)


def test_error_image_scaled():
    gt = np.zeros((4, 4))
    pred = gt.copy()
    pred[0, 0] = 2.0
    r = evaluate.compute_metrics(pred, gt)
    img = evaluate.error_image(r)
    assert img.max() == 1.0 and img[1, 1] == 0.0
    assert evaluate.error_image(r, vmax=4.0)[0, 0] == 0.5


# --- reprojection ---

def test_ground_truth_reprojects_exactly_at_integer_disparities():
    lf, gt = synth.render(synth.two_plane_scene(1.0, 0.0, w=64, h=64), 0)
    e = evaluate.reprojection_error(lf, gt)
    assert e[interior(gt.values)].max() < 1e-3


def test_ground_truth_reprojects_closely_at_fractional_disparities():
    lf, gt = synth.render(synth.two_plane_scene(1.5, 0.0, w=64, h=64), 0)
    e = evaluate.reprojection_error(lf, gt)
    # the renderer and the warp both interpolate bilinearly; at half-pixel
    # shifts the two do not cancel exactly (interior mean is about 4e-3), so
    # only the typical pixel meets the exact-warp bound
    m = interior(gt.values)
    assert np.median(e[m]) < 1e-3
    assert np.mean(e[m]) < 1e-2


def test_constant_field_zero_error():
    lf = LightField(np.full((3, 3, 10, 12, 3), 0.4))
    for d in (0.0, 0.7, -1.3):
        assert np.all(evaluate.reprojection_error(lf, np.full((10, 12), d)) == 0.0)


def test_one_pixel_error_bounded_by_lag1_gap():
    tex = synth.Texture("noise", (0.5,) * 3, cell=3, amplitude=0.15)
    lf, gt = synth.render(synth.plane_scene(0.0, w=40, h=40, texture=tex), 0)
    e = evaluate.reprojection_error(lf, np.full((40, 40), 1.0))
    c = np.asarray(lf.views[1, 1], dtype=np.float64)
    # the nearest views shift by one pixel; their L1 gap is a lag-1 difference
    lag1 = np.abs(c[:, 1:] - c[:, :-1]).mean(axis=-1)
    m = interior(gt.values, border=6)
    assert e[m].mean() >= 0.5 * lag1[m[:, 1:]].mean()
    assert e[m].mean() > 0


def test_ground_truth_beats_perturbations():
    lf, gt = synth.render(synth.two_plane_scene(1.0, 0.0, w=48, h=48), 3)
    base = evaluate.reprojection_error(lf, gt).mean()
    rng = np.random.default_rng(0)
    for _ in range(10):
        noise = ndimage.gaussian_filter(rng.normal(0, 1, gt.shape), 3)
        pert = gt.values + 0.5 * noise / noise.std()
        assert base <= evaluate.reprojection_error(lf, pert).mean()


def test_reprojection_dimension_check():
    lf = LightField(np.zeros((3, 3, 5, 5, 3)))
    with pytest.raises(DimensionMismatchError):
        evaluate.reprojection_error(lf, np.zeros((4, 5)))


def _two_points():
    return SparsePointSet.from_arrays([[1.0, 1.0], [3.0, 2.0]], [0, 0], 5, 4, grad=[[1, 0], [0, 1]])


def test_sign_baseline_rule():
    p = _two_points()
    ef = np.zeros((4, 5))
    eb = np.zeros((4, 5))
    ef[1, 1] = 0.1  # backward better at the first point
    eb[2, 3] = 0.1  # forward better at the second
    assert evaluate.reproj_sign_baseline(p, ef, eb).tolist() == [-1.0, 1.0]


def test_sign_baseline_ties_forward():
    p = _two_points()
    e = np.random.default_rng(0).random((4, 5))
    assert evaluate.reproj_sign_baseline(p, e, e.copy()).tolist() == [1.0, 1.0]
    assert evaluate.reproj_sign_baseline(p, e, e.copy(), window="profile").tolist() == [1.0, 1.0]
    with pytest.raises(ValueError):
        evaluate.reproj_sign_baseline(p, e, e, window="bogus")


# --- normals ---

def test_constant_disparity_normals():
    rgb = evaluate.normal_map(np.full((6, 7), 0.3))
    assert np.allclose(rgb, [0.5, 0.5, 1.0])


def test_ramp_normals_constant_tilt():
    d = np.tile(np.arange(10.0) * 0.5, (8, 1))
    n = evaluate.surface_normals(d)
    expected = np.array([-0.5, 0.0, 1.0]) / np.sqrt(1.25)
    assert np.allclose(n, expected)


def test_slanted_plane_normals_within_5_degrees():
    a, b = 0.02, -0.01
    spec = synth.SceneSpec([synth.Layer((-200, -200, 264, 264), 0.5, slope=(a, b))], w=64, h=64)
    _, gt = synth.render(spec, 0)
    n = evaluate.surface_normals(gt)
    ref = np.array([-a, -b, 1.0]) / np.linalg.norm([-a, -b, 1.0])
    ang = np.degrees(np.arccos(np.clip(n[2:-2, 2:-2] @ ref, -1, 1)))
    assert ang.max() < 5.0


def test_accepts_disparity_map():
    d = DisparityMap(np.zeros((3, 3)))
    assert evaluate.surface_normals(d).shape == (3, 3, 3)
