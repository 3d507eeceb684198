import numpy as np
import pytest
from scipy import ndimage

from lfdepth import synth
from lfdepth.lightfield import ParameterError


def test_zero_disparity_views_identical():
    lf, gt = synth.render(synth.plane_scene(0.0), 3)
    assert np.all(lf.views == lf.views[4, 4])
    assert np.all(gt.values == 0.0)


def test_unit_disparity_is_a_shift():
    lf, _ = synth.render(synth.plane_scene(1.0), 0)
    c = lf.views[4, 4]
    v = lf.views[4, 6]  # two views to the right
    # a point at u in the centre appears at u + 2 in view s_c + 2
    assert np.abs(v[8:-8, 10:-8] - c[8:-8, 8:-10]).max() < 1e-6


def test_vertical_shift_direction():
    lf, _ = synth.render(synth.plane_scene(1.0), 0)
    c = lf.views[4, 4]
    v = lf.views[5, 4]
    assert np.abs(v[9:-8, 8:-8] - c[8:-9, 8:-8]).max() < 1e-6


def test_ground_truth_edges_on_rectangle():
    spec = synth.two_plane_scene(1.5, 0.0, w=64, h=64, rect=(20, 12, 41, 50))
    _, gt = synth.render(spec, 0)
    g = gt.values
    assert np.all(g[12:50, 20:41] == 1.5)
    assert np.all(g[:12] == 0) and np.all(g[50:] == 0)
    assert np.all(g[:, :20] == 0) and np.all(g[:, 41:] == 0)


def test_slanted_layer_ground_truth():
    spec = synth.SceneSpec([synth.Layer((-50, -50, 114, 114), 0.2, synth.Texture("noise", cell=3),
                                        slope=(0.01, -0.005))], w=64, h=64)
    _, gt = synth.render(spec, 0)
    cu = cv = 31.5
    assert gt.values[10, 40] == pytest.approx(0.2 + 0.01 * (40 - cu) - 0.005 * (10 - cv))


def _block_match(c, v, x, y, r=3, cands=np.arange(-2, 2.0001, 0.01)):
    yy, xx = np.mgrid[y - r:y + r + 1, x - r:x + r + 1].astype(float)
    ref = c[y - r:y + r + 1, x - r:x + r + 1]
    costs = []
    for d in cands:
        patch = np.stack([ndimage.map_coordinates(v[..., k], [yy, xx + d], order=1) for k in range(3)], -1)
        costs.append(np.sum((patch - ref) ** 2))
    return cands[int(np.argmin(costs))]


def test_parallax_matches_ground_truth():
    spec = synth.two_plane_scene(1.2, -0.4, w=64, h=64,
                                 fg_texture=synth.Texture("noise", (0.6,) * 3, cell=3, amplitude=0.15),
                                 bg_texture=synth.Texture("noise", (0.3,) * 3, cell=3, amplitude=0.15))
    lf, gt = synth.render(spec, 5)
    c, v = lf.views[4, 4].astype(float), lf.views[4, 5].astype(float)
    g = gt.values
    interior = ndimage.binary_erosion(np.abs(ndimage.laplace(g)) == 0, iterations=6)
    interior[:6] = interior[-6:] = False
    interior[:, :6] = interior[:, -6:] = False
    ys, xs = np.nonzero(interior)
    pick = np.random.default_rng(0).choice(len(ys), 50, replace=False)
    errs = [abs(_block_match(c, v, xs[i], ys[i]) - g[ys[i], xs[i]]) for i in pick]
    assert max(errs) < 0.1


def test_render_deterministic_per_seed():
    spec = synth.occlusion_suite()[1]
    a, _ = synth.render(spec, 7)
    b, _ = synth.render(spec, 7)
    c, _ = synth.render(spec, 8)
    assert a.views.tobytes() == b.views.tobytes()
    assert a.views.tobytes() != c.views.tobytes()


def test_noise_and_blur_applied():
    base = synth.plane_scene(0.5)
    clean, _ = synth.render(base, 0)
    base.noise_sigma = 0.05
    noisy, _ = synth.render(base, 0)
    assert 0.03 < np.std(noisy.views - clean.views) < 0.07
    base.noise_sigma = 0.0
    base.edge_blur_sigma = 1.5
    blurred, _ = synth.render(base, 0)
    step = lambda lf: np.abs(np.diff(lf.views[4, 4, ..., 0], axis=1)).max()  # noqa: E731
    assert step(blurred) < 0.5 * step(clean)


def test_spec_validation_and_roundtrip():
    with pytest.raises(ParameterError):
        synth.Texture("checker", cell=2)
    with pytest.raises(ParameterError):
        synth.Texture("plaid")
    with pytest.raises(ParameterError):
        synth.plane_scene(5.0)
    spec = synth.occlusion_suite()[3]
    back = synth.SceneSpec.from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()


def test_suites_shape():
    occ = synth.occlusion_suite()
    assert len(occ) == 10 and all(len(s.layers) == 2 for s in occ)
    assert all(s.layers[1].disparity > s.layers[0].disparity for s in occ)
    tex = synth.texture_only_suite()
    assert len(tex) == 5 and all(len(s.layers) == 1 for s in tex)
    with pytest.raises(ParameterError):
        synth.preset("nope")
