"""Synthetic layered light fields with exact ground-truth disparity.

Each layer is a textured rectangle in central-view pixel coordinates whose
disparity is constant or linear in ``(u, v)``.  A view is rendered by
mapping every output pixel back to central coordinates and bilinearly
sampling the layer's texture and coverage rasters, compositing back to front.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .lightfield import DisparityMap, LightField, ParameterError

TEXTURES = ("constant", "checker", "stripes", "noise")


@dataclass
class Texture:
    kind: str = "constant"
    color: tuple[float, float, float] = (0.5, 0.5, 0.5)
    color2: tuple[float, float, float] = (0.2, 0.2, 0.2)
    # checker cell / stripe width / noise correlation length, in pixels
    cell: float = 8.0
    amplitude: float = 0.25
    orientation: str = "vertical"
    # Gaussian edge softening of checker/stripe rasters, in pixels; keeps the
    # pattern close to band-limited so bilinear view shifts stay faithful
    soften: float = 0.8

    def __post_init__(self):
        if self.kind not in TEXTURES:
            raise ParameterError(f"unknown texture {self.kind!r}")
        if self.kind in ("checker", "stripes") and self.cell < 4:
            raise ParameterError("checker/stripe cells must be at least 4 px")
        if self.soften < 0:
            raise ParameterError("soften must be non-negative")
        self.color = tuple(float(c) for c in self.color)
        self.color2 = tuple(float(c) for c in self.color2)

    def evaluate(self, xs: np.ndarray, ys: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Texture on the integer grid ``xs`` (cols) x ``ys`` (rows); returns ``(rows, cols, 3)``."""
        X, Y = np.meshgrid(xs, ys)
        c1 = np.asarray(self.color)
        c2 = np.asarray(self.color2)
        if self.kind == "constant":
            return np.broadcast_to(c1, X.shape + (3,)).copy()
        if self.kind == "checker":
            sel = (np.floor(X / self.cell) + np.floor(Y / self.cell)) % 2 == 1
            return self._soft(np.where(sel[..., None], c2, c1))
        if self.kind == "stripes":
            coord = X if self.orientation == "vertical" else Y
            sel = np.floor(coord / self.cell) % 2 == 1
            return self._soft(np.where(sel[..., None], c2, c1))
        white = rng.standard_normal(X.shape)
        smooth = ndimage.gaussian_filter(white, self.cell / 2.0, mode="wrap")
        smooth /= smooth.std() + 1e-12
        return c1 + self.amplitude * smooth[..., None]

    def _soft(self, img: np.ndarray) -> np.ndarray:
        if self.soften <= 0:
            return img
        return ndimage.gaussian_filter(img, (self.soften, self.soften, 0), mode="nearest")


@dataclass
class Layer:
    """Rectangle ``[x0, x1) x [y0, y1)`` of central-view pixels.

    Disparity at ``(u, v)`` is ``disparity + slope[0] * (u - cu) + slope[1] * (v - cv)``
    with ``(cu, cv)`` the image center.
    """

    rect: tuple[int, int, int, int]
    disparity: float
    texture: Texture = field(default_factory=Texture)
    slope: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if isinstance(self.texture, dict):
            self.texture = Texture(**self.texture)
        self.rect = tuple(int(r) for r in self.rect)
        self.slope = tuple(float(s) for s in self.slope)
        self.disparity = float(self.disparity)


@dataclass
class SceneSpec:
    layers: list[Layer]
    n_s: int = 9
    n_t: int = 9
    w: int = 96
    h: int = 96
    noise_sigma: float = 0.0
    edge_blur_sigma: float = 0.0
    d_max: float = 4.0

    def __post_init__(self):
        self.layers = [Layer(**ly) if isinstance(ly, dict) else ly for ly in self.layers]
        if not self.layers:
            raise ParameterError("scene needs at least one layer")
        cu, cv = (self.w - 1) / 2.0, (self.h - 1) / 2.0
        for ly in self.layers:
            x0, y0, x1, y1 = ly.rect
            corners = [(x0, y0), (x1 - 1, y0), (x0, y1 - 1), (x1 - 1, y1 - 1)]
            for u, v in corners:
                u, v = np.clip(u, 0, self.w - 1), np.clip(v, 0, self.h - 1)
                d = ly.disparity + ly.slope[0] * (u - cu) + ly.slope[1] * (v - cv)
                if abs(d) > self.d_max:
                    raise ParameterError(f"layer disparity {d:.3f} exceeds d_max {self.d_max}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        data = dict(data.get("scene", data))
        data["layers"] = [dict(ly) for ly in data.get("layers", [])]
        return cls(**data)


def _layer_disparity(ly: Layer, u, v, cu: float, cv: float):
    return ly.disparity + ly.slope[0] * (u - cu) + ly.slope[1] * (v - cv)


def render(spec: SceneSpec, seed: int = 0) -> tuple[LightField, DisparityMap]:
    """Render all views and the central-view ground truth."""
    rng = np.random.default_rng(seed)
    w, h = spec.w, spec.h
    s_c, t_c = spec.n_s // 2, spec.n_t // 2
    cu, cv = (w - 1) / 2.0, (h - 1) / 2.0
    margin = int(np.ceil(spec.d_max * max(s_c, t_c))) + 3

    rasters = []
    for ly in spec.layers:
        x0, y0, x1, y1 = ly.rect
        x0c, x1c = max(x0, -margin), min(x1, w + margin)
        y0c, y1c = max(y0, -margin), min(y1, h + margin)
        if x1c <= x0c or y1c <= y0c:
            rasters.append(None)
            continue
        xs = np.arange(x0c - 1, x1c + 1)
        ys = np.arange(y0c - 1, y1c + 1)
        tex = ly.texture.evaluate(xs, ys, rng)
        # edge-replicate the 1 px ring so colour stays put while coverage fades
        tex[0], tex[-1] = tex[1], tex[-2]
        tex[:, 0], tex[:, -1] = tex[:, 1], tex[:, -2]
        mask = np.zeros(tex.shape[:2])
        mask[1:-1, 1:-1] = 1.0
        rasters.append((xs[0], ys[0], tex, mask))

    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    views = np.zeros((spec.n_t, spec.n_s, h, w, 3))
    for t in range(spec.n_t):
        for s in range(spec.n_s):
            ds, dt = s - s_c, t - t_c
            img = np.zeros((h, w, 3))
            for ly, rs in zip(spec.layers, rasters):
                if rs is None:
                    continue
                ox, oy, tex, mask = rs
                a, b = ly.slope
                e = ly.disparity - a * cu - b * cv
                # solve u = u0 + ds * d(u0, v0), v = v0 + dt * d(u0, v0)
                m00, m01 = 1.0 + a * ds, b * ds
                m10, m11 = a * dt, 1.0 + b * dt
                det = m00 * m11 - m01 * m10
                ru, rv = uu - e * ds, vv - e * dt
                u0 = (m11 * ru - m01 * rv) / det
                v0 = (-m10 * ru + m00 * rv) / det
                coords = [v0 - oy, u0 - ox]
                alpha = ndimage.map_coordinates(mask, coords, order=1, mode="constant", cval=0.0)
                col = np.stack(
                    [ndimage.map_coordinates(tex[..., c], coords, order=1, mode="nearest") for c in range(3)],
                    axis=-1,
                )
                img = alpha[..., None] * col + (1.0 - alpha[..., None]) * img
            if spec.edge_blur_sigma > 0:
                img = ndimage.gaussian_filter(img, (spec.edge_blur_sigma, spec.edge_blur_sigma, 0))
            if spec.noise_sigma > 0:
                img = img + rng.normal(0.0, spec.noise_sigma, img.shape)
            views[t, s] = np.clip(img, 0.0, 1.0)

    gt = np.full((h, w), np.nan)
    for ly in spec.layers:
        x0, y0, x1, y1 = ly.rect
        inside = (uu >= x0) & (uu < x1) & (vv >= y0) & (vv < y1)
        gt = np.where(inside, _layer_disparity(ly, uu, vv, cu, cv), gt)
    return LightField(views), DisparityMap(gt)


# --- preset scenes used by the tests, the benchmark and ``synth --preset`` ---

def plane_scene(disparity: float, w: int = 64, h: int = 64, n: int = 9,
                texture: Texture | None = None, **kw) -> SceneSpec:
    texture = texture or Texture("checker", (0.8, 0.8, 0.8), (0.2, 0.2, 0.2), cell=6)
    return SceneSpec([Layer((-200, -200, w + 200, h + 200), disparity, texture)],
                     n_s=n, n_t=n, w=w, h=h, **kw)


def two_plane_scene(fg_disparity: float = 1.5, bg_disparity: float = 0.0, w: int = 96, h: int = 96,
                    n: int = 9, rect: tuple[int, int, int, int] | None = None,
                    fg_texture: Texture | None = None, bg_texture: Texture | None = None,
                    **kw) -> SceneSpec:
    """Textured background with a textured foreground rectangle in front of it."""
    bg_texture = bg_texture or Texture("checker", (0.35, 0.35, 0.35), (0.15, 0.15, 0.15), cell=8)
    fg_texture = fg_texture or Texture("checker", (0.95, 0.95, 0.95), (0.65, 0.65, 0.65), cell=6)
    rect = rect or (w // 4, h // 4, 3 * w // 4, 3 * h // 4)
    return SceneSpec(
        [Layer((-200, -200, w + 200, h + 200), bg_disparity, bg_texture),
         Layer(rect, fg_disparity, fg_texture)],
        n_s=n, n_t=n, w=w, h=h, **kw,
    )


def occlusion_suite(w: int = 64, h: int = 64, n: int = 9) -> list[SceneSpec]:
    """Ten two-layer occlusion scenes with varied geometry, contrast and texture."""
    out = []
    rng = np.random.default_rng(2024)
    fg_kinds = ["checker", "noise", "checker", "constant", "noise"]
    bg_kinds = ["checker", "noise", "stripes", "noise", "checker"]
    for i in range(10):
        fg_d = float(rng.choice([0.75, 1.0, 1.25, 1.5]))
        bg_d = float(rng.choice([-1.0, -0.5, 0.0]))
        x0 = int(rng.integers(w // 6, w // 3))
        y0 = int(rng.integers(h // 6, h // 3))
        x1 = int(rng.integers(2 * w // 3, 5 * w // 6))
        y1 = int(rng.integers(2 * h // 3, 5 * h // 6))
        bright_fg = i % 2 == 0
        fg_lo, fg_hi = (0.65, 0.95) if bright_fg else (0.05, 0.3)
        bg_lo, bg_hi = (0.05, 0.3) if bright_fg else (0.65, 0.95)
        fk, bk = fg_kinds[i % 5], bg_kinds[(i + 2) % 5]
        fg = Texture(fk, (fg_hi,) * 3, (fg_lo,) * 3, cell=6 + (i % 3) * 2, amplitude=0.08)
        if fk == "noise":
            fg = Texture("noise", ((fg_lo + fg_hi) / 2,) * 3, cell=3, amplitude=0.08)
        bg = Texture(bk, (bg_hi,) * 3, (bg_lo,) * 3, cell=8, amplitude=0.08,
                     orientation="vertical" if i % 2 else "horizontal")
        if bk == "noise":
            bg = Texture("noise", ((bg_lo + bg_hi) / 2,) * 3, cell=3, amplitude=0.08)
        out.append(two_plane_scene(fg_d, bg_d, w=w, h=h, n=n, rect=(x0, y0, x1, y1),
                                   fg_texture=fg, bg_texture=bg))
    return out


def texture_only_suite(w: int = 64, h: int = 64, n: int = 9) -> list[SceneSpec]:
    """Five single-plane scenes whose only edges are colour/texture edges."""
    specs = []
    for i, d in enumerate([0.0, 0.5, 1.0, -0.75, 1.25]):
        tex = Texture("stripes", (0.9, 0.2, 0.2), (0.2, 0.3, 0.9), cell=8 + 2 * i,
                      orientation="vertical" if i % 2 == 0 else "horizontal")
        if i == 4:
            tex = Texture("checker", (0.85, 0.8, 0.3), (0.1, 0.2, 0.5), cell=10)
        specs.append(plane_scene(d, w=w, h=h, n=n, texture=tex))
    return specs


PRESETS = {
    "plane": lambda: plane_scene(1.0),
    "twoplane": lambda: two_plane_scene(),
    "twoplane128": lambda: two_plane_scene(w=128, h=128),
}
PRESETS.update({f"occlusion{i}": (lambda i=i: occlusion_suite()[i]) for i in range(10)})
PRESETS.update({f"texture{i}": (lambda i=i: texture_only_suite()[i]) for i in range(5)})


def preset(name: str) -> SceneSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
