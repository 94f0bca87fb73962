"""Overlay drawing, composites and the resolution filter.

Everything here is integer-pixel and mask based so output PNG bytes are
stable across runs; text uses Pillow's built-in bitmap font.
"""

from __future__ import annotations

import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image, ImageDraw, ImageFont

PALETTE: dict[str, tuple[int, int, int]] = {
    "Red": (255, 0, 0),
    "Green": (0, 200, 0),
    "Blue": (0, 0, 255),
    "Yellow": (255, 215, 0),
    "Purple": (160, 32, 240),
    "Black": (0, 0, 0),
    "White": (255, 255, 255),
}
MARKER_COLORS = ("Red", "Green", "Blue", "Yellow", "Purple")
MIN_SIDE = 100
PNG_COMPRESS = 6


class AnnotateError(ValueError):
    pass


@dataclass(frozen=True)
class Dot:
    center: tuple[float, float]
    radius: int
    color: str


@dataclass(frozen=True)
class Arrow:
    start: tuple[float, float]
    end: tuple[float, float]
    color: str
    head: int = 10
    width: int = 3


@dataclass(frozen=True)
class TextLabel:
    anchor: tuple[float, float]
    text: str
    color: str = "White"


Primitive = Union[Dot, Arrow, TextLabel]


@dataclass(frozen=True)
class OverlaySpec:
    base: str
    primitives: tuple[Primitive, ...]
    output: str


@dataclass(frozen=True)
class MediaJob:
    """One output image: each source gets its own overlays, then optional compositing."""

    output: str
    sources: tuple[str, ...]
    primitives: tuple[tuple[Primitive, ...], ...] = ()
    layout: str | None = None
    labels: tuple[str, ...] | None = None


def resolution_filter(image_size: tuple[int, int]) -> bool:
    w, h = image_size
    return w >= MIN_SIDE and h >= MIN_SIDE


def _rgb(name: str) -> tuple[int, int, int]:
    try:
        return PALETTE[name]
    except KeyError:
        raise AnnotateError(f"color {name!r} not in palette") from None


def _check_inside(pt, w: int, h: int, what: str) -> tuple[int, int]:
    x, y = int(round(pt[0])), int(round(pt[1]))
    if not (0 <= x < w and 0 <= y < h):
        raise AnnotateError(f"{what} at ({pt[0]:.1f}, {pt[1]:.1f}) outside {w}x{h} image")
    return x, y


def _draw_dot(img: np.ndarray, d: Dot) -> None:
    h, w = img.shape[:2]
    cx, cy = _check_inside(d.center, w, h, "dot")
    r = int(d.radius)
    y0, y1 = max(0, cy - r), min(h - 1, cy + r)
    x0, x1 = max(0, cx - r), min(w - 1, cx + r)
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    img[y0:y1 + 1, x0:x1 + 1][mask] = _rgb(d.color)


def _draw_arrow(img: np.ndarray, a: Arrow) -> None:
    h, w = img.shape[:2]
    sx, sy = _check_inside(a.start, w, h, "arrow start")
    ex, ey = _check_inside(a.end, w, h, "arrow end")
    vx, vy = ex - sx, ey - sy
    length = math.hypot(vx, vy)
    if length == 0:
        raise AnnotateError("zero-length arrow")
    ux, uy = vx / length, vy / length
    head = min(float(a.head), length)
    # shaft stops at the base of the head
    bx, by = ex - ux * head, ey - uy * head
    half = a.width / 2.0
    hw = head * 0.6
    corners = [(sx, sy), (ex, ey), (bx - uy * hw, by + ux * hw), (bx + uy * hw, by - ux * hw)]
    x0 = max(0, int(math.floor(min(c[0] for c in corners) - half)))
    x1 = min(w - 1, int(math.ceil(max(c[0] for c in corners) + half)))
    y0 = max(0, int(math.floor(min(c[1] for c in corners) - half)))
    y1 = min(h - 1, int(math.ceil(max(c[1] for c in corners) + half)))
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(float)
    # shaft: distance to segment start..base
    px, py = xx - sx, yy - sy
    seg = max(length - head, 0.0)
    proj = np.clip(px * ux + py * uy, 0.0, seg)
    dist = np.hypot(px - proj * ux, py - proj * uy)
    shaft = dist <= half if seg > 0 else np.zeros_like(dist, dtype=bool)
    # head: triangle (tip, left, right) via same-side tests
    tip, left, right = corners[1], corners[2], corners[3]

    def side(p, q):
        return (q[0] - p[0]) * (yy - p[1]) - (q[1] - p[1]) * (xx - p[0])

    s1, s2, s3 = side(tip, left), side(left, right), side(right, tip)
    tri = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    img[y0:y1 + 1, x0:x1 + 1][shaft | tri] = _rgb(a.color)


_FONT = None


def _font():
    global _FONT
    if _FONT is None:
        _FONT = ImageFont.load_default_imagefont()
    return _FONT


def _draw_text(img: np.ndarray, t: TextLabel) -> np.ndarray:
    h, w = img.shape[:2]
    x, y = _check_inside(t.anchor, w, h, "label")
    fg = _rgb(t.color)
    bg = PALETTE["Black"] if sum(fg) > 382 else PALETTE["White"]
    pil = Image.fromarray(img)
    draw = ImageDraw.Draw(pil)
    box = draw.textbbox((x + 2, y + 1), t.text, font=_font())
    draw.rectangle((x, y, min(w - 1, box[2] + 2), min(h - 1, box[3] + 2)), fill=bg)
    draw.text((x + 2, y + 1), t.text, fill=fg, font=_font())
    return np.asarray(pil).copy()


def draw_primitives(img: np.ndarray, primitives: Sequence[Primitive]) -> np.ndarray:
    """Draw in list order on a copy of an (H, W, 3) uint8 array."""
    out = np.array(img, dtype=np.uint8, copy=True)
    for p in primitives:
        if isinstance(p, Dot):
            _draw_dot(out, p)
        elif isinstance(p, Arrow):
            _draw_arrow(out, p)
        elif isinstance(p, TextLabel):
            out = _draw_text(out, p)
        else:
            raise AnnotateError(f"unknown primitive {type(p).__name__}")
    return out


def load_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).copy()


def save_png(arr: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(path, format="PNG", compress_level=PNG_COMPRESS)
    return path


def render(spec: OverlaySpec) -> Path:
    out = Path(spec.output)
    if not spec.primitives:
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(spec.base, out)
        return out
    return save_png(draw_primitives(load_rgb(spec.base), spec.primitives), out)


def _resize(arr: np.ndarray, w: int, h: int) -> np.ndarray:
    if arr.shape[1] == w and arr.shape[0] == h:
        return arr
    return np.asarray(Image.fromarray(arr).resize((w, h), Image.Resampling.BILINEAR))


def compose_arrays(images: Sequence[np.ndarray], layout: str, labels: Sequence[str] | None = None) -> np.ndarray:
    if not images:
        raise AnnotateError("nothing to compose")
    if labels is not None and len(labels) != len(images):
        raise AnnotateError("one label per image required")
    if layout == "side_by_side":
        h = images[0].shape[0]
        tiles = [_resize(im, max(1, round(im.shape[1] * h / im.shape[0])), h) for im in images]
    elif layout == "grid":
        h, w = images[0].shape[:2]
        tiles = [_resize(im, w, h) for im in images]
    else:
        raise AnnotateError(f"unknown layout {layout!r}")
    if labels is not None:
        tiles = [draw_primitives(t, [TextLabel((1, 1), lab, "White")]) for t, lab in zip(tiles, labels)]
    if layout == "side_by_side":
        return np.concatenate(tiles, axis=1)
    cols = math.ceil(math.sqrt(len(tiles)))
    rows = math.ceil(len(tiles) / cols)
    canvas = np.full((rows * h, cols * w, 3), 255, dtype=np.uint8)
    for i, t in enumerate(tiles):
        r, c = divmod(i, cols)
        canvas[r * h:(r + 1) * h, c * w:(c + 1) * w] = t
    return canvas


def compose(images: Sequence, layout: str, labels: Sequence[str] | None = None, output=None):
    """Compose paths or arrays; writes a PNG when ``output`` is given, else returns the array."""
    arrays = [load_rgb(im) if isinstance(im, (str, Path)) else np.asarray(im) for im in images]
    out = compose_arrays(arrays, layout, labels)
    return save_png(out, output) if output is not None else out


def execute_job(job: MediaJob, out_path) -> Path:
    out_path = Path(out_path)
    prims = job.primitives or tuple(() for _ in job.sources)
    if job.layout is None:
        if len(job.sources) != 1:
            raise AnnotateError("a job without layout takes exactly one source")
        return render(OverlaySpec(job.sources[0], tuple(prims[0]), str(out_path)))
    arrays = [draw_primitives(load_rgb(src), p) for src, p in zip(job.sources, prims)]
    return save_png(compose_arrays(arrays, job.layout, job.labels), out_path)
