"""Synthetic shapes dataset: folder-per-class PNGs, no downloads needed."""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

CLASSES = ("circle", "square", "triangle", "cross")


def _draw(kind: str, rng: np.random.Generator, size: int) -> Image.Image:
    bg = tuple(int(v) for v in rng.integers(0, 60, size=3))
    img = Image.new("RGB", (size, size), bg)
    d = ImageDraw.Draw(img)
    color = tuple(int(v) for v in rng.integers(120, 256, size=3))
    m = size // 2
    r = int(rng.integers(size // 5, size // 3))
    cx = int(rng.integers(r + 1, size - r - 1))
    cy = int(rng.integers(r + 1, size - r - 1))
    if kind == "circle":
        d.ellipse([cx - r, cy - r, cx + r, cy + r], fill=color)
    elif kind == "square":
        d.rectangle([cx - r, cy - r, cx + r, cy + r], fill=color)
    elif kind == "triangle":
        d.polygon([(cx, cy - r), (cx - r, cy + r), (cx + r, cy + r)], fill=color)
    elif kind == "cross":
        t = max(2, r // 3)
        d.rectangle([cx - r, cy - t, cx + r, cy + t], fill=color)
        d.rectangle([cx - t, cy - r, cx + t, cy + r], fill=color)
    else:
        raise ValueError(f"unknown shape {kind}")
    # light pixel noise so training is not trivial memorization
    arr = np.asarray(img, dtype=np.int16)
    arr = arr + rng.integers(-12, 13, size=arr.shape)
    return Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8))


def generate_dataset(out_dir, per_class: int = 50, size: int = 32, seed: int = 0):
    """Writes <out_dir>/<class>/<class>_NNN.png for each class."""
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    for cls in CLASSES:
        cdir = out_dir / cls
        cdir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            _draw(cls, rng, size).save(cdir / f"{cls}_{i:03d}.png")
    return out_dir
