#!/usr/bin/env python3
"""Writes the 128x128 RGB test fixtures from scikit-image's sample data.

    python3 tools/make_fixtures.py crates/core/tests/fixtures
"""

import sys
from pathlib import Path

import numpy as np
import skimage.data
import skimage.transform
from PIL import Image

# (source, downscale factor, top, left) of each 128x128 crop, in source pixels
# after downscaling.
CROPS = [
    ("astronaut", 2, 20, 60),
    ("astronaut", 2, 120, 100),
    ("coffee", 2, 40, 60),
    ("coffee", 2, 60, 150),
    ("chelsea", 2, 10, 40),
    ("chelsea", 2, 20, 90),
    ("rocket", 2, 40, 80),
    ("rocket", 2, 80, 180),
    ("hubble_deep_field", 4, 40, 60),
    ("immunohistochemistry", 2, 60, 60),
    ("retina", 4, 110, 110),
    ("motorcycle_left", 2, 60, 40),
    ("motorcycle_left", 2, 100, 200),
    ("motorcycle_right", 2, 30, 120),
    ("camera", 2, 40, 60),
    ("coins", 2, 10, 20),
    ("brick", 2, 64, 64),
    ("gravel", 2, 20, 100),
    ("clock", 2, 10, 40),
    ("moon", 2, 60, 60),
]


def load(name):
    if name.startswith("motorcycle"):
        left, right, _ = skimage.data.stereo_motorcycle()
        img = left if name.endswith("left") else right
    else:
        img = getattr(skimage.data, name)()
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return img[:, :, :3].astype(np.float64) / 255.0


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (name, factor, top, left) in enumerate(CROPS):
        img = load(name)
        h, w = img.shape[:2]
        small = skimage.transform.resize(img, (h // factor, w // factor), anti_aliasing=True)
        crop = small[top:top + 128, left:left + 128]
        assert crop.shape == (128, 128, 3), (name, crop.shape)
        u8 = np.clip(np.floor(crop * 255 + 0.5), 0, 255).astype(np.uint8)
        Image.fromarray(u8).save(out / f"{i:02d}_{name}.png")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    main(sys.argv[1])
