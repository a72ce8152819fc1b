#!/usr/bin/env python3
"""Fit the bundled linear quality model.

The target is the score of the reference BRISQUE support vector regressor
distributed with the `image-quality` package (libsvm model plus feature
scaling), evaluated here with numpy so libsvm is not needed. The regressor
inputs are the 36 features computed by this crate.

    pip download --no-deps image-quality==1.2.7 -d /tmp/iq
    python3 -m zipfile -e /tmp/iq/image_quality-1.2.7-*.whl /tmp/iq/x
    python3 tools/fit_brisque_model.py corpus /tmp/bq
    cargo run --release -p evoimage --example brisque_corpus -- /tmp/bq
    python3 tools/fit_brisque_model.py fit /tmp/bq /tmp/iq/x/imquality \
        crates/core/models/brisque_linear.json
"""

import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.ndimage
import scipy.optimize
import scipy.signal
import scipy.special
import skimage.color
import skimage.data
import skimage.transform
from PIL import Image

RGB_SOURCES = [
    "astronaut", "coffee", "chelsea", "rocket", "hubble_deep_field",
    "immunohistochemistry", "retina",
]
GRAY_SOURCES = [
    "camera", "moon", "coins", "brick", "grass", "gravel", "clock", "page",
    "text", "cell",
]


def sources():
    for name in RGB_SOURCES:
        yield name, getattr(skimage.data, name)()
    left, right, _ = skimage.data.stereo_motorcycle()
    yield "motorcycle_left", left
    yield "motorcycle_right", right
    for name in GRAY_SOURCES:
        g = getattr(skimage.data, name)()
        yield name, np.repeat(g[:, :, None], 3, axis=2)


def to_u8(x):
    return np.clip(np.floor(x * 255 + 0.5), 0, 255).astype(np.uint8)


def degrade(img, kind, s, rng):
    if kind == "fog":
        return (1 - s) * img + s
    if kind == "blur":
        return np.stack(
            [scipy.ndimage.gaussian_filter(img[..., c], s, mode="mirror") for c in range(3)],
            axis=2,
        )
    if kind == "noise":
        return np.clip(img + rng.normal(0, s, img.shape), 0, 1)
    raise ValueError(kind)


def make_corpus(out):
    base = Path(out) / "base"
    base.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)
    degradations = [("fog", s) for s in (0.2, 0.4, 0.6)]
    degradations += [("blur", s) for s in (1.0, 2.0, 3.0)]
    degradations += [("noise", s) for s in (0.02, 0.05, 0.1)]
    count = 0
    for name, src in sources():
        src = src.astype(np.float64) / 255.0
        for factor in (1, 2, 4):
            scaled = skimage.transform.resize(
                src, (src.shape[0] // factor, src.shape[1] // factor), anti_aliasing=True
            )
            for side in (64, 96, 128, 192, 256):
                h, w = scaled.shape[:2]
                if h < side or w < side:
                    continue
                for k in range(2):
                    y = rng.integers(0, h - side + 1)
                    x = rng.integers(0, w - side + 1)
                    crop = scaled[y:y + side, x:x + side]
                    stem = f"{name}_f{factor}_s{side}_{k}"
                    Image.fromarray(to_u8(crop)).save(base / f"{stem}.png")
                    count += 1
                    for kind, s in degradations:
                        if rng.random() < 0.5:
                            continue
                        d = degrade(crop, kind, s, rng)
                        Image.fromarray(to_u8(d)).save(base / f"{stem}_{kind}{s}.png")
                        count += 1
    print(f"wrote {count} images to {base}")


# Reference features, following the image-quality package.

def gaussian_kernel2d(size=7, sigma=7 / 6):
    y, x = np.indices((size, size)) - size // 2
    k = np.exp(-(x ** 2 + y ** 2) / (2 * sigma ** 2))
    return k / k.sum()


KERNEL = gaussian_kernel2d()


def phi(a):
    return scipy.special.gamma(2 / a) ** 2 / (
        scipy.special.gamma(1 / a) * scipy.special.gamma(3 / a)
    )


def aggd(x):
    left, right = x[x < 0], x[x >= 0]
    sl = np.sqrt(np.mean(left ** 2))
    sr = np.sqrt(np.mean(right ** 2))
    g = sl / sr
    r_hat = np.abs(x).mean() ** 2 / np.mean(x ** 2)
    big_r = r_hat * (g ** 3 + 1) * (g + 1) / (g ** 2 + 1) ** 2
    sol = scipy.optimize.root(lambda a: phi(a) - big_r, np.array([0.2]))
    a = sol.x.item()
    const = np.sqrt(scipy.special.gamma(1 / a) / scipy.special.gamma(3 / a))
    mean = (sr - sl) * const * scipy.special.gamma(2 / a) / scipy.special.gamma(1 / a)
    return a, mean, sl, sr


def scale_features(gray):
    mu = scipy.signal.convolve2d(gray, KERNEL, "same")
    sigma = np.sqrt(np.abs(mu ** 2 - scipy.signal.convolve2d(gray ** 2, KERNEL, "same")))
    m = (gray - mu) / (sigma + 1 / 255)
    maps = [m[:, :-1] * m[:, 1:], m[:-1, :] * m[1:, :], m[:-1, :-1] * m[1:, 1:],
            m[1:, :-1] * m[:-1, 1:]]
    a, _, sl, sr = aggd(m.ravel())
    out = [a, (sl ** 2 + sr ** 2) / 2]
    for p in maps:
        a, mean, sl, sr = aggd(p.ravel())
        out += [a, mean, sl ** 2, sr ** 2]
    return out


def reference_features(path):
    gray = skimage.color.rgb2gray(np.asarray(Image.open(path).convert("RGB")))
    half = skimage.transform.rescale(gray, 0.5, order=2, mode="constant", anti_aliasing=False)
    return np.array(scale_features(gray) + scale_features(half))


class Svr:
    def __init__(self, package):
        package = Path(package)
        with open(package / "models" / "normalize.pickle", "rb") as f:
            p = pickle.load(f)
        self.lo, self.hi = np.array(p["min_"]), np.array(p["max_"])
        lines = (package / "models" / "brisque_svm.txt").read_text().splitlines()
        header = dict(l.split(" ", 1) for l in lines[: lines.index("SV")])
        self.gamma = float(header["gamma"])
        self.rho = float(header["rho"])
        coef, svs = [], []
        for line in lines[lines.index("SV") + 1:]:
            parts = line.split()
            if not parts:
                continue
            coef.append(float(parts[0]))
            sv = np.zeros(36)
            for item in parts[1:]:
                i, v = item.split(":")
                sv[int(i) - 1] = float(v)
            svs.append(sv)
        self.coef, self.svs = np.array(coef), np.array(svs)

    def __call__(self, features):
        x = -1 + 2.0 / (self.hi - self.lo) * (features - self.lo)
        k = np.exp(-self.gamma * np.sum((self.svs - x) ** 2, axis=1))
        return float(self.coef @ k - self.rho)


def fit(workdir, package, out):
    workdir = Path(workdir)
    svr = Svr(package)
    rows = [l.split(",") for l in (workdir / "features.csv").read_text().splitlines()]
    names = [r[0] for r in rows]
    ours = np.array([[float(v) for v in r[1:]] for r in rows])
    target = []
    keep = []
    for i, name in enumerate(names):
        try:
            f = reference_features(workdir / name)
        except Exception:
            continue
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(ours[i])):
            continue
        keep.append(i)
        target.append(svr(f))
    x, y = ours[keep], np.array(target)
    print(f"{len(y)} samples, target mean {y.mean():.2f} sd {y.std():.2f}")

    means, scales = x.mean(axis=0), x.std(axis=0)
    scales[scales == 0] = 1.0
    z = (x - means) / scales
    lam = 1.0
    a = z.T @ z + lam * np.eye(36)
    w = np.linalg.solve(a, z.T @ (y - y.mean()))
    bias = y.mean()
    pred = z @ w + bias
    resid = pred - y
    print(f"rmse {np.sqrt(np.mean(resid ** 2)):.3f}, r {np.corrcoef(pred, y)[0, 1]:.4f}")

    model = {
        "means": means.tolist(),
        "scales": scales.tolist(),
        "weights": w.tolist(),
        "bias": float(bias),
    }
    Path(out).write_text(json.dumps(model, indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    if len(sys.argv) == 3 and sys.argv[1] == "corpus":
        make_corpus(sys.argv[2])
    elif len(sys.argv) == 5 and sys.argv[1] == "fit":
        fit(*sys.argv[2:])
    else:
        sys.exit(__doc__)
