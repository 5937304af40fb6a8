"""Orthonormal 2-D Haar transform, PGM I/O and compressive image reconstruction.

Flat coefficient layout (coarsest first)::

    [approx_L, H_L, V_L, D_L, H_{L-1}, V_{L-1}, D_{L-1}, ..., H_1, V_1, D_1]

where level 1 is the finest. Each band is stored row-major. ``H`` is
low-pass across columns and high-pass across rows, ``V`` the reverse, and
``D`` high-pass in both directions.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import islice

import numpy as np

from .core import DimensionError, random_dictionary
from .solvers import SolverConfig, iterates

_S = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width) float64

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise DimensionError("pixels must be a 2-D array")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class WaveletCoeffs:
    coeffs: np.ndarray
    levels: int
    width: int
    height: int


def _check_dims(height, width, levels):
    step = 2**levels
    if levels < 0 or height % step or width % step:
        raise DimensionError(f"{height}x{width} image is not divisible by 2**{levels}")


def _split(a, axis):
    even = np.take(a, np.arange(0, a.shape[axis], 2), axis=axis)
    odd = np.take(a, np.arange(1, a.shape[axis], 2), axis=axis)
    return (even + odd) * _S, (even - odd) * _S


def _merge(lo, hi, axis):
    even, odd = (lo + hi) * _S, (lo - hi) * _S
    shape = list(lo.shape)
    shape[axis] *= 2
    out = np.empty(shape)
    idx = [slice(None)] * lo.ndim
    idx[axis] = slice(0, None, 2)
    out[tuple(idx)] = even
    idx[axis] = slice(1, None, 2)
    out[tuple(idx)] = odd
    return out


def haar_analysis(img, levels):
    _check_dims(img.height, img.width, levels)
    approx = img.pixels
    details = []
    for _ in range(levels):
        lo, hi = _split(approx, axis=1)
        ll, lh = _split(lo, axis=0)
        hl, hh = _split(hi, axis=0)
        details.append((lh, hl, hh))
        approx = ll
    parts = [approx.ravel()]
    for bands in reversed(details):
        parts.extend(b.ravel() for b in bands)
    return WaveletCoeffs(np.concatenate(parts), levels, img.width, img.height)


def haar_synthesis(wc):
    _check_dims(wc.height, wc.width, wc.levels)
    h, w = wc.height >> wc.levels, wc.width >> wc.levels
    c = np.asarray(wc.coeffs, dtype=np.float64)
    if c.size != wc.width * wc.height:
        raise DimensionError("coefficient count does not match image size")
    pos = h * w
    approx = c[:pos].reshape(h, w)
    for _ in range(wc.levels):
        bands = []
        for _ in range(3):
            bands.append(c[pos:pos + h * w].reshape(h, w))
            pos += h * w
        lh, hl, hh = bands
        lo = _merge(approx, lh, axis=0)
        hi = _merge(hl, hh, axis=0)
        approx = _merge(lo, hi, axis=1)
        h, w = 2 * h, 2 * w
    return GrayImage(approx)


def psnr(orig, recon):
    a, b = np.asarray(orig.pixels), np.asarray(recon.pixels)
    if a.shape != b.shape:
        raise DimensionError("images must have equal dimensions")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def make_phantom(size=64):
    """Deterministic test image: flat ellipses and a rectangle over a smooth gradient."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = 40.0 + 50.0 * xx + 30.0 * yy
    shapes = [
        (0.50, 0.50, 0.42, 0.34, 60.0),
        (0.45, 0.38, 0.18, 0.10, 70.0),
        (0.58, 0.66, 0.10, 0.14, -45.0),
        (0.30, 0.62, 0.06, 0.06, 90.0),
    ]
    for cy, cx, ry, rx, val in shapes:
        img[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0] += val
    s = size // 8
    img[5 * s:6 * s + s // 2, 2 * s:3 * s] = 230.0
    return GrayImage(np.clip(img, 0, 255))


def center_crop(img, levels):
    """Largest centered crop whose sides are divisible by ``2**levels``."""
    step = 2**levels
    h, w = (img.height // step) * step, (img.width // step) * step
    if h == 0 or w == 0:
        raise DimensionError(f"image too small for {levels} levels")
    top, left = (img.height - h) // 2, (img.width - w) // 2
    return GrayImage(img.pixels[top:top + h, left:left + w])


def read_pgm(path):
    """Read an 8-bit binary (P5) PGM file."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    token_re = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")
    for _ in range(4):
        mt = token_re.match(data, pos)
        if mt is None:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(mt.group(1))
        pos = mt.end()
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: only binary P5 PGM is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pos += 1  # single whitespace byte after maxval
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return GrayImage(raw.reshape(height, width).astype(np.float64))


def write_pgm(path, img):
    """Write as 8-bit P5, clamping to [0, 255] and rounding."""
    px = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode())
        fh.write(px.tobytes())


def reconstruct_image(img, A=None, cfg=None, record_iters=(1, 4, 9), levels=6,
                      solver="TSAA", seed=0):
    """Recover ``img`` from ``y = A W(img)`` and score it along the way.

    ``A`` defaults to a seeded two-block dictionary with ``m = n / 2``;
    ``cfg`` defaults to ``K = floor(m / 3)``. The solver runs
    ``max(record_iters)`` iterations with no other stopping rule. Returns
    the final reconstruction and one ``(iteration, psnr_db)`` pair per
    requested iteration.
    """
    n = img.width * img.height
    if n % 2:
        raise DimensionError("pixel count must be even")
    wc = haar_analysis(img, levels)
    if A is None:
        A = random_dictionary(seed, n // 2, 2)
    if A.n != n:
        raise DimensionError(f"dictionary has {A.n} columns for {n} coefficients")
    total = max(record_iters)
    if cfg is None:
        cfg = SolverConfig(K=A.m // 3)
    y = A.apply(wc.coeffs)
    wanted = set(record_iters)

    def score(c):
        return haar_synthesis(WaveletCoeffs(c, levels, img.width, img.height))

    trace = []
    x = np.zeros(n)
    for k, x in enumerate(islice(iterates(solver, A, y, cfg), total), start=1):
        if k in wanted:
            trace.append((k, psnr(img, score(x))))
    return score(x), trace
