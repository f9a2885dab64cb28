"""Periodic convolution operators, their Fourier symbols, and shrinkage.

Conventions fixed once here and relied on everywhere else:

* ``conv_periodic`` applies the stored taps as a sliding stencil without
  flipping (circular correlation): for a kernel of radius R,

      out[i, j] = sum_{a,b in [-R, R]} taps[a+R, b+R] * img[i+a, j+b]

  with both indices wrapping periodically. ``adjoint_conv`` is then
  circular convolution with the 180-degree rotated taps, so the pair
  satisfies <K u, w> = <u, K^T w> exactly in exact arithmetic.
* The x-difference differentiates along columns (index j), the
  y-difference along rows (index i), both forward differences with
  periodic wrap.
* No padding is ever applied; even and odd image dimensions both work.

Fourier symbols (one complex value per frequency bin) are cached per
(kernel, image shape) because the solvers apply the same small kernels to
one image geometry thousands of times. The cache is append-only and safe
under concurrent lookup.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .grid import as_grid


@dataclass(frozen=True)
class Kernel:
    """Small square convolution stencil with its anchor at the center tap."""

    radius: int
    taps: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"kernel radius must be >= 0, got {self.radius}")
        taps = np.asarray(self.taps, dtype=np.float64)
        side = 2 * self.radius + 1
        if taps.shape != (side, side):
            raise ShapeError(
                f"kernel taps must be {side}x{side} for radius {self.radius}, "
                f"got {taps.shape}"
            )
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        taps = taps.copy()
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1


@dataclass(frozen=True)
class KernelBank:
    """Ordered family of kernels sharing one support radius."""

    kernels: tuple[Kernel, ...]

    def __post_init__(self):
        ks = tuple(self.kernels)
        if len(ks) < 1:
            raise ValueError("kernel bank must hold at least one kernel")
        radius = ks[0].radius
        if any(k.radius != radius for k in ks):
            raise ValueError("all kernels in a bank must share one radius")
        object.__setattr__(self, "kernels", ks)

    @property
    def width(self) -> int:
        return len(self.kernels)

    @property
    def radius(self) -> int:
        return self.kernels[0].radius

    def __iter__(self):
        return iter(self.kernels)

    def __len__(self) -> int:
        return len(self.kernels)

    def __getitem__(self, m: int) -> Kernel:
        return self.kernels[m]


def diff_x_kernel(radius: int) -> Kernel:
    """Forward column difference u[i, j+1] - u[i, j] embedded at radius R."""
    if radius < 1:
        raise ValueError("difference stencil needs radius >= 1")
    taps = np.zeros((2 * radius + 1, 2 * radius + 1))
    taps[radius, radius + 1] = 1.0
    taps[radius, radius] = -1.0
    return Kernel(radius, taps)


def diff_y_kernel(radius: int) -> Kernel:
    """Forward row difference u[i+1, j] - u[i, j] embedded at radius R."""
    if radius < 1:
        raise ValueError("difference stencil needs radius >= 1")
    taps = np.zeros((2 * radius + 1, 2 * radius + 1))
    taps[radius + 1, radius] = 1.0
    taps[radius, radius] = -1.0
    return Kernel(radius, taps)


def make_diff_bank(M: int, R: int) -> KernelBank:
    """Bank of M kernels alternating x- and y-forward differences.

    Odd positions (1st, 3rd, ...) hold the x-difference, even positions the
    y-difference, each embedded in a (2R+1) x (2R+1) support with all other
    taps zero. M must be even and R >= 1 so the stencil fits.
    """
    if M < 1 or M % 2 != 0:
        raise ValueError(f"bank width M must be a positive even integer, got {M}")
    if R < 1:
        raise ValueError(f"difference bank needs R >= 1, got {R}")
    dx, dy = diff_x_kernel(R), diff_y_kernel(R)
    return KernelBank(tuple(dx if m % 2 == 0 else dy for m in range(M)))


def conv_periodic(img, k: Kernel) -> np.ndarray:
    """Circular correlation of img with the kernel taps (see module notes)."""
    img = as_grid(img)
    out = np.zeros_like(img)
    R = k.radius
    for a in range(-R, R + 1):
        for b in range(-R, R + 1):
            t = k.taps[a + R, b + R]
            if t != 0.0:
                out += t * np.roll(img, shift=(-a, -b), axis=(0, 1))
    return out


def adjoint_conv(img, k: Kernel) -> np.ndarray:
    """Apply K^T: circular convolution with the flipped taps."""
    img = as_grid(img)
    out = np.zeros_like(img)
    R = k.radius
    for a in range(-R, R + 1):
        for b in range(-R, R + 1):
            t = k.taps[a + R, b + R]
            if t != 0.0:
                out += t * np.roll(img, shift=(a, b), axis=(0, 1))
    return out


_otf_cache: dict[tuple, np.ndarray] = {}
_otf_lock = threading.Lock()


def kernel_otf(k: Kernel, height: int, width: int) -> np.ndarray:
    """Fourier symbol of the kernel on a height x width periodic grid.

    Pointwise multiplication by the symbol in frequency space reproduces
    ``conv_periodic`` (up to FFT roundoff). Raises if the kernel support
    does not fit inside the image.
    """
    if k.side > min(height, width):
        raise ValueError(
            f"kernel side {k.side} exceeds image dimensions {height}x{width}"
        )
    key = (k.taps.tobytes(), k.radius, height, width)
    hit = _otf_cache.get(key)
    if hit is not None:
        return hit
    embedded = np.zeros((height, width))
    R = k.radius
    for a in range(-R, R + 1):
        for b in range(-R, R + 1):
            embedded[(-a) % height, (-b) % width] += k.taps[a + R, b + R]
    otf = np.fft.fft2(embedded)
    otf.setflags(write=False)
    with _otf_lock:
        _otf_cache.setdefault(key, otf)
    return _otf_cache[key]


def apply_otf(img, otf: np.ndarray) -> np.ndarray:
    """Convolve through the Fourier route: ifft2(fft2(img) * otf)."""
    img = as_grid(img)
    if img.shape != otf.shape:
        raise ShapeError(f"image {img.shape} does not match symbol {otf.shape}")
    return np.fft.ifft2(np.fft.fft2(img) * otf).real


def soft_threshold(x, gamma: float):
    """Shrink toward zero by gamma: sgn(x) * max(|x| - gamma, 0).

    This is the proximal operator of gamma * |.|; it accepts scalars or
    arrays elementwise. gamma must be nonnegative; gamma = 0 is the
    identity.
    """
    if gamma < 0:
        raise ValueError(f"threshold must be nonnegative, got {gamma}")
    if np.isscalar(x):
        return float(np.sign(x) * max(abs(x) - gamma, 0.0))
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)
