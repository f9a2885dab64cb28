"""Deterministic synthetic scenes: blocky background plus sparse impulses.

The generator is fully specified so golden fixtures never drift across
platforms or library versions. Randomness comes from splitmix64:

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- state
    z <- ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z <- ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output <- z XOR (z >> 31)

Uniform doubles take the top 53 bits (output >> 11) times 2^-53; bounded
integers in [0, n) are output mod n. Scene construction consumes draws in
a fixed documented order, so a seed pins the scene bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Portable 64-bit mixing generator (see module docstring)."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return lo + u * (hi - lo)

    def randint(self, n: int) -> int:
        """Integer in [0, n); modulo reduction, fixed as part of the algorithm."""
        if n < 1:
            raise ValueError(f"randint needs n >= 1, got {n}")
        return self.next_u64() % n


@dataclass
class Scene:
    """image = background + impulse_map, with the mask flagging impulses."""

    image: np.ndarray
    background: np.ndarray
    impulse_map: np.ndarray
    impulse_mask: np.ndarray


def make_squares_scene(seed: int, height: int, width: int, n_squares: int,
                       n_impulses: int, impulse_amplitude: float) -> Scene:
    """Sum of axis-aligned constant rectangles plus single-pixel spikes.

    The first rectangle spans the whole canvas and sets the base level
    (intensity uniform in [0.4, 0.8]); the remaining rectangles are small
    low-contrast accent blocks (each side 1 pixel plus up to 10% of the
    image dimension, intensity uniform in [0.2, 0.35]). All intensities
    therefore lie in [0.2, 0.8]. The accent scale is deliberately kept
    below the structure size that total-variation weights around
    alpha ~ 0.6, beta ~ 0.1 can hold in the structured layer, so scenes
    in that regime decompose cleanly even on small canvases.

    Impulses are single-pixel spikes of +/- impulse_amplitude placed on
    distinct base-level pixels (draws landing on an accent block or an
    earlier impulse are rejected and redrawn); at most 5% of the pixels
    may carry an impulse.

    Draw order: rectangle 0 consumes one intensity draw; every further
    rectangle consumes (side_h, side_w, top, left, intensity); every
    impulse consumes (row, column) until accepted, then a sign draw.
    """
    if height < 1 or width < 1:
        raise ValueError("scene dimensions must be positive")
    if n_squares < 0 or n_impulses < 0:
        raise ValueError("counts must be nonnegative")
    if n_impulses > 0.05 * height * width:
        raise ValueError(
            f"impulse budget exceeded: {n_impulses} > 5% of {height * width} pixels"
        )
    if not np.isfinite(impulse_amplitude):
        raise ValueError("impulse amplitude must be finite")
    if n_impulses > 0 and n_squares > 0:
        # Impulses sit on base-level pixels, so accents must not tile the canvas.
        accent_cap = (1 + max(1, round(0.1 * height))) * (1 + max(1, round(0.1 * width)))
        if (n_squares - 1) * accent_cap + n_impulses > height * width:
            raise ValueError("scene too small for the requested accents and impulses")

    rng = SplitMix64(seed)
    background = np.zeros((height, width))
    on_base = np.ones((height, width), dtype=bool)
    if n_squares > 0:
        background += rng.uniform(0.4, 0.8)
    for _ in range(max(0, n_squares - 1)):
        side_h = min(1 + rng.randint(max(1, round(0.1 * height)) + 1), height)
        side_w = min(1 + rng.randint(max(1, round(0.1 * width)) + 1), width)
        top = rng.randint(height - side_h + 1)
        left = rng.randint(width - side_w + 1)
        background[top:top + side_h, left:left + side_w] += rng.uniform(0.2, 0.35)
        on_base[top:top + side_h, left:left + side_w] = False

    impulse_map = np.zeros((height, width))
    impulse_mask = np.zeros((height, width))
    placed = 0
    while placed < n_impulses:
        r = rng.randint(height)
        c = rng.randint(width)
        if impulse_mask[r, c] or not on_base[r, c]:
            continue
        sign = 1.0 if rng.next_u64() % 2 == 0 else -1.0
        impulse_map[r, c] = sign * impulse_amplitude
        impulse_mask[r, c] = 1.0
        placed += 1

    return Scene(
        image=background + impulse_map,
        background=background,
        impulse_map=impulse_map,
        impulse_mask=impulse_mask,
    )
