"""Slow reference routes used to cross-check the fast solver paths.

Everything in this module is deliberately independent of the FFT-based
solver: convolution matrices are assembled entry by entry from the stencil
definition, and the decomposition reference is a primal-dual iteration
built on roll-based differences with no augmented Lagrangian and no
Fourier transform. These routines back the self-test command and the
equivalence tests; they are written for clarity, not speed, and are only
meant for small images.
"""

from __future__ import annotations

import numpy as np

from .admm import ModelParams, SolverState
from .grid import as_grid
from .ops import Kernel, KernelBank


def dense_conv_matrix(k: Kernel, height: int, width: int) -> np.ndarray:
    """(HW x HW) matrix of the periodic sliding-stencil product.

    Row i*W+j holds the taps applied around pixel (i, j) with wrapped
    indexing, matching conv_periodic entry for entry.
    """
    n = height * width
    A = np.zeros((n, n))
    R = k.radius
    for i in range(height):
        for j in range(width):
            row = i * width + j
            for a in range(-R, R + 1):
                for b in range(-R, R + 1):
                    t = k.taps[a + R, b + R]
                    if t != 0.0:
                        col = ((i + a) % height) * width + ((j + b) % width)
                        A[row, col] += t
    return A


def dense_lss_solve(f, state: SolverState, bank: KernelBank,
                    params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Direct solve of the assembled (2HW x 2HW) linear system for (u, v)."""
    f = as_grid(f)
    h, w = f.shape
    n = h * w
    mats = [dense_conv_matrix(k, h, w) for k in bank]
    E1 = np.eye(n)
    for K in mats:
        E1 += params.r_p * (K.T @ K)
    e2 = params.e2_scalar()
    b1 = f.ravel().copy()
    for m, K in enumerate(mats):
        b1 += params.r_p * (K.T @ (state.p[m] - state.lambda_hat[m]).ravel())
    b2 = f.ravel() + params.r_q * (state.q - state.mu_hat).ravel()
    A = np.block([[E1, np.eye(n)], [np.eye(n), e2 * np.eye(n)]])
    sol = np.linalg.solve(A, np.concatenate([b1, b2]))
    return sol[:n].reshape(h, w), sol[n:].reshape(h, w)


def _dx(u):
    return np.roll(u, -1, axis=1) - u


def _dy(u):
    return np.roll(u, -1, axis=0) - u


def _dx_t(w):
    return np.roll(w, 1, axis=1) - w


def _dy_t(w):
    return np.roll(w, 1, axis=0) - w


def reference_objective_diff(u, v, f, alpha_x: float, alpha_y: float,
                             beta: float) -> float:
    """Model energy for the two-kernel forward-difference configuration."""
    u, v, f = as_grid(u), as_grid(v), as_grid(f)
    return float(
        beta * np.sum(np.abs(v))
        + alpha_x * np.sum(np.abs(_dx(u)))
        + alpha_y * np.sum(np.abs(_dy(u)))
        + 0.5 * np.sum((u + v - f) ** 2)
    )


def reference_decompose_diff(f, alpha_x: float, alpha_y: float, beta: float,
                             iters: int = 60000) -> tuple[np.ndarray, np.ndarray]:
    """Primal-dual (Chambolle-Pock) reference for the difference-kernel model.

    Minimizes beta*||v||_1 + alpha_x*||Dx u||_1 + alpha_y*||Dy u||_1
    + 1/2*||u + v - f||^2 with dual variables for (Dx u, Dy u, v). The
    linear map has squared norm at most 9 (4 per difference plus 1 for the
    identity), so tau = sigma = 1/3 satisfies the step condition.
    """
    f = as_grid(f)
    tau = sigma = 1.0 / 3.0
    u = np.zeros_like(f)
    v = np.zeros_like(f)
    u_bar = u.copy()
    v_bar = v.copy()
    y1 = np.zeros_like(f)
    y2 = np.zeros_like(f)
    y3 = np.zeros_like(f)
    for _ in range(iters):
        # Dual ascent then projection onto the l-infinity balls of the
        # conjugate (the l1 conjugate is an indicator, so sigma drops out).
        y1 = np.clip(y1 + sigma * _dx(u_bar), -alpha_x, alpha_x)
        y2 = np.clip(y2 + sigma * _dy(u_bar), -alpha_y, alpha_y)
        y3 = np.clip(y3 + sigma * v_bar, -beta, beta)
        u_prev, v_prev = u, v
        u_in = u - tau * (_dx_t(y1) + _dy_t(y2))
        v_in = v - tau * y3
        # Closed-form prox of 1/2*||u + v - f||^2 (joint in u and v).
        resid = (u_in + v_in - f) / (1.0 + 2.0 * tau)
        u = u_in - tau * resid
        v = v_in - tau * resid
        u_bar = 2.0 * u - u_prev
        v_bar = 2.0 * v - v_prev
    return u, v
