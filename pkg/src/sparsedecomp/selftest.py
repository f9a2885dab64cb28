"""Built-in oracle suite: cross-checks the fast paths against slow routes.

Each check returns (name, passed, detail). The suite is what the
command-line ``selftest`` subcommand runs; tests reuse the same checks.
All tolerances are stated next to the checks.
"""

from __future__ import annotations

import numpy as np

from .admm import ModelParams, SolverState, StoppingRule, admm_solve, lss_solve
from .grid import inner, norm2, norm_inf
from .ops import Kernel, adjoint_conv, apply_otf, conv_periodic, kernel_otf, make_diff_bank
from .reference import dense_lss_solve
from .synth import make_squares_scene
from .unroll import init_default, idnet_forward

ADJOINT_TOL = 1e-10
FFT_TOL = 1e-10
DENSE_TOL = 1e-8
TRUNCATION_TOL = 1e-12
KKT_FEAS_TOL = 1e-4
KKT_STAT_TOL = 1e-4
KKT_MULT_TOL = 1e-8


def _random_kernel(rng, radius: int) -> Kernel:
    return Kernel(radius, rng.normal(size=(2 * radius + 1, 2 * radius + 1)))


def check_adjoint(cases: int = 50, seed: int = 101) -> tuple[str, bool, str]:
    """|<K u, w> - <u, K^T w>| <= 1e-10 * ||u|| * ||w|| on random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        h, w = int(rng.integers(4, 13)), int(rng.integers(4, 13))
        radius = int(rng.integers(1, 3))
        k = _random_kernel(rng, radius)
        u = rng.normal(size=(h, w))
        wgt = rng.normal(size=(h, w))
        gap = abs(inner(conv_periodic(u, k), wgt) - inner(u, adjoint_conv(wgt, k)))
        worst = max(worst, gap / (norm2(u) * norm2(wgt)))
    return ("adjoint identity", worst <= ADJOINT_TOL,
            f"worst normalized gap {worst:.3e} (tol {ADJOINT_TOL:.0e})")


def check_fft_vs_direct(cases: int = 50, seed: int = 202) -> tuple[str, bool, str]:
    """Fourier-route convolution matches the sliding stencil to 1e-10."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        h, w = int(rng.integers(5, 17)), int(rng.integers(5, 17))
        radius = int(rng.integers(1, 3))
        k = _random_kernel(rng, radius)
        img = rng.normal(size=(h, w))
        direct = conv_periodic(img, k)
        via_fft = apply_otf(img, kernel_otf(k, h, w))
        worst = max(worst, norm_inf(direct - via_fft))
    return ("fft vs direct convolution", worst <= FFT_TOL,
            f"worst abs gap {worst:.3e} (tol {FFT_TOL:.0e})")


def check_dense_solve(cases: int = 5, seed: int = 303) -> tuple[str, bool, str]:
    """FFT (u, v) solve matches the assembled dense system to 1e-8."""
    rng = np.random.default_rng(seed)
    bank = make_diff_bank(2, 1)
    params = ModelParams(alphas=[0.6, 0.6], beta=0.1, r_p=0.07, r_q=0.07)
    worst = 0.0
    for _ in range(cases):
        f = rng.normal(size=(8, 8))
        state = SolverState(
            p=rng.normal(size=(2, 8, 8)), q=rng.normal(size=(8, 8)),
            lambda_hat=rng.normal(size=(2, 8, 8)), mu_hat=rng.normal(size=(8, 8)),
            u=np.zeros((8, 8)), v=np.zeros((8, 8)))
        u, v = lss_solve(f, state, bank, params)
        ud, vd = dense_lss_solve(f, state, bank, params)
        worst = max(worst, norm_inf(u - ud), norm_inf(v - vd))
    return ("dense solve equivalence", worst <= DENSE_TOL,
            f"worst abs gap {worst:.3e} (tol {DENSE_TOL:.0e})")


def check_truncation(seed: int = 404) -> tuple[str, bool, str]:
    """Constant-parameter forward pass equals the truncated solver to 1e-12."""
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(12, 10))
    bank = make_diff_bank(2, 1)
    worst = 0.0
    for L in (1, 4):
        bundle = init_default(2, L, 1)
        params = ModelParams(alphas=bundle.layer_alphas[0],
                             beta=float(bundle.layer_betas[0]),
                             r_p=bundle.r_p, r_q=bundle.r_q)
        u_n, v_n = idnet_forward(f, bundle)
        res = admm_solve(f, bank, params, StoppingRule(max_iters=L))
        worst = max(worst, norm_inf(u_n - res.u), norm_inf(v_n - res.v))
    return ("truncation equivalence", worst <= TRUNCATION_TOL,
            f"worst abs gap {worst:.3e} (tol {TRUNCATION_TOL:.0e})")


def check_kkt() -> tuple[str, bool, str]:
    """Pinned-scene run reaches small feasibility and stationarity gaps."""
    scene = make_squares_scene(7, 16, 16, 3, 8, 0.6)
    bank = make_diff_bank(2, 1)
    params = ModelParams(alphas=[0.6, 0.6], beta=0.1, r_p=0.07, r_q=0.07)
    res = admm_solve(scene.image, bank, params, StoppingRule(max_iters=600))
    k = res.kkt
    ok = (k.feasibility_p <= KKT_FEAS_TOL and k.feasibility_q <= KKT_FEAS_TOL
          and k.stationarity_u <= KKT_STAT_TOL
          and k.multiplier_bound_p <= KKT_MULT_TOL
          and k.multiplier_bound_q <= KKT_MULT_TOL)
    return ("kkt report", ok,
            f"feas_p {k.feasibility_p:.2e}, feas_q {k.feasibility_q:.2e}, "
            f"stat_u {k.stationarity_u:.2e}, mult_p {k.multiplier_bound_p:.2e}, "
            f"mult_q {k.multiplier_bound_q:.2e}")


def run_selftest() -> list[tuple[str, bool, str]]:
    """Run every oracle check; order is fixed for stable output."""
    return [
        check_adjoint(),
        check_fft_vs_direct(),
        check_dense_solve(),
        check_truncation(),
        check_kkt(),
    ]
