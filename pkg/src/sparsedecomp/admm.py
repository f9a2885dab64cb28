"""Scaled ADMM solver for the two-layer sparse decomposition model.

The model splits an image f into a structured layer u and a sparse layer v
by minimizing

    beta * ||v||_1  +  sum_m alpha_m * ||K_m u||_1  +  1/2 * ||u + v - f||_2^2

over a bank of periodic convolution kernels K_m. The solver introduces
auxiliary variables p_m = K_m u and q = v, forms the augmented Lagrangian
in scaled (multiplier / penalty) form, and alternates three steps:

1. an exact joint (u, v) minimization, diagonal in Fourier space;
2. elementwise soft-thresholding updates of p and q;
3. the scaled multiplier ascent.

The (u, v) step solves the 2x2 block system

    [E1  I ] [u]   [b1]        E1 = sum_m r_p K_m^T K_m + I
    [ I  E2] [v] = [b2],       b1 = f + sum_m r_p K_m^T (p_m - lambda_hat_m)
                               b2 = f + r_q (q - mu_hat)

per frequency. First-order optimality of the scaled augmented Lagrangian
in v gives E2 = (1 + r_q) I; an alternative mode e2_mode="paper" uses
E2 = r_q I instead, kept only as a comparison point (that operator does
not zero the v-gradient of the subproblem, and its returned v equals the
residual it leaves behind).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NumericalError, ShapeError
from .grid import as_grid, norm1, norm2, norm_inf, require_same_shape
from .ops import KernelBank, adjoint_conv, conv_periodic, kernel_otf, soft_threshold

E2_CORRECTED = "corrected"
E2_PAPER = "paper"

# Per-frequency coefficients below this magnitude make the solve meaningless.
_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Weights of the decomposition model plus the two penalty parameters."""

    alphas: np.ndarray
    beta: float
    r_p: float
    r_q: float
    e2_mode: str = E2_CORRECTED

    def __post_init__(self):
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=np.float64)).copy()
        if alphas.ndim != 1 or alphas.size < 1:
            raise ValueError("alphas must be a nonempty 1D sequence")
        if np.any(alphas < 0) or not np.all(np.isfinite(alphas)):
            raise ValueError("alphas must be finite and nonnegative")
        if not (self.beta >= 0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and nonnegative, got {self.beta}")
        if not (self.r_p > 0 and self.r_q > 0):
            raise ValueError("penalty parameters r_p, r_q must be positive")
        if self.e2_mode not in (E2_CORRECTED, E2_PAPER):
            raise ValueError(f"unknown e2_mode {self.e2_mode!r}")
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @property
    def width(self) -> int:
        return int(self.alphas.size)

    def e2_scalar(self) -> float:
        return 1.0 + self.r_q if self.e2_mode == E2_CORRECTED else self.r_q


@dataclass
class StoppingRule:
    """Iteration budget plus an optional primal-residual tolerance."""

    max_iters: int = 100
    tol: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive when given")


@dataclass
class SolverState:
    """One ADMM iterate: auxiliaries, scaled multipliers, and last (u, v)."""

    p: np.ndarray
    q: np.ndarray
    lambda_hat: np.ndarray
    mu_hat: np.ndarray
    u: np.ndarray
    v: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, shape: tuple[int, int], M: int) -> "SolverState":
        h, w = shape
        return cls(
            p=np.zeros((M, h, w)),
            q=np.zeros((h, w)),
            lambda_hat=np.zeros((M, h, w)),
            mu_hat=np.zeros((h, w)),
            u=np.zeros((h, w)),
            v=np.zeros((h, w)),
            iteration=0,
        )

    @property
    def width(self) -> int:
        return int(self.p.shape[0])

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(a))
            for a in (self.p, self.q, self.lambda_hat, self.mu_hat, self.u, self.v)
        )


@dataclass(frozen=True)
class LssOperators:
    """Frequency-domain pieces of the (u, v) solve, fixed per bank and shape.

    e1_hat = sum_m r_p |K_hat_m|^2 + 1 is real and >= 1 everywhere; the
    per-frequency determinant e2 * e1_hat - 1 is checked against zero once
    at build time (it is provably positive in corrected mode).
    """

    otfs: tuple[np.ndarray, ...]
    e1_hat: np.ndarray = field(repr=False)
    e2_scalar: float
    denom: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, bank: KernelBank, params: ModelParams,
              shape: tuple[int, int]) -> "LssOperators":
        h, w = shape
        otfs = tuple(kernel_otf(k, h, w) for k in bank)
        e1_hat = params.r_p * sum(np.abs(o) ** 2 for o in otfs) + 1.0
        e2 = params.e2_scalar()
        denom = e2 * e1_hat - 1.0
        if np.min(np.abs(denom)) < _SINGULAR_TOL:
            raise NumericalError(
                "singular (u, v) system: |e2 * e1_hat - 1| < 1e-12 at some frequency"
            )
        e1_hat.setflags(write=False)
        denom.setflags(write=False)
        return cls(otfs=otfs, e1_hat=e1_hat, e2_scalar=e2, denom=denom)


@dataclass
class KktReport:
    """First-order optimality gaps of a decomposition run.

    feasibility_* are max-norm constraint violations; stationarity_u is the
    max-norm of the u-gradient of the scaled augmented Lagrangian at the
    final iterate; the multiplier bounds measure how far r * multiplier
    strays from the subdifferential of the corresponding l1 term (sign
    match on the support, magnitude cap off it).
    """

    feasibility_p: float
    feasibility_q: float
    stationarity_u: float
    multiplier_bound_p: float
    multiplier_bound_q: float

    def fields(self) -> dict[str, float]:
        return {
            "feasibility_p": self.feasibility_p,
            "feasibility_q": self.feasibility_q,
            "stationarity_u": self.stationarity_u,
            "multiplier_bound_p": self.multiplier_bound_p,
            "multiplier_bound_q": self.multiplier_bound_q,
        }


@dataclass
class DecompositionResult:
    """Final layers plus per-iteration diagnostics and the KKT report."""

    u: np.ndarray
    v: np.ndarray
    objective_trace: list[float]
    primal_residual_p: list[float]
    primal_residual_q: list[float]
    dual_residual: list[float]
    iterations_run: int
    kkt: KktReport
    state: SolverState


def _check_problem(f: np.ndarray, state: SolverState, bank: KernelBank,
                   params: ModelParams) -> None:
    if params.width != bank.width:
        raise ValueError(
            f"params carry {params.width} alphas but the bank has {bank.width} kernels"
        )
    if state.width != bank.width:
        raise ShapeError(
            f"state carries {state.width} p-channels but the bank has {bank.width}"
        )
    for arr in (state.q, state.mu_hat):
        require_same_shape(f, arr)
    if state.p.shape[1:] != f.shape or state.lambda_hat.shape[1:] != f.shape:
        raise ShapeError("state stacks do not match the image dimensions")


def _lss_apply(f: np.ndarray, state: SolverState, bank: KernelBank,
               params: ModelParams, lss: LssOperators) -> tuple[np.ndarray, np.ndarray]:
    b1 = f.copy()
    for m, k in enumerate(bank):
        b1 += params.r_p * adjoint_conv(state.p[m] - state.lambda_hat[m], k)
    b2 = f + params.r_q * (state.q - state.mu_hat)
    B1 = np.fft.fft2(b1)
    B2 = np.fft.fft2(b2)
    U = (lss.e2_scalar * B1 - B2) / lss.denom
    V = B1 - lss.e1_hat * U
    u = np.fft.ifft2(U).real
    v = np.fft.ifft2(V).real
    return u, v


def lss_solve(f, state: SolverState, bank: KernelBank,
              params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Exact minimizer of the (u, v) subproblem at the given state.

    Solves the 2x2 block system per frequency and returns (u, v). In the
    corrected mode the returned pair zeroes the (u, v)-gradient of the
    scaled augmented Lagrangian.
    """
    f = as_grid(f)
    _check_problem(f, state, bank, params)
    lss = LssOperators.build(bank, params, f.shape)
    return _lss_apply(f, state, bank, params, lss)


def avmu_u(u_new, state: SolverState, bank: KernelBank,
           params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Shrinkage update of p and the scaled multiplier step for lambda_hat.

    For every kernel: p_m = S(K_m u + lambda_hat_m; alpha_m / r_p), then
    lambda_hat_m += K_m u - p_m.
    """
    u_new = as_grid(u_new)
    M = bank.width
    p_new = np.empty((M,) + u_new.shape)
    lam_new = np.empty_like(p_new)
    for m, k in enumerate(bank):
        e_m = conv_periodic(u_new, k)
        p_new[m] = soft_threshold(e_m + state.lambda_hat[m],
                                  params.alphas[m] / params.r_p)
        lam_new[m] = state.lambda_hat[m] + e_m - p_new[m]
    return p_new, lam_new


def avmu_v(v_new, state: SolverState,
           params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Shrinkage update of q and the scaled multiplier step for mu_hat."""
    v_new = as_grid(v_new)
    q_new = soft_threshold(v_new + state.mu_hat, params.beta / params.r_q)
    mu_new = state.mu_hat + v_new - q_new
    return q_new, mu_new


def objective(u, v, f, bank: KernelBank, params: ModelParams) -> float:
    """Model energy beta*||v||_1 + sum_m alpha_m*||K_m u||_1 + 1/2*||u+v-f||^2."""
    u, v, f = as_grid(u), as_grid(v), as_grid(f)
    total = params.beta * norm1(v) + 0.5 * norm2(u + v - f) ** 2
    for m, k in enumerate(bank):
        total += params.alphas[m] * norm1(conv_periodic(u, k))
    return float(total)


def augmented_lagrangian(u, v, state: SolverState, f, bank: KernelBank,
                         params: ModelParams) -> float:
    """Scaled augmented Lagrangian, term by term.

    beta*||q||_1 + r_q/2*||v - q + mu_hat||^2 - r_q/2*||mu_hat||^2
    + sum_m [ alpha_m*||p_m||_1 + r_p/2*||K_m u - p_m + lambda_hat_m||^2
              - r_p/2*||lambda_hat_m||^2 ]
    + 1/2*||u + v - f||^2
    """
    u, v, f = as_grid(u), as_grid(v), as_grid(f)
    rq, rp = params.r_q, params.r_p
    total = (params.beta * norm1(state.q)
             + 0.5 * rq * norm2(v - state.q + state.mu_hat) ** 2
             - 0.5 * rq * norm2(state.mu_hat) ** 2
             + 0.5 * norm2(u + v - f) ** 2)
    for m, k in enumerate(bank):
        total += (params.alphas[m] * norm1(state.p[m])
                  + 0.5 * rp * norm2(conv_periodic(u, k) - state.p[m]
                                     + state.lambda_hat[m]) ** 2
                  - 0.5 * rp * norm2(state.lambda_hat[m]) ** 2)
    return float(total)


def scaled_lagrangian_grad(u, v, state: SolverState, f, bank: KernelBank,
                           params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """(u, v)-gradient of the scaled augmented Lagrangian at fixed (p, q, multipliers)."""
    u, v, f = as_grid(u), as_grid(v), as_grid(f)
    fidelity = u + v - f
    gu = fidelity.copy()
    for m, k in enumerate(bank):
        gu += params.r_p * adjoint_conv(
            conv_periodic(u, k) - state.p[m] + state.lambda_hat[m], k)
    gv = params.r_q * (v - state.q + state.mu_hat) + fidelity
    return gu, gv


def residuals(state_prev: SolverState, state_next: SolverState,
              bank: KernelBank, params: ModelParams) -> tuple[float, float, float]:
    """Primal and dual residuals between two consecutive iterates.

    primal_p = max_m ||K_m u - p_m||_2 and primal_q = ||v - q||_2 at the
    next iterate; the dual residual combines the multiplier-weighted drift
    of the auxiliaries, r_p * max_m ||K_m^T (p_m - p_m_prev)||_2
    + r_q * ||q - q_prev||_2.
    """
    u, v = state_next.u, state_next.v
    primal_p = max(
        norm2(conv_periodic(u, k) - state_next.p[m]) for m, k in enumerate(bank)
    )
    primal_q = norm2(v - state_next.q)
    dual = params.r_p * max(
        norm2(adjoint_conv(state_next.p[m] - state_prev.p[m], k))
        for m, k in enumerate(bank)
    ) + params.r_q * norm2(state_next.q - state_prev.q)
    return float(primal_p), float(primal_q), float(dual)


def _multiplier_violation(aux: np.ndarray, scaled_mult: np.ndarray,
                          weight: float, r: float) -> float:
    """Max deviation of r*mult from the l1 subdifferential scaled by weight."""
    lam = r * scaled_mult
    on = aux != 0.0
    worst = 0.0
    if np.any(on):
        worst = float(np.max(np.abs(lam[on] - weight * np.sign(aux[on]))))
    off = ~on
    if np.any(off):
        worst = max(worst, float(np.max(np.maximum(np.abs(lam[off]) - weight, 0.0))))
    return worst


def _kkt_from_state(state: SolverState, f: np.ndarray, bank: KernelBank,
                    params: ModelParams) -> KktReport:
    u, v = state.u, state.v
    feas_p = max(
        norm_inf(conv_periodic(u, k) - state.p[m]) for m, k in enumerate(bank)
    )
    feas_q = norm_inf(v - state.q)
    gu, _ = scaled_lagrangian_grad(u, v, state, f, bank, params)
    bound_p = max(
        _multiplier_violation(state.p[m], state.lambda_hat[m],
                              params.alphas[m], params.r_p)
        for m in range(bank.width)
    )
    bound_q = _multiplier_violation(state.q, state.mu_hat, params.beta, params.r_q)
    return KktReport(
        feasibility_p=float(feas_p),
        feasibility_q=float(feas_q),
        stationarity_u=float(norm_inf(gu)),
        multiplier_bound_p=float(bound_p),
        multiplier_bound_q=float(bound_q),
    )


def kkt_check(result: DecompositionResult, f, bank: KernelBank,
              params: ModelParams) -> KktReport:
    """Recompute the first-order optimality report for a finished run."""
    return _kkt_from_state(result.state, as_grid(f), bank, params)


def admm_solve(f, bank: KernelBank, params: ModelParams,
               stop: StoppingRule | None = None) -> DecompositionResult:
    """Run the scaled ADMM iteration from the all-zero start.

    Each iteration performs the exact (u, v) solve, both shrinkage and
    multiplier updates, and records the model objective at (u, v) plus the
    primal/dual residuals. Iteration stops at stop.max_iters, or earlier
    when max(primal_p, primal_q) <= stop.tol if a tolerance is set. A
    non-finite iterate raises DivergenceError naming the iteration.
    """
    f = as_grid(f)
    stop = stop or StoppingRule()
    state = SolverState.zeros(f.shape, bank.width)
    _check_problem(f, state, bank, params)
    lss = LssOperators.build(bank, params, f.shape)

    obj_trace: list[float] = []
    res_p: list[float] = []
    res_q: list[float] = []
    res_d: list[float] = []

    for it in range(1, stop.max_iters + 1):
        prev = state
        u, v = _lss_apply(f, state, bank, params, lss)
        p_new, lam_new = avmu_u(u, state, bank, params)
        q_new, mu_new = avmu_v(v, state, params)
        state = SolverState(p=p_new, q=q_new, lambda_hat=lam_new,
                            mu_hat=mu_new, u=u, v=v, iteration=it)
        if not state.is_finite():
            raise DivergenceError(f"non-finite iterate at iteration {it}")
        obj_trace.append(objective(u, v, f, bank, params))
        rp, rq, rd = residuals(prev, state, bank, params)
        res_p.append(rp)
        res_q.append(rq)
        res_d.append(rd)
        if stop.tol is not None and max(rp, rq) <= stop.tol:
            break

    return DecompositionResult(
        u=state.u,
        v=state.v,
        objective_trace=obj_trace,
        primal_residual_p=res_p,
        primal_residual_q=res_q,
        dual_residual=res_d,
        iterations_run=state.iteration,
        kkt=_kkt_from_state(state, f, bank, params),
        state=state,
    )
