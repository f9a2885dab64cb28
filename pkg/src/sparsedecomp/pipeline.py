"""Multichannel decomposition flow with optional log-domain wrapping.

Optical imagery often composes multiplicatively (illumination times
reflectance), so channels are taken to logarithms before the additive
decomposition and exponentiated back afterwards. Each selected channel
runs through one solver or one unrolled forward pass with the same shared
parameters; the remaining channels pass through untouched and the result
is stacked as (all structured layers, all sparse layers, passthroughs).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .admm import ModelParams, StoppingRule, admm_solve
from .grid import as_grid, as_stack
from .ops import KernelBank
from .unroll import ParameterBundle, idnet_forward

DEFAULT_LOG_EPS = 1e-3


def log_transform(stack, eps: float = DEFAULT_LOG_EPS) -> np.ndarray:
    """Elementwise log of max(value, eps), channelwise."""
    if eps <= 0:
        raise ValueError(f"log clamp eps must be positive, got {eps}")
    return np.log(np.maximum(as_stack(stack), eps))


def exp_transform(stack) -> np.ndarray:
    """Elementwise exponential; exact inverse of log_transform above eps."""
    return np.exp(as_stack(stack))


@dataclass(frozen=True)
class ChannelPlan:
    """Which channels get decomposed, which pass through, and the domain."""

    decompose_channels: tuple[int, ...]
    passthrough_channels: tuple[int, ...] = ()
    log_domain: bool = False
    log_eps: float = DEFAULT_LOG_EPS

    def __post_init__(self):
        dec = tuple(int(i) for i in self.decompose_channels)
        thru = tuple(int(i) for i in self.passthrough_channels)
        if not dec:
            raise ValueError("at least one channel must be decomposed")
        if set(dec) & set(thru):
            raise ValueError("decompose and passthrough channel sets overlap")
        if len(set(dec)) != len(dec) or len(set(thru)) != len(thru):
            raise ValueError("channel indices must be distinct")
        object.__setattr__(self, "decompose_channels", dec)
        object.__setattr__(self, "passthrough_channels", thru)

    def validate_for(self, n_channels: int) -> None:
        for i in self.decompose_channels + self.passthrough_channels:
            if not 0 <= i < n_channels:
                raise ValueError(
                    f"channel index {i} out of range for {n_channels} channels"
                )


@dataclass
class RunConfig:
    """Solver selection for the pipeline: plain iteration or a bundle.

    mode "admm" requires params, bank, and a stopping rule; mode "unroll"
    requires a bundle. Exactly one of (params, bundle) may be set.
    """

    mode: str
    params: ModelParams | None = None
    bank: KernelBank | None = None
    stop: StoppingRule = field(default_factory=StoppingRule)
    bundle: ParameterBundle | None = None

    def __post_init__(self):
        if self.mode not in ("admm", "unroll"):
            raise ValueError(f"mode must be 'admm' or 'unroll', got {self.mode!r}")
        if (self.params is None) == (self.bundle is None):
            raise ValueError("exactly one of params or bundle must be set")
        if self.mode == "admm" and (self.params is None or self.bank is None):
            raise ValueError("admm mode needs params and bank")
        if self.mode == "unroll" and self.bundle is None:
            raise ValueError("unroll mode needs a bundle")

    def decompose(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.mode == "admm":
            result = admm_solve(f, self.bank, self.params, self.stop)
            return result.u, result.v
        u, v = idnet_forward(f, self.bundle)
        return u, v


def decompose_multichannel(stack, plan: ChannelPlan,
                           config: RunConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decompose the selected channels; return (U, V, stacked).

    Every selected channel runs with the same shared parameters. With
    plan.log_domain the channel is decomposed in the log domain and both
    layers are exponentiated back, so they recompose multiplicatively.
    The stacked result orders all structured layers first, then all sparse
    layers, then the passthrough channels.
    """
    stack = as_stack(stack)
    plan.validate_for(stack.shape[0])
    u_layers = []
    v_layers = []
    for k in plan.decompose_channels:
        channel = as_grid(stack[k])
        try:
            if plan.log_domain:
                f = np.log(np.maximum(channel, plan.log_eps))
                u, v = config.decompose(f)
                u, v = np.exp(u), np.exp(v)
            else:
                u, v = config.decompose(channel)
        except Exception as exc:
            raise type(exc)(f"channel {k}: {exc}") from exc
        u_layers.append(u)
        v_layers.append(v)
    U = np.stack(u_layers)
    V = np.stack(v_layers)
    passthrough = [stack[k] for k in plan.passthrough_channels]
    stacked = np.stack(list(U) + list(V) + passthrough)
    return U, V, stacked
