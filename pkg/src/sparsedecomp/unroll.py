"""Unrolled forward engine: L solver iterations as L parameterized layers.

Each layer runs one scaled-ADMM iteration with its own kernels and
thresholds: the exact (u, v) solve, then both shrinkage/multiplier
updates. The auxiliary state (p, q, lambda_hat, mu_hat) flows between
layers; (u, v) does not, and the network output is the last layer's
(u, v). When every layer carries the same parameters the forward pass is,
by construction, the plain solver truncated at L iterations.

There is no training here. Bundles are either initialized to the
difference-kernel defaults or loaded from the "idnet-bundle/1" document
(typically exported by an external trainer). Loaded kernels are used as
is; in particular no zero-mean constraint is imposed on them. A
finite-difference sensitivity helper is provided for debugging exported
bundles; it is a numerical probe, not a trainer.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .admm import (
    E2_CORRECTED,
    E2_PAPER,
    ModelParams,
    SolverState,
    avmu_u,
    avmu_v,
    lss_solve,
)
from .errors import ParseError
from .grid import as_grid, norm2
from .ops import Kernel, KernelBank, conv_periodic

BUNDLE_SCHEMA = "idnet-bundle/1"

DEFAULT_R_P = 0.07
DEFAULT_R_Q = 0.07
DEFAULT_BETA = 0.07


@dataclass(frozen=True)
class ParameterBundle:
    """All parameters of an L-layer unrolled decomposition network.

    Kernels and per-layer weights vary layer by layer; the penalty
    parameters r_p, r_q are shared across layers.
    """

    M: int
    L: int
    R: int
    r_p: float
    r_q: float
    layer_kernels: np.ndarray = field(repr=False)   # (L, M, 2R+1, 2R+1)
    layer_alphas: np.ndarray = field(repr=False)    # (L, M)
    layer_betas: np.ndarray = field(repr=False)     # (L,)
    e2_mode: str = E2_CORRECTED

    def __post_init__(self):
        if self.M < 1 or self.L < 1 or self.R < 0:
            raise ValueError("bundle needs M >= 1, L >= 1, R >= 0")
        if not (self.r_p > 0 and self.r_q > 0):
            raise ValueError("bundle penalty parameters must be positive")
        if self.e2_mode not in (E2_CORRECTED, E2_PAPER):
            raise ValueError(f"unknown e2_mode {self.e2_mode!r}")
        side = 2 * self.R + 1
        kernels = np.asarray(self.layer_kernels, dtype=np.float64)
        if kernels.shape != (self.L, self.M, side, side):
            raise ValueError(
                f"layer_kernels: expected shape {(self.L, self.M, side, side)}, "
                f"got {kernels.shape}"
            )
        alphas = np.asarray(self.layer_alphas, dtype=np.float64)
        if alphas.shape != (self.L, self.M):
            raise ValueError(
                f"layer_alphas: expected shape {(self.L, self.M)}, got {alphas.shape}"
            )
        betas = np.asarray(self.layer_betas, dtype=np.float64)
        if betas.shape != (self.L,):
            raise ValueError(
                f"layer_betas: expected {self.L} entries, got shape {betas.shape}"
            )
        if np.any(alphas < 0) or np.any(betas < 0):
            raise ValueError("layer weights must be nonnegative")
        for arr in (kernels, alphas, betas):
            if not np.all(np.isfinite(arr)):
                raise ValueError("bundle arrays must be finite")
        kernels = kernels.copy(); kernels.setflags(write=False)
        alphas = alphas.copy(); alphas.setflags(write=False)
        betas = betas.copy(); betas.setflags(write=False)
        object.__setattr__(self, "layer_kernels", kernels)
        object.__setattr__(self, "layer_alphas", alphas)
        object.__setattr__(self, "layer_betas", betas)

    def bank_for_layer(self, layer: int) -> KernelBank:
        return KernelBank(tuple(
            Kernel(self.R, self.layer_kernels[layer, m]) for m in range(self.M)
        ))

    def params_for_layer(self, layer: int) -> ModelParams:
        return ModelParams(
            alphas=self.layer_alphas[layer],
            beta=float(self.layer_betas[layer]),
            r_p=self.r_p,
            r_q=self.r_q,
            e2_mode=self.e2_mode,
        )


@dataclass
class LayerSnapshot:
    u: np.ndarray
    v: np.ndarray
    primal_p: float
    primal_q: float


@dataclass
class LayerTrace:
    """Per-layer (u, v) snapshots and constraint-gap norms."""

    layers: list[LayerSnapshot]

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, i: int) -> LayerSnapshot:
        return self.layers[i]


def init_default(M: int, L: int, R: int) -> ParameterBundle:
    """Difference-kernel initialization with the standard starting weights.

    Every layer gets the alternating x/y forward-difference bank, weights
    alpha = 1.5 / M and beta = 0.07, and shared penalties
    r_p = r_q = 0.07.
    """
    if L < 1:
        raise ValueError(f"depth L must be >= 1, got {L}")
    from .ops import make_diff_bank

    bank = make_diff_bank(M, R)
    side = 2 * R + 1
    kernels = np.empty((L, M, side, side))
    for m, k in enumerate(bank):
        kernels[:, m] = k.taps
    return ParameterBundle(
        M=M, L=L, R=R,
        r_p=DEFAULT_R_P, r_q=DEFAULT_R_Q,
        layer_kernels=kernels,
        layer_alphas=np.full((L, M), 1.5 / M),
        layer_betas=np.full(L, DEFAULT_BETA),
    )


def idnet_forward(f, bundle: ParameterBundle, trace: bool = False):
    """Run the L-layer forward pass; returns (u, v) or (u, v, trace).

    Layer l applies the exact (u, v) solve with layer-l kernels, then the
    shrinkage and multiplier updates with layer-l thresholds. Only the
    auxiliary state crosses layer boundaries.
    """
    f = as_grid(f)
    state = SolverState.zeros(f.shape, bundle.M)
    snapshots: list[LayerSnapshot] = []
    u = v = None
    for layer in range(bundle.L):
        bank = bundle.bank_for_layer(layer)
        params = bundle.params_for_layer(layer)
        u, v = lss_solve(f, state, bank, params)
        p_new, lam_new = avmu_u(u, state, bank, params)
        q_new, mu_new = avmu_v(v, state, params)
        state = SolverState(p=p_new, q=q_new, lambda_hat=lam_new,
                            mu_hat=mu_new, u=u, v=v, iteration=layer + 1)
        if trace:
            gap_p = max(norm2(conv_periodic(u, k) - p_new[m])
                        for m, k in enumerate(bank))
            snapshots.append(LayerSnapshot(
                u=u.copy(), v=v.copy(),
                primal_p=float(gap_p), primal_q=float(norm2(v - q_new)),
            ))
    if trace:
        return u, v, LayerTrace(snapshots)
    return u, v


def _fmt_number(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _emit(obj, out: io.StringIO, indent: int = 0) -> None:
    # Tiny JSON emitter so floats carry 17 significant digits (enough to
    # reproduce any double exactly); the stdlib encoder cannot be told to.
    pad = "  " * indent
    if isinstance(obj, dict):
        out.write("{\n")
        items = list(obj.items())
        for i, (key, val) in enumerate(items):
            out.write(f'{pad}  {json.dumps(key)}: ')
            _emit(val, out, indent + 1)
            out.write(",\n" if i + 1 < len(items) else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        parts = io.StringIO()
        flat = all(isinstance(e, (int, float, np.integer, np.floating)) for e in obj)
        if flat:
            out.write("[" + ", ".join(_fmt_number(e) for e in obj) + "]")
            return
        parts.write("[\n")
        for i, e in enumerate(obj):
            parts.write(pad + "  ")
            _emit(e, parts, indent + 1)
            parts.write(",\n" if i + 1 < len(obj) else "\n")
        parts.write(pad + "]")
        out.write(parts.getvalue())
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    else:
        out.write(_fmt_number(obj))


def save_bundle(bundle: ParameterBundle, sink) -> None:
    """Write the bundle as an "idnet-bundle/1" JSON document.

    ``sink`` is a path or a text file object. All numbers are decimal with
    17 significant digits, so a round trip reproduces the doubles exactly.
    """
    doc = {
        "version": BUNDLE_SCHEMA,
        "M": bundle.M,
        "L": bundle.L,
        "R": bundle.R,
        "r_p": bundle.r_p,
        "r_q": bundle.r_q,
        "e2_mode": bundle.e2_mode,
        "layer_alphas": bundle.layer_alphas.tolist(),
        "layer_betas": bundle.layer_betas.tolist(),
        "layer_kernels": bundle.layer_kernels.tolist(),
    }
    buf = io.StringIO()
    _emit(doc, buf)
    buf.write("\n")
    text = buf.getvalue()
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sink.write(text)


_REQUIRED_FIELDS = ("version", "M", "L", "R", "r_p", "r_q", "e2_mode",
                    "layer_alphas", "layer_betas", "layer_kernels")


def load_bundle(source) -> ParameterBundle:
    """Parse an "idnet-bundle/1" document from a path or text file object.

    Malformed documents (bad JSON, missing fields, unknown schema version)
    raise ParseError naming the field; structurally valid documents whose
    arrays have inconsistent shapes raise ValueError from the bundle
    validator, naming the offending array.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bundle document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("bundle document must be a JSON object")
    for name in _REQUIRED_FIELDS:
        if name not in doc:
            raise ParseError(f"bundle document missing field: {name}")
    if doc["version"] != BUNDLE_SCHEMA:
        raise ParseError(
            f"version: expected {BUNDLE_SCHEMA!r}, got {doc['version']!r}"
        )
    try:
        kernels = np.asarray(doc["layer_kernels"], dtype=np.float64)
        alphas = np.asarray(doc["layer_alphas"], dtype=np.float64)
        betas = np.asarray(doc["layer_betas"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bundle arrays are not rectangular numerics: {exc}") from exc
    return ParameterBundle(
        M=int(doc["M"]), L=int(doc["L"]), R=int(doc["R"]),
        r_p=float(doc["r_p"]), r_q=float(doc["r_q"]),
        layer_kernels=kernels, layer_alphas=alphas, layer_betas=betas,
        e2_mode=str(doc["e2_mode"]),
    )


def bundle_sensitivity(f, bundle: ParameterBundle, functional, param: str,
                       index: tuple = (), step: float = 1e-6) -> float:
    """Central-difference derivative of functional(u, v) in one bundle scalar.

    ``param`` is one of "layer_kernels", "layer_alphas", "layer_betas",
    "r_p", "r_q"; ``index`` addresses the scalar inside array parameters.
    This is a debugging probe for exported-bundle pipelines.
    """
    if param in ("r_p", "r_q"):
        lo = replace(bundle, **{param: getattr(bundle, param) - step})
        hi = replace(bundle, **{param: getattr(bundle, param) + step})
    elif param in ("layer_kernels", "layer_alphas", "layer_betas"):
        base = np.array(getattr(bundle, param))
        minus, plus = base.copy(), base.copy()
        minus[index] -= step
        plus[index] += step
        lo = replace(bundle, **{param: minus})
        hi = replace(bundle, **{param: plus})
    else:
        raise ValueError(f"unknown bundle parameter {param!r}")
    f_lo = functional(*idnet_forward(f, lo))
    f_hi = functional(*idnet_forward(f, hi))
    return float((f_hi - f_lo) / (2.0 * step))
