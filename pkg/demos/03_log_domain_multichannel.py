"""Decompose multiplicative imagery channel by channel in the log domain.

Optical images often factor as illumination times transmittance. Taking
logarithms turns that product into a sum, which is exactly what the
additive decomposition handles: each channel f = log F splits into a
smooth layer u and a sparse layer v, and exponentiating returns
multiplicative factors U and V with F ~= U * V. The script builds a
three-channel composite plus a field-of-view mask, runs the shared-
parameter decomposition on the color channels, and stacks everything
into the seven-channel result a downstream segmenter would consume.
"""

import numpy as np

from sparsedecomp import (
    ChannelPlan,
    ModelParams,
    RunConfig,
    StoppingRule,
    decompose_multichannel,
    make_diff_bank,
)


def build_composite(rng, shape=(32, 32)):
    h, w = shape
    rows = np.linspace(0.0, 1.0, h)[:, None]
    cols = np.linspace(0.0, 1.0, w)[None, :]
    illumination = 0.35 + 0.45 * np.exp(-((rows - 0.45) ** 2
                                          + (cols - 0.55) ** 2) / 0.4)
    transmittance = np.ones(shape)
    sites = rng.choice(h * w, 25, replace=False)
    transmittance.flat[sites] = np.exp(rng.choice([-0.5, 0.5], size=25))
    return illumination, transmittance


def main():
    print(__doc__)
    rng = np.random.default_rng(11)
    illumination, transmittance = build_composite(rng)
    gains = (1.0, 0.85, 0.7)      # crude per-channel color balance
    raw = [g * illumination * transmittance for g in gains]
    peak = max(c.max() for c in raw)   # normalize into [0, 1] without clipping
    channels = [c / peak for c in raw]
    fov = np.zeros((32, 32))
    fov[2:30, 2:30] = 1.0
    stack = np.stack(channels + [fov])

    beta = 0.2
    plan = ChannelPlan(decompose_channels=(0, 1, 2), passthrough_channels=(3,),
                       log_domain=True)
    config = RunConfig(
        mode="admm",
        params=ModelParams(alphas=[0.12, 0.12], beta=beta, r_p=0.07, r_q=0.07),
        bank=make_diff_bank(2, 1),
        stop=StoppingRule(max_iters=400),
    )
    U, V, stacked = decompose_multichannel(stack, plan, config)

    print(f"input stack: {stack.shape[0]} channels -> stacked output: "
          f"{stacked.shape[0]} channels (U0 U1 U2, V0 V1 V2, FOV)")
    print("\nU * V recomposes each channel up to the fidelity slack, which "
          f"the model bounds by beta = {beta} in the log domain:")
    true_spots = int(np.sum(np.abs(transmittance - 1.0) > 1e-12))
    print(f"{'channel':>7} {'max |log F - log UV|':>21} {'V pixels != 1':>14} "
          f"{'true spots':>11}")
    for k in range(3):
        slack = np.max(np.abs(np.log(np.maximum(stack[k], 1e-3))
                              - np.log(U[k] * V[k])))
        marked = int(np.sum(np.abs(V[k] - 1.0) > 0.05))
        print(f"{k:>7} {slack:>21.3f} {marked:>14} {true_spots:>11}")

    print("\nthe sparse factor V sits near 1 except at the transmittance "
          "spots, and U carries the smooth illumination:")
    k = 0
    r, c = np.unravel_index(int(np.argmax(np.abs(V[k] - 1.0))), V[k].shape)
    print(f"  strongest spot at ({r}, {c}): F={stack[k][r, c]:.3f}, "
          f"U={U[k][r, c]:.3f}, V={V[k][r, c]:.3f}, "
          f"true transmittance={transmittance[r, c]:.3f}")
    flat = np.abs(transmittance - 1.0) < 1e-12
    print(f"  median V on clean pixels: {np.median(V[k][flat]):.4f} (ideal 1)")
    print(f"  illumination correlation with U: "
          f"{np.corrcoef(U[k].ravel(), illumination.ravel())[0, 1]:.4f}")


if __name__ == "__main__":
    main()
