# %% [markdown]
# # Denoising a synthetic expression image
#
# A two-region image on a 20x20 grid is sampled at about 50 reads per pixel.
# The adaptive fit is compared with the noisy input and with the fixed
# spatial-graph variant.

# %%
import numpy as np

from stark.metrics import evaluate_all
from stark.simulate import make_synthetic, sample_expression, sample_reads
from stark.solver import KernelSystem, autotune, fit, simplex_threshold

img = make_synthetic(20, 20, 20, regions=2, sharpness=2.0, seed=0)
m = img.pixels.shape[0]
reads = sample_reads(50 * m, m=m, seed=1)
Y = sample_expression(img.F_star, reads, seed=2)

# %% [markdown]
# Hyperparameters come from the data: length scale from neighbour counts,
# penalty strength from a target fit level.

# %%
hp = autotune(Y, reads, img.pixels)
print({k: round(v, 4) if isinstance(v, float) else v for k, v in hp.to_dict().items()})

# %%
system = KernelSystem(img.pixels, hp.kernel)
results = {"noisy input": Y}
for variant in ("spatial", "adaptive"):
    model = fit(Y, img.pixels, hp, variant, system=system)
    results[variant] = simplex_threshold(model.fitted)

for name, F in results.items():
    rep = evaluate_all(img.F_star, F, img.labels)
    print(f"{name:12s} relerr={rep.relative_error:.4f} lta={rep.label_transfer_accuracy:.3f} "
          f"overlap={rep.knn_overlap:.1f}")

# %% [markdown]
# The objective decreases at every half-step of the alternating scheme.

# %%
model = fit(Y, img.pixels, hp, system=system)
J = model.trace.interleaved()
print(np.round(J, 6))
assert all(b <= a + 1e-12 * abs(a) for a, b in zip(J, J[1:]))
