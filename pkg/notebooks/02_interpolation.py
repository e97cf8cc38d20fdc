# %% [markdown]
# # Interpolating to unobserved pixels
#
# Half of the pixels are dropped before fitting. The fitted function is then
# evaluated on the full grid.

# %%
import numpy as np

from stark.metrics import relative_error
from stark.simulate import make_synthetic, sample_expression, sample_reads, subsample_pixels
from stark.solver import autotune, evaluate, fit, simplex_threshold

img = make_synthetic(20, 20, 15, regions=2, sharpness=2.0, seed=3)
m = img.pixels.shape[0]
reads = sample_reads(100 * m, m=m, seed=4)
Y = sample_expression(img.F_star, reads, seed=5)
Y_sub, P_sub, kept = subsample_pixels(Y, img.pixels, m // 2, seed=6)

# %%
hp = autotune(Y_sub, reads[kept], P_sub)
model = fit(Y_sub, P_sub, hp)
F_all = simplex_threshold(evaluate(model, img.pixels))

held_out = np.setdiff1d(np.arange(m), kept)
print("relative error, all pixels:", round(relative_error(img.F_star, F_all), 4))
print("relative error, held-out pixels:", round(relative_error(img.F_star[held_out], F_all[held_out]), 4))

# %% [markdown]
# At the training pixels, evaluation reproduces the fitted values.

# %%
np.testing.assert_allclose(evaluate(model, P_sub), model.fitted, atol=1e-10)
