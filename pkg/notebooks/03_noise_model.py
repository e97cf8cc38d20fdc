# %% [markdown]
# # The read-sampling noise model
#
# Each pixel draws its reads from a multinomial over genes. The mean squared
# deviation of the normalized counts shrinks like one over the read depth.

# %%
import numpy as np

from stark.simulate import downsample_counts, sample_counts, sample_expression

f = np.array([0.5, 0.3, 0.2])
n = 10**4
for R in (1, 5, 50, 500):
    Y = sample_expression(np.tile(f, (n, 1)), np.full(n, R), seed=R)
    mc = np.mean(np.sum((Y - f) ** 2, axis=1))
    print(f"R={R:4d}  Monte Carlo={mc:.5f}  predicted={(1 - f @ f) / R:.5f}")

# %% [markdown]
# Downsampling removes reads uniformly without replacement, so a deep
# experiment can be thinned to any lower total.

# %%
C = sample_counts(np.tile(f, (4, 1)), np.full(4, 200), seed=0)
C_low = downsample_counts(C, 80, seed=1)
print(C)
print(C_low, C_low.sum())
