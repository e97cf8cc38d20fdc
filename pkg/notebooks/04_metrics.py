# %% [markdown]
# # Evaluation metrics
#
# Label transfer accuracy and kNN overlap compare principal-component scores
# after a log transform; relative error works on the raw matrices.

# %%
import numpy as np

from stark.metrics import MetricConfig, knn_overlap, label_transfer_accuracy, relative_error
from stark.simulate import make_synthetic

img = make_synthetic(15, 15, 40, regions=3, sharpness=3.0, seed=8)
F0 = img.F_star
rng = np.random.default_rng(0)
cfg = MetricConfig()

for noise in (0.0, 0.2, 0.5, 0.9):
    F = (1 - noise) * F0 + noise * rng.dirichlet(np.ones(40), size=F0.shape[0])
    print(f"noise={noise:.1f}  lta={label_transfer_accuracy(F0, img.labels, F, cfg):.3f}  "
          f"overlap={knn_overlap(F0, F, cfg):5.1f}  relerr={relative_error(F0, F):.3f}")
