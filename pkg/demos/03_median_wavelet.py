# %% [markdown]
# A sequence model with Haar coefficients observed in noise. The estimator
# keeps levels up to a data-driven truncation and takes the coordinatewise
# median of the replicated observations. The sup-norm error is a sampling
# term of order sqrt(log n / n) plus a bias that grows with the
# contamination fraction; the modulus of continuity shows the part no
# estimator can avoid.

# %%
import numpy as np

from scheffe_robust import (
    ShiftedGaussian,
    losses,
    median_wavelet_estimator,
    truncation_level,
    white_noise_sup_modulus,
)
from scheffe_robust.measures import WhiteNoiseSequence
from scheffe_robust.models import white_noise_data

beta, scale, max_level = 1.0, 1.0, 4
truth = WhiteNoiseSequence(np.zeros(2 ** (max_level + 1) - 1))
n = 1000
print("truncation level at eps=0:", truncation_level(n, beta, 0.0))

# %%
for eps in (0.02, 0.05, 0.1, 0.2):
    sup = []
    for seed in range(20):
        data = white_noise_data(truth.theta, n, eps, ShiftedGaussian(10.0), seed)
        est = median_wavelet_estimator(data, beta, eps)
        sup.append(losses(WhiteNoiseSequence(est), truth)["sup_loss"])
    mod = white_noise_sup_modulus(eps, beta, scale, max_level).value
    print(f"eps={eps:.2f}  median sup loss {np.median(sup):.3f}  ratio to eps {np.median(sup) / eps:.2f}  modulus {mod:.3f}")
