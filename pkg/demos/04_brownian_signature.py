"""Expected signature of Brownian motion: closed form, dual operator route and
Wong-Zakai Monte Carlo."""
import numpy as np

from polymoments import TruncatedTensor, chen_signature, expected_signature_bm, tensor_exp
from polymoments.mcsim import simulate_bm_signature
from polymoments.signature import expected_word_coefficient

es = expected_signature_bm(2, 4, 1.0)
print({w: v for w, v in es.to_dict().items() if v})
print("E<e_1122, S> by exp(t L1):", expected_word_coefficient((1, 1, 2, 2), 1.0))

# Chen: the signature of a concatenation is the product of the pieces
rng = np.random.default_rng(0)
path = np.cumsum(rng.normal(size=(8, 2)), axis=0)
gap = chen_signature(path, 4).max_abs_diff(chen_signature(path[:4], 4) * chen_signature(path[3:], 4))
print("Chen identity defect:", gap)
v = np.array([0.3, -0.7])
print("exp(v) exp(-v) - 1:", (tensor_exp(v, 2, 4) * tensor_exp(-v, 2, 4)).max_abs_diff(TruncatedTensor.unit(2, 4)))

means, ses = simulate_bm_signature(2, 4, 1.0, 500, 5000, seed=1)
for word, idx in [("11", 0), ("12", 1), ("22", 3)]:
    print(f"{word}: formula {es.levels[2][idx]:.4f}  mc {means[2][idx]:.4f} +- {ses[2][idx]:.4f}")
