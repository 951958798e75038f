# Monte-Carlo complexity of linear classes, with and without an invariance constraint.
import numpy as np

from samplecover import (cyclic_shift_matrix, gaussian_comparison, rademacher_general,
                         rademacher_invariant_inf, rademacher_invariant_l2, reversal_matrix)

# %% Gaussian data: general vs reversal-invariant vs shift-invariant weights
print(gaussian_comparison(d=16, n=200, draws=500, seed=0))

# %% a q-norm ball, where the infimum has no closed form
rng = np.random.default_rng(1)
x = rng.normal(size=(50, 12))
for q in (1.5, 2.0, 3.0):
    gen = rademacher_general(x, q=q, draws=200, seed=3)
    inv = rademacher_invariant_inf(x, reversal_matrix(12), q=q, draws=200, seed=3)
    print(f"q={q}: general {gen}, reversal-invariant {inv}")

# %% at q = 2 the numeric infimum agrees with the projector formula
a = rademacher_invariant_l2(x, cyclic_shift_matrix(12), draws=200, seed=3).per_draw
b = rademacher_invariant_inf(x, cyclic_shift_matrix(12), draws=200, seed=3).per_draw
print("max relative gap:", np.max(np.abs(a - b) / a))
