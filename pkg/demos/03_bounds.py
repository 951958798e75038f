# How the complexity bounds move with the cover size.
import numpy as np

from samplecover import (adversarial_loss, global_complexity_bound, refined_complexity_bound,
                         selection_bound)

n = 1000
print("  m  global  refined(kappa=0)  refined(kappa=2, eps=0.5)")
for m in (1, 10, 100, 500, 1000):
    print(f"{m:4d}  {global_complexity_bound(1, m, n):6.3f}  "
          f"{refined_complexity_bound(1, 0, 0, m, n):16.3f}  "
          f"{refined_complexity_bound(1, 2, 0.5, m, n):25.3f}")

# %% picking one of k transformation sets with a held-out adversarial loss
rng = np.random.default_rng(0)
losses = rng.beta(1, 6, size=(n, 25))  # 25 orbit members per example
adv = adversarial_loss(losses)
print(f"adversarial mean {adv.mean:.3f}")
for k in (1, 8, 64):
    print(f"k={k:3d}: selection bound {selection_bound(adv.mean, 0.02, k, n, 0.05):.3f}")
