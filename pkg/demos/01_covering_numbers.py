# Covering numbers of a small synthetic image set under a few transformation sets.
#
# Two classes of 8x8 "images": a bright bar at a random column, and a bright
# blob at a random position, each mirrored half the time.  Flipping should
# collapse the mirrored copies, so the flip pseudometric needs fewer centers.
# Crops with 4 pixels of padding shift these small images almost anywhere, so
# the crop pseudometric only separates points at small radii.
import numpy as np

from samplecover import Sample, estimate, pseudometric, preset, scn_curve, normalized_scn
from samplecover.metric import euclidean_distances

rng = np.random.default_rng(0)
n = 60
images = np.zeros((n, 8, 8, 1), dtype=np.float32)
labels = np.arange(n) % 2
for i in range(n):
    if labels[i] == 0:
        images[i, :, rng.integers(0, 3)] = 1.0
    else:
        r, c = rng.integers(1, 4, size=2)
        images[i, r:r + 2, c:c + 2] = 1.0
    if rng.random() < 0.5:
        images[i] = images[i, :, ::-1]
images += 0.05 * rng.random(images.shape).astype(np.float32)
sample = Sample(images, labels)

# %% plain Euclidean vs flip vs crop
eps = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5]
for name in ("base", "flip", "crop"):
    spec = preset(name, sample_budget=20) if name == "crop" else preset(name)
    d, rho = pseudometric(sample, spec, seed=0)
    curve = scn_curve(rho, eps, "kmedoids", tag=name)
    print(f"{name:>5}:", " ".join(f"{c:3d}" for c in curve.counts))

# %% the greedy and exact-size views of one point on the flip curve
d, rho = pseudometric(sample, preset("flip"))
print("greedy at 1.5:", estimate(rho, 1.5, "greedy")[0])

# %% normalization: rescale epsilon by how much the transform shrank inter-class gaps
base = euclidean_distances(sample)
r = normalized_scn(rho, base, labels, 1.5, "kmedoids", d_orbit=d)
print(f"ratio {r.ratio:.3f}: epsilon 1.5 -> {r.scaled_epsilon:.3f}, count {r.count}")
