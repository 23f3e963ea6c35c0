"""Why densities on 8-bit images need noise, and what the numbers mean.

Integer pixel data has differential entropy minus infinity: a continuous
model can score arbitrarily high by spiking on the integer grid. Adding
uniform [0,1) noise makes the game fair, and the expected noisy
log-likelihood lower-bounds the log probability mass a discrete model
assigns to the original image, i.e. its lossless compression cost.
"""

import numpy as np

import geneval as ge
from geneval.datasets import PatchSpec, extract_patches, synthetic_clustered_images
from geneval.experiments import _fit_isotropic

# 6x6 grayscale patches from the synthetic clustered image generator.
images = synthetic_clustered_images(600, seed=1)
train = extract_patches(images, PatchSpec(patch_size=6, count=2000, seed=2))
evaluation = extract_patches(images, PatchSpec(patch_size=6, count=200, seed=3))
d = train.dim
print(f"{train.n} training patches, {evaluation.n} eval patches, D = {d}")

# Dequantize and fit an isotropic Gaussian on the raw 0..256 scale.
noisy = ge.dequantize(train, seed=4)
model = _fit_isotropic(noisy.data)
print(f"model: sigma {model.sigma:.1f} around a mean patch")

# Continuous vs discrete log-likelihood on held-out patches.
check = ge.jensen_bound_check(model, evaluation, seed=5, mc_samples=200)
print(f"\ncontinuous (one noise draw per patch): {check.continuous_ll:10.3f} nats/patch")
print(f"discrete (unit-cell mass, MC):          {check.discrete_ll.mean_log_mass:10.3f} nats/patch")
print(f"gap = discrete - continuous:            {check.gap:10.5f} +- {check.gap_se:.5f}")
print("The gap is nonnegative in expectation: the continuous score is a lower bound.")

# The discrete value is a code length.
bits = ge.nats_to_bits_per_dim(check.discrete_ll.mean_log_mass, d)
print(f"\nimplied code length: {bits:.3f} bits/pixel (uniform noise model would be 8.0)")

# A model that spikes on the integer grid shows why dequantization matters:
# its continuous score on raw integers can be pushed arbitrarily high.
spike = ge.IsotropicGaussian(np.full(d, 128.0), 0.01)
raw_ll = float(np.mean(ge.gaussian_log_density(spike, np.full((1, d), 128.0))))
deq = ge.dequantize(evaluation, seed=6)
noisy_ll = float(np.mean(ge.gaussian_log_density(spike, deq.data)))
print(f"\nspike model at its center, raw integers: {raw_ll:12.1f} nats (absurdly high)")
print(f"spike model on dequantized data:         {noisy_ll:12.1f} nats (punished)")
