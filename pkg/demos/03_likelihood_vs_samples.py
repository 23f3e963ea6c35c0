"""Great samples with terrible likelihood, and the reverse, by construction.

Two counterexamples decouple sample quality from log-likelihood:
  1. A lookup table (tiny Gaussians on training points) emits perfect-looking
     samples but generalizes terribly.
  2. Mixing any good model with 99% garbage barely moves its log-likelihood
     (at most ln 100 = 4.61 nats) while ruining 99% of its samples; the
     posterior still routes almost all decisions through the good component.
"""

import numpy as np

import geneval as ge

rng_seed = 0
d = 36

# --- Counterexample 1: the lookup table -----------------------------------
truth = ge.IsotropicGaussian(np.zeros(d), 1.0)
train = ge.sample(truth, 500, ge.subseed(rng_seed, "train"))
test = ge.sample(truth, 500, ge.subseed(rng_seed, "test"))

for eps in (0.5, 0.1, 0.02):
    lookup = ge.build_lookup_table_model(train, eps)
    on_train = float(np.mean(ge.gmm_log_density(lookup, train.data)))
    on_test = float(np.mean(ge.gmm_log_density(lookup, test.data)))
    print(f"lookup eps={eps:4}: train ll {on_train:9.1f}   test ll {on_test:10.1f} nats")
print(
    "Shrinking eps makes samples indistinguishable from training data while"
    "\ntest log-likelihood collapses: plausible samples prove nothing.\n"
)

# --- Counterexample 2: the 1% mixture --------------------------------------
good = truth
bad = ge.IsotropicGaussian(np.zeros(d), 10.0)  # white noise at 10x the scale
trick = ge.MixtureTrickModel(good, bad, weight_good=0.01)

points = ge.sample(good, 1000, ge.subseed(rng_seed, "points")).data
log_p = np.asarray(ge.gaussian_log_density(good, points))
log_mix = np.asarray(ge.mixture_trick_log_density(trick, points))
penalty = log_p - log_mix
print(f"typical good-model ll: {log_p.mean():8.1f} nats/point")
print(f"after mixing in 99% noise: {log_mix.mean():8.1f} nats/point")
print(f"penalty: {penalty.mean():.3f} nats (bounded by ln 100 = {np.log(100):.3f})")

# 99% of draws come from the noise component.
samples, labels = ge.sample_mixture_trick(
    trick,
    lambda n, s: ge.sample(good, n, s),
    lambda n, s: ge.sample(bad, n, s),
    10000,
    ge.subseed(rng_seed, "draws"),
)
print(f"fraction of samples from the noise component: {1 - labels.mean():.3f}")

# Yet for inference the noise component is irrelevant: the posterior weight
# of the good component is a sigmoid of the evidence gap minus ln 99.
log_q = np.asarray(ge.gaussian_log_density(bad, points))
alpha = np.asarray(ge.posterior_alpha(log_p, log_q, 0.01))
print(f"posterior weight of the good model: median {np.median(alpha):.6f}")
print(f"fraction of points with alpha > 0.999: {np.mean(alpha > 0.999):.3f}")
