"""How fragile the nearest-neighbor overfitting check is to tiny shifts.

Showing model samples next to their nearest training neighbors is a common
overfit check. But Euclidean distance is brittle: translate a window by two
pixels and the nearest neighbor usually changes, so a model emitting
slightly shifted training images sails through the check.

Set GENEVAL_DATA to a directory containing cifar-10-batches-bin/ to run on
real CIFAR-10; otherwise a spatially correlated synthetic stand-in is used.
"""

import os
from pathlib import Path

import geneval as ge
from geneval.datasets import read_cifar10, synthetic_textured_images

cifar = Path(os.environ.get("GENEVAL_DATA", "data")) / "cifar-10-batches-bin"
if cifar.is_dir() and any(cifar.glob("data_batch_*.bin")):
    images = read_cifar10(cifar)
    n_queries = 1000
    print(f"CIFAR-10: {images.n} training images")
else:
    images = synthetic_textured_images(2000, seed=42, smoothness=1.5)
    n_queries = 500
    print(f"synthetic textured stand-in: {images.n} images (no CIFAR-10 found)")

# Crop the top-left 28x28 window of every image as the reference set, then
# query with the window shifted diagonally by 0..4 pixels.
points = ge.shift_precision_curve(
    images, window=28, shifts=[0, 1, 2, 3, 4], n_queries=n_queries, seed=7, level=0.9
)

print("\nshift  precision   90% CI")
for pt in points:
    print(
        f"  {pt.shift}    {pt.precision:7.3f}   [{pt.ci_low:.3f}, {pt.ci_high:.3f}]"
    )

print(
    "\nAt shift 0 every window finds itself (distance zero). A couple of"
    "\npixels later the 'correct' neighbor is mostly lost: a model that"
    "\nmemorizes shifted training crops would fool this check completely."
)
