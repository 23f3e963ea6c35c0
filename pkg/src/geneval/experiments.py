"""Seeded experiment drivers with config files, CSV outputs and manifests.

Every experiment is a pure function of its resolved config: identical configs
produce byte-identical CSVs. To that end BLAS pools are pinned to one thread
while drivers run (OpenBLAS reductions are not bitwise reproducible across
pool sizes); the --threads knob instead feeds worker-thread parallelism over
fixed chunks whose results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .datasets import (
    PatchSpec,
    extract_patches,
    read_cifar10,
    read_mnist_idx,
    synthetic_clustered_images,
    synthetic_textured_images,
)
from .density import (
    GaussianMixture,
    IsotropicGaussian,
    gaussian_log_density,
    log_density,
    make_rng,
    sample,
    subseed,
)
from .divergence import FitConfig, KernelBank, QuadratureGrid, fit_jsd, fit_kld, fit_mmd
from .likelihood import (
    MixtureTrickModel,
    QuantizedImageSet,
    dequantize,
    jensen_bound_check,
    mixture_trick_log_density,
    nats_to_bits_per_dim,
    posterior_alpha,
)
from .modelio import load_model, parse_keyvalues
from .nn_overfit import shift_precision_curve
from .parzen import kmeans, parzen_benchmark, parzen_convergence_sweep, sample_centroids

__all__ = [
    "ExperimentConfig",
    "EXPERIMENTS",
    "load_config",
    "run_experiment",
    "two_mode_target",
]

LN256 = math.log(256.0)


def two_mode_target() -> GaussianMixture:
    """Default 2-D fitting target: a dominant mode at (-1.5, 0) with weight 0.7
    and a minor mode at (3.5, 0), both with variance 0.375.

    Chosen so the closed-form KLD fit has mean (0, 0) and sigma exactly
    sqrt(3), while the modes are separated sharply enough that MMD and JSD
    descent from that moment-matched start commits to the dominant mode
    (an equal-weight target makes the start a stationary point of both and
    rewards neither mode, so the trade-off would not show).
    """
    return GaussianMixture(
        np.array([0.7, 0.3]),
        np.array([[-1.5, 0.0], [3.5, 0.0]]),
        np.full((2, 2), 0.375),
    )


# --------------------------------------------------------------------------
# Config plumbing
# --------------------------------------------------------------------------

def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _parse_ints(s: str) -> list[int]:
    return [int(tok) for tok in s.split()]


def _parse_floats(s: str) -> list[float]:
    return [float(tok) for tok in s.split()]


# Per-experiment parameter schemas: name -> (parser, default string).
_SCHEMAS: dict[str, dict[str, tuple]] = {
    "fit-divergence": {
        "target": (str, ""),
        "n_target_samples": (int, "1000"),
        "n_model_samples": (int, "1000"),
        "kernel_multipliers": (_parse_floats, "0.25 0.5 1 2 4"),
        "max_iters": (int, "600"),
        "mmd_step_size": (float, "0.5"),
        "jsd_step_size": (float, "0.5"),
        "tolerance": (float, "1e-8"),
        "grid_points": (int, "161"),
        "grid_span": (float, "8"),
    },
    "dequantize-ll": {
        "dataset": (str, "synthetic"),
        "dataset_path": (str, ""),
        "patch_size": (int, "6"),
        "n_fit_patches": (int, "2000"),
        "n_eval_patches": (int, "200"),
        "mc_samples": (int, "100"),
        "rescale": (_parse_bool, "true"),
        "synthetic_images": (int, "2000"),
    },
    "mixture-demo": {
        "dim": (int, "36"),
        "n_points": (int, "1000"),
        "weight_good": (float, "0.01"),
        "good_sigma": (float, "30"),
        "bad_sigma": (float, "120"),
        "level_mean": (float, "128"),
    },
    "nn-shift": {
        "dataset": (str, "synthetic"),
        "dataset_path": (str, ""),
        "n_images": (int, "0"),
        "window": (int, "28"),
        "shifts": (_parse_ints, "0 1 2 3 4"),
        "n_queries": (int, "1000"),
        "level": (float, "0.9"),
        "grayscale": (_parse_bool, "false"),
        "dump_pairs": (_parse_bool, "false"),
        "synthetic_images": (int, "2000"),
    },
    "parzen-sweep": {
        "model": (str, ""),
        "dim": (int, "36"),
        "sigma": (float, "1.0"),
        "spectrum_power": (float, "2.0"),
        "sample_counts": (_parse_ints, "100 1000 10000"),
        "n_test": (int, "1000"),
        "bandwidth_points": (int, "20"),
        "bandwidth_lo": (float, "0.01"),
        "bandwidth_hi": (float, "1.0"),
    },
    "parzen-benchmark": {
        "dataset": (str, "synthetic"),
        "dataset_path": (str, ""),
        "n_train": (int, "10000"),
        "n_validation": (int, "1000"),
        "n_test": (int, "1000"),
        "k": (int, "1000"),
        "n_generated": (int, "1000"),
        "kmeans_max_iters": (int, "20"),
        "bandwidth_points": (int, "20"),
        "bandwidth_lo": (float, "0.01"),
        "bandwidth_hi": (float, "1.0"),
        "synthetic_images": (int, "13000"),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: name, seed, output dir and typed params.

    ``gnuplot`` reorders CSV columns numeric-first so `plot "..." using 1:2`
    works without counting past label columns.
    """

    experiment: str
    seed: int
    out_dir: Path
    threads: int = 1
    gnuplot: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in _SCHEMAS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; known: {sorted(_SCHEMAS)}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        object.__setattr__(self, "out_dir", Path(self.out_dir))


def load_config(
    experiment: str,
    config_path=None,
    overrides: dict | None = None,
    seed: int | None = None,
    out_dir=None,
    threads: int | None = None,
    gnuplot: bool = False,
) -> ExperimentConfig:
    """Resolve an experiment config from defaults, a config file, and flag
    overrides (in increasing precedence). All values are parsed and validated
    here, before any computation starts."""
    if experiment not in _SCHEMAS:
        raise ValueError(f"unknown experiment {experiment!r}; known: {sorted(_SCHEMAS)}")
    schema = _SCHEMAS[experiment]
    raw = {name: default for name, (_, default) in schema.items()}

    file_seed = None
    file_out = None
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as f:
            pairs = parse_keyvalues(f.read())
        if "experiment" in pairs:
            declared = pairs.pop("experiment")
            if declared != experiment:
                raise ValueError(
                    f"config file declares experiment {declared!r}, running {experiment!r}"
                )
        if "seed" in pairs:
            file_seed = int(pairs.pop("seed"))
        if "out" in pairs:
            file_out = pairs.pop("out")
        unknown = set(pairs) - set(schema)
        if unknown:
            raise ValueError(f"unknown config keys for {experiment}: {sorted(unknown)}")
        raw.update(pairs)

    for key, value in (overrides or {}).items():
        if key == "seed":
            file_seed = int(value)
            continue
        if key == "out":
            file_out = value
            continue
        if key not in schema:
            raise ValueError(f"unknown parameter {key!r} for {experiment}")
        raw[key] = value

    params = {}
    for name, (parser, _) in schema.items():
        try:
            params[name] = parser(raw[name])
        except ValueError as exc:
            raise ValueError(f"parameter {name!r}: {exc}") from None
    params["_raw"] = dict(raw)

    resolved_seed = seed if seed is not None else (file_seed if file_seed is not None else 0)
    resolved_out = out_dir if out_dir is not None else (file_out or "geneval-out")
    config = ExperimentConfig(
        experiment=experiment,
        seed=int(resolved_seed),
        out_dir=Path(resolved_out),
        threads=int(threads) if threads is not None else 1,
        gnuplot=bool(gnuplot),
        params=params,
    )
    _validate_paths(config)
    return config


def _validate_paths(config: ExperimentConfig):
    p = config.params
    for key in ("target", "model", "dataset_path"):
        value = p.get(key, "")
        if value and not Path(value).exists():
            raise FileNotFoundError(f"parameter {key!r}: no such path {value}")
    if p.get("dataset") not in (None, "synthetic") and not p.get("dataset_path"):
        raise ValueError(f"dataset {p['dataset']!r} requires dataset_path")
    if p.get("dataset") not in (None, "synthetic", "mnist", "cifar10"):
        raise ValueError(f"unknown dataset {p['dataset']!r}")


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _gnuplot_order(header, rows):
    """Numeric columns first (original order kept), label columns after."""
    if not rows:
        return header, rows
    numeric = [i for i, v in enumerate(rows[0]) if isinstance(v, (int, float, np.number))]
    order = numeric + [i for i in range(len(header)) if i not in numeric]
    return [header[i] for i in order], [[row[i] for i in order] for row in rows]


def _write_manifest(path: Path, config: ExperimentConfig, wall_time: float, outputs):
    lines = {
        "experiment": config.experiment,
        "seed": str(config.seed),
        "threads": str(config.threads),
        "gnuplot": str(config.gnuplot).lower(),
        "out": str(config.out_dir),
        "geneval_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": __import__("scipy").__version__,
        "python_version": sys.version.split()[0],
        "wall_time_s": f"{wall_time:.3f}",
        "outputs": " ".join(o.name for o in outputs),
    }
    for key, value in sorted(config.params["_raw"].items()):
        lines[f"param.{key}"] = value
    with open(path, "w", encoding="utf-8") as f:
        for k, v in lines.items():
            f.write(f"{k} = {v}\n")


def run_experiment(config: ExperimentConfig) -> list[Path]:
    """Run one experiment; writes its CSV outputs plus a manifest.

    Returns the written CSV paths. Identical configs produce byte-identical
    CSVs regardless of the threads setting.
    """
    driver = _DRIVERS[config.experiment]
    config.out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with threadpool_limits(limits=1):
        tables = driver(config)
    outputs = []
    for filename, header, rows in tables:
        if config.gnuplot:
            header, rows = _gnuplot_order(header, rows)
        path = config.out_dir / filename
        _write_csv(path, header, rows)
        outputs.append(path)
    _write_manifest(config.out_dir / "manifest.txt", config, time.perf_counter() - start, outputs)
    return outputs


# --------------------------------------------------------------------------
# Drivers
# --------------------------------------------------------------------------

def _load_images(config: ExperimentConfig, synthetic_kind: str):
    p = config.params
    dataset = p["dataset"]
    if dataset == "mnist":
        return read_mnist_idx(p["dataset_path"])
    if dataset == "cifar10":
        return read_cifar10(p["dataset_path"])
    n = p["synthetic_images"] if "synthetic_images" in p else 2000
    if synthetic_kind == "textured":
        return synthetic_textured_images(n, subseed(config.seed, "synthetic-images"))
    return synthetic_clustered_images(n, subseed(config.seed, "synthetic-images"))


def _run_fit_divergence(config: ExperimentConfig):
    p = config.params
    target = load_model(p["target"]) if p["target"] else two_mode_target()
    if not isinstance(target, GaussianMixture):
        target = target.as_mixture()

    kld_fit = fit_kld(target)
    cross_entropy = _gaussian_cross_entropy(target, kld_fit)

    target_samples = sample(target, p["n_target_samples"], subseed(config.seed, "target-samples"))
    kernels = KernelBank.median_heuristic(target_samples, tuple(p["kernel_multipliers"]))
    init = kld_fit

    mmd_cfg = FitConfig(p["max_iters"], p["mmd_step_size"], p["tolerance"], init, config.seed)
    mmd_fit, mmd_trace = fit_mmd(
        target_samples, kernels, mmd_cfg, model_samples=p["n_model_samples"], return_trace=True
    )

    grid = QuadratureGrid.covering([target, kld_fit], p["grid_points"], p["grid_span"])
    jsd_cfg = FitConfig(p["max_iters"], p["jsd_step_size"], p["tolerance"], init, config.seed)
    jsd_fit, jsd_trace = fit_jsd(target, grid, jsd_cfg, return_trace=True)

    d = target.dim
    mean_cols = [f"mean_{i}" for i in range(d)]
    fits_rows = [
        ["kld", cross_entropy, *kld_fit.mean, kld_fit.sigma],
        ["mmd", float(mmd_trace[-1, 1]), *mmd_fit.mean, mmd_fit.sigma],
        ["jsd", float(jsd_trace[-1, 1]), *jsd_fit.mean, jsd_fit.sigma],
    ]
    trace_rows = [
        ["mmd", int(row[0]), row[1], *row[2:]] for row in mmd_trace
    ] + [
        ["jsd", int(row[0]), row[1], *row[2:]] for row in jsd_trace
    ]
    return [
        ("fits.csv", ["method", "objective", *mean_cols, "sigma"], fits_rows),
        ("trace.csv", ["method", "iter", "objective", *mean_cols, "sigma"], trace_rows),
    ]


def _gaussian_cross_entropy(target: GaussianMixture, q: IsotropicGaussian) -> float:
    """E_target[-ln q], the KLD objective up to the target's fixed entropy."""
    delta = np.sum(target.variances + (target.means - q.mean) ** 2, axis=1)
    expected_sq = float(target.weights @ delta)
    return 0.5 * q.dim * math.log(2 * math.pi * q.sigma**2) + expected_sq / (2 * q.sigma**2)


def _fit_isotropic(data: np.ndarray) -> IsotropicGaussian:
    """Maximum-likelihood isotropic Gaussian: sample mean, pooled variance."""
    mean = data.mean(axis=0)
    sigma2 = float(np.mean((data - mean) ** 2))
    return IsotropicGaussian(mean, math.sqrt(max(sigma2, 1e-12)))


def _run_dequantize_ll(config: ExperimentConfig):
    p = config.params
    images = _load_images(config, "clustered")
    fit_patches = extract_patches(
        images, PatchSpec(p["patch_size"], "grayscale", p["n_fit_patches"], subseed(config.seed, "fit-patches"))
    )
    eval_patches = extract_patches(
        images, PatchSpec(p["patch_size"], "grayscale", p["n_eval_patches"], subseed(config.seed, "eval-patches"))
    )
    d = fit_patches.dim
    rescale = p["rescale"]
    fit_data = dequantize(fit_patches, subseed(config.seed, "fit-noise"), rescale=rescale).data
    model = _fit_isotropic(fit_data)

    if rescale:
        # The model lives on the [0, 1) scale; adapt it to raw pixel units so
        # cell masses are the genuine discrete probabilities.
        def handle(points):
            return np.asarray(log_density(model, points / 256.0)) - d * LN256
    else:
        handle = model

    check = jensen_bound_check(handle, eval_patches, subseed(config.seed, "jensen"), p["mc_samples"])
    dataset_name = p["dataset"]
    rows = [
        [
            dataset_name,
            "isotropic-continuous",
            check.continuous_ll,
            nats_to_bits_per_dim(check.continuous_ll, d),
            check.gap_se,
            1,
            config.seed,
        ],
        [
            dataset_name,
            "isotropic-discrete",
            check.discrete_ll.mean_log_mass,
            nats_to_bits_per_dim(check.discrete_ll.mean_log_mass, d),
            check.discrete_ll.std_error,
            p["mc_samples"],
            config.seed,
        ],
    ]
    header = ["dataset", "model", "nats_per_item", "bits_per_dim", "std_error", "mc_samples", "seed"]
    return [("ll.csv", header, rows)]


def _run_mixture_demo(config: ExperimentConfig):
    p = config.params
    d = p["dim"]
    center = np.full(d, p["level_mean"])
    good = IsotropicGaussian(center, p["good_sigma"])
    bad = IsotropicGaussian(center, p["bad_sigma"])
    trick = MixtureTrickModel(good, bad, p["weight_good"])
    points = sample(good, p["n_points"], subseed(config.seed, "demo-points")).data
    log_p = np.asarray(gaussian_log_density(good, points))
    log_q = np.asarray(gaussian_log_density(bad, points))
    log_mix = np.asarray(mixture_trick_log_density(trick, points))
    alpha = np.asarray(posterior_alpha(log_p, log_q, p["weight_good"]))
    rows = [
        [i, log_p[i], log_q[i], log_mix[i], log_p[i] - log_mix[i], alpha[i]]
        for i in range(points.shape[0])
    ]
    header = ["index", "log_p", "log_q", "mixture_log_density", "penalty_nats", "alpha"]
    return [("mixture.csv", header, rows)]


def _run_nn_shift(config: ExperimentConfig):
    p = config.params
    images = _load_images(config, "textured")
    if p["n_images"]:
        if p["n_images"] > images.n:
            raise ValueError(f"n_images {p['n_images']} exceeds dataset size {images.n}")
        images = QuantizedImageSet(images.data[: p["n_images"]], images.geometry)
    points, matches = shift_precision_curve(
        images,
        p["window"],
        p["shifts"],
        p["n_queries"],
        subseed(config.seed, "nn-shift"),
        level=p["level"],
        grayscale=p["grayscale"],
        workers=config.threads,
        return_matches=True,
    )
    rows = [
        [pt.shift, pt.precision, pt.ci_low, pt.ci_high, pt.n_queries, config.seed]
        for pt in points
    ]
    header = ["shift", "precision", "ci_low", "ci_high", "n_queries", "seed"]
    tables = [("shift_precision.csv", header, rows)]
    if p["dump_pairs"]:
        pair_rows = [
            [int(s), int(src), int(nn), float(d2)]
            for s, sources, nn_idx, nn_d2 in matches
            for src, nn, d2 in zip(sources, nn_idx, nn_d2)
        ]
        tables.append(
            ("nn_pairs.csv", ["shift", "source_index", "nn_index", "sq_distance"], pair_rows)
        )
    return tables


def _bandwidth_grid(lo: float, hi: float, points: int, scale: float) -> np.ndarray:
    return np.geomspace(lo * scale, hi * scale, points)


def patch_spectrum_gaussian(dim: int, sigma: float, power: float) -> GaussianMixture:
    """Zero-mean diagonal Gaussian with a power-law variance spectrum.

    ``power`` = 0 gives the isotropic case; ``power`` = 2 mimics the 1/f^2
    eigenvalue decay of natural image patches, where an isotropic-kernel
    Parzen estimate stays far from the true log-likelihood.
    """
    variances = sigma**2 / np.arange(1, dim + 1) ** power
    return GaussianMixture(np.array([1.0]), np.zeros((1, dim)), variances[None, :])


def _run_parzen_sweep(config: ExperimentConfig):
    p = config.params
    if p["model"]:
        model = load_model(p["model"])
        if isinstance(model, IsotropicGaussian):
            model = model.as_mixture()
    else:
        model = patch_spectrum_gaussian(p["dim"], p["sigma"], p["spectrum_power"])
    test = sample(model, p["n_test"], subseed(config.seed, "sweep-test"))
    scale = math.sqrt(float(np.mean(model.per_dim_variance())))
    grid = _bandwidth_grid(p["bandwidth_lo"], p["bandwidth_hi"], p["bandwidth_points"], scale)
    result = parzen_convergence_sweep(
        model, p["sample_counts"], test, grid, subseed(config.seed, "sweep")
    )
    rows = [
        [int(n), float(h), float(ll), result.reference_ll]
        for n, h, ll in zip(result.sample_counts, result.bandwidths, result.mean_test_ll)
    ]
    header = ["n", "bandwidth", "mean_nats", "reference_nats"]
    return [("sweep.csv", header, rows)]


def _run_parzen_benchmark(config: ExperimentConfig):
    p = config.params
    images = _load_images(config, "clustered")
    n_total = p["n_train"] + p["n_validation"] + p["n_test"] + p["n_generated"]
    if images.n < n_total:
        raise ValueError(f"need {n_total} images, dataset has {images.n}")
    order = make_rng(subseed(config.seed, "split")).permutation(images.n)[:n_total]
    bounds = np.cumsum([p["n_train"], p["n_validation"], p["n_test"], p["n_generated"]])
    slices = np.split(order, bounds[:-1])

    def subset(rows, label):
        imgs = QuantizedImageSet(images.data[rows], images.geometry)
        return dequantize(imgs, subseed(config.seed, "dequantize", label), rescale=True)

    train = subset(slices[0], "train")
    validation = subset(slices[1], "validation")
    test = subset(slices[2], "test")
    true_held_out = subset(slices[3], "generated")

    clustering = kmeans(train, p["k"], p["kmeans_max_iters"], subseed(config.seed, "kmeans"))
    centroid_draws = sample_centroids(
        clustering.centroids, p["n_generated"], subseed(config.seed, "centroid-draws")
    )

    scale = math.sqrt(float(np.mean(np.var(train.data, axis=0))))
    grid = _bandwidth_grid(p["bandwidth_lo"], p["bandwidth_hi"], p["bandwidth_points"], scale)
    ranking = parzen_benchmark(
        [("true-samples", true_held_out), ("kmeans-centroids", centroid_draws)],
        test,
        validation,
        grid,
    )
    rows = [[e.name, e.n_samples, e.bandwidth, e.mean_nats, e.std_error] for e in ranking]
    header = ["entry_name", "n_samples", "bandwidth", "mean_nats", "std_error"]
    return [("benchmark.csv", header, rows)]


_DRIVERS = {
    "fit-divergence": _run_fit_divergence,
    "dequantize-ll": _run_dequantize_ll,
    "mixture-demo": _run_mixture_demo,
    "nn-shift": _run_nn_shift,
    "parzen-sweep": _run_parzen_sweep,
    "parzen-benchmark": _run_parzen_benchmark,
}

EXPERIMENTS = tuple(sorted(_DRIVERS))
