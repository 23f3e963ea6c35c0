"""Plain-text serialization for model objects and key-value config files.

The format is line-oriented ``key = value`` pairs. Blank lines and lines
starting with ``#`` are ignored. Vector values are whitespace-separated
numbers. Mixture components use indexed keys (``mean.0``, ``variance.0``, ...).

Isotropic Gaussian::

    type = isotropic_gaussian
    mean = 0.0 0.0
    sigma = 1.0

Gaussian mixture::

    type = gaussian_mixture
    weights = 0.5 0.5
    mean.0 = -2.0 0.0
    variance.0 = 1.0 1.0
    mean.1 = 2.0 0.0
    variance.1 = 1.0 1.0

The same ``key = value`` syntax is used by experiment config files.
"""

from __future__ import annotations

import os
from typing import Union

import numpy as np

from .density import GaussianMixture, IsotropicGaussian

__all__ = [
    "parse_keyvalues",
    "format_keyvalues",
    "model_to_text",
    "model_from_text",
    "save_model",
    "load_model",
]

Model = Union[IsotropicGaussian, GaussianMixture]


def parse_keyvalues(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into an ordered dict of strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def format_keyvalues(pairs: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


def _fmt_vector(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def _parse_vector(value: str, key: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in value.split()], dtype=np.float64)
    except ValueError:
        raise ValueError(f"key {key!r}: could not parse numbers from {value!r}") from None


def model_to_text(model: Model) -> str:
    """Serialize a model to the documented plain-text format."""
    if isinstance(model, IsotropicGaussian):
        pairs = {
            "type": "isotropic_gaussian",
            "mean": _fmt_vector(model.mean),
            "sigma": repr(model.sigma),
        }
        return format_keyvalues(pairs)
    if isinstance(model, GaussianMixture):
        pairs = {"type": "gaussian_mixture", "weights": _fmt_vector(model.weights)}
        for k in range(model.n_components):
            pairs[f"mean.{k}"] = _fmt_vector(model.means[k])
            pairs[f"variance.{k}"] = _fmt_vector(model.variances[k])
        return format_keyvalues(pairs)
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_text(text: str) -> Model:
    """Parse a model from its plain-text form. Inverse of :func:`model_to_text`."""
    pairs = parse_keyvalues(text)
    kind = pairs.pop("type", None)
    if kind == "isotropic_gaussian":
        missing = {"mean", "sigma"} - pairs.keys()
        if missing:
            raise ValueError(f"isotropic_gaussian: missing keys {sorted(missing)}")
        model = IsotropicGaussian(_parse_vector(pairs.pop("mean"), "mean"), float(pairs.pop("sigma")))
    elif kind == "gaussian_mixture":
        if "weights" not in pairs:
            raise ValueError("gaussian_mixture: missing key 'weights'")
        weights = _parse_vector(pairs.pop("weights"), "weights")
        means, variances = [], []
        for k in range(weights.size):
            mkey, vkey = f"mean.{k}", f"variance.{k}"
            if mkey not in pairs or vkey not in pairs:
                raise ValueError(f"gaussian_mixture: missing component keys {mkey!r}/{vkey!r}")
            means.append(_parse_vector(pairs.pop(mkey), mkey))
            variances.append(_parse_vector(pairs.pop(vkey), vkey))
        model = GaussianMixture(weights, np.vstack(means), np.vstack(variances))
    elif kind is None:
        raise ValueError("missing 'type' key")
    else:
        raise ValueError(f"unknown model type {kind!r}")
    if pairs:
        raise ValueError(f"unrecognized keys: {sorted(pairs)}")
    return model


def save_model(path: os.PathLike | str, model: Model) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(model_to_text(model))


def load_model(path: os.PathLike | str) -> Model:
    with open(path, "r", encoding="utf-8") as f:
        return model_from_text(f.read())
