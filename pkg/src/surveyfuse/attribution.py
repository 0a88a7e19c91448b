"""Exact Shapley attribution of predictions to harmonized features.

Players are whole features, not individual one-hot columns: a feature's
bit group is switched on or off as a unit.  A predictor is any callable
``predictor(x, active)`` taking the full bit-vector plus a boolean
feature-presence mask and returning a predicted target.  Values are
computed exactly by enumerating all coalitions with the classical
factorial weights, which is cheap for the harmonized six-feature set and
capped at twelve features.

The default predictor looks up the mean target of the nearest donor
bucket after zeroing inactive features' columns; a zeroed group is the
encoding's representation of "missing", so no background dataset is
needed.  An empty presence mask predicts the donor pool's global mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Protocol

import numpy as np

from .dataset import EncodedDataset
from .errors import FusionError
from .matching import build_buckets, nearest_rows
from .schema import MISSING_LABEL, FeatureDictionary

MAX_EXACT_FEATURES = 12

Predictor = Callable[[np.ndarray, np.ndarray], float]


class _PredictorProtocol(Protocol):
    def __call__(self, x: np.ndarray, active: np.ndarray) -> float: ...


class BucketMeanPredictor:
    """Mean target of the Hamming-nearest donor bucket, under feature masking."""

    name = "bucket-mean"

    def __init__(self, candidate: EncodedDataset) -> None:
        self.dictionary = candidate.dictionary
        self.buckets = build_buckets(candidate)
        self.global_mean = float(candidate.y.mean())
        self._slices = self.dictionary.group_slices()

    def __call__(self, x: np.ndarray, active: np.ndarray) -> float:
        active = np.asarray(active, dtype=bool)
        if not active.any():
            return self.global_mean
        masked = np.zeros_like(x)
        for j in np.flatnonzero(active):
            sl = self._slices[j]
            masked[sl] = x[sl]
        match = nearest_rows(masked[None, :], self.buckets.x)
        return float(self.buckets.y_mean[match.target_index[0]])


def shapley(
    x: np.ndarray,
    predictor: Predictor,
    dictionary: FeatureDictionary,
) -> np.ndarray:
    """Exact per-feature Shapley values for one sample.

    Enumerates all 2^m coalitions; the value of feature i is the
    factorially weighted average of its marginal contribution
    ``v(S + i) - v(S)`` over coalitions S not containing i.
    """
    m = dictionary.n_features
    if m > MAX_EXACT_FEATURES:
        raise FusionError(
            f"exact Shapley enumeration is limited to {MAX_EXACT_FEATURES} features, "
            f"got {m}; no sampling mode is provided"
        )
    x = np.asarray(x, dtype=np.uint8)

    # coalition -> predicted value, keyed by bitmask over features
    values = np.empty(1 << m)
    for bits in range(1 << m):
        active = np.array([(bits >> j) & 1 for j in range(m)], dtype=bool)
        values[bits] = predictor(x, active)

    fact = [math.factorial(i) for i in range(m + 1)]
    weight = [fact[s] * fact[m - s - 1] / fact[m] for s in range(m)]

    phi = np.zeros(m)
    players = range(m)
    for i in players:
        for size in range(m):
            for coalition in combinations([p for p in players if p != i], size):
                bits = sum(1 << j for j in coalition)
                phi[i] += weight[size] * (values[bits | (1 << i)] - values[bits])
    return phi


@dataclass
class AttributionEntry:
    feature: str
    category: str  # the sample's own category, or the missing label
    mean_value: float
    n_samples: int

    @property
    def direction(self) -> str:
        if self.mean_value > 0:
            return "more-deliveries"
        if self.mean_value < 0:
            return "fewer-deliveries"
        return "neutral"


@dataclass
class AttributionReport:
    entries: list[AttributionEntry]
    n_evaluated: int
    seed: int
    predictor: str
    efficiency_max_error: float  # max |sum(values) - (v(full) - v(empty))| seen

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "predictor": self.predictor,
            "n_evaluated": self.n_evaluated,
            "efficiency_max_error": self.efficiency_max_error,
            "entries": [
                {
                    "feature": e.feature,
                    "category": e.category,
                    "mean_value": e.mean_value,
                    "n_samples": e.n_samples,
                    "direction": e.direction,
                }
                for e in self.entries
            ],
        }


def attribute_dataset(
    ds: EncodedDataset,
    predictor: Predictor,
    sample_limit: int = 500,
    seed: int = 0,
) -> AttributionReport:
    """Shapley values over a seeded sample subset, aggregated per (feature, category).

    Each evaluated sample's value for feature f lands in the group of the
    sample's own category of f (its missing group when the bit group is
    all zero); groups report the mean signed value.
    """
    if ds.n_samples == 0:
        raise FusionError("cannot attribute an empty dataset")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    k = min(sample_limit, ds.n_samples)
    chosen = np.sort(rng.choice(ds.n_samples, size=k, replace=False))

    dictionary = ds.dictionary
    slices = dictionary.group_slices()
    m = dictionary.n_features

    sums: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    eff_err = 0.0
    full = np.ones(m, dtype=bool)
    empty = np.zeros(m, dtype=bool)
    for idx in chosen:
        x = ds.x[idx]
        phi = shapley(x, predictor, dictionary)
        gap = predictor(x, full) - predictor(x, empty)
        eff_err = max(eff_err, abs(float(phi.sum()) - gap))
        for j, (name, cats, sl) in enumerate(
            zip(dictionary.features, dictionary.categories, slices)
        ):
            hot = np.flatnonzero(x[sl])
            category = cats[int(hot[0])] if hot.size else MISSING_LABEL
            key = (name, category)
            sums[key] = sums.get(key, 0.0) + float(phi[j])
            counts[key] = counts.get(key, 0) + 1

    entries = [
        AttributionEntry(
            feature=f, category=c, mean_value=sums[(f, c)] / counts[(f, c)],
            n_samples=counts[(f, c)],
        )
        for (f, c) in sorted(sums.keys())
    ]
    entries.sort(key=lambda e: -abs(e.mean_value))
    predictor_name = getattr(predictor, "name", type(predictor).__name__)
    return AttributionReport(
        entries=entries,
        n_evaluated=k,
        seed=seed,
        predictor=predictor_name,
        efficiency_max_error=eff_err,
    )
