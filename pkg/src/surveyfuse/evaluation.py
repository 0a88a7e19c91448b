"""Randomized evaluation protocol: sorted-MSE over household subsets.

Households are not identified across surveys, so vectors of household
delivery totals are compared after ascending sort.  Repeatedly drawing
random household subsets the size of the reference set and averaging the
sorted-MSE (plus mean and standard deviation of the drawn totals) over
growing iteration cutoffs yields curves whose prefix property makes the
cutoffs directly comparable.

All randomness flows through PCG64 generators seeded from
``(seed, iteration index)``, so serial and parallel runs agree and every
report is reproducible bit for bit from its recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import EncodedDataset
from .errors import DataError, DimensionError
from .matching import ImputationResult, household_sums

DEFAULT_CUTOFFS = (100, 200, 300, 400, 500)


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, iteration])))


def sorted_mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared difference of ascending-sorted value vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"expected equal-length vectors, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise DimensionError("vectors must have at least one entry")
    diff = np.sort(a) - np.sort(b)
    return float(np.mean(diff * diff))


@dataclass
class CutoffStats:
    """Statistics over the first ``cutoff`` iterations."""

    cutoff: int
    mse_mean: float
    mse_std: float  # spread of per-iteration MSEs
    mse_stderr: float  # standard error of the mean MSE; shrinks as cutoff grows
    mean_of_means: float
    mean_of_stddevs: float

    def to_json_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "mse_mean": self.mse_mean,
            "mse_std": self.mse_std,
            "mse_stderr": self.mse_stderr,
            "mean_of_means": self.mean_of_means,
            "mean_of_stddevs": self.mean_of_stddevs,
        }


@dataclass
class EvaluationReport:
    cutoffs: tuple[int, ...]
    per_cutoff: list[CutoffStats]
    seed: int
    n: int
    n_imputed_households: int
    iteration_mse: np.ndarray  # per-iteration values, len = max cutoff

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "n_imputed_households": self.n_imputed_households,
            "cutoffs": list(self.cutoffs),
            "per_cutoff": [c.to_json_dict() for c in self.per_cutoff],
        }


def subsample_compare(
    imputed: Mapping[str, float],
    truth: Mapping[str, float],
    n: int,
    cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
    seed: int = 0,
) -> EvaluationReport:
    """Compare imputed household totals against a reference set of size ``n``.

    Each iteration draws ``n`` households without replacement from the
    imputed totals and records the sorted-MSE against the reference plus
    the mean and standard deviation of the drawn totals.  Cutoff ``k``
    averages the first ``k`` iterations, so curves at different cutoffs
    share their draws.
    """
    if not cutoffs or any(c <= 0 for c in cutoffs):
        raise DataError(f"cutoffs must be positive, got {cutoffs}")
    cutoffs = tuple(sorted(cutoffs))
    ids = np.array(sorted(imputed.keys()), dtype=np.str_)
    totals = np.array([imputed[str(i)] for i in ids], dtype=np.float64)
    truth_vals = np.sort(np.array(list(truth.values()), dtype=np.float64))
    if truth_vals.size != n:
        raise DataError(f"reference set has {truth_vals.size} households, expected n={n}")
    if n > ids.size:
        raise DataError(f"cannot draw {n} households from {ids.size}")

    iters = cutoffs[-1]
    mse = np.empty(iters)
    means = np.empty(iters)
    stds = np.empty(iters)
    for it in range(iters):
        rng = _iteration_rng(seed, it)
        draw = totals[rng.choice(ids.size, size=n, replace=False)]
        diff = np.sort(draw) - truth_vals
        mse[it] = np.mean(diff * diff)
        means[it] = draw.mean()
        stds[it] = draw.std()

    per_cutoff = []
    for k in cutoffs:
        head = mse[:k]
        per_cutoff.append(
            CutoffStats(
                cutoff=k,
                mse_mean=float(head.mean()),
                mse_std=float(head.std(ddof=1)) if k > 1 else 0.0,
                mse_stderr=float(head.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0,
                mean_of_means=float(means[:k].mean()),
                mean_of_stddevs=float(stds[:k].mean()),
            )
        )
    return EvaluationReport(
        cutoffs=cutoffs,
        per_cutoff=per_cutoff,
        seed=seed,
        n=n,
        n_imputed_households=int(ids.size),
        iteration_mse=mse,
    )


@dataclass
class SpikeReport:
    """Sorted-MSE between two surveys' household totals (the cross-year spike)."""

    mse: float
    n: int
    seed: int
    size_a: int
    size_b: int

    def to_json_dict(self) -> dict:
        return {
            "mse": self.mse,
            "n": self.n,
            "seed": self.seed,
            "size_a": self.size_a,
            "size_b": self.size_b,
        }


def spike(
    a: Mapping[str, float],
    b: Mapping[str, float],
    n: int,
    seed: int = 0,
) -> SpikeReport:
    """Sorted-MSE between size-``n`` random subsets of two totals maps.

    A side whose population already has exactly ``n`` households is used
    in full; the two draw streams derive from ``(seed, 0)`` and ``(seed, 1)``.
    """

    def _draw(totals: Mapping[str, float], stream: int) -> np.ndarray:
        ids = sorted(totals.keys())
        vals = np.array([totals[i] for i in ids], dtype=np.float64)
        if vals.size < n:
            raise DataError(f"cannot draw {n} households from {vals.size}")
        if vals.size == n:
            return vals
        rng = _iteration_rng(seed, stream)
        return vals[rng.choice(vals.size, size=n, replace=False)]

    va, vb = _draw(a, 0), _draw(b, 1)
    return SpikeReport(
        mse=sorted_mse(va, vb), n=n, seed=seed, size_a=len(a), size_b=len(b)
    )


def baseline_mean_impute(source: EncodedDataset) -> ImputationResult:
    """Fill every missing target with the mean of the observed ones.

    The strawman baseline: with heavy missingness the imputed distribution
    collapses onto a single value.
    """
    present = ~source.missing_mask
    if not present.any():
        raise DataError("mean imputation needs at least one observed target")
    fill = float(source.y[present].mean())
    sample_y = np.where(present, source.y, fill)
    ids, totals = household_sums(source.household_ids, sample_y)
    return ImputationResult(
        sample_y=sample_y,
        imputed_mask=~present,
        household_ids=ids,
        household_y=totals,
        weight=1.0,
        assignment=None,
    )
