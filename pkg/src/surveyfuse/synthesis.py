"""Future-year dataset synthesis via nested nearest-neighbor matching.

Three coordinate-compatible datasets are chained: future-year samples
(source2) match to prior-year samples (source1), which match to donor
buckets (from candidate).  The two matchings form a tri-partite graph;
each bucket reachable from at least one future-year sample receives a
hierarchically averaged target and becomes one entry of the synthetic
output.

Per bucket, every matched source1 sample contributes ``w1 * w2 * mean(y
of its matched future-year samples)``; samples that attracted no
future-year match contribute zero.  The default normalization divides by
the number of source1 samples matched to the bucket.  The literal
alternative (``literal_v2_norm=True``) divides by all of |source1|
instead, which shrinks every bucket by the same global factor; it is kept
selectable because the published pseudocode can be read either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import EncodedDataset, require_same_dictionary
from .errors import DataError, MatchError
from .matching import BucketSet, MatchAssignment, build_buckets, nearest_rows
from .schema import FeatureDictionary


@dataclass
class TriPartiteGraph:
    """Nested matching across three datasets.

    Every source1 node carries exactly one edge to a bucket (``mu1``) and
    every labeled source2 node exactly one edge to a source1 node
    (``mu2``); the nested matching is their composition.
    """

    buckets: BucketSet
    mu1: MatchAssignment  # source1 sample -> bucket
    mu2: MatchAssignment  # labeled source2 sample -> source1 sample
    y_source2: np.ndarray  # targets of the labeled source2 samples
    source2_index: np.ndarray  # their row indices in the original source2
    n_candidate: int
    n_source1: int
    dictionary: FeatureDictionary
    candidate_household_ids: np.ndarray

    @property
    def n_source2(self) -> int:
        return int(self.y_source2.shape[0])

    def default_weights(self) -> tuple[float, float]:
        """(w1, w2) from sample counts, source2 counted after its missing-y drop."""
        return self.n_source1 / self.n_candidate, self.n_source2 / self.n_source1

    def nested_assignment(self) -> np.ndarray:
        """Composed matching: labeled source2 sample -> bucket."""
        return self.mu1.target_index[self.mu2.target_index]


def nested_match(
    source2: EncodedDataset,
    source1: EncodedDataset,
    candidate: EncodedDataset,
    *,
    tie_break: str = "index",
    seed: int | None = None,
    threads: int | None = None,
) -> TriPartiteGraph:
    """Build the tri-partite graph source2 -> source1 -> buckets(candidate).

    Source2 samples with missing targets carry no usable value for the
    averaging step and are dropped before matching.
    """
    require_same_dictionary(source2, source1, candidate)
    if source1.n_samples == 0 or candidate.n_samples == 0:
        raise MatchError("source1 and candidate must be non-empty")
    keep = np.flatnonzero(~source2.missing_mask)
    if keep.size == 0:
        raise MatchError("source2 has no labeled samples to project from")
    source2_labeled = source2.subset(keep)

    buckets = build_buckets(candidate)
    mu1 = nearest_rows(
        source1.x, buckets.x, tie_break=tie_break, seed=seed, threads=threads
    )
    mu2 = nearest_rows(
        source2_labeled.x, source1.x, tie_break=tie_break, seed=seed, threads=threads
    )
    return TriPartiteGraph(
        buckets=buckets,
        mu1=mu1,
        mu2=mu2,
        y_source2=source2_labeled.y.copy(),
        source2_index=keep,
        n_candidate=candidate.n_samples,
        n_source1=source1.n_samples,
        dictionary=candidate.dictionary,
        candidate_household_ids=candidate.household_ids,
    )


@dataclass
class SyntheticDataset:
    """Synthesized future-year entries, one per reachable bucket."""

    dictionary: FeatureDictionary
    bucket_index: np.ndarray  # (r,) indices into the graph's bucket set
    x: np.ndarray  # (r, d) covariate vector per entry
    y: np.ndarray  # (r,) synthesized target, >= 0
    n_matched_samples: np.ndarray  # (r,) source1 samples matched to the bucket
    n_matched_donors: np.ndarray  # (r,) source2 samples reaching the bucket
    covered_households: tuple[str, ...]  # candidate households inside reachable buckets
    w1: float
    w2: float
    literal_v2_norm: bool

    @property
    def n_entries(self) -> int:
        return int(self.bucket_index.shape[0])

    def to_encoded_dataset(self, survey_id: str, year: int) -> EncodedDataset:
        """Re-emit as an encoded dataset so synthesis output feeds back
        into matching and evaluation; entry ids are synthetic bucket labels."""
        ids = np.array([f"b{int(b):06d}" for b in self.bucket_index], dtype=np.str_)
        return EncodedDataset(
            dictionary=self.dictionary,
            survey_id=survey_id,
            year=year,
            household_ids=ids,
            x=self.x.copy(),
            y=self.y.copy(),
        )


def synthesize(
    graph: TriPartiteGraph,
    w1: float,
    w2: float,
    *,
    literal_v2_norm: bool = False,
) -> SyntheticDataset:
    """Hierarchically average future-year targets onto reachable buckets."""
    if w1 <= 0 or w2 <= 0:
        raise DataError(f"weights must be positive, got w1={w1}, w2={w2}")
    k = len(graph.buckets)
    n1 = graph.n_source1

    # per source1 sample: how many source2 samples matched it, and their mean y
    g_counts = np.bincount(graph.mu2.target_index, minlength=n1)
    g_sums = np.bincount(graph.mu2.target_index, weights=graph.y_source2, minlength=n1)
    g_mean = np.divide(g_sums, g_counts, out=np.zeros(n1), where=g_counts > 0)
    contribution = w1 * w2 * g_mean  # zero where no source2 sample matched

    # per bucket: matched source1 samples and total reaching source2 samples
    s_counts = np.bincount(graph.mu1.target_index, minlength=k)
    bucket_sum = np.bincount(graph.mu1.target_index, weights=contribution, minlength=k)
    donor_counts = np.bincount(
        graph.mu1.target_index, weights=g_counts.astype(np.float64), minlength=k
    ).astype(np.int64)

    reachable = donor_counts > 0
    denom = float(n1) if literal_v2_norm else s_counts[reachable].astype(np.float64)
    y = bucket_sum[reachable] / denom

    bucket_index = np.flatnonzero(reachable)
    member_mask = reachable[graph.buckets.inverse]
    covered = tuple(sorted(np.unique(graph.candidate_household_ids[member_mask]).tolist()))

    return SyntheticDataset(
        dictionary=graph.dictionary,
        bucket_index=bucket_index.astype(np.int64),
        x=graph.buckets.x[bucket_index].copy(),
        y=y,
        n_matched_samples=s_counts[reachable].astype(np.int64),
        n_matched_donors=donor_counts[reachable],
        covered_households=covered,
        w1=float(w1),
        w2=float(w2),
        literal_v2_norm=literal_v2_norm,
    )


def generate_future(
    source2: EncodedDataset,
    source1: EncodedDataset,
    candidate: EncodedDataset,
    *,
    literal_v2_norm: bool = False,
    tie_break: str = "index",
    seed: int | None = None,
    threads: int | None = None,
) -> SyntheticDataset:
    """End-to-end synthesis: nested matching, default weights, averaging."""
    graph = nested_match(
        source2, source1, candidate, tie_break=tie_break, seed=seed, threads=threads
    )
    w1, w2 = graph.default_weights()
    return synthesize(graph, w1, w2, literal_v2_norm=literal_v2_norm)
