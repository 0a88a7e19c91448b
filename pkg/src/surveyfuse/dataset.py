"""Encoded person-day datasets and their on-disk artifact format.

An :class:`EncodedDataset` is the unit every pipeline stage exchanges:
one row per person-day sample, a fixed-width bit matrix of one-hot
covariates, and an optional deliveries/day target (NaN = missing).

The ``.enc`` artifact is a zip container holding a JSON header plus raw
``.npy`` arrays.  The header embeds the feature-dictionary hash so that
loading or combining datasets encoded with different dictionaries fails
loudly instead of silently matching incompatible coordinates.  Writes are
byte-deterministic: fixed zip timestamps, fixed member order.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DictionaryMismatchError, DimensionError, FusionError
from .schema import FeatureDictionary

ENC_FORMAT = "surveyfuse-encoded"
ENC_VERSION = 1

# Fixed zip metadata so identical datasets serialize to identical bytes.
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class EncodedDataset:
    """Ordered person-day samples sharing one feature dictionary."""

    dictionary: FeatureDictionary
    survey_id: str
    year: int
    household_ids: np.ndarray  # (n,) unicode
    x: np.ndarray  # (n, d) uint8, one-hot groups per feature
    y: np.ndarray  # (n,) float64, NaN = missing target

    def __post_init__(self) -> None:
        self.household_ids = np.asarray(self.household_ids, dtype=np.str_)
        self.x = np.ascontiguousarray(self.x, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=np.float64)
        n = self.household_ids.shape[0]
        if self.x.shape != (n, self.dictionary.dimension):
            raise DimensionError(
                f"x has shape {self.x.shape}, expected ({n}, {self.dictionary.dimension})"
            )
        if self.y.shape != (n,):
            raise DimensionError(f"y has shape {self.y.shape}, expected ({n},)")
        present = self.y[~np.isnan(self.y)]
        if present.size and present.min() < 0:
            raise DataError("target values must be >= 0")

    # -- basic views ----------------------------------------------------------

    @property
    def n_samples(self) -> int:
        return int(self.household_ids.shape[0])

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.y)

    @property
    def n_missing(self) -> int:
        return int(self.missing_mask.sum())

    def n_households(self) -> int:
        return int(np.unique(self.household_ids).size)

    def check_one_hot(self) -> None:
        """Every feature group must have popcount 0 (missing) or 1."""
        for sl in self.dictionary.group_slices():
            pop = self.x[:, sl].sum(axis=1)
            if pop.max(initial=0) > 1:
                raise DataError("a one-hot group has more than one bit set")

    def subset(self, indices: np.ndarray) -> "EncodedDataset":
        indices = np.asarray(indices)
        return EncodedDataset(
            dictionary=self.dictionary,
            survey_id=self.survey_id,
            year=self.year,
            household_ids=self.household_ids[indices],
            x=self.x[indices],
            y=self.y[indices],
        )

    def labeled(self) -> "EncodedDataset":
        """Samples whose target is present."""
        return self.subset(np.flatnonzero(~self.missing_mask))

    def household_totals(self) -> dict[str, float]:
        """Sum of per-sample targets per household, ordered by first appearance.

        Requires a fully labeled dataset; impute first if targets are missing.
        """
        if self.n_missing:
            raise DataError(
                f"{self.n_missing} samples have missing targets; "
                "impute before computing household totals"
            )
        ids, first, inverse = np.unique(
            self.household_ids, return_index=True, return_inverse=True
        )
        totals = np.bincount(inverse, weights=self.y, minlength=ids.size)
        order = np.argsort(first, kind="stable")
        return {str(ids[i]): float(totals[i]) for i in order}

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        meta = {
            "format": ENC_FORMAT,
            "version": ENC_VERSION,
            "survey_id": self.survey_id,
            "year": self.year,
            "n_samples": self.n_samples,
            "dictionary": self.dictionary.to_json_dict(),
            "dictionary_hash": self.dictionary.hash(),
        }
        members = [
            ("meta.json", json.dumps(meta, sort_keys=True, indent=1).encode("utf-8")),
            ("household_ids.npy", _npy_bytes(self.household_ids)),
            ("x.npy", _npy_bytes(self.x)),
            ("y.npy", _npy_bytes(self.y)),
        ]
        with zipfile.ZipFile(path, "w") as zf:
            for name, blob in members:
                info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
                info.create_system = 3
                info.external_attr = 0o644 << 16
                info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, blob)

    @classmethod
    def load(cls, path: str | Path) -> "EncodedDataset":
        try:
            with zipfile.ZipFile(path, "r") as zf:
                meta = json.loads(zf.read("meta.json"))
                if meta.get("format") != ENC_FORMAT:
                    raise FusionError(f"{path}: not a {ENC_FORMAT} artifact")
                if meta.get("version") != ENC_VERSION:
                    raise FusionError(
                        f"{path}: unsupported artifact version {meta.get('version')!r}"
                    )
                dictionary = FeatureDictionary.from_json_dict(meta["dictionary"])
                if dictionary.hash() != meta["dictionary_hash"]:
                    raise DictionaryMismatchError(
                        f"{path}: embedded dictionary hash does not match its layout"
                    )
                ds = cls(
                    dictionary=dictionary,
                    survey_id=meta["survey_id"],
                    year=int(meta["year"]),
                    household_ids=_read_npy(zf, "household_ids.npy"),
                    x=_read_npy(zf, "x.npy"),
                    y=_read_npy(zf, "y.npy"),
                )
        except zipfile.BadZipFile:
            raise FusionError(f"{path}: not a readable {ENC_FORMAT} artifact") from None
        return ds


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), version=(1, 0))
    return buf.getvalue()


def _read_npy(zf: zipfile.ZipFile, name: str) -> np.ndarray:
    return np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)


def require_same_dictionary(*datasets: EncodedDataset) -> None:
    """Raise unless every dataset was encoded with an identical dictionary."""
    hashes = {ds.dictionary.hash() for ds in datasets}
    if len(hashes) > 1:
        raise DictionaryMismatchError(
            "datasets use different feature dictionaries: "
            + ", ".join(f"{ds.survey_id}:{ds.dictionary.hash()[:12]}" for ds in datasets)
        )


def concat_datasets(
    datasets: list[EncodedDataset], survey_id: str, year: int
) -> EncodedDataset:
    """Stack coordinate-compatible datasets into one (dictionary hash checked)."""
    if not datasets:
        raise FusionError("cannot concatenate zero datasets")
    require_same_dictionary(*datasets)
    return EncodedDataset(
        dictionary=datasets[0].dictionary,
        survey_id=survey_id,
        year=year,
        household_ids=np.concatenate([d.household_ids for d in datasets]),
        x=np.concatenate([d.x for d in datasets], axis=0),
        y=np.concatenate([d.y for d in datasets]),
    )
