"""CSV ingestion: join household / person / travel-day tables into encoded samples.

Surveys arrive as three CSV files linked by primary keys (household id;
household id + person id; household id + person id + day id).  One
encoded sample is emitted per travel-day row, replicating household- and
person-level covariates onto it; the delivery target comes from the day
row's delivery column(s) rescaled to deliveries/day.

Ingestion fails fast: missing key columns, dangling references, and
unmapped categories raise with the offending file, row, and value rather
than silently dropping data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import EncodedDataset
from .errors import DataError, IngestionError, MappingError
from .schema import (
    MISSING_LABEL,
    HarmonizationSpec,
    build_dictionary,
    encode_value,
    harmonize_target,
)


@dataclass
class RawTableSet:
    """Parsed survey tables, keyed and referentially checked."""

    survey_id: str
    households: dict[str, dict[str, str]]  # household_id -> row
    persons: dict[tuple[str, str], dict[str, str]]  # (household_id, person_id) -> row
    days: list[dict[str, str]]  # travel-day rows in file order
    household_order: list[str]  # ids in file order

    @property
    def counts(self) -> dict[str, int]:
        return {
            "households": len(self.households),
            "persons": len(self.persons),
            "days": len(self.days),
        }


def _read_csv(path: str | Path, required: list[str], label: str) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"{label} table not found: {path}")
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file, expected a header row")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise IngestionError(f"{path}: missing key column(s) {missing}")
        width = len(reader.fieldnames)
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise IngestionError(f"{path}: row {lineno} has {width} columns expected")
            rows.append(row)
    return rows


def load_tables(
    household_path: str | Path,
    person_path: str | Path,
    day_path: str | Path,
    survey_id: str,
    spec: HarmonizationSpec,
) -> RawTableSet:
    """Read the three survey CSVs and check referential integrity."""
    keys = spec.table_keys(survey_id)
    hh_rows = _read_csv(household_path, [keys.household_id], "household")
    p_rows = _read_csv(person_path, [keys.household_id, keys.person_id], "person")
    d_rows = _read_csv(day_path, [keys.household_id, keys.person_id, keys.day_id], "travel-day")

    households: dict[str, dict[str, str]] = {}
    order: list[str] = []
    for lineno, row in enumerate(hh_rows, start=2):
        hid = row[keys.household_id]
        if hid in households:
            raise IngestionError(
                f"{household_path}: row {lineno}: duplicate household id {hid!r}"
            )
        households[hid] = row
        order.append(hid)

    persons: dict[tuple[str, str], dict[str, str]] = {}
    for lineno, row in enumerate(p_rows, start=2):
        hid, pid = row[keys.household_id], row[keys.person_id]
        if hid not in households:
            raise IngestionError(
                f"{person_path}: row {lineno}: person references unknown household {hid!r}"
            )
        if (hid, pid) in persons:
            raise IngestionError(
                f"{person_path}: row {lineno}: duplicate person ({hid!r}, {pid!r})"
            )
        persons[(hid, pid)] = row

    for lineno, row in enumerate(d_rows, start=2):
        hid, pid = row[keys.household_id], row[keys.person_id]
        if (hid, pid) not in persons:
            raise IngestionError(
                f"{day_path}: row {lineno}: travel day references unknown person "
                f"({hid!r}, {pid!r})"
            )

    return RawTableSet(
        survey_id=survey_id,
        households=households,
        persons=persons,
        days=d_rows,
        household_order=order,
    )


def _day_target(row: dict[str, str], spec: HarmonizationSpec, survey_id: str) -> float | None:
    """Sum the survey's delivery columns and rescale to deliveries/day.

    A blank column counts as zero when any sibling column is answered;
    the target is missing only when every column is blank.
    """
    tgt = spec.target.survey_target(survey_id)
    total = 0.0
    any_present = False
    for col in tgt.columns:
        if col not in row:
            raise MappingError(
                f"survey {survey_id!r}: target column {col!r} absent from travel-day table"
            )
        raw = row[col].strip()
        if raw in tgt.missing_values:
            continue
        try:
            value = float(raw)
        except ValueError:
            raise DataError(
                f"survey {survey_id!r} column {col!r}: non-numeric delivery count {raw!r}"
            ) from None
        if value < 0:
            raise DataError(
                f"survey {survey_id!r} column {col!r}: negative delivery count {value}"
            )
        total += value
        any_present = True
    return harmonize_target(total if any_present else None, tgt.divisor)


def assemble(
    raw: RawTableSet,
    spec: HarmonizationSpec,
    year: int,
) -> EncodedDataset:
    """Encode one sample per travel-day row; deterministic in input order."""
    spec.validate()
    dictionary = build_dictionary(spec)
    survey_id = raw.survey_id
    keys = spec.table_keys(survey_id)

    # Resolve each feature's source table up front; fail before touching rows.
    feature_cols = []
    for f in spec.features:
        col = f.survey_column(survey_id)
        feature_cols.append((f, col))

    n = len(raw.days)
    x = np.zeros((n, dictionary.dimension), dtype=np.uint8)
    y = np.full(n, np.nan, dtype=np.float64)
    household_ids = []

    group_slices = dictionary.group_slices()
    for i, day_row in enumerate(raw.days):
        hid, pid = day_row[keys.household_id], day_row[keys.person_id]
        hh_row = raw.households[hid]
        p_row = raw.persons[(hid, pid)]
        for (f, col), sl in zip(feature_cols, group_slices):
            source_row = hh_row if col.table == "household" else p_row
            if col.column not in source_row:
                raise MappingError(
                    f"survey {survey_id!r}: column {col.column!r} for feature "
                    f"{f.name!r} absent from the {col.table} table"
                )
            x[i, sl] = encode_value(f, source_row[col.column], survey_id)
        target = _day_target(day_row, spec, survey_id)
        if target is not None:
            y[i] = target
        household_ids.append(hid)

    return EncodedDataset(
        dictionary=dictionary,
        survey_id=survey_id,
        year=year,
        household_ids=np.array(household_ids, dtype=np.str_),
        x=x,
        y=y,
    )


def describe(ds: EncodedDataset) -> dict:
    """Descriptive statistics: sizes, missing-target share, per-feature counts."""
    report: dict = {
        "survey_id": ds.survey_id,
        "year": ds.year,
        "n_households": ds.n_households(),
        "n_samples": ds.n_samples,
        "n_missing_target": ds.n_missing,
        "missing_target_fraction": (ds.n_missing / ds.n_samples) if ds.n_samples else 0.0,
    }
    features = {}
    for name, cats, sl in zip(
        ds.dictionary.features, ds.dictionary.categories, ds.dictionary.group_slices()
    ):
        group = ds.x[:, sl]
        counts = {cat: int(group[:, j].sum()) for j, cat in enumerate(cats)}
        counts[MISSING_LABEL] = int((group.sum(axis=1) == 0).sum())
        features[name] = counts
    report["features"] = features
    return report
