"""Loading real transaction data into labeled-dataset form.

Expects an already-joined flat CSV (RFC-4180, header row required): one row
per purchase opportunity with covariate columns, a price column and a 0/1
label column.  Rows where no purchase happened may have a missing price; it
is imputed as the mean of that household's last up-to-three observed purchase
prices in time order.  Rows with no purchase history to impute from are
dropped (with a logged count).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .boosting import LabeledDataset
from .errors import InputError

__all__ = ["TransactionSchema", "load_dataset_csv"]

logger = logging.getLogger(__name__)

IMPUTE_WINDOW = 3


@dataclass(frozen=True)
class TransactionSchema:
    """Column mapping plus the candidate price grid for a transaction CSV."""

    numeric_covariates: tuple[str, ...] = ()
    categorical_covariates: tuple[str, ...] = ()
    price_column: str = "price"
    label_column: str = "purchased"
    household_column: str | None = None
    time_column: str | None = None
    price_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "numeric_covariates", tuple(self.numeric_covariates))
        object.__setattr__(self, "categorical_covariates", tuple(self.categorical_covariates))
        if self.price_grid is not None:
            object.__setattr__(self, "price_grid", tuple(float(p) for p in self.price_grid))
        if not self.numeric_covariates and not self.categorical_covariates:
            raise InputError("schema needs at least one covariate column")

    @classmethod
    def from_dict(cls, doc: dict) -> "TransactionSchema":
        return cls(
            numeric_covariates=tuple(doc.get("numeric_covariates", ())),
            categorical_covariates=tuple(doc.get("categorical_covariates", ())),
            price_column=doc.get("price_column", "price"),
            label_column=doc.get("label_column", "purchased"),
            household_column=doc.get("household_column"),
            time_column=doc.get("time_column"),
            price_grid=doc.get("price_grid"),
        )


def _require_columns(frame: pd.DataFrame, schema: TransactionSchema, path) -> None:
    needed = list(schema.numeric_covariates) + list(schema.categorical_covariates)
    needed += [schema.price_column, schema.label_column]
    for optional in (schema.household_column, schema.time_column):
        if optional is not None:
            needed.append(optional)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")


def _impute_prices(frame: pd.DataFrame, schema: TransactionSchema) -> tuple[pd.DataFrame, int]:
    """Fill missing prices from household purchase history; drop hopeless rows."""
    price = pd.to_numeric(frame[schema.price_column], errors="coerce")
    label = frame[schema.label_column]
    bad_purchase = price.isna() & (label == 1)
    if bad_purchase.any():
        rows = [int(i) + 2 for i in frame.index[bad_purchase][:10]]  # 1-based + header
        raise InputError(f"missing price on purchased rows (file lines {rows})")

    if schema.household_column is not None:
        households = frame[schema.household_column]
    else:
        households = pd.Series(0, index=frame.index)
    if schema.time_column is not None:
        order = frame[schema.time_column].sort_values(kind="stable").index
    else:
        order = frame.index

    filled = price.copy()
    history: dict = {}
    drop: list = []
    for idx in order:
        hh = households.at[idx]
        if pd.isna(price.at[idx]):
            past = history.get(hh, ())
            if past:
                filled.at[idx] = float(np.mean(past[-IMPUTE_WINDOW:]))
            else:
                drop.append(idx)
        elif label.at[idx] == 1:
            history[hh] = history.get(hh, ()) + (float(price.at[idx]),)

    out = frame.copy()
    out[schema.price_column] = filled
    if drop:
        logger.warning(
            "dropped %d rows with a missing price and no purchase history", len(drop)
        )
        out = out.drop(index=drop)
    return out, len(drop)


def _encode_covariates(frame: pd.DataFrame, schema: TransactionSchema) -> tuple[np.ndarray, tuple[str, ...]]:
    blocks = []
    names: list[str] = []
    for col in schema.numeric_covariates:
        values = pd.to_numeric(frame[col], errors="coerce")
        if values.isna().any():
            line = int(frame.index[values.isna()][0]) + 2
            raise InputError(f"column {col!r}: non-numeric value near file line {line}")
        blocks.append(values.to_numpy(dtype=float)[:, None])
        names.append(col)
    for col in schema.categorical_covariates:
        series = frame[col].astype(str)
        for value in sorted(series.unique()):
            blocks.append((series == value).to_numpy(dtype=float)[:, None])
            names.append(f"{col}={value}")
    return np.hstack(blocks), tuple(names)


def load_dataset_csv(path, schema: TransactionSchema) -> LabeledDataset:
    """Parse, impute, one-hot encode, and validate a transaction CSV.

    Row order of the input is preserved for all non-dropped rows.
    """
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: malformed CSV ({exc})") from exc
    if len(frame) == 0:
        raise InputError(f"{path}: no data rows")
    _require_columns(frame, schema, path)

    labels = pd.to_numeric(frame[schema.label_column], errors="coerce")
    bad_labels = ~labels.isin((0, 1))
    if bad_labels.any():
        line = int(frame.index[bad_labels][0]) + 2
        raise InputError(f"label column must be 0/1 (file line {line})")

    frame, _ = _impute_prices(frame, schema)
    covariates, names = _encode_covariates(frame, schema)
    return LabeledDataset(
        covariates,
        frame[schema.price_column].to_numpy(dtype=float),
        frame[schema.label_column].to_numpy(dtype=int),
        feature_names=names,
    )
