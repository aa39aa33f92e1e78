"""Dataset loading: the Statlog German credit file, grouped by loan purpose."""

from __future__ import annotations

import os
import warnings
from pathlib import Path

import numpy as np

from sshmc.models.hblr import HblrData

STATLOG_FILE = "german.data"
N_COLUMNS = 21
PURPOSE_COLUMN = 3
EXPECTED_ROWS = 1000


class DataFormatError(ValueError):
    pass


def data_dir() -> Path:
    """``$SSHMC_DATA_DIR`` if set, otherwise the repository's ``data/``."""
    env = os.environ.get("SSHMC_DATA_DIR")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "data"


def _code_value(token: str, column: int) -> int:
    # categorical codes look like "A<column><level>", e.g. A43 or A410
    prefix = f"A{column + 1}"
    if not token.startswith(prefix) or not token[len(prefix) :].isdigit():
        raise DataFormatError(f"unexpected categorical code {token!r} in column {column + 1}")
    return int(token[len(prefix) :])


def load_statlog(path=None, *, expected_rows: int | None = EXPECTED_ROWS) -> HblrData:
    """Read the whitespace-separated Statlog file into 10 purpose groups.

    Categorical codes become their integer level, every one of the 20
    attributes is standardized over the whole file, and the label
    1 (good) / 2 (bad) maps to +1 / -1.
    """
    path = Path(path) if path is not None else data_dir() / STATLOG_FILE
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != N_COLUMNS:
                raise DataFormatError(f"row {lineno}: expected {N_COLUMNS} columns, found {len(tokens)}")
            try:
                values = [
                    _code_value(tok, col) if tok.startswith("A") else float(tok)
                    for col, tok in enumerate(tokens[:-1])
                ]
                label = int(tokens[-1])
            except ValueError as exc:
                raise DataFormatError(f"row {lineno}: {exc}") from exc
            if label not in (1, 2):
                raise DataFormatError(f"row {lineno}: label must be 1 or 2, got {label}")
            rows.append((values, label))
    if expected_rows is not None and len(rows) != expected_rows:
        raise DataFormatError(f"expected {expected_rows} rows, found {len(rows)}")

    features = np.array([v for v, _ in rows], dtype=float)
    labels = np.array([1.0 if lab == 1 else -1.0 for _, lab in rows])
    purpose = features[:, PURPOSE_COLUMN].astype(int)
    std = features.std(axis=0)
    std[std == 0] = 1.0
    features = (features - features.mean(axis=0)) / std

    codes = sorted(set(purpose.tolist()))
    groups = [np.flatnonzero(purpose == c) for c in codes]
    sizes = [g.size for g in groups]
    if len(groups) == 10 and (min(sizes) != 9 or max(sizes) != 285):
        warnings.warn(f"purpose group sizes range {min(sizes)}..{max(sizes)}, expected 9..285")
    return HblrData(
        features=tuple(features[g] for g in groups),
        labels=tuple(labels[g] for g in groups),
        group_names=tuple(f"A4{c}" for c in codes),
    )
