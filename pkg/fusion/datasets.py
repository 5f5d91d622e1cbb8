"""
Individual-level site data.

A ``SiteDataset`` never leaves its site; only the summaries computed from it do.
"""

import re

import numpy as np
import pandas as pd

from fusion.exceptions import DataFormatError, EmptyArmError

_COVARIATE_COLUMN = re.compile(r"^x(\d+)$")

TARGET_SITE = "0"


class SiteDataset:
    """Records ``(x, a, y)`` of one site.

    Parameters
    ----------
    site_id : str
        Site identifier; the target site is ``"0"`` by convention
    X : array-like
        Covariates of shape ``(n, d)``
    A : array-like
        Binary treatments of shape ``(n,)``
    Y : array-like
        Outcomes of shape ``(n,)``
    """

    __slots__ = ("site_id", "X", "A", "Y")

    def __init__(self, site_id, X, A, Y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        A = np.asarray(A, dtype=float).reshape(-1)
        Y = np.asarray(Y, dtype=float).reshape(-1)
        if X.ndim != 2 or not (X.shape[0] == A.shape[0] == Y.shape[0]):
            raise DataFormatError(
                f"Site {site_id}: inconsistent shapes X{X.shape}, A{A.shape}, Y{Y.shape}"
            )
        if X.shape[0] == 0:
            raise DataFormatError(f"Site {site_id} has no records")
        if not all(np.all(np.isfinite(values)) for values in (X, A, Y)):
            raise DataFormatError(f"Site {site_id} contains missing or non-finite values")
        if not np.all((A == 0) | (A == 1)):
            raise DataFormatError(f"Site {site_id}: treatment must be 0 or 1")
        self.site_id = str(site_id)
        self.X = X
        self.A = A
        self.Y = Y

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dimension(self):
        return self.X.shape[1]

    def arm_counts(self):
        treated = int(self.A.sum())
        return {0: self.n - treated, 1: treated}

    def require_both_arms(self):
        counts = self.arm_counts()
        for arm, count in counts.items():
            if count == 0:
                raise EmptyArmError(
                    f"Site {self.site_id} has no observations with a={arm}",
                    details={"site_id": self.site_id, "arm_counts": counts},
                )

    def take(self, indices):
        """Subset of records (used for resampling in tests and simulations)."""
        X, A, Y = self.X[indices], self.A[indices], self.Y[indices]
        return SiteDataset(self.site_id, X, A, Y)

    def with_site_id(self, site_id):
        return SiteDataset(site_id, self.X, self.A, self.Y)

    @classmethod
    def concatenate(cls, site_id, datasets):
        datasets = list(datasets)
        return cls(
            site_id,
            np.vstack([data.X for data in datasets]),
            np.concatenate([data.A for data in datasets]),
            np.concatenate([data.Y for data in datasets]),
        )

    @classmethod
    def from_frame(cls, frame, site_id):
        """Build from a table with columns ``y``, ``a``, ``x1..xd``.

        Raises
        ------
        DataFormatError
            On missing columns, non-contiguous covariate names or missing values
        """
        columns = {str(column).strip(): column for column in frame.columns}
        for required in ("y", "a"):
            if required not in columns:
                raise DataFormatError(f"Site {site_id}: missing column '{required}'")
        indices = sorted(
            int(match.group(1))
            for match in (_COVARIATE_COLUMN.match(name) for name in columns)
            if match
        )
        if not indices or indices != list(range(1, len(indices) + 1)):
            raise DataFormatError(
                f"Site {site_id}: covariate columns must be x1..xd, found {indices}"
            )
        selected = ["y", "a"] + [f"x{j}" for j in indices]
        table = frame[[columns[name] for name in selected]]
        if table.isna().any().any():
            missing = table.columns[table.isna().any()].tolist()
            raise DataFormatError(
                f"Site {site_id}: missing values in columns {missing}",
                details={"columns": [str(column) for column in missing]},
            )
        try:
            values = table.to_numpy(dtype=float)
        except ValueError as exc:
            raise DataFormatError(f"Site {site_id}: non-numeric values ({exc})") from exc
        return cls(site_id, values[:, 2:], values[:, 1], values[:, 0])

    def to_frame(self):
        frame = pd.DataFrame({"y": self.Y, "a": self.A.astype(int)})
        for j in range(self.dimension):
            frame[f"x{j + 1}"] = self.X[:, j]
        return frame

    def __repr__(self):
        return f"SiteDataset(site_id={self.site_id!r}, n={self.n}, d={self.dimension})"


def read_site_table(path, site_id):
    """Read a delimited site table (delimiter sniffed) into a ``SiteDataset``."""
    try:
        frame = pd.read_csv(path, sep=None, engine="python")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f"Cannot read site table {path}: {exc}") from exc
    return SiteDataset.from_frame(frame, site_id)


def write_site_table(dataset, path):
    dataset.to_frame().to_csv(path, index=False, float_format="%.17g")
