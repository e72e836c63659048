"""Dataset loading, shuffling, and the drifting two-cluster stream generator."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .exceptions import IngestionError, ParameterError


@dataclass
class LabeledDataset:
    """Points in stream order with binary labels (1 = anomaly)."""

    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ParameterError("need an (n, d) array and n labels")
        if not np.all(np.isin(self.y, (0, 1))):
            raise ParameterError("labels must be 0 or 1")

    def __len__(self):
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def anomaly_rate(self) -> float:
        return float(self.y.mean()) if len(self) else 0.0

    def fingerprint(self) -> str:
        """SHA-256 over the raw point and label bytes."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()

    def head(self, n: int) -> "LabeledDataset":
        return LabeledDataset(self.X[:n], self.y[:n], self.name)


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise IngestionError("row %d, column %d: cannot parse %r as a number" % (row, col, cell)) from None
    if not math.isfinite(v):
        raise IngestionError("row %d, column %d: non-finite value %r" % (row, col, cell))
    return v


def load_csv(path, label_column: Union[int, str] = -1, has_header: bool = False,
             normalize: str = "none", omega: int = 2048, name: Optional[str] = None) -> LabeledDataset:
    """Read a CSV file of features plus one binary label column.

    Parameters
    ----------
    path : path-like
    label_column : int or str
        Column index (negative counts from the end) or header name.
    has_header : bool
        Whether the first line is a header.
    normalize : {"none", "minmax"}
        ``"minmax"`` fits per-feature min/max on the first ``omega`` rows and
        applies it to all rows; constant features map to 0.
    omega : int
        Window size used by ``"minmax"``.

    Rows are numbered from 1 in error messages, counting the header line.
    """
    if normalize not in ("none", "minmax"):
        raise ParameterError("normalize must be 'none' or 'minmax', got %r" % (normalize,))
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError("cannot open %s: %s" % (path, exc)) from exc
    with fh:
        reader = csv.reader(fh)
        header = None
        if has_header:
            header = next(reader, None)
            if header is None:
                raise IngestionError("%s: empty file" % (path,))
        feats, labels = [], []
        width = None
        label_idx = None
        for rownum, row in enumerate(reader, start=2 if has_header else 1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                label_idx = _resolve_label_column(label_column, header, width)
            if len(row) != width:
                raise IngestionError("row %d: expected %d columns, got %d" % (rownum, width, len(row)))
            lab = row[label_idx].strip()
            try:
                lv = float(lab)
            except ValueError:
                lv = None
            if lv not in (0.0, 1.0):
                raise IngestionError("row %d, column %d: label %r is not 0 or 1" % (rownum, label_idx + 1, lab))
            labels.append(int(lv))
            feats.append([_parse_float(c, rownum, j + 1) for j, c in enumerate(row) if j != label_idx])
    if not feats:
        raise IngestionError("%s: no data rows" % (path,))
    if len(feats[0]) == 0:
        raise IngestionError("%s: no feature columns" % (path,))
    X = np.array(feats, dtype=np.float64)
    if normalize == "minmax":
        X = minmax_first_window(X, omega)
    return LabeledDataset(X, np.array(labels, dtype=np.int64), name or str(path))


def _resolve_label_column(label_column, header, width) -> int:
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise IngestionError("label column %r not found in header" % (label_column,))
        return header.index(label_column)
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise IngestionError("label column %r out of range for %d columns" % (label_column, width))
    return idx


def minmax_first_window(X: np.ndarray, omega: int) -> np.ndarray:
    """Scale each feature by the min/max of the first ``omega`` rows."""
    fit = X[:omega]
    lo = fit.min(axis=0)
    span = fit.max(axis=0) - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    return out


def write_csv(ds: LabeledDataset, path, header: bool = True) -> None:
    """Write features then label, one row per instance, in stream order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["x%d" % j for j in range(ds.d)] + ["label"])
        for x, y in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def shuffle_dataset(ds: LabeledDataset, seed) -> LabeledDataset:
    """Uniformly random row order; points keep their labels."""
    if len(ds) == 0:
        raise ParameterError("cannot shuffle an empty dataset")
    perm = np.random.default_rng(seed).permutation(len(ds))
    return LabeledDataset(ds.X[perm], ds.y[perm], ds.name)


@dataclass(frozen=True)
class ArcDrift:
    """Two cluster centres moving along opposite arcs of one circle.

    At normalised time ``u`` the first centre sits at angle
    ``start + sweep * u`` and the second diametrically opposite. With
    ``sweep < pi`` the two traced arcs never meet.
    """

    center: Tuple[float, float] = (10.0, 10.0)
    radius: float = 6.0
    start: float = 0.0
    sweep: float = 0.75 * math.pi

    def __call__(self, u) -> np.ndarray:
        """Centres at times ``u``: shape ``(len(u), 2, 2)`` as (time, cluster, xy)."""
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        ang = self.start + self.sweep * u
        off = self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        c = np.asarray(self.center, dtype=np.float64)
        return np.stack([c + off, c - off], axis=1)

    def extent(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box of both paths."""
        u = np.linspace(0.0, 1.0, 1025)
        pts = self(u).reshape(-1, 2)
        return pts.min(axis=0), pts.max(axis=0)


@dataclass(frozen=True)
class TwoClusterSpec:
    """Parameters of the drifting two-Gaussian stream with uniform anomalies."""

    n: int = 100_000
    anomaly_rate: float = 0.05
    cluster_sigma: float = 0.5
    drift: ArcDrift = field(default_factory=ArcDrift)
    low: Tuple[float, float] = (0.0, 0.0)
    high: Tuple[float, float] = (20.0, 20.0)
    seed: int = 0

    def validate(self):
        if self.n < 1:
            raise ParameterError("n must be positive")
        if not 0 <= self.anomaly_rate < 0.5:
            raise ParameterError("anomaly_rate must be in [0, 0.5), got %r" % (self.anomaly_rate,))
        if self.cluster_sigma <= 0:
            raise ParameterError("cluster_sigma must be positive")
        lo, hi = self.drift.extent()
        pad = 3 * self.cluster_sigma
        if np.any(lo - pad < np.asarray(self.low)) or np.any(hi + pad > np.asarray(self.high)):
            raise ParameterError("bounds must contain both drift paths inflated by 3 sigma")

    def to_dict(self) -> dict:
        return asdict(self)


def gen_two_cluster(spec: TwoClusterSpec = TwoClusterSpec()) -> LabeledDataset:
    """Generate the drifting two-cluster stream in drift order.

    Each position is an anomaly with probability ``anomaly_rate`` (uniform in
    the bounding box, label 1); otherwise it is a Gaussian draw around one of
    the two current centres, chosen with equal probability (label 0).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    u = np.arange(n) / n
    is_anom = rng.random(n) < spec.anomaly_rate
    which = rng.integers(0, 2, size=n)
    noise = rng.normal(size=(n, 2)) * spec.cluster_sigma
    uniform = rng.uniform(spec.low, spec.high, size=(n, 2))
    centres = spec.drift(u)[np.arange(n), which]
    X = np.where(is_anom[:, None], uniform, centres + noise)
    return LabeledDataset(X, is_anom.astype(np.int64), "two-cluster")
