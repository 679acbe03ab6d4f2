"""Datasets: CSV ingestion, standardization and seeded synthetic generators.

Randomness
----------
Every random draw comes from :func:`stream`, a PCG64 generator keyed by the
user seed plus a tuple of stream names.  Each name is hashed with CRC-32 into
the ``spawn_key`` of a :class:`numpy.random.SeedSequence`, so a generator that
needs features and noise draws them from ``stream(seed, "sparse_linear",
"features")`` and ``stream(seed, "sparse_linear", "noise")``.  Streams are
independent of the order in which they are requested and identical across
platforms.
"""

import csv
import math
import warnings
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParseError, SchemaError


def stream(seed, *names):
    key = tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def _frozen(a):
    if a is None:
        return None
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Scaling:
    mean: np.ndarray
    std: np.ndarray
    target_mean: float | None = None
    target_std: float | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense row-major features with optional targets.

    ``labels`` holds ground-truth outlier flags when a generator or CSV
    provides them; ``aux`` holds auxiliary per-row features (for example a
    classifier's penultimate activations).
    """

    features: np.ndarray
    targets: np.ndarray | None = None
    target_kind: str | None = None
    columns: tuple = ()
    target_name: str | None = None
    scaling: Scaling | None = None
    index: np.ndarray | None = None
    labels: np.ndarray | None = None
    aux: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        object.__setattr__(self, "features", _frozen(x))
        if self.targets is not None:
            t = np.asarray(self.targets)
            t = t.astype(np.int64) if self.target_kind == "class" else t.astype(float)
            if len(t) != len(x):
                raise ValueError("targets and features disagree on row count")
            object.__setattr__(self, "targets", _frozen(t))
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int64)))
        if self.aux is not None:
            object.__setattr__(self, "aux", _frozen(np.asarray(self.aux, dtype=float)))
        idx = np.arange(len(x)) if self.index is None else np.asarray(self.index, dtype=np.int64)
        object.__setattr__(self, "index", _frozen(idx))
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{j}" for j in range(x.shape[1])))

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def rows(self, idx):
        """Subset of rows; ``index`` keeps the original row numbers."""
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]
        return replace(self, features=self.features[idx], targets=pick(self.targets),
                       index=self.index[idx], labels=pick(self.labels), aux=pick(self.aux))

    def reindexed(self):
        return replace(self, index=np.arange(self.n))


# ------------------------------------------------------------------------ CSV

def load_csv(path, target=None, kind="real", label=None):
    """Read a comma-separated file with a mandatory header row.

    Empty feature cells are imputed with the column mean of the parsed
    values.  ``target`` names the target column (``kind`` is ``"real"`` or
    ``"class"``); ``label`` names an optional binary ground-truth column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        raw = [r for r in reader if r]
    for name in (target, label):
        if name is not None and name not in header:
            raise SchemaError(f"{path}: no column named {name!r}")
    values = np.full((len(raw), len(header)), np.nan)
    for i, row in enumerate(raw):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}",
                             row=i + 1)
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: cannot parse {cell!r} at row {i + 1}, column {header[j]!r}",
                                 row=i + 1, column=header[j]) from None
            if not math.isfinite(values[i, j]):
                raise ParseError(f"{path}: non-finite value at row {i + 1}, column {header[j]!r}",
                                 row=i + 1, column=header[j])

    special = {target, label} - {None}
    feat_cols = [j for j, h in enumerate(header) if h not in special]
    for name in special:
        j = header.index(name)
        if np.isnan(values[:, j]).any():
            raise ParseError(f"{path}: missing value in column {name!r}", column=name)

    x = values[:, feat_cols]
    missing = np.isnan(x)
    if missing.any():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            means = np.nanmean(x, axis=0)
        means = np.where(np.isnan(means), 0.0, means)
        x = np.where(missing, means[None, :], x)

    targets = None
    if target is not None:
        targets = values[:, header.index(target)]
        if kind == "class":
            if np.any(targets != np.round(targets)) or np.any(targets < 0):
                raise ParseError(f"{path}: class targets must be non-negative integers", column=target)
        elif kind != "real":
            raise ValueError(f"unknown target kind {kind!r}")
    labels = None if label is None else values[:, header.index(label)]
    return Dataset(x, targets=targets, target_kind=kind if target else None,
                   columns=tuple(header[j] for j in feat_cols), target_name=target,
                   labels=labels, meta={"source": str(path)})


def _fmt(v):
    return repr(float(v))


def write_csv(ds, path, label_name="label"):
    header = list(ds.columns)
    cols = [ds.features[:, j] for j in range(ds.d)]
    if ds.targets is not None:
        header.append(ds.target_name or "target")
        cols.append(ds.targets)
    if ds.labels is not None:
        header.append(label_name)
        cols.append(ds.labels)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            w.writerow([str(int(c[i])) if np.issubdtype(c.dtype, np.integer) else _fmt(c[i])
                        for c in cols])


# ------------------------------------------------------------- preprocessing

def fit_scaling(ds, fit_rows=None, targets=False):
    x = ds.features if fit_rows is None else ds.features[fit_rows]
    if len(x) == 0:
        raise ValueError("empty fit split")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    const = std < 1e-12
    if const.any():
        names = [ds.columns[j] for j in np.flatnonzero(const)]
        warnings.warn(f"constant columns left unscaled: {names}", stacklevel=2)
        std = np.where(const, 1.0, std)
    tm = ts = None
    if targets and ds.targets is not None and ds.target_kind != "class":
        t = ds.targets if fit_rows is None else ds.targets[fit_rows]
        tm, ts = float(t.mean()), float(t.std())
        if ts < 1e-12:
            ts = 1.0
    return Scaling(mean, std, tm, ts)


def apply_scaling(ds, scaling):
    x = (ds.features - scaling.mean) / scaling.std
    t = ds.targets
    if scaling.target_mean is not None and t is not None:
        t = (t - scaling.target_mean) / scaling.target_std
    return replace(ds, features=x, targets=t, scaling=scaling)


def standardize(ds, fit_rows=None, targets=False):
    """Per-column standardization with statistics from ``fit_rows`` (default all)."""
    return apply_scaling(ds, fit_scaling(ds, fit_rows, targets))


def split(ds, test_fraction, seed):
    """Seeded random train/test split; returns ``(train, test)``."""
    perm = stream(seed, "split").permutation(ds.n)
    n_test = int(round(test_fraction * ds.n))
    return ds.rows(np.sort(perm[n_test:])).reindexed(), ds.rows(np.sort(perm[:n_test])).reindexed()


# ----------------------------------------------------------------- generators

def gen_sparse_linear(n, d, sparsity, noise, seed):
    """Standard-normal features mapped through Uniform[1, 2] weights.

    ``sparsity`` is the fraction of weights kept nonzero; the rest are zeroed
    at seeded positions.  Returns ``(dataset, true_weights)``.
    """
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must lie in [0, 1]")
    x = stream(seed, "sparse_linear", "features").standard_normal((n, d))
    w = stream(seed, "sparse_linear", "weights").uniform(1.0, 2.0, d)
    n_zero = d - int(round(sparsity * d))
    zero = stream(seed, "sparse_linear", "support").permutation(d)[:n_zero]
    w[zero] = 0.0
    y = x @ w + noise * stream(seed, "sparse_linear", "noise").standard_normal(n)
    ds = Dataset(x, targets=y, target_kind="real",
                 meta={"generator": "sparse_linear", "noise": noise, "weights": w.tolist()})
    return ds, w


def gen_outlier_classification(n, fraction, seed):
    """Two separable 2-D Gaussian classes plus a cluster of flipped labels.

    Class 0 sits at (-2, 0), class 1 at (2, 0), both with std 0.6.  A
    ``fraction`` of the rows form a tight cluster labelled 1 at (-5, -2),
    well beyond class 0's 3-sigma radius.  ``labels`` flags those rows.
    """
    if not 0.0 <= fraction < 0.5:
        raise ValueError("fraction must lie in [0, 0.5)")
    m = int(math.ceil(fraction * n))
    k = n - m
    y_in = np.arange(k) % 2
    centres = np.array([[-2.0, 0.0], [2.0, 0.0]])
    x_in = centres[y_in] + 0.6 * stream(seed, "outlier_cls", "inliers").standard_normal((k, 2))
    x_out = np.array([-5.0, -2.0]) + 0.3 * stream(seed, "outlier_cls", "outliers").standard_normal((m, 2))
    x = np.vstack([x_in, x_out])
    y = np.concatenate([y_in, np.ones(m, dtype=np.int64)])
    flag = np.concatenate([np.zeros(k), np.ones(m)])
    perm = stream(seed, "outlier_cls", "order").permutation(n)
    return Dataset(x[perm], targets=y[perm], target_kind="class", labels=flag[perm],
                   meta={"generator": "outlier_classification", "fraction": fraction})


def gen_outlier_regression(n, fraction, seed, slope=1.5, intercept=0.5):
    """Line plus gross outliers at large x (a high-leverage deviant cluster)."""
    if not 0.0 <= fraction < 0.5:
        raise ValueError("fraction must lie in [0, 0.5)")
    m = int(math.ceil(fraction * n))
    k = n - m
    x_in = stream(seed, "outlier_reg", "x").standard_normal(k)
    y_in = slope * x_in + intercept + 0.3 * stream(seed, "outlier_reg", "noise").standard_normal(k)
    g = stream(seed, "outlier_reg", "outliers")
    x_out = 3.0 + 0.4 * g.standard_normal(m)
    y_out = -4.0 + 0.8 * g.standard_normal(m)
    x = np.concatenate([x_in, x_out])
    y = np.concatenate([y_in, y_out])
    flag = np.concatenate([np.zeros(k), np.ones(m)])
    perm = stream(seed, "outlier_reg", "order").permutation(n)
    return Dataset(x[perm, None], targets=y[perm], target_kind="real", labels=flag[perm],
                   meta={"generator": "outlier_regression", "slope": slope,
                         "intercept": intercept, "fraction": fraction})


def heteroskedastic_scale(x):
    return 0.05 + 0.25 * (np.asarray(x) + 3.0)


def gen_heteroskedastic(n, seed, slope=1.0):
    """y = slope * x + eps, x ~ U[-3, 3], with noise std increasing in x."""
    x = stream(seed, "hetero", "x").uniform(-3.0, 3.0, n)
    y = slope * x + heteroskedastic_scale(x) * stream(seed, "hetero", "noise").standard_normal(n)
    return Dataset(x[:, None], targets=y, target_kind="real",
                   meta={"generator": "heteroskedastic", "slope": slope})


def gen_contaminated_gaussian(n, d, fraction, radius, seed, rank=None, noise=0.3):
    """Gaussian inliers plus outliers placed at distance >= ``radius`` sigma.

    With ``rank=None`` inliers are isotropic N(0, I).  Otherwise they lie
    near a random ``rank``-dimensional subspace with isotropic ``noise``,
    rescaled so each coordinate has unit inlier variance.  Outliers point in
    uniformly random directions with norm in [radius, radius + 2].  Exactly
    ``ceil(fraction * n)`` rows are flagged in ``labels``.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    m = int(math.ceil(fraction * n))
    k = n - m
    g = stream(seed, "contaminated", "inliers")
    if rank is None:
        x_in = g.standard_normal((k, d))
    else:
        basis, _ = np.linalg.qr(stream(seed, "contaminated", "basis").standard_normal((d, rank)))
        x_in = g.standard_normal((k, rank)) @ basis.T * math.sqrt(d / rank)
        x_in = (x_in + noise * g.standard_normal((k, d))) / math.sqrt(1.0 + noise ** 2)
    h = stream(seed, "contaminated", "outliers")
    direction = h.standard_normal((m, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    x_out = direction * h.uniform(radius, radius + 2.0, (m, 1))
    x = np.vstack([x_in, x_out])
    flag = np.concatenate([np.zeros(k), np.ones(m)])
    perm = stream(seed, "contaminated", "order").permutation(n)
    return Dataset(x[perm], labels=flag[perm],
                   meta={"generator": "contaminated_gaussian", "radius": radius, "rank": rank})


def gen_blobs(n, d, classes, spread, seed):
    """Overlapping isotropic Gaussian classes with means on a random simplex."""
    centres = stream(seed, "blobs", "centres").standard_normal((classes, d))
    y = stream(seed, "blobs", "labels").integers(0, classes, n)
    x = centres[y] + spread * stream(seed, "blobs", "noise").standard_normal((n, d))
    return Dataset(x, targets=y, target_kind="class",
                   meta={"generator": "blobs", "classes": classes, "spread": spread})


GENERATORS = {
    "sparse_linear": lambda seed, n=200, d=100, sparsity=0.1, noise=1.0:
        gen_sparse_linear(int(n), int(d), float(sparsity), float(noise), seed)[0],
    "outlier_classification": lambda seed, n=400, fraction=0.1:
        gen_outlier_classification(int(n), float(fraction), seed),
    "outlier_regression": lambda seed, n=200, fraction=0.2:
        gen_outlier_regression(int(n), float(fraction), seed),
    "heteroskedastic": lambda seed, n=500: gen_heteroskedastic(int(n), seed),
    "contaminated_gaussian": lambda seed, n=500, d=10, fraction=0.05, radius=6.0, rank=None:
        gen_contaminated_gaussian(int(n), int(d), float(fraction), float(radius), seed,
                                  rank=None if rank in (None, "none") else int(rank)),
    "blobs": lambda seed, n=600, d=10, classes=3, spread=1.5:
        gen_blobs(int(n), int(d), int(classes), float(spread), seed),
}


def from_source(source, seed, target=None, kind="real", label=None):
    """Resolve ``gen:<name>?k=v&k=v`` to a generated dataset, else load a CSV path."""
    if source.startswith("gen:"):
        name, _, query = source[4:].partition("?")
        if name not in GENERATORS:
            raise SchemaError(f"unknown generator {name!r}; known: {sorted(GENERATORS)}")
        params = {}
        for part in filter(None, query.split("&")):
            key, _, value = part.partition("=")
            params[key] = value
        return GENERATORS[name](seed, **params)
    return load_csv(source, target=target, kind=kind, label=label)
