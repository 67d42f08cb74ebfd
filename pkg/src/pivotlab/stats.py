"""Binned scatterplots, fixed-effects residualization, and OLS regressions.

Fixed effects are absorbed by alternating within-group demeaning rather than
explicit dummy regression: factor cardinality (field-year groups) can reach
hundreds of thousands of levels, where dense dummies are infeasible. The dense
path survives as the test oracle; residuals agree to 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tables import column_index, read_table, write_table

MISSING_FACTOR = ""


class RankDeficiencyError(ValueError):
    def __init__(self, column: str):
        super().__init__(f"design matrix is rank deficient: column {column!r} is collinear with its predecessors")
        self.column = column


class ConvergenceError(RuntimeError):
    def __init__(self, max_update: float, max_iter: int):
        super().__init__(f"fixed-effect demeaning did not converge in {max_iter} sweeps (last update {max_update:g})")
        self.max_update = max_update


class AnalysisFrame:
    """Column-oriented table: float64 numeric columns (NaN marks a missing
    value) and string factor columns ('' marks a missing level)."""

    def __init__(self, numeric: dict[str, np.ndarray], factors: dict[str, np.ndarray]):
        self.numeric = {k: np.asarray(v, dtype=np.float64) for k, v in numeric.items()}
        self.factors = {k: np.asarray(v, dtype=object) for k, v in factors.items()}
        lengths = {len(v) for v in self.numeric.values()} | {len(v) for v in self.factors.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
        self.n = lengths.pop() if lengths else 0
        overlap = set(self.numeric) & set(self.factors)
        if overlap:
            raise ValueError(f"columns defined as both numeric and factor: {sorted(overlap)}")

    @property
    def columns(self) -> list[str]:
        return list(self.numeric) + list(self.factors)

    def column_kind(self, name: str) -> str:
        if name in self.numeric:
            return "numeric"
        if name in self.factors:
            return "factor"
        raise KeyError(f"no column named {name!r} (have: {', '.join(self.columns)})")

    def complete_mask(self, cols: list[str]) -> np.ndarray:
        """True where every named column has a value."""
        mask = np.ones(self.n, dtype=bool)
        for name in cols:
            if self.column_kind(name) == "numeric":
                mask &= ~np.isnan(self.numeric[name])
            else:
                mask &= self.factors[name] != MISSING_FACTOR
        return mask

    def write(self, path) -> None:
        names = self.columns
        cols = [self.numeric.get(n) if n in self.numeric else self.factors[n] for n in names]
        rows = []
        for i in range(self.n):
            row = []
            for name, col in zip(names, cols):
                v = col[i]
                if name in self.numeric:
                    row.append(None if np.isnan(v) else float(v))
                else:
                    row.append(str(v))
            rows.append(row)
        write_table(path, names, rows)

    @classmethod
    def read(cls, path) -> "AnalysisFrame":
        """Columns where every non-empty cell parses as a float load as numeric."""
        header, rows = read_table(path)
        numeric: dict[str, np.ndarray] = {}
        factors: dict[str, np.ndarray] = {}
        for j, name in enumerate(header):
            cells = [row[j] for row in rows]
            values = np.empty(len(cells))
            ok = True
            for i, cell in enumerate(cells):
                if cell == "":
                    values[i] = np.nan
                    continue
                try:
                    values[i] = float(cell)
                except ValueError:
                    ok = False
                    break
            if ok and (len(cells) == 0 or any(c != "" for c in cells)):
                numeric[name] = values
            else:
                factors[name] = np.array(cells, dtype=object)
        return cls(numeric, factors)


@dataclass
class BinTable:
    """Equal-size bins over the x-order: per bin the mean x, mean y and count."""

    mean_x: np.ndarray
    mean_y: np.ndarray
    counts: np.ndarray
    n_dropped: int = 0

    HEADER = ("bin", "mean_x", "mean_y", "n")

    def rows(self) -> list[tuple]:
        return [
            (i, float(self.mean_x[i]), float(self.mean_y[i]), int(self.counts[i]))
            for i in range(len(self.counts))
        ]

    def write(self, path) -> None:
        write_table(path, self.HEADER, self.rows())


def _binscatter_arrays(x: np.ndarray, y: np.ndarray, n_bins: int, n_dropped: int) -> BinTable:
    n = len(x)
    if n_bins < 1:
        raise ValueError("need at least one bin")
    if n < n_bins:
        raise ValueError(f"{n} rows after dropping missing values, need at least {n_bins}")
    order = np.argsort(x, kind="stable")
    base, rem = divmod(n, n_bins)
    sizes = np.full(n_bins, base, dtype=np.int64)
    sizes[:rem] += 1
    edges = np.concatenate([[0], np.cumsum(sizes)])
    xs, ys = x[order], y[order]
    mean_x = np.empty(n_bins)
    mean_y = np.empty(n_bins)
    for b in range(n_bins):
        lo, hi = edges[b], edges[b + 1]
        mean_x[b] = xs[lo:hi].mean()
        mean_y[b] = ys[lo:hi].mean()
    return BinTable(mean_x, mean_y, sizes, n_dropped)


def binscatter(frame: AnalysisFrame, x_col: str, y_col: str, n_bins: int = 20) -> BinTable:
    """Sort rows by (x, stable input index) and average within equal-size bins.

    The first n mod n_bins bins take the extra row.
    """
    mask = frame.complete_mask([x_col, y_col])
    return _binscatter_arrays(
        frame.numeric[x_col][mask], frame.numeric[y_col][mask], n_bins, int((~mask).sum())
    )


@dataclass
class FeFit:
    """Residuals of one variable after absorbing factor group means."""

    residuals: np.ndarray  # aligned with kept rows
    keep_index: np.ndarray  # row indices of the kept (complete) rows
    grand_mean: float
    iterations: int
    max_update: float
    effects: list[dict[str, float]]  # per factor: level -> centered effect
    n_dropped: int


def _factor_codes(frame: AnalysisFrame, factors: list[str], mask: np.ndarray):
    codes, labels = [], []
    for name in factors:
        if frame.column_kind(name) == "factor":
            col = frame.factors[name][mask]
        else:
            # numeric columns may serve as discrete factors (e.g. year)
            col = np.array([repr(float(v)) for v in frame.numeric[name][mask]], dtype=object)
        level, code = np.unique(col, return_inverse=True)
        codes.append(code)
        labels.append(level)
    return codes, labels


def _demean_core(
    values: np.ndarray,
    codes: list[np.ndarray],
    n_levels: list[int],
    tolerance: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int, float, list[np.ndarray]]:
    grand_mean = float(values.mean())
    work = values - grand_mean
    effects = [np.zeros(k) for k in n_levels]
    counts = [np.bincount(c, minlength=k).astype(np.float64) for c, k in zip(codes, n_levels)]

    if len(codes) == 1:
        means = np.bincount(codes[0], weights=work, minlength=n_levels[0]) / counts[0]
        effects[0] += means
        work = work - means[codes[0]]
        return work, grand_mean, 1, 0.0, effects

    max_update = np.inf
    for iteration in range(1, max_iter + 1):
        max_update = 0.0
        for f, code in enumerate(codes):
            means = np.bincount(code, weights=work, minlength=n_levels[f]) / counts[f]
            effects[f] += means
            work = work - means[code]
            update = float(np.abs(means).max()) if len(means) else 0.0
            max_update = max(max_update, update)
        if max_update <= tolerance:
            return work, grand_mean, iteration, max_update, effects
    raise ConvergenceError(max_update, max_iter)


def demean_fe(
    frame: AnalysisFrame,
    value_col: str,
    factors: list[str],
    tolerance: float = 1e-10,
    max_iter: int = 1000,
) -> FeFit:
    """Residualize a variable on factor fixed effects by alternating projections.

    A single factor needs one demeaning pass; with several, sweeps repeat until
    the largest group-mean update is at most ``tolerance``. Within each factor
    the reported effects are centered (row-weighted mean zero), their common
    level absorbed into the grand mean.
    """
    if not factors:
        raise ValueError("need at least one factor column")
    mask = frame.complete_mask([value_col] + list(factors))
    values = frame.numeric[value_col][mask]
    if len(values) == 0:
        raise ValueError("no complete rows")
    codes, labels = _factor_codes(frame, list(factors), mask)
    residuals, grand_mean, iterations, max_update, effects = _demean_core(
        values, codes, [len(l) for l in labels], tolerance, max_iter
    )
    centered: list[dict[str, float]] = []
    for f, eff in enumerate(effects):
        weights = np.bincount(codes[f], minlength=len(labels[f]))
        shift = float(np.average(eff, weights=weights))
        grand_mean += shift
        centered.append({str(lab): float(e - shift) for lab, e in zip(labels[f], eff)})
    return FeFit(
        residuals=residuals,
        keep_index=np.flatnonzero(mask),
        grand_mean=grand_mean,
        iterations=iterations,
        max_update=max_update,
        effects=centered,
        n_dropped=int((~mask).sum()),
    )


def residualized_binscatter(
    frame: AnalysisFrame,
    x_col: str,
    y_col: str,
    factors: list[str],
    n_bins: int = 20,
    tolerance: float = 1e-10,
    max_iter: int = 1000,
) -> BinTable:
    """Demean x and y on the same complete rows, add back the grand means, bin."""
    if not factors:
        return binscatter(frame, x_col, y_col, n_bins)
    mask = frame.complete_mask([x_col, y_col] + list(factors))
    codes, labels = _factor_codes(frame, list(factors), mask)
    n_levels = [len(l) for l in labels]
    out = []
    for col in (x_col, y_col):
        values = frame.numeric[col][mask]
        if len(values) == 0:
            raise ValueError("no complete rows")
        residuals, grand_mean, _, _, _ = _demean_core(values, codes, n_levels, tolerance, max_iter)
        out.append(residuals + grand_mean)
    return _binscatter_arrays(out[0], out[1], n_bins, int((~mask).sum()))


@dataclass
class OlsResult:
    names: tuple[str, ...]  # "intercept" first
    coef: np.ndarray
    se: np.ndarray
    n: int
    n_dropped: int
    rss: float

    HEADER = ("term", "coefficient", "std_error", "n")

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def rows(self) -> list[tuple]:
        return [(t, float(c), float(s), self.n) for t, c, s in zip(self.names, self.coef, self.se)]


def _check_rank(X: np.ndarray, names: tuple[str, ...]) -> None:
    for j in range(1, X.shape[1]):
        if np.linalg.matrix_rank(X[:, : j + 1]) < j + 1:
            raise RankDeficiencyError(names[j])


def _ols_arrays(y: np.ndarray, X: np.ndarray, names: tuple[str, ...], n_dropped: int) -> OlsResult:
    n, k = X.shape
    if n <= k:
        raise ValueError(f"{n} rows for {k} coefficients; need more rows than columns")
    _check_rank(X, names)
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    sigma2 = rss / (n - k)
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    return OlsResult(names=names, coef=coef, se=se, n=n, n_dropped=n_dropped, rss=rss)


def ols(frame: AnalysisFrame, y_col: str, x_cols: list[str]) -> OlsResult:
    """Least squares of y on an intercept plus the named columns.

    Solved by orthogonal decomposition (SVD); plain homoskedastic standard
    errors. Rank deficiency raises, naming the first collinear column.
    """
    if not x_cols:
        raise ValueError("need at least one regressor")
    mask = frame.complete_mask([y_col] + list(x_cols))
    y = frame.numeric[y_col][mask]
    X = np.column_stack([np.ones(len(y))] + [frame.numeric[c][mask] for c in x_cols])
    return _ols_arrays(y, X, ("intercept", *x_cols), int((~mask).sum()))


@dataclass
class TrendResult:
    interaction: float
    se_interaction: float
    coef: dict[str, float]  # uncentered basis: intercept, x, year, x:year
    n: int
    n_dropped: int

    HEADER = ("term", "coefficient", "std_error", "n")

    def rows(self) -> list[tuple]:
        out = []
        for term in ("intercept", "x", "year", "x:year"):
            se = self.se_interaction if term == "x:year" else None
            out.append((term, self.coef[term], se, self.n))
        return out


def slope_trend(frame: AnalysisFrame, y_col: str, x_col: str, year_col: str) -> TrendResult:
    """Coefficient on x*year in a regression of y on {x, year, x*year, 1}.

    x and year are centered internally for conditioning; the interaction
    coefficient is invariant to centering and the others are mapped back.
    """
    mask = frame.complete_mask([y_col, x_col, year_col])
    y = frame.numeric[y_col][mask]
    x = frame.numeric[x_col][mask]
    year = frame.numeric[year_col][mask]
    if len(y) == 0:
        raise ValueError("no complete rows")
    xm, ym = x.mean(), year.mean()
    xc, yc = x - xm, year - ym
    X = np.column_stack([np.ones(len(y)), xc, yc, xc * yc])
    fit = _ols_arrays(y, X, ("intercept", x_col, year_col, f"{x_col}:{year_col}"), int((~mask).sum()))
    a, b, c, d = fit.coef
    coef = {
        "intercept": float(a - b * xm - c * ym + d * xm * ym),
        "x": float(b - d * ym),
        "year": float(c - d * xm),
        "x:year": float(d),
    }
    return TrendResult(
        interaction=float(d),
        se_interaction=float(fit.se[3]),
        coef=coef,
        n=fit.n,
        n_dropped=fit.n_dropped,
    )


@dataclass
class FieldSlope:
    field: str
    n: int
    slope: float
    se: float


@dataclass
class FieldSlopeTable:
    slopes: list[FieldSlope]
    skipped: list[tuple[str, str]]  # (field, reason) for non-qualifying groups

    HEADER = ("field", "n", "slope", "std_error")

    @property
    def share_negative(self) -> float:
        if not self.slopes:
            raise ValueError("no qualifying fields")
        return sum(1 for s in self.slopes if s.slope < 0) / len(self.slopes)

    def rows(self) -> list[tuple]:
        return [(s.field, s.n, s.slope, s.se) for s in self.slopes]


def field_slope_table(
    frame: AnalysisFrame,
    y_col: str,
    x_col: str,
    field_col: str,
    min_papers: int = 20,
) -> FieldSlopeTable:
    """Per-field OLS slope of y on x, for fields with at least ``min_papers`` rows."""
    mask = frame.complete_mask([y_col, x_col, field_col])
    y = frame.numeric[y_col][mask]
    x = frame.numeric[x_col][mask]
    fields = frame.factors[field_col][mask]
    slopes: list[FieldSlope] = []
    skipped: list[tuple[str, str]] = []
    for field in sorted(set(fields)):
        sel = fields == field
        n = int(sel.sum())
        if n < min_papers:
            skipped.append((field, "below-minimum-rows"))
            continue
        X = np.column_stack([np.ones(n), x[sel]])
        try:
            fit = _ols_arrays(y[sel], X, ("intercept", x_col), 0)
        except (RankDeficiencyError, ValueError):
            skipped.append((field, "degenerate-regressor"))
            continue
        slopes.append(FieldSlope(field, n, float(fit.coef[1]), float(fit.se[1])))
    return FieldSlopeTable(slopes, skipped)
