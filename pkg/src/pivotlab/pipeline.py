"""Assembly of per-paper analysis frames and the pivot-impact relationship."""

from __future__ import annotations

import datetime

import numpy as np

from .corpus import Corpus
from .metrics import field_key_label, hit_flags
from .pivot import PivotWindow, paper_pivot_rows
from .stats import AnalysisFrame, BinTable, OlsResult, _binscatter_arrays, _demean_core, _factor_codes, _ols_arrays


def build_paper_frame(
    corpus: Corpus,
    window: PivotWindow = PivotWindow.THREE_YEAR,
    horizon: datetime.date | None = None,
    percentile: float = 0.95,
    min_group: int = 20,
    threads: int = 1,
) -> AnalysisFrame:
    """One row per paper: pivot size, hit flag, year, team size, funding, field keys.

    Undefined pivots and hit flags become missing values; downstream
    computations drop and count them.
    """
    pivots = {row[0]: row[4] for row in paper_pivot_rows(corpus, window, threads)}
    hits = hit_flags(corpus, horizon, percentile, min_group)
    ids = corpus.paper_ids()
    n = len(ids)
    pivot_col = np.full(n, np.nan)
    hit_col = np.full(n, np.nan)
    year_col = np.empty(n)
    team_col = np.empty(n)
    funded_col = np.empty(n)
    field_col = np.empty(n, dtype=object)
    field_year_col = np.empty(n, dtype=object)
    for i, pid in enumerate(ids):
        rec = corpus.paper(pid)
        phi = pivots.get(pid)
        if phi is not None:
            pivot_col[i] = phi
        flag = hits.hit(pid)
        if flag is not None:
            hit_col[i] = 1.0 if flag else 0.0
        year_col[i] = rec.year
        team_col[i] = len(rec.author_ids)
        funded_col[i] = 1.0 if rec.grant_ids else 0.0
        label = field_key_label(tuple(sorted(rec.fields_l1)))
        field_col[i] = label
        field_year_col[i] = f"{label}|{rec.year}"
    return AnalysisFrame(
        numeric={
            "pivot_size": pivot_col,
            "hit": hit_col,
            "year": year_col,
            "team_size": team_col,
            "funded": funded_col,
        },
        factors={
            "paper_id": np.array(ids, dtype=object),
            "field_key": field_col,
            "field_year": field_year_col,
        },
    )


def restrict_years(frame: AnalysisFrame, year_range: tuple[int, int]) -> AnalysisFrame:
    keep = (frame.numeric["year"] >= year_range[0]) & (frame.numeric["year"] <= year_range[1])
    return AnalysisFrame(
        numeric={k: v[keep] for k, v in frame.numeric.items()},
        factors={k: v[keep] for k, v in frame.factors.items()},
    )


def residualized_slope(
    frame: AnalysisFrame,
    y_col: str,
    x_col: str,
    factors: list[str],
    tolerance: float = 1e-10,
    max_iter: int = 1000,
) -> OlsResult:
    """Slope of y on x after absorbing factor fixed effects from both.

    Both variables are demeaned on the same complete rows and the residuals
    regressed on each other; the slope equals the fixed-effects regression
    coefficient. Standard errors are plain OLS on the residualized data.
    """
    cols = [y_col, x_col] + list(factors)
    mask = frame.complete_mask(cols)
    if not mask.any():
        raise ValueError("no complete rows")
    if factors:
        codes, labels = _factor_codes(frame, list(factors), mask)
        n_levels = [len(l) for l in labels]
        resid = {}
        for col in (y_col, x_col):
            values = frame.numeric[col][mask]
            r, mean, _, _, _ = _demean_core(values, codes, n_levels, tolerance, max_iter)
            resid[col] = r + mean
        y, x = resid[y_col], resid[x_col]
    else:
        y, x = frame.numeric[y_col][mask], frame.numeric[x_col][mask]
    X = np.column_stack([np.ones(len(y)), x])
    return _ols_arrays(y, X, ("intercept", x_col), int((~mask).sum()))


def residualized_bins(
    frame: AnalysisFrame,
    x_col: str,
    y_col: str,
    factors: list[str],
    n_bins: int = 20,
) -> BinTable:
    from .stats import binscatter, residualized_binscatter

    if factors:
        return residualized_binscatter(frame, x_col, y_col, list(factors), n_bins)
    return binscatter(frame, x_col, y_col, n_bins)
