"""Covariate selection driven by exact Gaussian-covariate P-values.

Four procedures share one engine:

* ``f1st``       -- greedy stepwise inclusion with the Gaussian stopping rule,
                    followed by an all-subset refinement of the chosen set;
* ``all_subset_select`` -- exhaustive search over every subset of a small pool;
* ``f2st``       -- repeated ``f1st`` with cumulative exclusion of everything
                    found so far, producing alternative approximations;
* ``f3st``       -- branched exclusion of each selected covariate in turn,
                    recursively to a chosen depth.

A covariate is accepted only while it beats the best of N independent standard
Gaussian covariates at level ``p0``, where N counts the candidates it actually
competed against; no noise level, sparsity bound or regularization weight is
ever estimated.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import pvalues
from .errors import CollinearColumn, DomainError, NoCandidates, TooManyColumns
from .matrix import ResidualState, extend, extend_intercept, scan_best

__all__ = [
    "ApproximationSet",
    "SelectionConfig",
    "SelectionResult",
    "TraceStep",
    "all_subset_select",
    "f1st",
    "f2st",
    "f3st",
]

# Fits whose rss has collapsed below this fraction of the post-intercept rss
# are treated as exact: further ratios would be 0/0.
_PERFECT_FIT_REL = 1e-12

_BATCH = 65536


@dataclass(frozen=True)
class SelectionConfig:
    """Tuning knobs shared by every selection procedure.

    p0
        Significance level each covariate's Gaussian P-value must beat.
    kmn
        Minimum number of covariates the stepwise pass must take before the
        stopping rule applies; steps admitted only because of this floor are
        flagged as forced.
    max_subset_refine
        Largest stepwise selection that still gets the exhaustive all-subset
        refinement (2^k - 1 subsets); beyond it the stepwise set is returned
        as-is.
    intercept
        Fit a constant term first; it is never a candidate and is reported
        separately with a plain F-test P-value.
    m
        Branch depth for ``f3st``.
    """

    p0: float = 0.01
    kmn: int = 0
    max_subset_refine: int = 20
    intercept: bool = True
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"p0 must lie in (0, 1), got {self.p0}")
        if self.kmn < 0:
            raise DomainError(f"kmn must be >= 0, got {self.kmn}")
        if self.max_subset_refine < 0:
            raise DomainError(f"max_subset_refine must be >= 0, got {self.max_subset_refine}")
        if self.m < 1:
            raise DomainError(f"m must be >= 1, got {self.m}")


@dataclass(frozen=True)
class TraceStep:
    """One stepwise inclusion: column index, its P-values, rss afterwards."""

    index: int
    p_f: float
    p_g: float
    rss: float
    forced: bool


@dataclass
class SelectionResult:
    """One selected approximation to the regression.

    ``selected`` lists 0-based column indices in stepwise selection order;
    ``pg`` and ``coefficients`` align with it.  Coefficients (and the intercept)
    are reported on the original scale of the data, undoing any recorded
    standardization.  ``trace`` records the stepwise path that produced the
    candidate set, including covariates the refinement later dropped.
    """

    selected: list
    pg: list
    coefficients: list
    rss: float
    intercept_coefficient: float | None
    intercept_pg: float | None
    trace: list
    n: int
    q_pool: int
    names: list

    def to_dict(self, include_trace=True):
        d = {
            "selected": [j + 1 for j in self.selected],
            "names": list(self.names),
            "pg": list(self.pg),
            "coefficients": list(self.coefficients),
            "rss": self.rss,
            "n": self.n,
            "q_pool": self.q_pool,
        }
        if self.intercept_pg is not None or self.intercept_coefficient is not None:
            d["intercept"] = {
                "coefficient": self.intercept_coefficient,
                "pg": self.intercept_pg,
            }
        if include_trace:
            d["trace"] = [
                {
                    "index": t.index + 1,
                    "pf": t.p_f,
                    "pg": t.p_g,
                    "rss": t.rss,
                    "forced": t.forced,
                }
                for t in self.trace
            ]
        return d


@dataclass
class ApproximationSet:
    """Alternative approximations ordered by rss, with their provenance."""

    results: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    def __len__(self):
        return len(self.results)

    def __iter__(self):
        return iter(self.results)

    @property
    def best(self):
        return self.results[0] if self.results else None

    def to_dict(self, include_trace=False):
        return {
            "approximations": [
                dict(r.to_dict(include_trace=include_trace), provenance=p)
                for r, p in zip(self.results, self.provenance)
            ]
        }


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _check_inputs(m, y):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != m.n:
        raise DomainError(f"response length {y.size} does not match n={m.n}")
    if not np.isfinite(y).all():
        raise DomainError("response contains non-finite entries")
    if m.n < 3:
        raise DomainError(f"need at least 3 observations, got {m.n}")
    return y


def _valid_exclusions(m, exclude):
    excl = set()
    for j in exclude:
        j = int(j)
        if not 0 <= j < m.q:
            raise DomainError(f"excluded index {j} out of range for q={m.q}")
        excl.add(j)
    return excl


def _design(m, cols, y, intercept):
    parts = [np.ones((m.n, 1))] if intercept else []
    if cols:
        parts.append(m.values[:, list(cols)])
    if not parts:
        return np.empty((m.n, 0))
    return np.concatenate(parts, axis=1)


def _refit_rss(m, cols, y, intercept):
    a = _design(m, cols, y, intercept)
    if a.shape[1] == 0:
        return float(y @ y), np.empty(0)
    beta, *_ = np.linalg.lstsq(a, y, rcond=None)
    r = y - a @ beta
    return float(r @ r), beta


def _gram(m, cols, y, intercept):
    a = _design(m, cols, y, intercept)
    return a.T @ a, a.T @ y, float(y @ y)


def _build_result(m, y, sel, pg, cfg, q_pool, trace):
    """Assemble a SelectionResult, refitting for coefficients on the original scale."""
    n = m.n
    rss, beta = _refit_rss(m, sel, y, cfg.intercept)
    off = int(cfg.intercept)
    coef_stored = beta[off:] if len(beta) else np.empty(0)
    # undo recorded rescaling: stored = (raw - offset)/scale
    coefs = []
    shift_total = 0.0
    for pos, j in enumerate(sel):
        c = float(coef_stored[pos]) / float(m.scales[j])
        coefs.append(c)
        shift_total += c * float(m.offsets[j])
    intercept_coef = None
    intercept_pg = None
    if cfg.intercept:
        intercept_coef = float(beta[0]) - shift_total
        rss_wo, _ = _refit_rss(m, sel, y, False)
        fit_size = len(sel) + 1
        if rss_wo > 0.0 and n - fit_size >= 2:
            ctx = pvalues.PvalueContext(n, fit_size, max(q_pool - len(sel), 0))
            intercept_pg = pvalues.pf_from_rss_ratio(ctx, rss, rss_wo)
        else:
            intercept_pg = 1.0 if rss_wo <= 0.0 else None
    return SelectionResult(
        selected=list(sel),
        pg=list(pg),
        coefficients=coefs,
        rss=rss,
        intercept_coefficient=intercept_coef,
        intercept_pg=intercept_pg,
        trace=list(trace),
        n=n,
        q_pool=q_pool,
        names=[m.names[j] for j in sel],
    )


def _combo_stats(G, g, yy, combos, int_flag):
    """Batched subset fits from one shared Gram system.

    ``combos`` is a (B, s) int array of covariate positions (0-based within the
    Gram's covariate block).  Returns (rss, rss_minus, ok): the subset rss, the
    per-member rss after dropping that member alone, and a validity mask
    (well-conditioned, positive residuals).  Uses the identity that dropping
    regressor i raises rss by beta_i^2 / [(X^T X)^{-1}]_{ii}.
    """
    B, s = combos.shape
    if int_flag:
        idx = np.concatenate([np.zeros((B, 1), dtype=np.intp), combos + 1], axis=1)
    else:
        idx = combos.astype(np.intp)
    t = idx.shape[1]
    Gs = G[idx[:, :, None], idx[:, None, :]]
    gs = g[idx]
    with np.errstate(all="ignore"):
        try:
            beta = np.linalg.solve(Gs, gs[..., None])[..., 0]
            inv = np.linalg.inv(Gs)
        except np.linalg.LinAlgError:
            # fall back to per-subset solves, flagging singular ones
            beta = np.full((B, t), np.nan)
            inv = np.full((B, t, t), np.nan)
            for b in range(B):
                try:
                    beta[b] = np.linalg.solve(Gs[b], gs[b])
                    inv[b] = np.linalg.inv(Gs[b])
                except np.linalg.LinAlgError:
                    pass
        rss = yy - np.einsum("bt,bt->b", gs, beta)
        diag = np.einsum("btt->bt", inv)
        bump = beta * beta / diag
        rss_minus = rss[:, None] + bump[:, int_flag:]
    np.maximum(rss, 0.0, out=rss)
    ok = (
        np.isfinite(rss)
        & np.isfinite(rss_minus).all(axis=1)
        & (rss_minus > 0.0).all(axis=1)
    )
    return rss, rss_minus, ok


def _member_pvalues(m, y, members, cfg, q_pool):
    """Exact per-member all-subset P-values for one reported subset."""
    n = m.n
    s = len(members)
    int_flag = int(cfg.intercept)
    rss, _ = _refit_rss(m, members, y, cfg.intercept)
    ctx = pvalues.PvalueContext(n, s + int_flag, q_pool - s)
    out = []
    for i in range(s):
        rest = members[:i] + members[i + 1:]
        rss_wo, _ = _refit_rss(m, rest, y, cfg.intercept)
        p_f = pvalues.pf_from_rss_ratio(ctx, rss, rss_wo)
        out.append(pvalues.pg_all_subset(ctx, p_f))
    return out, rss


# ---------------------------------------------------------------------------
# f1st: stepwise selection + all-subset refinement
# ---------------------------------------------------------------------------

def f1st(m, y, cfg=None, exclude=()):
    """Stepwise Gaussian-covariate selection.

    Fits the intercept (when configured), then repeatedly adds the candidate
    column giving the largest rss reduction while the best candidate's
    Gaussian P-value stays below ``cfg.p0`` -- unconditionally while fewer than
    ``cfg.kmn`` covariates are in, with such steps flagged as forced.  If the
    stepwise set has at most ``cfg.max_subset_refine`` members, an exhaustive
    search over its subsets then returns the least-rss subset whose every
    member passes the all-subset membership test at ``p0``.

    Parameters
    ----------
    m : DataMatrix
        Candidate columns.
    y : array_like
        Response, length ``m.n``.
    cfg : SelectionConfig, optional
    exclude : iterable of int, optional
        Column indices withheld from candidacy; they also shrink the
        Gaussian competitor pool.

    Returns
    -------
    SelectionResult
        Empty ``selected`` means nothing beat the Gaussian competitors -- a
        normal outcome, not an error.
    """
    if cfg is None:
        cfg = SelectionConfig()
    y = _check_inputs(m, y)
    excl = _valid_exclusions(m, exclude)
    q_pool = m.q - len(excl)
    state = ResidualState(y)
    if cfg.intercept:
        extend_intercept(state)
    excl_mask = np.zeros(m.q, dtype=bool)
    if excl:
        excl_mask[list(excl)] = True
    rss_floor = state.rss * _PERFECT_FIT_REL
    trace = []
    while True:
        k_sel = len(state.selected)
        if k_sel >= q_pool:
            break
        fit_new = state.fit_size + 1
        if m.n - fit_new < 2:
            break
        if state.rss <= rss_floor:
            break
        try:
            j, rss_cand = scan_best(state, m, excl_mask)
        except NoCandidates:
            break
        ctx = pvalues.PvalueContext(m.n, fit_new, q_pool - k_sel)
        p_f = pvalues.pf_from_rss_ratio(ctx, rss_cand, state.rss)
        p_g = pvalues.pg_stepwise(ctx, p_f)
        if k_sel < cfg.kmn or p_g < cfg.p0:
            extend(state, m, j)
            trace.append(TraceStep(j, p_f, p_g, state.rss, forced=p_g >= cfg.p0))
        else:
            break
    sel = list(state.selected)
    if sel and len(sel) <= cfg.max_subset_refine:
        final_sel, final_pg = _refine(m, y, sel, cfg, q_pool)
    else:
        final_sel = sel
        final_pg = [t.p_g for t in trace]
    return _build_result(m, y, final_sel, final_pg, cfg, q_pool, trace)


def _refine(m, y, sel, cfg, q_pool):
    """Least-rss subset of ``sel`` whose every member passes the membership test."""
    n = m.n
    k = len(sel)
    int_flag = int(cfg.intercept)
    G, g, yy = _gram(m, sel, y, cfg.intercept)
    best = None  # (rss, size, combo)
    for s in range(1, k + 1):
        if n - (s + int_flag) < 2:
            break
        pf_thr = pvalues.pf_threshold(cfg.p0, q_pool - s + 1)
        x_thr = pvalues.beta_cdf_inv((n - s - int_flag) / 2.0, 0.5, pf_thr)
        combos = np.array(list(itertools.combinations(range(k), s)), dtype=np.intp)
        for lo in range(0, len(combos), _BATCH):
            chunk = combos[lo:lo + _BATCH]
            rss, rss_minus, ok = _combo_stats(G, g, yy, chunk, int_flag)
            worst = rss_minus.min(axis=1)
            keep = ok & (rss < x_thr * worst)
            for b in np.flatnonzero(keep):
                cand = (float(rss[b]), s, tuple(chunk[b]))
                if best is None or cand < best:
                    best = cand
    if best is None:
        return [], []
    members = [sel[i] for i in best[2]]
    pg, _ = _member_pvalues(m, y, members, cfg, q_pool)
    return members, pg


# ---------------------------------------------------------------------------
# all-subset selection
# ---------------------------------------------------------------------------

def all_subset_select(m, y, cfg=None, exclude=(), cap=25):
    """Exhaustive subset search over a small candidate pool.

    Every nonempty subset (of size compatible with the sample size) is fitted;
    a subset is retained when each member's all-subset Gaussian P-value is
    below ``cfg.p0``; retained subsets contained in another retained subset are
    discarded; survivors are ordered by rss.

    The pool is hard-capped at ``cap`` columns (default 25).
    """
    if cfg is None:
        cfg = SelectionConfig()
    y = _check_inputs(m, y)
    excl = _valid_exclusions(m, exclude)
    cand = [j for j in range(m.q) if j not in excl]
    q_pool = len(cand)
    if q_pool > cap:
        raise TooManyColumns(
            f"all-subset search over {q_pool} columns exceeds the cap of {cap}"
        )
    int_flag = int(cfg.intercept)
    retained = []  # (rss, size, combo of positions)
    if q_pool:
        G, g, yy = _gram(m, cand, y, cfg.intercept)
        s_max = min(q_pool, m.n - int_flag - 2)
        for s in range(1, s_max + 1):
            pf_thr = pvalues.pf_threshold(cfg.p0, q_pool - s + 1)
            x_thr = pvalues.beta_cdf_inv((m.n - s - int_flag) / 2.0, 0.5, pf_thr)
            combos = np.array(list(itertools.combinations(range(q_pool), s)), dtype=np.intp)
            for lo in range(0, len(combos), _BATCH):
                chunk = combos[lo:lo + _BATCH]
                rss, rss_minus, ok = _combo_stats(G, g, yy, chunk, int_flag)
                worst = rss_minus.min(axis=1)
                keep = ok & (rss < x_thr * worst)
                for b in np.flatnonzero(keep):
                    retained.append((float(rss[b]), s, tuple(chunk[b])))
    # drop retained subsets contained in a larger retained subset
    retained.sort(key=lambda r: (-r[1], r[0], r[2]))
    maximal = []
    masks = []
    for rss, s, combo in retained:
        mask = 0
        for i in combo:
            mask |= 1 << i
        if any(mask & kept == mask for kept in masks):
            continue
        masks.append(mask)
        maximal.append((rss, s, combo))
    maximal.sort(key=lambda r: (r[0], r[1], r[2]))
    results = []
    for rss, s, combo in maximal:
        members = [cand[i] for i in combo]
        pg, _ = _member_pvalues(m, y, members, cfg, q_pool)
        results.append(_build_result(m, y, members, pg, cfg, q_pool, trace=[]))
    return ApproximationSet(results, ["all-subset"] * len(results))


# ---------------------------------------------------------------------------
# multi-approximation procedures
# ---------------------------------------------------------------------------

def _order_set(results, provenance):
    order = sorted(
        range(len(results)),
        key=lambda i: (results[i].rss, len(results[i].selected), results[i].selected),
    )
    return ApproximationSet([results[i] for i in order], [provenance[i] for i in order])


def f2st(m, y, cfg=None, exclude=()):
    """Repeated stepwise selection with cumulative exclusion.

    Runs ``f1st``, excludes everything it selected, and repeats on the
    remaining pool until a round selects nothing.  Each nonempty round's result
    is returned, ordered by rss.
    """
    if cfg is None:
        cfg = SelectionConfig()
    excl = _valid_exclusions(m, exclude)
    results = []
    provenance = []
    round_no = 0
    while len(excl) < m.q:
        round_no += 1
        r = f1st(m, y, cfg, exclude=excl)
        if not r.selected:
            break
        results.append(r)
        provenance.append(f"round {round_no}")
        excl |= set(r.selected)
    return _order_set(results, provenance)


def f3st(m, y, cfg=None, exclude=(), accumulate_exclusions=True):
    """Branched stepwise selection to depth ``cfg.m``.

    After the root ``f1st``, each selected covariate is excluded in turn (the
    others stay available) and ``f1st`` reruns; each new result branches again,
    down to depth ``cfg.m``.  By default exclusions accumulate along a branch;
    with ``accumulate_exclusions=False`` each branch excludes only its own
    covariate on top of the base exclusions.  Branches are deduplicated by
    exclusion set, results by selected set; the set is ordered by rss.
    """
    if cfg is None:
        cfg = SelectionConfig()
    base = frozenset(_valid_exclusions(m, exclude))
    root = f1st(m, y, cfg, exclude=base)
    if not root.selected:
        return ApproximationSet([], [])
    seen_excl = {base}
    found = {frozenset(root.selected): (root, "root")}
    frontier = [(root, base)]
    for depth in range(1, cfg.m + 1):
        nxt = []
        for res, excl in frontier:
            for i in res.selected:
                bex = (excl | {i}) if accumulate_exclusions else frozenset(base | {i})
                if bex in seen_excl or len(bex) >= m.q:
                    continue
                seen_excl.add(bex)
                r2 = f1st(m, y, cfg, exclude=bex)
                if not r2.selected:
                    continue
                key = frozenset(r2.selected)
                if key not in found:
                    dropped = ", ".join(m.names[j] for j in sorted(bex - base))
                    found[key] = (r2, f"depth {depth}, excluding {dropped}")
                nxt.append((r2, bex))
        frontier = nxt
    results = [r for r, _ in found.values()]
    provenance = [p for _, p in found.values()]
    return _order_set(results, provenance)
