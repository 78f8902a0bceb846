"""Column store and the incremental least-squares engine under all selection code.

Memory stays at O(nq) for the data plus O(nk) for the fitted basis; no n x n or
q x q matrix is ever formed.  Each selection step costs O(nq): one product of
the matrix with the current residual, plus a rank-one downdate of cached
per-column norms after a column enters the basis.
"""

import math

import numpy as np

from .errors import (
    AllColumnsConstant,
    CollinearColumn,
    DomainError,
    NoCandidates,
)

__all__ = [
    "COLLINEARITY_TOL",
    "DataMatrix",
    "ResidualState",
    "extend",
    "extend_intercept",
    "scan_best",
    "standardize",
]

# A candidate is usable only while its component orthogonal to the basis keeps
# more than this fraction of the column's squared norm.
COLLINEARITY_TOL = 1e-12

_CONST_SD_TOL = 1e-13


class DataMatrix:
    """Immutable n x q column store with names and rescaling bookkeeping.

    Columns are held Fortran-ordered so single-column access is contiguous.
    ``offsets``/``scales`` record any affine rescaling already applied to the
    stored columns (raw = offset + scale * stored), letting fitted coefficients
    be reported on the original scale.
    """

    __slots__ = ("values", "n", "q", "names", "offsets", "scales", "standardized")

    def __init__(self, values, names=None, offsets=None, scales=None,
                 standardized=None, copy=True):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise DomainError(f"matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"matrix must be non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DomainError("matrix contains non-finite entries")
        if copy or not arr.flags.f_contiguous:
            arr = np.asfortranarray(arr) if not arr.flags.f_contiguous else arr.copy(order="F")
        arr.flags.writeable = False
        self.values = arr
        self.n, self.q = arr.shape
        if names is None:
            names = [f"x{j + 1}" for j in range(self.q)]
        else:
            names = [str(s) for s in names]
            if len(names) != self.q:
                raise DomainError(f"got {len(names)} names for {self.q} columns")
        self.names = names
        self.offsets = np.zeros(self.q) if offsets is None else np.asarray(offsets, float)
        self.scales = np.ones(self.q) if scales is None else np.asarray(scales, float)
        if self.offsets.shape != (self.q,) or self.scales.shape != (self.q,):
            raise DomainError("offsets/scales must have one entry per column")
        if standardized is None:
            standardized = np.zeros(self.q, dtype=bool)
        self.standardized = np.asarray(standardized, bool)

    def col(self, j):
        """Read-only view of column j."""
        return self.values[:, j]

    def raw_column(self, j):
        """Column j mapped back to the original (pre-rescaling) scale."""
        return self.offsets[j] + self.scales[j] * self.values[:, j]

    def __repr__(self):
        return f"DataMatrix(n={self.n}, q={self.q})"


def standardize(m):
    """Center and scale columns to mean 0 and unit sample variance (ddof=1).

    Constant columns pass through unchanged and are reported.  Returns
    ``(standardized DataMatrix, list of constant column indices)``.
    """
    if m.n < 2:
        raise DomainError("standardization needs at least 2 rows")
    means = m.values.mean(axis=0)
    sds = m.values.std(axis=0, ddof=1)
    const = sds <= _CONST_SD_TOL * np.maximum(1.0, np.abs(means))
    if const.all():
        raise AllColumnsConstant("every column is constant")
    shift = np.where(const, 0.0, means)
    scale = np.where(const, 1.0, sds)
    out = np.empty(m.values.shape, dtype=np.float64, order="F")
    np.subtract(m.values, shift, out=out)
    np.divide(out, scale, out=out)
    flags = m.standardized | ~const
    return (
        DataMatrix(
            out,
            names=m.names,
            offsets=m.offsets + m.scales * shift,
            scales=m.scales * scale,
            standardized=flags,
            copy=False,
        ),
        [int(j) for j in np.flatnonzero(const)],
    )


class ResidualState:
    """Mutable state of one growing least-squares fit.

    Holds the selected column indices, the current residual and its squared
    norm, and an orthonormal basis of the fitted span.  The intercept, when
    fitted, occupies a basis vector but is not listed in ``selected``.  A state
    belongs to one thread; it is not safe to share while being extended.
    """

    __slots__ = ("n", "selected", "residual", "rss", "basis",
                 "_cache_for", "_orig_norm2", "_resid_norm2")

    def __init__(self, y):
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size < 1:
            raise DomainError("response is empty")
        if not np.isfinite(y).all():
            raise DomainError("response contains non-finite entries")
        self.n = y.size
        self.selected = []
        self.residual = y.copy()
        self.rss = float(y @ y)
        self.basis = []
        self._cache_for = None
        self._orig_norm2 = None
        self._resid_norm2 = None

    @property
    def fit_size(self):
        """Number of fitted regressors, intercept included."""
        return len(self.basis)


def _orthogonal_component(basis, v):
    # modified Gram-Schmidt with one reorthogonalization pass
    u = np.array(v, dtype=np.float64)
    for _ in range(2):
        for b in basis:
            u -= (b @ u) * b
    return u


def _extend_vector(state, v, orig_norm2):
    u = _orthogonal_component(state.basis, v)
    u2 = float(u @ u)
    if u2 <= COLLINEARITY_TOL * orig_norm2 or u2 == 0.0:
        raise CollinearColumn("vector is numerically collinear with the current basis")
    u /= math.sqrt(u2)
    c = float(u @ state.residual)
    state.residual = state.residual - c * u
    state.rss = float(state.residual @ state.residual)
    state.basis.append(u)
    if state._resid_norm2 is not None:
        proj = state._cache_for.values.T @ u
        state._resid_norm2 -= proj * proj
        np.maximum(state._resid_norm2, 0.0, out=state._resid_norm2)
    return u


def extend_intercept(state):
    """Add the constant column to the fit (done first, before any covariate)."""
    if state.fit_size:
        raise DomainError("intercept must be the first fitted vector")
    _extend_vector(state, np.ones(state.n), float(state.n))
    return state


def extend(state, m, j):
    """Add column j of ``m`` to the fit, updating residual, rss and basis in place.

    Raises CollinearColumn when the column's component orthogonal to the
    current basis falls at or below ``COLLINEARITY_TOL`` times its squared norm.
    """
    j = int(j)
    if not 0 <= j < m.q:
        raise DomainError(f"column index {j} out of range for q={m.q}")
    if m.n != state.n:
        raise DomainError("matrix row count does not match the state")
    if j in state.selected:
        raise DomainError(f"column {j} is already selected")
    x = m.col(j)
    try:
        _extend_vector(state, x, float(x @ x))
    except CollinearColumn:
        raise CollinearColumn(
            f"column {j} is numerically collinear with the current basis"
        ) from None
    state.selected.append(j)
    return state


def _ensure_scan_cache(state, m):
    if state._cache_for is m and state._resid_norm2 is not None:
        return
    X = m.values
    orig = np.einsum("ij,ij->j", X, X)
    resid = orig.copy()
    for b in state.basis:
        proj = X.T @ b
        resid -= proj * proj
    np.maximum(resid, 0.0, out=resid)
    state._cache_for = m
    state._orig_norm2 = orig
    state._resid_norm2 = resid


def scan_best(state, m, excluded=()):
    """Best next column: the admissible candidate giving the largest rss reduction.

    Returns ``(j, rss_after_adding_j)``.  Ties break to the smallest index.
    Selected, excluded and numerically collinear columns are skipped; if
    nothing admissible remains, NoCandidates is raised.

    ``excluded`` may be an iterable of column indices or a boolean mask of
    length q.
    """
    if m.n != state.n:
        raise DomainError("matrix row count does not match the state")
    _ensure_scan_cache(state, m)
    cor = m.values.T @ state.residual
    red = cor * cor
    denom = state._resid_norm2
    admissible = denom > COLLINEARITY_TOL * state._orig_norm2
    score = np.full(m.q, -np.inf)
    np.divide(red, denom, out=score, where=admissible)
    if isinstance(excluded, np.ndarray) and excluded.dtype == bool:
        score[excluded] = -np.inf
    else:
        excl = list(excluded)
        if excl:
            score[excl] = -np.inf
    if state.selected:
        score[state.selected] = -np.inf
    j = int(np.argmax(score))
    if not math.isfinite(score[j]):
        raise NoCandidates("no admissible candidate column remains")
    return j, max(state.rss - float(score[j]), 0.0)
