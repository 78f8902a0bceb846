"""Delimited I/O and feature dictionaries: lags, trigonometric basis, interactions.

The loaders accept a plain rectangular CSV (RFC-4180 quoting, numeric body).
Feature constructors return DataMatrix objects whose column names record how
each feature was built; the interaction expansion can also stream column
blocks so very wide dictionaries never have to live in memory at once.
"""

import csv
import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ColumnBudgetExceeded,
    DomainError,
    InsufficientLength,
    MissingValue,
    ParseError,
)
from .matrix import DataMatrix

__all__ = [
    "InteractionSpec",
    "interaction_columns",
    "load_csv",
    "make_interactions",
    "make_lags",
    "make_trig",
    "monomial_count",
    "sample_correlations",
    "split_response",
]

_NA_TOKENS = {"", "na", "nan", "n/a", "null"}


def _parse_cell(text):
    """Return (value, is_missing)."""
    s = text.strip()
    if s.lower() in _NA_TOKENS:
        return 0.0, True
    try:
        return float(s), False
    except ValueError:
        return 0.0, None  # not numeric at all


def load_csv(path, header=None, delimiter=",", na_policy="reject"):
    """Load a rectangular numeric CSV into a DataMatrix.

    Parameters
    ----------
    path : str
    header : bool or None
        None (default) auto-detects: the first row becomes column names when
        any of its cells fails to parse as a number.
    delimiter : str
    na_policy : str
        'reject' (default) errors on the first missing value with its 1-based
        file coordinates; 'drop' removes rows containing missing values.

    Column names default to x1..xq when there is no header.
    """
    if na_policy not in ("reject", "drop"):
        raise DomainError(f"na_policy must be 'reject' or 'drop', got {na_policy!r}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter)]
    rows = [r for r in rows if r]  # tolerate trailing blank lines
    if not rows:
        raise ParseError(f"{path}: file is empty")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(
                f"{path}: expected {width} fields, found {len(r)}", row=i + 1
            )
    names = None
    body_start = 0
    if header is True:
        names = [c.strip() for c in rows[0]]
        body_start = 1
    elif header is None:
        parsed = [_parse_cell(c) for c in rows[0]]
        if any(flag is None for _, flag in parsed):
            names = [c.strip() for c in rows[0]]
            body_start = 1
    if body_start >= len(rows):
        raise ParseError(f"{path}: no data rows")
    data = np.empty((len(rows) - body_start, width))
    missing_rows = set()
    for i, r in enumerate(rows[body_start:]):
        for jcol, cell in enumerate(r):
            val, flag = _parse_cell(cell)
            if flag is None:
                raise ParseError(
                    f"{path}: not a number: {cell.strip()!r}",
                    row=body_start + i + 1,
                    col=jcol + 1,
                )
            if flag:
                if na_policy == "reject":
                    raise MissingValue(
                        f"{path}: missing value",
                        row=body_start + i + 1,
                        col=jcol + 1,
                    )
                missing_rows.add(i)
            data[i, jcol] = val
    if missing_rows:
        keep = [i for i in range(data.shape[0]) if i not in missing_rows]
        if not keep:
            raise ParseError(f"{path}: every row has missing values")
        data = data[keep]
    try:
        return DataMatrix(data, names=names, copy=False)
    except DomainError as exc:
        raise ParseError(f"{path}: {exc}") from None


def resolve_column(m, which):
    """Return the 0-based index of column ``which`` (name or 1-based index)."""
    if isinstance(which, str) and not which.isdigit():
        if which not in m.names:
            raise DomainError(f"no column named {which!r}")
        return m.names.index(which)
    j = int(which) - 1
    if not 0 <= j < m.q:
        raise DomainError(f"response index {int(which)} out of range 1..{m.q}")
    return j


def split_response(m, which):
    """Split one column out of ``m`` as the response.

    ``which`` is a column name or a 1-based index.  Returns
    ``(y, rest, response_name)``.
    """
    j = resolve_column(m, which)
    y = np.array(m.col(j))
    rest_cols = [c for c in range(m.q) if c != j]
    rest = DataMatrix(
        m.values[:, rest_cols],
        names=[m.names[c] for c in rest_cols],
        offsets=m.offsets[rest_cols],
        scales=m.scales[rest_cols],
        standardized=m.standardized[rest_cols],
        copy=False,
    )
    return y, rest, m.names[j]


# ---------------------------------------------------------------------------
# lag matrices
# ---------------------------------------------------------------------------

def make_lags(data, lags, response=0, names=None):
    """Lagged design from one or more series, aligned with the response.

    Parameters
    ----------
    data : array_like
        Length-N series, or (N, v) array of v series.
    lags : iterable of int
        Positive lags; each variable contributes one column per lag, in
        variable-major order (all lags of variable 1, then variable 2, ...).
    response : int
        0-based index of the variable whose current value is the response.
    names : list of str, optional
        Variable names; defaults to x1..xv.

    Returns
    -------
    (DataMatrix, y)
        ``N - max(lag)`` rows; row r corresponds to time max(lag)+r, with the
        lag-l column of variable v holding that variable's value l steps back.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError(f"series array must be 1-D or 2-D, got shape {arr.shape}")
    big_n, v = arr.shape
    lags = [int(l) for l in lags]
    if not lags:
        raise DomainError("need at least one lag")
    if any(l < 1 for l in lags):
        raise DomainError(f"lags must be positive, got {lags}")
    if len(set(lags)) != len(lags):
        raise DomainError(f"lags must be distinct, got {lags}")
    if not 0 <= response < v:
        raise DomainError(f"response variable {response} out of range for {v} variables")
    lmax = max(lags)
    if big_n <= lmax:
        raise InsufficientLength(
            f"series of length {big_n} cannot support lag {lmax}"
        )
    if names is None:
        names = [f"x{i + 1}" for i in range(v)] if v > 1 else ["x"]
    elif len(names) != v:
        raise DomainError(f"got {len(names)} names for {v} variables")
    rows = big_n - lmax
    cols = np.empty((rows, v * len(lags)), order="F")
    out_names = []
    c = 0
    for var in range(v):
        for l in lags:
            cols[:, c] = arr[lmax - l: big_n - l, var]
            out_names.append(f"{names[var]}_lag{l}")
            c += 1
    y = np.array(arr[lmax:, response])
    return DataMatrix(cols, names=out_names, copy=False), y


# ---------------------------------------------------------------------------
# trigonometric dictionary
# ---------------------------------------------------------------------------

def make_trig(n_rows, j_max):
    """Trigonometric dictionary on the grid t = (1..N)/N.

    Column 2j-1 (1-based) is cos(pi*j*t) and column 2j is sin(pi*j*t), for
    j = 1..j_max.  Cosines are near-orthogonal among themselves, as are
    sines; cos/sin pairs whose frequencies sum to an odd number correlate
    substantially on this half-period grid, which is fine for selection --
    the dictionary stays full rank.
    """
    if n_rows < 2:
        raise DomainError(f"need at least 2 rows, got {n_rows}")
    if j_max < 1:
        raise DomainError(f"j_max must be >= 1, got {j_max}")
    t = np.arange(1, n_rows + 1) / n_rows
    cols = np.empty((n_rows, 2 * j_max), order="F")
    names = []
    for j in range(1, j_max + 1):
        ang = math.pi * j * t
        cols[:, 2 * j - 2] = np.cos(ang)
        cols[:, 2 * j - 1] = np.sin(ang)
        names.append(f"cos{j}")
        names.append(f"sin{j}")
    # sin(pi * j_max * t) vanishes identically when j_max == n_rows/2; keep the
    # column anyway -- selection skips it through the collinearity gate.
    return DataMatrix(cols, names=names, copy=False)


# ---------------------------------------------------------------------------
# interaction expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionSpec:
    """Settings for the monomial expansion.

    max_degree
        Monomials of total degree 1..max_degree are generated in graded
        lexicographic order.
    dedup
        Drop columns bitwise-identical to an earlier one (powers of a binary
        column, say).
    max_columns
        Budget on generated (pre-dedup) columns; exceeding it raises.
    chunk
        Number of columns per streamed block.
    """

    max_degree: int = 2
    dedup: bool = True
    max_columns: int = 500_000
    chunk: int = 256

    def __post_init__(self):
        if self.max_degree < 1:
            raise DomainError(f"max_degree must be >= 1, got {self.max_degree}")
        if self.max_columns < 1 or self.chunk < 1:
            raise DomainError("max_columns and chunk must be >= 1")


def monomial_count(q, max_degree):
    """Number of distinct monomials of degree 1..max_degree in q variables."""
    return math.comb(q + max_degree, max_degree) - 1


def _monomial_name(names, combo):
    parts = []
    for j, grp in itertools.groupby(combo):
        e = len(list(grp))
        parts.append(names[j] if e == 1 else f"{names[j]}^{e}")
    return "*".join(parts)


def interaction_columns(m, spec=None):
    """Yield the monomial expansion of ``m`` as (names, block) chunks.

    Blocks hold up to ``spec.chunk`` columns.  Generation order is graded
    lexicographic (degree 1 columns first, each degree in lexicographic order
    of the index multiset), which makes column indices reproducible.  With
    ``spec.dedup`` every column bitwise-identical to an already generated one
    is silently dropped.
    """
    if spec is None:
        spec = InteractionSpec()
    total = monomial_count(m.q, spec.max_degree)
    if total > spec.max_columns:
        raise ColumnBudgetExceeded(
            f"expansion of {m.q} columns to degree {spec.max_degree} has {total} "
            f"monomials, over the budget of {spec.max_columns}"
        )
    seen = set()
    buf = []
    buf_names = []
    for deg in range(1, spec.max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(m.q), deg):
            col = np.array(m.col(combo[0]))
            for j in combo[1:]:
                col *= m.col(j)
            if spec.dedup:
                key = hashlib.blake2b(col.tobytes(), digest_size=16).digest()
                if key in seen:
                    continue
                seen.add(key)
            buf.append(col)
            buf_names.append(_monomial_name(m.names, combo))
            if len(buf) >= spec.chunk:
                yield buf_names, np.column_stack(buf)
                buf, buf_names = [], []
    if buf:
        yield buf_names, np.column_stack(buf)


def make_interactions(m, spec=None):
    """Materialize the monomial expansion as a DataMatrix."""
    names = []
    blocks = []
    for block_names, block in interaction_columns(m, spec):
        names.extend(block_names)
        blocks.append(block)
    if not blocks:
        raise DomainError("expansion produced no columns")
    return DataMatrix(np.concatenate(blocks, axis=1), names=names, copy=False)


# ---------------------------------------------------------------------------
# correlation sampling (for external plotting)
# ---------------------------------------------------------------------------

def sample_correlations(m, pairs, seed):
    """Pearson correlations of randomly sampled column pairs.

    Returns a list of (i, j, correlation) with 0-based i < j; pairs are drawn
    uniformly and may repeat.  Intended for CSV export and external plotting.
    """
    if pairs < 1:
        raise DomainError(f"pairs must be >= 1, got {pairs}")
    if m.q < 2:
        raise DomainError("need at least 2 columns")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x = m.values - m.values.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", x, x))
    out = []
    while len(out) < pairs:
        draw = rng.integers(0, m.q, size=2 * (pairs - len(out)) + 8).reshape(-1, 2)
        for a, b in draw:
            if a == b:
                continue
            i, j = (int(a), int(b)) if a < b else (int(b), int(a))
            denom = norms[i] * norms[j]
            corr = float(x[:, i] @ x[:, j] / denom) if denom > 0 else 0.0
            out.append((i, j, corr))
            if len(out) == pairs:
                break
    return out
