"""Symmetric banded eigenvalue machinery.

* :func:`reduce_to_tridiagonal` -- Givens band reduction with bulge chasing
  inside a band of half-width ``b + 1`` (no dense matrix is formed).
  Cost is ``O(n**2 b)``.
* :func:`eigenvalues_all` -- implicit QL with Wilkinson shifts, eigenvalues
  only. A sub-diagonal entry is deflated once
  ``|e_k| <= eps * (|d_k| + |d_{k+1}|)``; at most 50 iterations per
  eigenvalue.
* :func:`count_in_interval` -- Sturm counts on a tridiagonal matrix.
* :func:`band_count_in_interval` -- the same count read off the inertia of an
  unpivoted banded ``LDL^T`` factorization of ``H - x`` (Sylvester), cost
  ``O(n b**2)`` per shift and no reduction needed.

Zero-pivot rule: a pivot with ``|q| <= PIVMIN * scale`` is replaced by
``-PIVMIN * scale`` and counted as negative, so a count at shift ``x`` is
``#{E_j <= x}``. Counts over ``(a, b]`` are differences of such counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .ensemble import BandMatrix, BandMatrixParams

__all__ = [
    "NumericalError",
    "Tridiagonal",
    "Spectrum",
    "IntervalCount",
    "reduce_to_tridiagonal",
    "eigenvalues_all",
    "spectrum",
    "sturm_count",
    "count_in_interval",
    "bands_sturm_count",
    "band_sturm_count",
    "counts_below",
    "band_count_in_interval",
    "gershgorin_bounds",
]

EPS = np.finfo(float).eps
PIVMIN = np.finfo(float).tiny / EPS
# relative pivot size below which the banded LDL^T count is not trusted
INERTIA_PIVOT_TOL = float(np.sqrt(EPS))
MAX_QL_ITER = 50


class NumericalError(ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        if len(self.offdiag) != max(len(self.diag) - 1, 0):
            raise ValueError("offdiag must have length len(diag) - 1")

    @property
    def n(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    params: BandMatrixParams | None = None

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class IntervalCount:
    """Number of eigenvalues in the half-open interval ``(a, b]``."""

    a: float
    b: float
    count: int


# --- band reduction ---------------------------------------------------------


@njit(cache=True)
def _rotate(A, bw, n, p, c, s):
    """Apply the plane rotation on rows/cols ``p, p+1`` to symmetric band ``A``.

    ``A[d, j] = H[j + d, j]`` for ``d <= bw``. New rows are
    ``r_p = c x_p + s x_q`` and ``r_q = -s x_p + c x_q``.
    """
    q = p + 1
    lo = max(0, q - bw)
    hi = min(n - 1, p + bw)
    for k in range(lo, hi + 1):
        if k == p or k == q:
            continue
        # H[p, k]
        if k < p:
            xp = A[p - k, k]
        else:
            xp = A[k - p, p]
        if k < q:
            xq = A[q - k, k]
        else:
            xq = A[k - q, q]
        np_ = c * xp + s * xq
        nq = -s * xp + c * xq
        if k < p:
            A[p - k, k] = np_
        elif k - p <= bw:
            A[k - p, p] = np_
        if k < q:
            A[q - k, k] = nq
        elif k - q <= bw:
            A[k - q, q] = nq
    app = A[0, p]
    aqq = A[0, q]
    apq = A[1, p]
    A[0, p] = c * c * app + 2.0 * c * s * apq + s * s * aqq
    A[0, q] = s * s * app - 2.0 * c * s * apq + c * c * aqq
    A[1, p] = c * s * (aqq - app) + (c * c - s * s) * apq


@njit(cache=True)
def _givens(x, y):
    if y == 0.0:
        return 1.0, 0.0
    r = np.hypot(x, y)
    return x / r, y / r


@njit(cache=True)
def _band_to_tridiagonal(bands):
    b = bands.shape[0] - 1
    n = bands.shape[1]
    bw = b + 1
    A = np.zeros((bw + 1, n))
    A[: b + 1, :] = bands
    for k in range(n - 2):
        for d in range(min(b, n - 1 - k), 1, -1):
            # zero H[k + d, k] against H[k + d - 1, k]
            r = k + d
            c, s = _givens(A[d - 1, k], A[d, k])
            if s == 0.0:
                continue
            _rotate(A, bw, n, r - 1, c, s)
            A[d, k] = 0.0
            # chase the fill at H[r + b, r - 1] down the band
            col = r - 1
            row = r + b
            while row < n:
                c, s = _givens(A[row - 1 - col, col], A[row - col, col])
                if s != 0.0:
                    _rotate(A, bw, n, row - 1, c, s)
                A[row - col, col] = 0.0
                col = row - 1
                row = row + b
    diag = A[0, :].copy()
    off = A[1, : n - 1].copy()
    return diag, off


def reduce_to_tridiagonal(m: BandMatrix) -> Tridiagonal:
    """Orthogonally similar tridiagonal matrix of ``m``.

    Periodic matrices are first folded into an ordinary band of half-width
    ``2L`` (see :meth:`BandMatrix.folded_bands`).
    """
    bands = m.folded_bands()
    if bands.shape[0] <= 2:
        diag = bands[0].copy()
        off = bands[1, : m.n - 1].copy() if bands.shape[0] == 2 else np.zeros(max(m.n - 1, 0))
        return Tridiagonal(diag, off)
    diag, off = _band_to_tridiagonal(np.ascontiguousarray(bands))
    return Tridiagonal(diag, off)


# --- implicit QL ------------------------------------------------------------


@njit(cache=True)
def _tql(d, e):
    """Eigenvalues of a symmetric tridiagonal matrix, in place in ``d``.

    ``e`` has length n with ``e[n-1]`` used as scratch. Returns -1 on success
    or the index whose iteration cap was exceeded.
    """
    n = d.shape[0]
    eps = np.finfo(np.float64).eps
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == 50:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def eigenvalues_all(t: Tridiagonal, params: BandMatrixParams | None = None) -> Spectrum:
    """All eigenvalues of ``t``, ascending.

    Raises :class:`NumericalError` carrying the failing index if an
    eigenvalue does not converge within 50 QL iterations.
    """
    d = np.array(t.diag, dtype=float)
    e = np.zeros(t.n)
    e[: t.n - 1] = t.offdiag
    if t.n > 0:
        fail = _tql(d, e)
        if fail >= 0:
            raise NumericalError(f"QL iteration did not converge for eigenvalue {fail}", fail)
    d.sort()
    return Spectrum(d, params)


# Above this folded half-width "auto" hands full spectra to LAPACK's
# blocked band reduction, which is several times faster for wide bands.
LAPACK_HALF_WIDTH = 32
DENSE_FRACTION = 8


def spectrum(m: BandMatrix, backend: str = "givens") -> Spectrum:
    """Full spectrum of a band matrix.

    ``backend`` is ``"givens"`` (reduction and QL from this module),
    ``"lapack"`` (``scipy.linalg.eigvals_banded``), ``"dense"``
    (divide and conquer on the dense matrix) or ``"auto"``, which picks
    givens up to half-width 32, dense above ``n / 8`` and lapack in between.
    """
    if backend == "auto":
        b = m.folded_bands().shape[0] - 1
        if b <= LAPACK_HALF_WIDTH:
            backend = "givens"
        else:
            backend = "dense" if b > m.n / DENSE_FRACTION else "lapack"
    if backend == "dense":
        from scipy.linalg import eigh

        ev = eigh(m.to_dense(), eigvals_only=True, driver="evd", check_finite=False)
        return Spectrum(np.sort(ev), m.params)
    if backend == "givens":
        return eigenvalues_all(reduce_to_tridiagonal(m), m.params)
    if backend == "lapack":
        from scipy.linalg import eigvals_banded

        ev = eigvals_banded(m.folded_bands(), lower=True, check_finite=False)
        return Spectrum(np.sort(ev), m.params)
    raise ValueError(f"unknown backend {backend!r}")


# --- Sturm counts -----------------------------------------------------------


@njit(cache=True)
def _sturm_counts(diag, off2, xs, pivmin):
    n = diag.shape[0]
    out = np.empty(xs.shape[0], dtype=np.int64)
    for t in range(xs.shape[0]):
        x = xs[t]
        cnt = 0
        q = diag[0] - x
        if abs(q) <= pivmin:
            q = -pivmin
        if q < 0.0:
            cnt += 1
        for i in range(1, n):
            q = diag[i] - x - off2[i - 1] / q
            if abs(q) <= pivmin:
                q = -pivmin
            if q < 0.0:
                cnt += 1
        out[t] = cnt
    return out


def _pivmin(scale_sq):
    return PIVMIN * max(1.0, scale_sq)


def sturm_count(t: Tridiagonal, x) -> np.ndarray | int:
    """``#{eigenvalues <= x}`` for a scalar or array of shifts."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if t.n == 0:
        out = np.zeros(xs.shape, dtype=np.int64)
    else:
        off2 = np.asarray(t.offdiag, dtype=float) ** 2
        pm = _pivmin(float(off2.max()) if off2.size else 0.0)
        out = _sturm_counts(np.asarray(t.diag, dtype=float), off2, xs, pm)
    return int(out[0]) if np.ndim(x) == 0 else out


def count_in_interval(t: Tridiagonal, a: float, b: float) -> IntervalCount:
    """Exact eigenvalue count of ``t`` in ``(a, b]``."""
    if not a < b:
        raise ValueError(f"empty interval: a={a} >= b={b}")
    ca, cb = sturm_count(t, np.array([a, b]))
    return IntervalCount(float(a), float(b), int(cb - ca))


@njit(cache=True)
def _band_inertia(bands, xs, pivtol):
    """Negative pivots of the unpivoted banded LDL^T of ``H - x``.

    Without pivoting a small pivot lets the factors grow without bound, so a
    shift whose pivot falls below ``pivtol`` is abandoned and reported as -1.
    """
    b = bands.shape[0] - 1
    n = bands.shape[1]
    out = np.empty(xs.shape[0], dtype=np.int64)
    F = np.empty((b + 1, n))
    for t in range(xs.shape[0]):
        x = xs[t]
        cnt = 0
        # F[0, j] = pivot d_j; F[i, j] = L[j + i, j] * d_j (unscaled column)
        for j in range(n):
            jb = min(b, n - 1 - j)
            for i in range(jb + 1):
                F[i, j] = bands[i, j]
            F[0, j] -= x
            k0 = max(0, j - b)
            for k in range(k0, j):
                dk = F[0, k]
                ljk = F[j - k, k] / dk
                # update column j rows j..k+b from column k
                top = min(k + b, n - 1)
                for r in range(j, top + 1):
                    F[r - j, j] -= ljk * F[r - k, k]
            q = F[0, j]
            if abs(q) < pivtol:
                cnt = -1
                break
            if q < 0.0:
                cnt += 1
        out[t] = cnt
    return out


def bands_sturm_count(bands: np.ndarray, x) -> np.ndarray | int:
    """``#{eigenvalues <= x}`` for a raw lower band array ``bands[d, j] = H[j+d, j]``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    bands = np.ascontiguousarray(bands, dtype=float)
    if bands.shape[1] == 0:
        out = np.zeros(xs.shape, dtype=np.int64)
    else:
        scale = float(np.abs(bands).max())
        tol = INERTIA_PIVOT_TOL * (scale + np.abs(xs).max())
        out = _band_inertia(bands, xs, tol)
        bad = out < 0
        if bad.any():
            # rare near-singular leading minor: fall back to the stable route
            if bands.shape[0] <= 2:
                diag = bands[0].copy()
                off = bands[1, :-1].copy() if bands.shape[0] == 2 else np.zeros(bands.shape[1] - 1)
            else:
                diag, off = _band_to_tridiagonal(bands)
            out[bad] = sturm_count(Tridiagonal(diag, off), xs[bad])
    return int(out[0]) if np.ndim(x) == 0 else out


def band_sturm_count(m: BandMatrix, x) -> np.ndarray | int:
    """``#{eigenvalues <= x}`` of a band matrix from ``LDL^T`` inertia."""
    return bands_sturm_count(m.folded_bands(), x)


def counts_below(m: BandMatrix, xs, backend: str = "auto") -> np.ndarray:
    """``#{eigenvalues <= x}`` for many shifts at once.

    Inertia costs ``O(n b**2)`` per shift and a full spectrum ``O(n**2 b)``;
    ``"auto"`` picks the cheaper route. Both are exact.
    """
    xs = np.asarray(xs, dtype=float)
    b = m.folded_bands().shape[0] - 1
    if backend == "auto":
        backend = "spectrum" if xs.size * b > 4 * m.n else "inertia"
    if backend == "inertia":
        return band_sturm_count(m, xs.ravel()).reshape(xs.shape)
    ev = spectrum(m, "auto").eigenvalues
    return np.searchsorted(ev, xs, side="right")


def band_count_in_interval(m: BandMatrix, a: float, b: float) -> IntervalCount:
    """Eigenvalue count of ``m`` in ``(a, b]`` without tridiagonal reduction."""
    if not a < b:
        raise ValueError(f"empty interval: a={a} >= b={b}")
    ca, cb = band_sturm_count(m, np.array([a, b]))
    return IntervalCount(float(a), float(b), int(cb - ca))


def gershgorin_bounds(obj) -> tuple[float, float]:
    """Gershgorin enclosure of the spectrum of a band or tridiagonal matrix."""
    if isinstance(obj, BandMatrix):
        return obj.gershgorin_bounds()
    d = np.asarray(obj.diag)
    r = np.zeros_like(d)
    e = np.abs(np.asarray(obj.offdiag))
    r[:-1] += e
    r[1:] += e
    return float(np.min(d - r)), float(np.max(d + r))
