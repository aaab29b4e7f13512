"""Resolvent entries and fractional-moment decay.

Resolvent columns come from banded LU solves of ``(H - z) x = e_j``
(LAPACK ``gbsv`` through :func:`scipy.linalg.solve_banded`); the dense matrix
is never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .ensemble import BandMatrix, BandMatrixParams, _interleave, sample_band_matrix
from .eigensolver import NumericalError
from .seeding import derive_trial_seed


def _general_band(bands: np.ndarray, z: complex) -> np.ndarray:
    """``(2b+1, n)`` general band storage of ``H - z`` from lower symmetric bands."""
    b, n = bands.shape[0] - 1, bands.shape[1]
    ab = np.zeros((2 * b + 1, n), dtype=complex)
    for d in range(b + 1):
        ab[b + d, : n - d] = bands[d, : n - d]
        ab[b - d, d:] = bands[d, : n - d]
    ab[b] -= z
    return ab


def _solve_block(bands: np.ndarray, z: complex, rhs: np.ndarray) -> np.ndarray:
    b = bands.shape[0] - 1
    return solve_banded((b, b), _general_band(bands, z), rhs.astype(complex), check_finite=False)


def greens_columns(m: BandMatrix, js, z: complex, check: bool = True) -> np.ndarray:
    """Columns ``G(., j; z)`` for logical indices ``js``; shape ``(2N+1, len(js))``.

    The residual ``max |(H - z) x - e_j|`` is checked against
    ``1e-10 (||H|| + |z|)``, with ``||H||`` bounded by the max row sum.
    """
    if not z.imag > 0:
        raise ValueError("Im z must be positive")
    js = np.atleast_1d(np.asarray(js, dtype=np.int64))
    N, n = m.params.N, m.n
    cols = js + N
    if np.any((cols < 0) | (cols >= n)):
        raise IndexError("column index outside -N..N")
    bands = m.folded_bands()
    if m.params.periodic and m.L > 0:
        perm = _interleave(n)
        pos = np.empty(n, dtype=np.int64)
        pos[perm] = np.arange(n)
        rhs = np.zeros((n, len(cols)))
        rhs[pos[cols], np.arange(len(cols))] = 1.0
        X = _solve_block(bands, z, rhs)[pos]
    else:
        rhs = np.zeros((n, len(cols)))
        rhs[cols, np.arange(len(cols))] = 1.0
        X = _solve_block(bands, z, rhs)
    if check:
        R = _apply(m, X) - z * X
        R[cols, np.arange(len(cols))] -= 1.0
        norm = float(m._abs_row_sums().max()) if n else 0.0
        resid = float(np.abs(R).max()) if R.size else 0.0
        if resid > 1e-10 * (norm + abs(z)):
            raise NumericalError(f"resolvent residual {resid:.3e} too large")
    return X


def _apply(m: BandMatrix, X: np.ndarray) -> np.ndarray:
    """``H @ X`` from band storage."""
    n, L = m.n, m.L
    Y = m.bands[0][:, None] * X
    idx = np.arange(n)
    for d in range(1, L + 1):
        v = m.bands[d]
        if m.params.periodic:
            r = (idx + d) % n
            np.add.at(Y, r, v[:, None] * X)
            Y += v[:, None] * X[r]
        else:
            Y[d:] += v[: n - d, None] * X[: n - d]
            Y[: n - d] += v[: n - d, None] * X[d:]
    return Y


def greens_column(m: BandMatrix, j: int, z: complex) -> np.ndarray:
    """Column ``j`` (logical index) of ``(H - z)^{-1}``."""
    return greens_columns(m, [j], z)[:, 0]


@dataclass(frozen=True)
class GreensProbe:
    z: complex
    s: float
    j: int
    columns: np.ndarray
    values: np.ndarray


def greens_probe(m: BandMatrix, j: int, columns, z: complex, s: float) -> GreensProbe:
    """``|G(j, k; z)|^s`` for ``k`` in ``columns``."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    g = greens_column(m, j, z)
    cols = np.asarray(columns, dtype=np.int64)
    return GreensProbe(z, s, j, cols, np.abs(g[cols + m.params.N]) ** s)


@dataclass(frozen=True)
class DecayFit:
    distances: np.ndarray
    log_moments: np.ndarray
    stderr: np.ndarray
    rate: float
    loc_length: float
    intercept: float
    prefactor_exponent: float
    r_squared: float
    status: str
    fit_from: int


def _moment(values: np.ndarray, groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean (or median of group means) over axis 0 with a stderr."""
    T = values.shape[0]
    if groups <= 1:
        return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(T)
    g = np.array_split(values, groups)
    means = np.array([x.mean(axis=0) for x in g])
    # normal-theory stderr of a median of group means
    return np.median(means, axis=0), 1.2533 * means.std(axis=0, ddof=1) / math.sqrt(groups)


def fit_decay(distances, moments, stderr, fit_from, N=None, alpha=None, s=None) -> DecayFit:
    """Weighted least-squares line through ``log moment`` for ``d > fit_from``.

    Returns ``rate = -slope``; ``loc_length = 1/rate``. The prefactor exponent
    is ``intercept / (s alpha log N)`` (the exponent of ``N`` carried by the
    prefactor when the constant is taken as 1), ``nan`` when undefined.
    """
    d = np.asarray(distances, float)
    mom = np.asarray(moments, float)
    se = np.asarray(stderr, float)
    if np.all(mom[d >= 1] == 0):
        return DecayFit(d.astype(int), np.full_like(mom, -np.inf), se, math.inf, 0.0,
                        -math.inf, math.nan, 1.0, "decoupled", int(fit_from))
    sel = (d > fit_from) & (mom > 0)
    logm = np.where(mom > 0, np.log(np.where(mom > 0, mom, 1.0)), -np.inf)
    if sel.sum() < 3:
        return DecayFit(d.astype(int), logm, se, math.nan, math.nan, math.nan, math.nan,
                        math.nan, "insufficient-range", int(fit_from))
    x, y = d[sel], logm[sel]
    w = (mom[sel] / np.maximum(se[sel], 1e-300)) ** 2  # 1 / var(log moment)
    W = w.sum()
    xm, ym = (w * x).sum() / W, (w * y).sum() / W
    slope = (w * (x - xm) * (y - ym)).sum() / (w * (x - xm) ** 2).sum()
    intercept = ym - slope * xm
    ss_res = (w * (y - intercept - slope * x) ** 2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    rate = -slope
    status = "ok" if rate > 0 else "non-decaying"
    loc = 1.0 / rate if rate > 0 else math.inf
    pref = math.nan
    if N and alpha and s and N > 1 and alpha > 0:
        pref = intercept / (s * alpha * math.log(N))
    return DecayFit(d.astype(int), logm, se, float(rate), float(loc), float(intercept),
                    float(pref), float(r2), status, int(fit_from))


def fractional_moment_decay(params: BandMatrixParams, z: complex | None, s: float, j: int,
                            distance_grid, trials: int, groups: int = 1, grid_index: int = 0,
                            min_trials: int = 1000) -> DecayFit:
    """Monte Carlo ``E{|G(j, j+d; z)|^s}`` over ``distance_grid`` and its tail fit.

    ``z=None`` means ``z = i/N``. The tail fit uses ``d > 2W``. ``groups > 1``
    switches to a median-of-means estimator.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if trials < min_trials:
        raise ValueError(f"need at least {min_trials} trials")
    N = params.N
    z = complex(0.0, 1.0 / N) if z is None else complex(z)
    dist = np.asarray(distance_grid, dtype=np.int64)
    if abs(j) + dist.max() > N:
        raise ValueError("j must be at least max(distance_grid) away from both edges")
    vals = probe_trials(params, z, s, j, dist, range(trials), grid_index)
    mom, se = _moment(vals, groups)
    return fit_decay(dist, mom, se, 2 * params.W, N, params.alpha, s)


def probe_trials(params, z, s, j, dist, trial_indices, grid_index=0) -> np.ndarray:
    """``|G(j, j+d)|^s`` per trial (rows) and distance (columns)."""
    out = []
    for t in trial_indices:
        m = sample_band_matrix(params.with_seed(derive_trial_seed(params.seed, grid_index, t)))
        g = greens_column(m, j, z)
        out.append(np.abs(g[j + dist + params.N]) ** s)
    return np.array(out)


def kappa_ratio(loc_length: float, N: int) -> float:
    """Localization length relative to the system scale ``N``."""
    if not loc_length > 0:
        raise ValueError("loc_length must be positive")
    return loc_length / N


def localization_scaling(Ns, loc_lengths, alpha) -> tuple[float, float]:
    """Slope of ``log loc_length`` against ``log N`` and the implied ``mu``."""
    x = np.log(np.asarray(Ns, float))
    y = np.log(np.asarray(loc_lengths, float))
    slope = float(np.polyfit(x, y, 1)[0])
    return slope, slope / alpha if alpha > 0 else math.nan
