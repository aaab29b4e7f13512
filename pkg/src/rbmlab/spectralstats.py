"""Statistics on spectra: local counts, semicircle law, moments, intensity,
characteristic exponent and Poisson/GOE discriminators.

Rescaling convention
--------------------
A window ``I`` in rescaled units around ``E0`` corresponds to the physical
interval ``E0 + I / s``. The default ``s`` is the matrix dimension ``2N+1``
(``scale="dimension"``), under which the mean count in ``I`` tends to
``n_sc(E0) |I|``. ``scale="half"`` uses ``s = N``, doubling all counts.
Windows are half-open, ``(E0 + lo/s, E0 + hi/s]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .eigensolver import (
    Spectrum,
    Tridiagonal,
    band_count_in_interval,
    count_in_interval,
    counts_below,
)
from .ensemble import BandMatrix, BandMatrixParams, ConfigurationError, sample_band_matrix
from .seeding import derive_trial_seed

POISSON_GAP_RATIO = 2.0 * math.log(2.0) - 1.0
# large-N GOE mean gap ratio (surmise-corrected numerical value)
GOE_GAP_RATIO = 0.5307
WINDOW_MARGIN = 0.5


# --- semicircle law ---------------------------------------------------------


def semicircle_density(E):
    """``n_sc(E) = sqrt((4 - E^2)_+) / (2 pi)``."""
    E = np.asarray(E, dtype=float)
    out = np.sqrt(np.clip(4.0 - E * E, 0.0, None)) / (2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def _sc_antiderivative(E):
    E = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    return (E * np.sqrt(4.0 - E * E) / 4.0 + np.arcsin(E / 2.0)) / np.pi


def semicircle_ids(E):
    """Integrated density ``N_sc(E)``; 0 below -2 and 1 above 2."""
    out = _sc_antiderivative(E) + 0.5
    return float(out) if np.ndim(out) == 0 else out


def semicircle_measure(J) -> float:
    """Semicircle mass of the interval ``J = (a, b)``."""
    a, b = J
    if b <= a:
        return 0.0
    return float(_sc_antiderivative(b) - _sc_antiderivative(a))


# --- windows and counts -----------------------------------------------------


@dataclass(frozen=True)
class RescaleWindow:
    E0: float
    I: tuple[float, float]
    scale: str = "dimension"

    def __post_init__(self):
        if not -2.0 < self.E0 < 2.0:
            raise ConfigurationError(f"E0={self.E0} must lie in (-2, 2)")
        lo, hi = self.I
        if hi < lo:
            raise ConfigurationError(f"window I={self.I} has hi < lo")
        if self.scale not in ("dimension", "half"):
            raise ConfigurationError(f"unknown scale {self.scale!r}")
        object.__setattr__(self, "I", (float(lo), float(hi)))

    @property
    def length(self) -> float:
        return self.I[1] - self.I[0]

    def factor(self, N: int) -> float:
        return float(2 * N + 1) if self.scale == "dimension" else float(max(N, 1))

    def physical(self, N: int) -> tuple[float, float]:
        s = self.factor(N)
        a, b = self.E0 + self.I[0] / s, self.E0 + self.I[1] / s
        if a < -2.0 - WINDOW_MARGIN or b > 2.0 + WINDOW_MARGIN:
            raise ConfigurationError(f"physical window ({a}, {b}] leaves the spectral range")
        return a, b


@dataclass(frozen=True)
class LESSample:
    window: RescaleWindow
    N: int
    count: int


def _dimension_N(obj) -> int:
    if isinstance(obj, BandMatrix):
        return obj.params.N
    n = len(obj.eigenvalues) if isinstance(obj, Spectrum) else obj.n
    return (n - 1) // 2


def les_count(obj, w: RescaleWindow, N: int | None = None) -> LESSample:
    """Local count ``#{j : s (E_j - E0) in I}``.

    ``obj`` may be a :class:`Spectrum` (binary search), a
    :class:`Tridiagonal` (Sturm counts) or a :class:`BandMatrix` (inertia
    counts).
    """
    N = _dimension_N(obj) if N is None else N
    if w.length == 0:
        return LESSample(w, N, 0)
    a, b = w.physical(N)
    if isinstance(obj, Spectrum):
        ev = obj.eigenvalues
        c = int(np.searchsorted(ev, b, side="right") - np.searchsorted(ev, a, side="right"))
    elif isinstance(obj, Tridiagonal):
        c = count_in_interval(obj, a, b).count
    else:
        c = band_count_in_interval(obj, a, b).count
    return LESSample(w, N, c)


def _counts(samples) -> np.ndarray:
    if len(samples) == 0:
        raise ValueError("empty sample list")
    return np.array([getattr(s, "count", s) for s in samples], dtype=np.int64)


# --- Wegner / Minami moments ------------------------------------------------


def wegner_moment(samples) -> float:
    """Monte Carlo estimate of ``E{Tr chi_I(H)}``."""
    return float(_counts(samples).mean())


def minami_moment(samples) -> float:
    """Monte Carlo estimate of ``E{X (X - 1)}`` for the count ``X``."""
    c = _counts(samples)
    return float(np.mean(c * (c - 1)))


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for a log-log fit")
    slope, intercept = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope), float(intercept)


def tiled_window_counts(ev: np.ndarray, centre: float, length: float, n_windows: int):
    """Counts in ``n_windows`` adjacent physical windows of width ``length``
    centred on ``centre``."""
    edges = centre + length * (np.arange(n_windows + 1) - n_windows / 2.0)
    return np.diff(np.searchsorted(ev, edges, side="right"))


# --- intensity --------------------------------------------------------------


@dataclass(frozen=True)
class IntensityEstimate:
    window: RescaleWindow
    N: int
    b_N: float
    stderr: float
    trials: int
    counts: np.ndarray = field(repr=False, compare=False, default=None)


def _estimate(w, N, counts) -> IntensityEstimate:
    counts = np.asarray(counts, dtype=np.int64)
    T = len(counts)
    se = float(counts.std(ddof=1) / math.sqrt(T)) if T > 1 else float("nan")
    return IntensityEstimate(w, N, float(counts.mean()), se, T, counts)


def intensity_bN(w: RescaleWindow, params: BandMatrixParams, trials: int, grid_index: int = 0):
    """Mean local count over ``trials`` realizations.

    Trial ``t`` uses seed ``derive_trial_seed(params.seed, grid_index, t)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if w.length == 0:
        return _estimate(w, params.N, np.zeros(trials, dtype=np.int64))
    a, b = w.physical(params.N)
    counts = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        m = sample_band_matrix(params.with_seed(derive_trial_seed(params.seed, grid_index, t)))
        ca, cb = counts_below(m, [a, b])
        counts[t] = cb - ca
    return _estimate(w, params.N, counts)


@dataclass(frozen=True)
class IntegratedIntensity:
    J: tuple[float, float]
    I: tuple[float, float]
    nodes: np.ndarray
    b_N: np.ndarray
    stderr: np.ndarray
    integral: float
    integral_stderr: float
    semicircle_target: float


def intensity_integrated(J, I, params: BandMatrixParams, trials: int, nodes: int = 16,
                         scale: str = "dimension", grid_index: int = 0) -> IntegratedIntensity:
    """Trapezoidal integral over ``E0 in J`` of the intensity.

    Every trial draws one matrix and counts at all nodes, so node estimates
    share realizations. ``J`` endpoints at +-2 are pulled inside by
    ``1e-9`` so that all centres are admissible. The target is
    ``|I| N_sc(J)``.
    """
    if nodes < 8:
        raise ConfigurationError(f"E0 grid too coarse: {nodes} < 8 nodes")
    lo, hi = max(J[0], -2 + 1e-9), min(J[1], 2 - 1e-9)
    E0 = np.linspace(lo, hi, nodes)
    length = I[1] - I[0]
    target = length * semicircle_measure((J[0], J[1]))
    if length == 0:
        z = np.zeros(nodes)
        return IntegratedIntensity(tuple(J), tuple(I), E0, z, z, 0.0, 0.0, target)
    wins = [RescaleWindow(float(e), tuple(I), scale) for e in E0]
    edges = np.array([wn.physical(params.N) for wn in wins])
    counts = np.empty((trials, nodes))
    for t in range(trials):
        m = sample_band_matrix(params.with_seed(derive_trial_seed(params.seed, grid_index, t)))
        c = counts_below(m, edges.ravel()).reshape(nodes, 2)
        counts[t] = c[:, 1] - c[:, 0]
    wts = np.full(nodes, (hi - lo) / (nodes - 1))
    wts[[0, -1]] /= 2
    per_trial = counts @ wts
    se = per_trial.std(ddof=1) / math.sqrt(trials) if trials > 1 else float("nan")
    node_se = counts.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(nodes, np.nan)
    return IntegratedIntensity(tuple(J), tuple(I), E0, counts.mean(axis=0), node_se,
                               float(per_trial.mean()), float(se), target)


# --- characteristic exponent ------------------------------------------------


def default_t_grid(nodes: int = 64) -> np.ndarray:
    return np.linspace(-np.pi, np.pi, nodes)


@dataclass(frozen=True)
class CharExponentEstimate:
    t_grid: np.ndarray
    psi: np.ndarray
    stderr: np.ndarray
    valid: np.ndarray
    trials: int


def char_exponent(samples, t_grid=None, min_samples: int = 100) -> CharExponentEstimate:
    """``psi(t) = log mean exp(i t X)`` on the principal branch.

    Points where ``|phi| < 10 * stderr(phi)`` are marked invalid (``nan``).
    """
    c = _counts(samples).astype(float)
    if len(c) < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {len(c)}")
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, float)
    T = len(c)
    e = np.exp(1j * np.outer(t, c))
    phi = e.mean(axis=1)
    se_phi = np.sqrt(np.clip(1.0 - np.abs(phi) ** 2, 0.0, None) / T)
    valid = np.abs(phi) >= 10.0 * se_phi
    if not valid.any():
        raise ValueError("characteristic function indistinguishable from 0 on the whole grid")
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(valid, np.log(phi), np.nan + 0j)
        se = np.where(valid, se_phi / np.abs(phi), np.nan)
    return CharExponentEstimate(t, psi, se, valid, T)


@dataclass(frozen=True)
class PoissonExponentCheck:
    t_grid: np.ndarray
    deviation: np.ndarray
    stderr: np.ndarray
    intensity: float
    sup_deviation: float
    max_ratio: float


def poisson_exponent_check(samples, t_grid=None) -> PoissonExponentCheck:
    """Compare ``psi_hat(t)`` with ``b_hat (e^{it} - 1)``, ``b_hat`` the mean count.

    The standard error of the complex difference comes from the per-sample
    influence function ``(e^{itX} - phi)/phi - (X - b)(e^{it} - 1)``, so the
    shared use of one data set in both terms is accounted for.
    """
    c = _counts(samples).astype(float)
    est = char_exponent(c, t_grid)
    t = est.t_grid
    T = len(c)
    b = c.mean()
    poisson = b * (np.exp(1j * t) - 1.0)
    dev = est.psi - poisson
    e = np.exp(1j * np.outer(t, c))
    phi = e.mean(axis=1)
    infl = (e - phi[:, None]) / phi[:, None] - np.outer(np.exp(1j * t) - 1.0, c - b)
    se = np.sqrt(np.mean(np.abs(infl) ** 2, axis=1) / T)
    ok = est.valid & (se > 0)
    absdev = np.abs(dev)
    ratio = np.where(ok, absdev / np.where(se > 0, se, 1.0), 0.0)
    # at t = 0 both sides vanish identically
    ratio[~ok] = 0.0
    return PoissonExponentCheck(t, dev, se, float(b), float(np.nanmax(absdev[est.valid])),
                                float(ratio.max()))


# --- gap ratio --------------------------------------------------------------


def gap_ratios(eigenvalues) -> np.ndarray:
    """Consecutive-gap ratios ``min(g_j, g_{j+1}) / max(g_j, g_{j+1})``."""
    g = np.diff(np.sort(np.asarray(eigenvalues, float)))
    a, b = g[:-1], g[1:]
    hi = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(hi > 0, np.minimum(a, b) / hi, 1.0)
    return r


def gap_ratio_statistic(spec, E0: float, window_halfwidth: float) -> float:
    """Mean gap ratio of the eigenvalues in ``[E0 - h, E0 + h]``."""
    ev = spec.eigenvalues if isinstance(spec, Spectrum) else np.sort(np.asarray(spec, float))
    sel = ev[(ev >= E0 - window_halfwidth) & (ev <= E0 + window_halfwidth)]
    if len(sel) < 3:
        raise ValueError(f"degenerate window: {len(sel)} eigenvalues (need >= 3)")
    return float(gap_ratios(sel).mean())


def goe_gap_ratio_reference(n: int, trials: int, seed: int, E0: float = 0.0,
                            window_halfwidth: float = 0.5) -> tuple[float, float]:
    """Dense-GOE Monte Carlo estimate of the mean gap ratio and its stderr.

    Matrices are ``(A + A^T) / sqrt(2 n)`` with iid standard normal ``A`` so the
    spectrum fills ``[-2, 2]``.
    """
    from .ensemble import make_generator, standard_normal

    means = []
    for t in range(trials):
        rng = make_generator(derive_trial_seed(seed, 0, t))
        A = standard_normal(rng, n * n).reshape(n, n)
        H = (A + A.T) / math.sqrt(2.0 * n)
        ev = np.linalg.eigvalsh(H)
        means.append(gap_ratio_statistic(ev, E0, window_halfwidth))
    means = np.array(means)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(trials))


# --- Poisson fit ------------------------------------------------------------


@dataclass(frozen=True)
class PoissonFitReport:
    lam: float
    samples: int
    tv_distance: float
    chi2: float
    dof: int
    p_value: float
    table: list = field(repr=False)

    def rows(self):
        """``(k, observed, expected)`` triples; the last row is the ``k+`` tail."""
        return list(self.table)


def poisson_tv_distance(counts_or_pmf, lam: float, is_pmf: bool = False) -> float:
    """Total-variation distance between a count distribution and Poisson(lam)."""
    if is_pmf:
        p = np.asarray(counts_or_pmf, float)
    else:
        c = np.asarray(counts_or_pmf, dtype=np.int64)
        p = np.bincount(c) / len(c)
    k = np.arange(len(p))
    q = stats.poisson.pmf(k, lam)
    tail = stats.poisson.sf(len(p) - 1, lam)
    return float(0.5 * (np.abs(p - q).sum() + tail))


def poisson_fit_test(samples, lam: float, min_samples: int = 1000) -> PoissonFitReport:
    """TV distance and pooled chi-square between counts and Poisson(lam)."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    c = _counts(samples)
    T = len(c)
    if T < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {T}")
    obs = np.bincount(c)
    K = len(obs)
    exp = T * stats.poisson.pmf(np.arange(K), lam)
    tail_exp = T * stats.poisson.sf(K - 1, lam)
    table = [(int(k), int(obs[k]), float(exp[k])) for k in range(K)]
    table.append((K, 0, float(tail_exp)))
    tv = poisson_tv_distance(c, lam)
    # pool from the right until every cell expects >= 5
    o = [r[1] for r in table]
    e = [r[2] for r in table]
    while len(e) > 1 and e[-1] < 5:
        e[-2] += e.pop()
        o[-2] += o.pop()
    o, e = np.array(o, float), np.array(e, float)
    chi2 = float(np.sum((o - e) ** 2 / e)) if len(e) > 1 else 0.0
    dof = max(len(e) - 1, 1)
    return PoissonFitReport(lam, T, tv, chi2, dof, float(stats.chi2.sf(chi2, dof)), table)


# --- density of states ------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalDOS:
    edges: np.ndarray
    densities: np.ndarray
    N: int
    trials: int

    @property
    def grid(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def integral(self) -> float:
        return float(np.sum(self.densities * np.diff(self.edges)))


def empirical_dos(spectra, grid=None) -> EmpiricalDOS:
    """Histogram estimate of the density of states.

    ``grid`` is an array of bin edges; default bins follow the
    Freedman-Diaconis rule on the pooled eigenvalues.
    """
    spectra = list(spectra)
    if not spectra:
        raise ValueError("empty spectrum list")
    ev = np.concatenate([np.asarray(getattr(s, "eigenvalues", s), float) for s in spectra])
    n = len(getattr(spectra[0], "eigenvalues", spectra[0]))
    edges = np.histogram_bin_edges(ev, bins="fd" if grid is None else np.asarray(grid, float))
    counts, _ = np.histogram(ev, bins=edges)
    dens = counts / (len(ev) * np.diff(edges))
    return EmpiricalDOS(edges, dens, (n - 1) // 2, len(spectra))


def dos_sup_distance(dos: EmpiricalDOS, lo: float = -1.9, hi: float = 1.9) -> float:
    """Sup over bins inside ``[lo, hi]`` of ``|density - bin average of n_sc|``."""
    e = dos.edges
    inside = (e[:-1] >= lo) & (e[1:] <= hi)
    if not inside.any():
        raise ValueError("no bins inside the comparison range")
    sc = np.array([semicircle_measure((a, b)) / (b - a) for a, b in zip(e[:-1], e[1:])])
    return float(np.max(np.abs(dos.densities - sc)[inside]))
