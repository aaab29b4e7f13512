"""Random band matrix ensemble.

A realization is a real symmetric ``(2N+1) x (2N+1)`` matrix whose entries
within band distance ``L`` are iid samples scaled by ``1/sqrt(2L+1)``; all
other entries vanish. Logical indices run over ``-N..N`` and are stored as
``0..2N``.

Storage is the LAPACK lower band layout: ``bands[d, j] = H[j + d, j]`` for
``d = 0..L``. In the periodic variant the row index wraps, i.e.
``bands[d, j] = H[(j + d) mod n, j]``.

Entry draw order
----------------
Raw samples are consumed row-major over the lower band: row ``i = 0..n-1``,
and within a row columns in ascending order (``j = i-L..i``, cyclic in the
periodic case, skipping columns outside the matrix otherwise). Uniforms come
from a Philox counter-based stream keyed by the seed; Gaussian entries are
obtained from consecutive uniform pairs ``(u1, u2)`` through the Box-Muller
map ``sqrt(-2 log(1 - u1)) * (cos(2 pi u2), sin(2 pi u2))``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigurationError",
    "EntryDistribution",
    "BandMatrixParams",
    "BandMatrix",
    "sample_band_matrix",
    "draw_bands",
    "band_half_width",
    "row_variance_profile",
    "make_generator",
    "standard_normal",
]


class ConfigurationError(ValueError):
    """Raised when a parameter combination violates a model constraint."""


DISTRIBUTION_KINDS = ("standard-gaussian", "uniform-scaled", "rademacher", "custom-density")
_KIND_TAGS = {k: i for i, k in enumerate(DISTRIBUTION_KINDS)}


def make_generator(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Box-Muller normals from consecutive uniform pairs."""
    m = (size + 1) // 2
    u = rng.random(2 * m)
    radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    theta = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * m)
    out[0::2] = radius * np.cos(theta)
    out[1::2] = radius * np.sin(theta)
    return out[:size]


@dataclass(frozen=True)
class EntryDistribution:
    """Law of the raw entries ``omega_ij``; always mean 0 and variance 1.

    ``custom-density`` takes ``parameters = (a, b, w_1, ..., w_k)``: a
    piecewise-constant density on ``[a, b]`` with ``k`` equal bins of relative
    weight ``w_i``. Samples are standardized with the exact mean and variance
    of that density.
    """

    kind: str = "standard-gaussian"
    parameters: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KIND_TAGS:
            raise ConfigurationError(f"unknown distribution kind {self.kind!r}")
        object.__setattr__(self, "parameters", tuple(float(p) for p in self.parameters))
        if self.kind == "custom-density":
            self._histogram()

    @property
    def tag(self) -> int:
        return _KIND_TAGS[self.kind]

    def _histogram(self):
        if len(self.parameters) < 3:
            raise ConfigurationError("custom-density needs (a, b, w_1, ..., w_k)")
        a, b = self.parameters[:2]
        w = np.asarray(self.parameters[2:])
        if not b > a or np.any(w < 0) or w.sum() <= 0:
            raise ConfigurationError("custom-density needs a < b and nonnegative weights")
        edges = np.linspace(a, b, len(w) + 1)
        p = w / w.sum()
        lo, hi = edges[:-1], edges[1:]
        mean = np.sum(p * (lo + hi) / 2)
        second = np.sum(p * (lo**2 + lo * hi + hi**2) / 3)
        var = second - mean**2
        return edges, p, mean, math.sqrt(var)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "standard-gaussian":
            return standard_normal(rng, size)
        u = rng.random(size)
        if self.kind == "uniform-scaled":
            return math.sqrt(3.0) * (2.0 * u - 1.0)
        if self.kind == "rademacher":
            return np.where(u < 0.5, -1.0, 1.0)
        edges, p, mean, sd = self._histogram()
        cdf = np.concatenate(([0.0], np.cumsum(p)))
        k = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(p) - 1)
        frac = (u - cdf[k]) / np.where(p[k] > 0, p[k], 1.0)
        x = edges[k] + frac * (edges[k + 1] - edges[k])
        return (x - mean) / sd


@dataclass(frozen=True)
class BandMatrixParams:
    """Full specification of one ensemble draw.

    Build with :meth:`from_alpha` (``L = floor(N**alpha)``) or
    :meth:`from_bandwidth` (explicit ``L``, ``alpha`` recorded as
    ``log L / log N``).
    """

    N: int
    L: int
    alpha: float
    periodic: bool = False
    distribution: EntryDistribution = field(default_factory=EntryDistribution)
    seed: int = 0

    def __post_init__(self):
        if self.N < 0 or self.L < 0:
            raise ConfigurationError("N and L must be nonnegative")
        if self.W > self.dim:
            raise ConfigurationError(
                f"band width W={self.W} exceeds matrix dimension 2N+1={self.dim}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_alpha(cls, N, alpha, periodic=False, distribution=None, seed=0):
        if not 0.0 <= alpha <= 1.0:
            raise ConfigurationError(f"alpha={alpha} outside [0, 1]")
        L = band_half_width(N, alpha)
        return cls(N, L, float(alpha), periodic, distribution or EntryDistribution(), seed)

    @classmethod
    def from_bandwidth(cls, N, L, periodic=False, distribution=None, seed=0):
        alpha = math.log(L) / math.log(N) if L > 1 and N > 1 else 0.0
        return cls(N, L, alpha, periodic, distribution or EntryDistribution(), seed)

    @property
    def dim(self) -> int:
        return 2 * self.N + 1

    @property
    def W(self) -> int:
        return 2 * self.L + 1

    def with_seed(self, seed: int) -> "BandMatrixParams":
        return BandMatrixParams(self.N, self.L, self.alpha, self.periodic, self.distribution, seed)


def band_half_width(N: int, alpha: float) -> int:
    """``floor(N**alpha)`` guarded against round-off just below an integer."""
    if N == 0:
        return 0
    x = N**alpha
    k = math.floor(x)
    if x - k > 1 - 1e-12:
        k += 1
    return k


def _lower_band_mask(n: int, L: int, periodic: bool) -> np.ndarray:
    """Valid slots of the row-major (row i, offset d = L..0) draw grid."""
    rows = np.arange(n)[:, None]
    cols = rows - np.arange(L, -1, -1)[None, :]
    if periodic:
        return np.ones((n, L + 1), dtype=bool)
    return cols >= 0


@dataclass(frozen=True, eq=False)
class BandMatrix:
    """One realization of ``H_L^N`` in lower band storage."""

    params: BandMatrixParams
    bands: np.ndarray

    def __post_init__(self):
        self.bands.setflags(write=False)

    @property
    def n(self) -> int:
        return self.params.dim

    @property
    def L(self) -> int:
        return self.params.L

    def entry(self, i: int, j: int) -> float:
        """Matrix element at logical indices ``i, j`` in ``-N..N``."""
        N = self.params.N
        a, b = i + N, j + N
        if not (0 <= a < self.n and 0 <= b < self.n):
            raise IndexError((i, j))
        if self.params.periodic:
            d = (a - b) % self.n
            if d <= self.L:
                return float(self.bands[d, b])
            d = (b - a) % self.n
            if d <= self.L:
                return float(self.bands[d, a])
            return 0.0
        lo, hi = min(a, b), max(a, b)
        if hi - lo > self.L:
            return 0.0
        return float(self.bands[hi - lo, lo])

    def to_dense(self) -> np.ndarray:
        n, L = self.n, self.L
        H = np.zeros((n, n))
        idx = np.arange(n)
        for d in range(L + 1):
            if self.params.periodic:
                rows = (idx + d) % n
                cols = idx
            else:
                rows = idx[d:]
                cols = idx[: n - d]
            vals = self.bands[d, cols]
            H[rows, cols] = vals
            H[cols, rows] = vals
        return H

    def trace(self) -> float:
        return float(self.bands[0].sum())

    def max_abs_entry(self) -> float:
        return float(np.abs(self.bands).max()) if self.bands.size else 0.0

    def gershgorin_bounds(self) -> tuple[float, float]:
        H_abs_rows = self._abs_row_sums()
        diag = self.bands[0]
        r = H_abs_rows - np.abs(diag)
        return float(np.min(diag - r)), float(np.max(diag + r))

    def _abs_row_sums(self) -> np.ndarray:
        n, L = self.n, self.L
        s = np.abs(self.bands[0]).copy()
        idx = np.arange(n)
        for d in range(1, L + 1):
            if self.params.periodic:
                v = np.abs(self.bands[d])
                np.add.at(s, (idx + d) % n, v)
                s += v
            else:
                v = np.abs(self.bands[d, : n - d])
                s[d:] += v
                s[: n - d] += v
        return s

    def folded_bands(self) -> np.ndarray:
        """Lower band storage of a symmetric permutation with half-width ``2L``.

        For the periodic variant the interleaving order ``0, n-1, 1, n-2, ...``
        maps cyclic band distance ``<= L`` onto ordinary distance ``<= 2L``;
        the spectrum is unchanged. Non-periodic matrices are returned as is.
        """
        if not self.params.periodic or self.L == 0:
            return np.array(self.bands)
        n, L = self.n, self.L
        perm = _interleave(n)
        pos = np.empty(n, dtype=np.int64)
        pos[perm] = np.arange(n)
        b = min(2 * L, n - 1)
        out = np.zeros((b + 1, n))
        idx = np.arange(n)
        for d in range(L + 1):
            r = pos[(idx + d) % n]
            c = pos[idx]
            lo = np.minimum(r, c)
            dist = np.abs(r - c)
            out[dist, lo] = self.bands[d]
        return out

    # binary layout: '<qqBBQI' header (N, L, periodic, kind tag, seed, #params),
    # then float64 distribution parameters, then the (L+1, 2N+1) band array.
    _HEADER = struct.Struct("<qqBBQI")

    def to_bytes(self) -> bytes:
        p = self.params
        dist = p.distribution
        head = self._HEADER.pack(p.N, p.L, int(p.periodic), dist.tag, p.seed, len(dist.parameters))
        par = np.asarray(dist.parameters, dtype="<f8").tobytes()
        return head + par + np.ascontiguousarray(self.bands, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BandMatrix":
        N, L, periodic, tag, seed, npar = cls._HEADER.unpack_from(blob, 0)
        off = cls._HEADER.size
        par = np.frombuffer(blob, dtype="<f8", count=npar, offset=off)
        off += 8 * npar
        dist = EntryDistribution(DISTRIBUTION_KINDS[tag], tuple(par))
        params = BandMatrixParams.from_bandwidth(N, L, bool(periodic), dist, seed)
        bands = np.frombuffer(blob, dtype="<f8", offset=off).reshape(L + 1, 2 * N + 1).copy()
        return cls(params, bands)


def _interleave(n: int) -> np.ndarray:
    perm = np.empty(n, dtype=np.int64)
    perm[0::2] = np.arange((n + 1) // 2)
    perm[1::2] = n - 1 - np.arange(n // 2)
    return perm


def draw_bands(n: int, L: int, periodic: bool, distribution: EntryDistribution, seed: int) -> np.ndarray:
    """Scaled lower band array of an ``n x n`` realization (any ``n >= 1``)."""
    mask = _lower_band_mask(n, L, periodic)
    rng = make_generator(seed)
    raw = distribution.sample(rng, int(mask.sum()))
    grid = np.zeros((n, L + 1))
    grid[mask] = raw / math.sqrt(2 * L + 1)
    # grid[i, k] holds H[i, i - (L - k)]; bands[d, j] = H[j + d, j]
    bands = np.zeros((L + 1, n))
    rows = np.arange(n)
    for d in range(L + 1):
        k = L - d
        if periodic:
            bands[d, (rows - d) % n] = grid[rows, k]
        else:
            bands[d, : n - d] = grid[d:, k]
    return bands


def sample_band_matrix(params: BandMatrixParams) -> BandMatrix:
    """Draw one realization; equal params (seed included) give equal bits."""
    n, L = params.dim, params.L
    if params.W > n:
        raise ConfigurationError(f"band width W={params.W} exceeds dimension {n}")
    bands = draw_bands(n, L, params.periodic, params.distribution, params.seed)
    return BandMatrix(params, bands)


def row_variance_profile(m: BandMatrix) -> np.ndarray:
    """Per-row sum of nominal entry variances ``sigma_ij``.

    Each in-band entry has variance ``1/(2L+1)``, so the profile is the number
    of in-band columns divided by ``2L+1``: identically one for periodic
    matrices and for interior rows otherwise.
    """
    n, L = m.n, m.L
    if m.params.periodic:
        return np.ones(n)
    i = np.arange(n)
    width = np.minimum(i, L) + np.minimum(n - 1 - i, L) + 1
    return width / (2 * L + 1)
