"""Block decomposition of the index set and the superposed block process.

The index range ``-N..N`` is cut into consecutive blocks of
``2 floor(N**beta) + 1`` points; the last block may be shorter and its size is
recorded. Each block carries

* a boundary: points within ``N**alpha`` of either block end,
* an interior: points farther than ``N**(mu alpha) * delta * log N`` from the
  boundary,
* a middle shell: everything else.

Two sampling modes are offered. *Independent* mode gives every block fresh
entries (the superposition of independent processes); *coupled* mode takes
the blocks as principal submatrices of one realization, so the full and
block counts can be compared trial by trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import bands_sturm_count
from .ensemble import (
    BandMatrix,
    BandMatrixParams,
    ConfigurationError,
    draw_bands,
    sample_band_matrix,
)
from .localization import greens_columns, _solve_block
from .seeding import derive_trial_seed, splitmix64
from .spectralstats import RescaleWindow


@dataclass(frozen=True)
class Block:
    start: int  # logical index, inclusive
    stop: int  # logical index, inclusive
    boundary: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.stop - self.start + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop + 1)

    @property
    def middle(self) -> np.ndarray:
        idx = self.indices
        return idx[~np.isin(idx, self.boundary) & ~np.isin(idx, self.interior)]


@dataclass(frozen=True)
class BlockScheme:
    N: int
    alpha: float
    beta: float
    mu: float
    delta: float
    weak: bool
    blocks: tuple
    block_size: int
    delta_checked: bool | None = None

    @property
    def N_beta(self) -> int:
        return len(self.blocks)

    @property
    def short_block(self) -> int | None:
        """Size of the terminal block when it is shorter than the others."""
        last = self.blocks[-1].size
        return last if last != self.block_size else None


def check_exponents(alpha, beta, mu=2.0, weak=False):
    """Raise :class:`ConfigurationError` naming the first violated scale relation."""
    if not alpha < beta:
        raise ConfigurationError(f"alpha < beta violated (alpha={alpha}, beta={beta})")
    if not beta < 1.0:
        raise ConfigurationError(f"beta < 1 violated (beta={beta})")
    if not 0.0 <= alpha < 0.5:
        raise ConfigurationError(f"alpha must satisfy 0 <= alpha < 1/2 (got alpha={alpha})")
    if weak and not alpha + beta < 1.0:
        raise ConfigurationError(
            f"alpha+beta must be < 1 in weak mode (alpha+beta={alpha + beta:g})"
        )
    if not alpha * mu < beta:
        raise ConfigurationError(f"alpha*mu < beta violated (alpha*mu={alpha * mu:g}, beta={beta})")


def make_block_scheme(N, alpha, beta, mu=2.0, delta=2.0, weak=False, require_interior=True,
                      kappa=None, sigma=None) -> BlockScheme:
    """Concrete partition of ``-N..N`` with boundary and interior sets.

    ``require_interior=False`` allows empty interiors, which is enough for
    count comparisons but makes the interior part of the resolvent
    diagnostics vanish. When ``kappa`` and ``sigma`` are supplied the
    requirement ``delta > (alpha (1/8 + mu) + sigma / 2) / kappa`` is checked;
    otherwise ``delta_checked`` is ``None``.
    """
    check_exponents(alpha, beta, mu, weak)
    delta_checked = None
    if kappa is not None and sigma is not None:
        bound = (alpha * (0.125 + mu) + sigma / 2.0) / kappa
        if not delta > bound:
            raise ConfigurationError(f"delta must exceed {bound:g} for kappa={kappa}, sigma={sigma}")
        delta_checked = True
    n = 2 * N + 1
    size = 2 * math.floor(N**beta + 1e-12) + 1
    radius = N**alpha
    shell = N ** (mu * alpha) * delta * math.log(N) if N > 1 else 0.0
    blocks = []
    start = -N
    while start <= N:
        stop = min(start + size - 1, N)
        idx = np.arange(start, stop + 1)
        to_end = np.minimum(idx - start, stop - idx)
        boundary = idx[to_end <= radius]
        if boundary.size:
            # distance to the nearest boundary point
            dist = np.min(np.abs(idx[:, None] - boundary[None, :]), axis=1)
        else:
            dist = np.full(idx.shape, np.inf)
        interior = idx[dist > shell]
        blocks.append(Block(start, stop, boundary, interior))
        start = stop + 1
    assert sum(b.size for b in blocks) == n
    if require_interior:
        full = blocks if blocks[-1].size == size else blocks[:-1]
        if any(b.interior.size == 0 for b in full or blocks):
            raise ConfigurationError(
                f"empty block interior at N={N} (shell {shell:.1f} vs block size {size}); "
                "increase N or lower mu/delta"
            )
    return BlockScheme(N, alpha, beta, mu, delta, weak, tuple(blocks), size, delta_checked)


@dataclass(frozen=True)
class BlockCounts:
    per_block: np.ndarray
    zeta: int


def _sub_bands(m: BandMatrix, start: int, stop: int) -> np.ndarray:
    """Lower band array of the principal submatrix on logical ``start..stop``."""
    N, L = m.params.N, m.L
    a, b = start + N, stop + N + 1
    k = b - a
    if m.params.periodic:
        dense = m.to_dense()[a:b, a:b]
        out = np.zeros((L + 1, k))
        for d in range(min(L, k - 1) + 1):
            out[d, : k - d] = np.diagonal(dense, -d)
        return out
    out = np.array(m.bands[:, a:b])
    for d in range(1, L + 1):
        out[d, max(k - d, 0):] = 0.0
    return out


def _check_blocks(scheme: BlockScheme, params: BandMatrixParams):
    if scheme.N != params.N:
        raise ConfigurationError(f"scheme N={scheme.N} differs from params N={params.N}")
    for blk in scheme.blocks:
        if blk.size < params.W:
            raise ConfigurationError(f"block of size {blk.size} is shorter than W={params.W}")


def _window_counts(bands, a, b) -> int:
    ca, cb = bands_sturm_count(bands, np.array([a, b]))
    return int(cb - ca)


def sample_block_counts(params: BandMatrixParams, scheme: BlockScheme, w: RescaleWindow) -> BlockCounts:
    """Independent mode: every block gets fresh entries.

    Block ``p`` is drawn with seed ``splitmix64(params.seed ^ p)``; counts use
    the window scaling of the full size ``N``.
    """
    _check_blocks(scheme, params)
    a, b = w.physical(params.N)
    counts = np.empty(scheme.N_beta, dtype=np.int64)
    for p, blk in enumerate(scheme.blocks):
        bands = draw_bands(blk.size, params.L, False, params.distribution,
                           splitmix64(params.seed ^ p))
        counts[p] = _window_counts(bands, a, b)
    return BlockCounts(counts, int(counts.sum()))


def coupled_counts(m: BandMatrix, scheme: BlockScheme, w: RescaleWindow) -> tuple[int, BlockCounts]:
    """Full count ``xi`` and block counts of the same realization."""
    a, b = w.physical(m.params.N)
    xi = _window_counts(m.folded_bands(), a, b)
    counts = np.array([_window_counts(_sub_bands(m, blk.start, blk.stop), a, b)
                       for blk in scheme.blocks], dtype=np.int64)
    return xi, BlockCounts(counts, int(counts.sum()))


@dataclass(frozen=True)
class CouplingReport:
    N: int
    trials: int
    mean_abs_diff: float
    mean_abs_diff_stderr: float
    mean_diff: float
    mean_diff_stderr: float
    match_rate: float
    match_rate_stderr: float
    xi: np.ndarray = field(repr=False)
    zeta: np.ndarray = field(repr=False)


def summarize_coupling(N, xi, zeta) -> CouplingReport:
    xi, zeta = np.asarray(xi), np.asarray(zeta)
    T = len(xi)
    d = xi - zeta
    ad = np.abs(d)
    eq = (d == 0).astype(float)
    se = lambda v: float(v.std(ddof=1) / math.sqrt(T)) if T > 1 else float("nan")  # noqa: E731
    return CouplingReport(N, T, float(ad.mean()), se(ad), float(d.mean()), se(d),
                          float(eq.mean()), se(eq), xi, zeta)


def coupling_compare(params: BandMatrixParams, scheme: BlockScheme, w: RescaleWindow, trials: int,
                     grid_index: int = 0, min_trials: int = 100) -> CouplingReport:
    """Trial-by-trial comparison of ``xi`` and ``zeta`` on shared realizations."""
    if trials < min_trials:
        raise ValueError(f"need at least {min_trials} trials")
    _check_blocks(scheme, params)
    xi = np.empty(trials, dtype=np.int64)
    zeta = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        m = sample_band_matrix(params.with_seed(derive_trial_seed(params.seed, grid_index, t)))
        xi[t], bc = coupled_counts(m, scheme, w)
        zeta[t] = bc.zeta
    return summarize_coupling(params.N, xi, zeta)


@dataclass(frozen=True)
class ResolventErrorTerms:
    A_N: float
    B_N: float
    trace_gap: float  # |Im Tr R - sum_p Im Tr R_p| / (2N+1)


def resolvent_error_terms(m: BandMatrix, scheme: BlockScheme, z: complex) -> ResolventErrorTerms:
    """Boundary term ``A_N(z)`` and coupling term ``B_N(z)`` for one realization.

    ``B_N`` sums, over interior ``j`` of block ``p`` and couplings ``(k, l)``
    with ``k`` in the block and ``l`` outside, the products
    ``|G_p(j, k)| |H_kl| |G(l, j)|``. With the full resolvent in the last
    factor the resolvent identity gives
    ``trace_gap <= A_N + B_N`` exactly.
    """
    if not z.imag > 0:
        raise ValueError("Im z must be positive")
    if m.params.periodic:
        raise ConfigurationError("block diagnostics need a non-periodic realization")
    N, L = m.params.N, m.L
    n = 2 * N + 1
    diag_full = np.empty(n, dtype=complex)
    # full resolvent diagonal, in chunks of columns
    step = 256
    for c0 in range(0, n, step):
        cols = np.arange(c0, min(c0 + step, n))
        G = greens_columns(m, cols - N, z)
        diag_full[cols] = G[cols, np.arange(len(cols))]
    A = 0.0
    B = 0.0
    block_trace = 0.0
    for blk in scheme.blocks:
        a = blk.start + N
        sub = _sub_bands(m, blk.start, blk.stop)
        Gp = _solve_block(sub, z, np.eye(blk.size))
        gp_diag = np.diag(Gp)
        block_trace += gp_diag.imag.sum()
        nonint = ~np.isin(blk.indices, blk.interior)
        A += float(diag_full[a:a + blk.size][nonint].imag.sum() + gp_diag[nonint].imag.sum())
        if blk.interior.size == 0 or L == 0:
            continue
        jloc = blk.interior - blk.start
        # couplings leaving the block on either side
        pairs = []
        for k in range(blk.start, blk.stop + 1):
            for l in range(k - L, k + L + 1):
                if -N <= l <= N and not (blk.start <= l <= blk.stop):
                    h = m.entry(k, l)
                    if h != 0.0:
                        pairs.append((k, l, abs(h)))
        if not pairs:
            continue
        ls = np.array(sorted({p[1] for p in pairs}))
        Gl = greens_columns(m, ls, z)
        lpos = {l: i for i, l in enumerate(ls)}
        for k, l, h in pairs:
            B += h * float(np.sum(np.abs(Gp[jloc, k - blk.start]) * np.abs(Gl[blk.interior + N, lpos[l]])))
    trace_gap = abs(diag_full.imag.sum() - block_trace) / n
    return ResolventErrorTerms(A / n, B / n, float(trace_gap))
