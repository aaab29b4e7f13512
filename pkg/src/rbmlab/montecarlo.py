"""Experiment orchestration: configs, seeded trials, aggregation, manifests.

A run expands ``config.params`` into grid points (the cartesian product of
every list-valued key in :data:`GRID_KEYS`), executes ``trials`` independent
trials per point and writes::

    <output>/manifest.json    config echo, seed rule, version, timings, hashes
    <output>/summary.json     aggregated statistics
    <output>/raw/<kind>.csv   one row per trial (or per trial and sub-item)
    <output>/tables/*.csv     plot-ready (x, y, stderr) tables
    <output>/figures/*.png    matplotlib renderings of the tables

Trial ``t`` of grid point ``g`` uses ``derive_trial_seed(master_seed, g, t)``.
Raw rows are gathered in ``(g, t)`` order whatever the worker count, so raw
files are byte-identical across ``workers``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .blockdecomp import check_exponents, coupled_counts, make_block_scheme, sample_block_counts
from .eigensolver import NumericalError, counts_below, spectrum
from .ensemble import BandMatrixParams, ConfigurationError, EntryDistribution, sample_band_matrix
from .localization import fit_decay, greens_column
from .seeding import derive_trial_seed, retry_seed
from .spectralstats import (
    GOE_GAP_RATIO,
    POISSON_GAP_RATIO,
    RescaleWindow,
    dos_sup_distance,
    empirical_dos,
    gap_ratio_statistic,
    loglog_slope,
    poisson_exponent_check,
    poisson_fit_test,
    semicircle_density,
    semicircle_measure,
    tiled_window_counts,
)

log = logging.getLogger(__name__)

KINDS = (
    "dos", "les-poisson", "wegner", "minami", "intensity", "char-exponent",
    "gap-ratio", "block-compare", "localization", "phase-diagram",
)
GRID_KEYS = ("N", "alpha", "beta", "E0", "s", "epsilon")
SEED_RULE = "derive_trial_seed(master_seed, grid_index, trial_index): splitmix64 chain, see rbmlab.seeding"
MAX_FAILURE_RATE = 1e-3

_COMMON = {"periodic": False, "distribution": "standard-gaussian", "distribution_parameters": []}
DEFAULTS = {
    "dos": {"N": 1000, "alpha": 0.5, "bins": None, "compare": [-1.9, 1.9], "backend": "auto"},
    "les-poisson": {"N": 1000, "alpha": 0.25, "E0": 0.0, "I": [0.0, 1.0], "scale": "dimension",
                    "lam": None, "beta": None},
    "char-exponent": {"N": 1000, "alpha": 0.25, "E0": 0.0, "I": [0.0, 1.0],
                      "scale": "dimension", "t_nodes": 64, "beta": None},
    "wegner": {"N": 500, "alpha": 0.3, "E0": 0.0, "lengths": [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
               "region": 0.5},
    "minami": {"N": 500, "alpha": 0.3, "E0": 0.0, "lengths": [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
               "region": 0.5},
    "intensity": {"N": 2000, "alpha": 0.3, "J": [-0.5, 0.5], "I": [0.0, 1.0], "nodes": 16,
                  "scale": "dimension"},
    "gap-ratio": {"N": 1000, "alpha": 0.3, "E0": 0.0, "halfwidth": 0.5, "backend": "auto"},
    "phase-diagram": {"N": 1000, "alpha": [round(0.1 * k, 1) for k in range(1, 10)], "E0": 0.0,
                      "halfwidth": 0.5, "backend": "auto"},
    "block-compare": {"N": [250, 500, 1000, 2000], "alpha": 0.2, "beta": 0.7, "mu": 2.0,
                      "delta": 2.0, "weak": False, "mode": "coupled", "E0": 0.0, "I": [0.0, 1.0],
                      "scale": "dimension"},
    "localization": {"N": 2000, "alpha": 0.2, "s": 0.5, "E": 0.0, "epsilon": None, "j": 0,
                     "distances": [10 * k for k in range(81)], "groups": 1},
}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    trials: int = 100
    master_seed: int = 0
    workers: int = 1
    output: str = "rbm-run"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}")
        unknown = set(self.params) - set(DEFAULTS[self.kind]) - set(_COMMON)
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def resolved(self) -> dict:
        return {**_COMMON, **DEFAULTS[self.kind], **self.params}

    def grid(self) -> list[dict]:
        """Grid points in canonical order (product over :data:`GRID_KEYS`)."""
        base = self.resolved()
        keys = [k for k in GRID_KEYS if isinstance(base.get(k), list)]
        points = []
        for combo in itertools.product(*(base[k] for k in keys)):
            p = dict(base)
            p.update(zip(keys, combo))
            points.append(p)
        return points

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"kind", "params", "trials", "master_seed", "workers", "output"}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def apply_env_overrides(config: ExperimentConfig) -> ExperimentConfig:
    """``RBMLAB_WORKERS`` and ``RBMLAB_OUTPUT`` override the config."""
    if os.environ.get("RBMLAB_WORKERS"):
        config.workers = int(os.environ["RBMLAB_WORKERS"])
    if os.environ.get("RBMLAB_OUTPUT"):
        config.output = os.environ["RBMLAB_OUTPUT"]
    return config


# --- validation -------------------------------------------------------------


def _band_params(p: dict, seed: int = 0) -> BandMatrixParams:
    dist = EntryDistribution(p["distribution"], tuple(p.get("distribution_parameters") or ()))
    return BandMatrixParams.from_alpha(int(p["N"]), float(p["alpha"]), bool(p["periodic"]), dist, seed)


def _window(p: dict) -> RescaleWindow:
    return RescaleWindow(float(p["E0"]), tuple(p["I"]), p.get("scale", "dimension"))


def _scheme(p: dict, require_interior=False):
    return make_block_scheme(int(p["N"]), float(p["alpha"]), float(p["beta"]), float(p["mu"]),
                             float(p["delta"]), bool(p["weak"]), require_interior=require_interior)


def validate(config: ExperimentConfig) -> list[dict]:
    """Check every grid point against its consumers' constraints; return the grid."""
    points = config.grid()
    for p in points:
        bp = _band_params(p)
        kind = config.kind
        if "E0" in p and "I" in p:
            _window(p).physical(bp.N)
        if kind in ("les-poisson", "char-exponent") and p.get("beta") is not None:
            check_exponents(bp.alpha, float(p["beta"]), 2.0, False)
        if kind == "block-compare":
            if p["mode"] not in ("coupled", "independent"):
                raise ConfigurationError(f"unknown block mode {p['mode']!r}")
            scheme = _scheme(p)
            for blk in scheme.blocks:
                if blk.size < bp.W:
                    raise ConfigurationError(f"block of size {blk.size} is shorter than W={bp.W}")
        if kind == "intensity":
            if int(p["nodes"]) < 8:
                raise ConfigurationError(f"E0 grid too coarse: {p['nodes']} < 8 nodes")
            J = p["J"]
            if not -2 <= J[0] < J[1] <= 2:
                raise ConfigurationError(f"J={J} must lie inside [-2, 2]")
        if kind == "localization":
            if not 0 < float(p["s"]) < 1:
                raise ConfigurationError("s must lie in (0, 1)")
            if abs(int(p["j"])) + max(p["distances"]) > bp.N:
                raise ConfigurationError("j must be at least max(distances) away from both edges")
            if p.get("epsilon") is not None and not float(p["epsilon"]) > 0:
                raise ConfigurationError("epsilon must be positive")
        if kind in ("wegner", "minami") and min(p["lengths"]) <= 0:
            raise ConfigurationError("window lengths must be positive")
        if kind == "char-exponent" and config.trials < 100:
            raise ConfigurationError("char-exponent needs at least 100 trials")
    return points


# --- trial kernels ----------------------------------------------------------
# Each kernel maps (point, grid index, trial index, seed) to a list of raw rows.

RAW_HEADERS = {
    "dos": ("grid_index", "trial", "eigenvalue"),
    "les-poisson": ("grid_index", "trial", "count"),
    "char-exponent": ("grid_index", "trial", "count"),
    "wegner": ("grid_index", "trial", "length", "windows", "sum_count", "sum_factorial2",
               "windows_ge1", "windows_ge2"),
    "intensity": ("grid_index", "trial", "node", "E0", "count"),
    "gap-ratio": ("grid_index", "trial", "mean_r", "ratios"),
    "block-compare": ("grid_index", "trial", "xi", "zeta"),
    "localization": ("grid_index", "trial", "d", "abs_g_s"),
}
RAW_HEADERS["minami"] = RAW_HEADERS["wegner"]
RAW_HEADERS["phase-diagram"] = RAW_HEADERS["gap-ratio"]


def _k_dos(p, g, t, seed):
    ev = spectrum(sample_band_matrix(_band_params(p, seed)), p["backend"]).eigenvalues
    return [(g, t, float(x)) for x in ev]


def _k_count(p, g, t, seed):
    m = sample_band_matrix(_band_params(p, seed))
    a, b = _window(p).physical(m.params.N)
    ca, cb = counts_below(m, [a, b])
    return [(g, t, int(cb - ca))]


def _k_moments(p, g, t, seed):
    m = sample_band_matrix(_band_params(p, seed))
    ev = spectrum(m, "auto").eigenvalues
    n = m.n
    rows = []
    for length in p["lengths"]:
        phys = float(length) / n
        nw = max(int(float(p["region"]) / phys), 1)
        c = tiled_window_counts(ev, float(p["E0"]), phys, nw)
        rows.append((g, t, float(length), nw, int(c.sum()), int((c * (c - 1)).sum()),
                     int((c >= 1).sum()), int((c >= 2).sum())))
    return rows


def _intensity_nodes(p):
    J = p["J"]
    lo, hi = max(J[0], -2 + 1e-9), min(J[1], 2 - 1e-9)
    return np.linspace(lo, hi, int(p["nodes"]))


def _k_intensity(p, g, t, seed):
    m = sample_band_matrix(_band_params(p, seed))
    nodes = _intensity_nodes(p)
    edges = np.array([RescaleWindow(float(e), tuple(p["I"]), p["scale"]).physical(m.params.N)
                      for e in nodes])
    c = counts_below(m, edges.ravel()).reshape(len(nodes), 2)
    return [(g, t, k, float(nodes[k]), int(c[k, 1] - c[k, 0])) for k in range(len(nodes))]


def _k_gap(p, g, t, seed):
    sp = spectrum(sample_band_matrix(_band_params(p, seed)), p["backend"])
    ev = sp.eigenvalues
    h, E0 = float(p["halfwidth"]), float(p["E0"])
    k = int(((ev >= E0 - h) & (ev <= E0 + h)).sum())
    return [(g, t, gap_ratio_statistic(sp, E0, h), k - 2)]


def _k_block(p, g, t, seed):
    bp = _band_params(p, seed)
    scheme = _scheme(p)
    w = _window(p)
    m = sample_band_matrix(bp)
    if p["mode"] == "coupled":
        xi, bc = coupled_counts(m, scheme, w)
    else:
        a, b = w.physical(bp.N)
        ca, cb = counts_below(m, [a, b])
        xi = int(cb - ca)
        bc = sample_block_counts(bp, scheme, w)
    return [(g, t, int(xi), int(bc.zeta))]


def _k_local(p, g, t, seed):
    bp = _band_params(p, seed)
    eps = float(p["epsilon"]) if p.get("epsilon") is not None else 1.0 / bp.N
    j = int(p["j"])
    d = np.asarray(p["distances"], dtype=np.int64)
    col = greens_column(sample_band_matrix(bp), j, complex(float(p.get("E", 0.0)), eps))
    vals = np.abs(col[j + d + bp.N]) ** float(p["s"])
    return [(g, t, int(dd), float(v)) for dd, v in zip(d, vals)]


KERNELS = {
    "dos": _k_dos, "les-poisson": _k_count, "char-exponent": _k_count, "wegner": _k_moments,
    "minami": _k_moments, "intensity": _k_intensity, "gap-ratio": _k_gap,
    "phase-diagram": _k_gap, "block-compare": _k_block, "localization": _k_local,
}


def _run_task(args):
    kind, point, g, t, seed = args
    kernel = KERNELS[kind]
    try:
        return kernel(point, g, t, seed), 0
    except NumericalError as exc:
        log.warning("trial (%d, %d) failed (%s); retrying with perturbed seed", g, t, exc)
        try:
            return kernel(point, g, t, retry_seed(seed)), 1
        except NumericalError:
            return None, 2


def _execute(config: ExperimentConfig, points) -> tuple[list, int, int]:
    tasks = [(config.kind, p, g, t, derive_trial_seed(config.master_seed, g, t))
             for g, p in enumerate(points) for t in range(config.trials)]
    if config.workers == 1:
        results = [_run_task(a) for a in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * config.workers))
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
    rows, retried, failed = [], 0, 0
    for r, status in results:
        retried += status >= 1
        if r is None:
            failed += 1
            continue
        rows.extend(r)
    if failed > MAX_FAILURE_RATE * len(tasks):
        raise NumericalError(f"{failed} of {len(tasks)} trials failed after retry; aborting")
    return rows, retried, failed


# --- aggregation ------------------------------------------------------------


def _mean_se(x):
    x = np.asarray(x, float)
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")
    return float(x.mean()), se


def _by_grid(rows, n_points):
    out = [[] for _ in range(n_points)]
    for r in rows:
        out[r[0]].append(r)
    return out


def _point_label(p):
    return {k: p[k] for k in GRID_KEYS if k in p and p[k] is not None}


def summarize(kind: str, points: list[dict], rows: list) -> tuple[dict, dict]:
    """Aggregate raw rows into a summary dict and named (header, rows) tables."""
    groups = _by_grid(rows, len(points))
    summary, tables = {"kind": kind, "points": []}, {}
    if kind == "dos":
        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            ev = np.array([r[2] for r in rs])
            trials = len({r[1] for r in rs})
            spectra = np.array_split(ev, trials)
            dos = empirical_dos(spectra, p["bins"])
            lo, hi = p["compare"]
            summary["points"].append({**_point_label(p), "bins": len(dos.densities),
                                      "sup_distance": dos_sup_distance(dos, lo, hi)})
            for x, y in zip(dos.grid, dos.densities):
                trows.append((g, float(x), float(y), float(semicircle_density(x))))
        tables["dos"] = (("grid_index", "E", "density", "n_sc"), trows)
    elif kind in ("les-poisson", "char-exponent"):
        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            c = np.array([r[2] for r in rs])
            b, se = _mean_se(c)
            entry = {**_point_label(p), "b_N": b, "stderr": se,
                     "n_sc_times_length": float(semicircle_density(p["E0"]) * (p["I"][1] - p["I"][0]))}
            lam = p.get("lam") or b
            if kind == "les-poisson" and lam > 0 and len(c) >= 1000:
                fit = poisson_fit_test(c, lam)
                entry.update(lam=lam, tv_distance=fit.tv_distance, chi2=fit.chi2, dof=fit.dof,
                             p_value=fit.p_value)
                trows += [(g, k, o / len(c), e / len(c)) for k, o, e in fit.table]
            if kind == "char-exponent" and b > 0:
                chk = poisson_exponent_check(c, np.linspace(-np.pi, np.pi, int(p["t_nodes"])))
                entry.update(sup_deviation=chk.sup_deviation, max_deviation_over_stderr=chk.max_ratio)
                trows += [(g, float(t), float(d.real), float(d.imag), float(s))
                          for t, d, s in zip(chk.t_grid, chk.deviation, chk.stderr)]
            summary["points"].append(entry)
        if kind == "les-poisson":
            tables["counts"] = (("grid_index", "k", "observed", "poisson"), trows)
        else:
            tables["psi_deviation"] = (("grid_index", "t", "re", "im", "stderr"), trows)
    elif kind in ("wegner", "minami"):
        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            lens, m1, m2, pge1 = [], [], [], []
            for length in p["lengths"]:
                sel = [r for r in rs if r[2] == float(length)]
                nw = sum(r[3] for r in sel)
                lens.append(float(length))
                m1.append(sum(r[4] for r in sel) / nw)
                m2.append(sum(r[5] for r in sel) / nw)
                pge1.append(sum(r[6] for r in sel) / nw)
            slope2 = loglog_slope(lens, m2)[0] if sum(v > 0 for v in m2) >= 2 else float("nan")
            slope1 = loglog_slope(lens, m1)[0]
            summary["points"].append({**_point_label(p), "lengths": lens, "wegner": m1, "minami": m2,
                                      "p_ge1": pge1, "wegner_slope": slope1, "minami_slope": slope2,
                                      "wegner_per_length": [a / b for a, b in zip(m1, lens)]})
            trows += [(g, a, b, c) for a, b, c in zip(lens, m1, m2)]
        tables["moments"] = (("grid_index", "length", "wegner", "minami"), trows)
    elif kind == "intensity":
        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            nodes = _intensity_nodes(p)
            trials = len({r[1] for r in rs})
            C = np.zeros((trials, len(nodes)))
            tindex = {t: i for i, t in enumerate(sorted({r[1] for r in rs}))}
            for r in rs:
                C[tindex[r[1]], r[2]] = r[4]
            wts = np.full(len(nodes), (nodes[-1] - nodes[0]) / (len(nodes) - 1))
            wts[[0, -1]] /= 2
            integral, se = _mean_se(C @ wts)
            length = p["I"][1] - p["I"][0]
            summary["points"].append({**_point_label(p), "integral": integral, "stderr": se,
                                      "target": length * semicircle_measure(tuple(p["J"]))})
            bm = C.mean(axis=0)
            bs = C.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(len(nodes), np.nan)
            trows += [(g, float(e), float(b), float(s), float(semicircle_density(e) * length))
                      for e, b, s in zip(nodes, bm, bs)]
        tables["intensity"] = (("grid_index", "E0", "b_N", "stderr", "n_sc_times_length"), trows)
    elif kind in ("gap-ratio", "phase-diagram"):
        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            r, se = _mean_se([x[2] for x in rs])
            summary["points"].append({**_point_label(p), "mean_r": r, "stderr": se})
            trows.append((g, float(p["alpha"]), r, se))
        summary["references"] = {"poisson": POISSON_GAP_RATIO, "goe": GOE_GAP_RATIO}
        tables["gap_ratio"] = (("grid_index", "alpha", "mean_r", "stderr"), trows)
    elif kind == "block-compare":
        from .blockdecomp import summarize_coupling

        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            rep = summarize_coupling(p["N"], [r[2] for r in rs], [r[3] for r in rs])
            summary["points"].append({**_point_label(p), "mode": p["mode"],
                                      "mean_abs_diff": rep.mean_abs_diff,
                                      "mean_abs_diff_stderr": rep.mean_abs_diff_stderr,
                                      "mean_diff": rep.mean_diff, "mean_diff_stderr": rep.mean_diff_stderr,
                                      "match_rate": rep.match_rate,
                                      "match_rate_stderr": rep.match_rate_stderr})
            trows.append((g, int(p["N"]), rep.mean_abs_diff, rep.mean_abs_diff_stderr, rep.match_rate))
        tables["block_compare"] = (("grid_index", "N", "mean_abs_diff", "stderr", "match_rate"), trows)
    elif kind == "localization":
        trows = []
        for g, (p, rs) in enumerate(zip(points, groups)):
            d = np.asarray(p["distances"])
            trials = len({r[1] for r in rs})
            V = np.array([r[3] for r in rs]).reshape(trials, len(d))
            mom = V.mean(axis=0)
            se = V.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(len(d), np.nan)
            bp = _band_params(p)
            fit = fit_decay(d, mom, se, 2 * bp.W, bp.N, bp.alpha, float(p["s"]))
            kappa = fit.loc_length / bp.N if fit.status == "ok" else float("nan")
            summary["points"].append({**_point_label(p), "rate": fit.rate,
                                      "loc_length": fit.loc_length, "kappa": kappa,
                                      "r_squared": fit.r_squared, "status": fit.status,
                                      "prefactor_exponent": fit.prefactor_exponent,
                                      "fit_from": fit.fit_from})
            with np.errstate(divide="ignore"):
                trows += [(g, int(a), float(np.log(m)) if m > 0 else float("-inf"),
                           float(s / m) if m > 0 else float("nan")) for a, m, s in zip(d, mom, se)]
        tables["decay"] = (("grid_index", "d", "log_moment", "stderr"), trows)
    return summary, tables


# --- output -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass
class ExperimentManifest:
    config: dict
    seed_rule: str
    version: str
    timings: dict
    summary: dict
    files: dict
    retried_trials: int = 0
    failed_trials: int = 0

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(dict(self.config))


def load_manifest(path) -> ExperimentManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return ExperimentManifest(**json.loads(path.read_text()))


def run_experiment(config: ExperimentConfig, figures: bool = True) -> ExperimentManifest:
    """Validate, execute, aggregate and persist one experiment."""
    t0 = time.perf_counter()
    points = validate(config)
    t1 = time.perf_counter()
    rows, retried, failed = _execute(config, points)
    t2 = time.perf_counter()
    summary, tables = summarize(config.kind, points, rows)
    out = Path(config.output)
    fresh = not out.exists()
    try:
        (out / "raw").mkdir(parents=True, exist_ok=True)
        (out / "tables").mkdir(exist_ok=True)
        raw_name = config.kind.replace("-", "_") + ".csv"
        write_csv(out / "raw" / raw_name, RAW_HEADERS[config.kind], rows)
        for name, (header, trows) in tables.items():
            write_csv(out / "tables" / f"{name}.csv", header, trows)
        (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
        if figures:
            from .plotting import render_figures

            (out / "figures").mkdir(exist_ok=True)
            render_figures(config.kind, summary, tables, out / "figures")
        t3 = time.perf_counter()
        files = {str(p.relative_to(out)): _sha256(p)
                 for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.json"}
        manifest = ExperimentManifest(
            config=config.to_dict(), seed_rule=SEED_RULE, version=__version__,
            timings={"validate_s": t1 - t0, "trials_s": t2 - t1, "output_s": t3 - t2,
                     "total_s": t3 - t0},
            summary=_jsonable(summary), files=files, retried_trials=retried, failed_trials=failed,
        )
        (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2) + "\n")
    except OSError:
        if fresh:
            shutil.rmtree(out, ignore_errors=True)
        raise
    return manifest


def rerun_from_manifest(path, output=None, workers=None) -> ExperimentManifest:
    """Re-execute the config recorded in a manifest."""
    cfg = load_manifest(path).to_config()
    if output is not None:
        cfg.output = str(output)
    if workers is not None:
        cfg.workers = workers
    return run_experiment(cfg)
