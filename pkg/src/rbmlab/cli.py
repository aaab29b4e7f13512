"""Command-line front end.

Every experiment subcommand maps onto one :class:`ExperimentConfig` kind;
flags mirror the JSON config keys (``--N``, ``--alpha``, ``--E0``, ...).
``--config`` loads a JSON config first and explicit flags override it.
List-valued flags accept several tokens, comma lists or ``start:stop:step``
ranges (inclusive of ``stop``).

Exit status: 0 success, 2 configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .eigensolver import NumericalError, spectrum
from .ensemble import (
    DISTRIBUTION_KINDS,
    BandMatrixParams,
    ConfigurationError,
    EntryDistribution,
    sample_band_matrix,
)
from .montecarlo import _COMMON, DEFAULTS, ExperimentConfig, apply_env_overrides, run_experiment, validate

SUBCOMMANDS = {
    "dos": ("dos", "Density of states histogram against the semicircle density."),
    "les": ("les-poisson", "Counts in a rescaled window N(E - E0) in I, with a Poisson fit."),
    "wegner": ("wegner", "First moment of window counts against the rescaled window length."),
    "minami": ("minami", "Second factorial moment of window counts (double-point control) "
                         "against the rescaled window length."),
    "intensity": ("intensity", "Expected count b_N integrated over window centres E0 in J, "
                               "compared with |I| times the semicircle mass of J."),
    "charexp": ("char-exponent", "Empirical log-characteristic function of the count against "
                                 "the Poisson form b_N (exp(it) - 1)."),
    "gapratio": ("gap-ratio", "Mean consecutive gap ratio near E0 (Poisson 0.3863, GOE 0.5307)."),
    "blocks": ("block-compare", "Full count xi against the block superposition zeta on "
                                "shared (coupled) or fresh (independent) entries."),
    "localize": ("localization", "Fractional moments E|G(j, j+d; E + i epsilon)|^s and their "
                                 "exponential decay rate."),
    "phase": ("phase-diagram", "Mean gap ratio across alpha (localized to delocalized crossover)."),
}

_FLOAT_LISTS = {"I", "J", "compare", "lengths", "distribution_parameters"}
_INT_LISTS = {"distances"}
_BOOLS = {"periodic", "weak"}
_STRINGS = {"scale": ("dimension", "half"), "backend": ("auto", "givens", "lapack", "dense"),
            "mode": ("coupled", "independent"), "distribution": DISTRIBUTION_KINDS}
_INTS = {"N", "nodes", "t_nodes", "j", "groups"}


def parse_values(tokens, cast=float) -> list:
    """Expand tokens (``a``, ``a,b``, ``start:stop:step``) into a flat list."""
    out = []
    for tok in tokens:
        for part in str(tok).split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                bits = part.split(":")
                if len(bits) != 3:
                    raise ConfigurationError(f"range {part!r} must be start:stop:step")
                a, b, s = (float(x) for x in bits)
                if s <= 0 or b < a:
                    raise ConfigurationError(f"bad range {part!r}")
                n = int(np.floor((b - a) / s + 1e-9)) + 1
                out.extend(cast(round(a + k * s, 12)) for k in range(n))
            else:
                out.append(cast(float(part)) if cast is int else cast(part))
    return out


def _add_param_flags(p: argparse.ArgumentParser, kind: str):
    keys = list(DEFAULTS[kind]) + [k for k in _COMMON if k not in DEFAULTS[kind]]
    for key in keys:
        default = {**_COMMON, **DEFAULTS[kind]}[key]
        flag = f"--{key}"
        shown = json.dumps(default)
        if key in _BOOLS:
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS,
                           help=f"(default {shown})")
        elif key in _STRINGS:
            p.add_argument(flag, choices=_STRINGS[key], default=argparse.SUPPRESS,
                           help=f"(default {shown})")
        elif key in _FLOAT_LISTS or key in _INT_LISTS:
            p.add_argument(flag, nargs="+", default=argparse.SUPPRESS, metavar="V",
                           help=f"list (default {shown})")
        else:
            # scalars, possibly grid lists
            p.add_argument(flag, nargs="+", default=argparse.SUPPRESS, metavar="V",
                           help=f"value or list/range (default {shown})")
    if "alpha" in keys:
        p.add_argument("--alphas", dest="alpha", nargs="+", default=argparse.SUPPRESS,
                       metavar="V", help="alias of --alpha")


def _convert(key, raw):
    if key in _BOOLS or key in _STRINGS:
        return raw
    if key in _INT_LISTS:
        return parse_values(raw, int)
    if key in _FLOAT_LISTS:
        return parse_values(raw, float)
    if len(raw) == 1 and str(raw[0]).lower() in ("none", "null"):
        return None
    vals = parse_values(raw, int if key in _INTS else float)
    if key == "bins" and len(vals) > 1:
        return vals
    return vals[0] if len(vals) == 1 else vals


def _common_flags(p):
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--trials", type=int, default=argparse.SUPPRESS)
    p.add_argument("--seed", "--master_seed", dest="master_seed", type=int,
                   default=argparse.SUPPRESS, help="64-bit master seed (random and printed if omitted)")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    p.add_argument("--output", default=argparse.SUPPRESS, help="run directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbmlab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"rbmlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, (kind, text) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        _common_flags(p)
        _add_param_flags(p, kind)

    for name, text in (("sample", "Draw one band matrix and write its band storage."),
                       ("spectrum", "Draw one band matrix and write its eigenvalues as CSV.")):
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--periodic", action=argparse.BooleanOptionalAction, default=False)
        p.add_argument("--distribution", choices=DISTRIBUTION_KINDS, default="standard-gaussian")
        p.add_argument("--distribution_parameters", nargs="+", default=[])
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output", required=True, help="output file")
        if name == "spectrum":
            p.add_argument("--backend", choices=_STRINGS["backend"], default="auto")

    p = sub.add_parser("validate", help="Check a JSON config and print its resolved grid.",
                       description="Check a JSON config and print its resolved grid.")
    p.add_argument("--config", required=True)
    return parser


def _fresh_seed() -> int:
    seed = secrets.randbits(64)
    print(f"master seed: {seed}")
    return seed


def config_from_args(kind: str, ns: argparse.Namespace) -> ExperimentConfig:
    d = {"kind": kind, "params": {}}
    if getattr(ns, "config", None):
        d = json.loads(Path(ns.config).read_text())
        if d.get("kind", kind) != kind:
            raise ConfigurationError(f"config kind {d['kind']!r} does not match subcommand ({kind})")
        d["kind"] = kind
        d.setdefault("params", {})
    skip = {"command", "config", "no_figures"}
    for key, raw in vars(ns).items():
        if key in skip:
            continue
        if key in ("trials", "master_seed", "workers", "output"):
            d[key] = raw
        else:
            d["params"][key] = _convert(key, raw)
    if "master_seed" not in d:
        d["master_seed"] = _fresh_seed()
    if "output" not in d:
        d["output"] = f"rbm-{kind}-{d['master_seed']}"
    return apply_env_overrides(ExperimentConfig.from_dict(d))


def _single_matrix(ns):
    seed = ns.seed if ns.seed is not None else _fresh_seed()
    dist = EntryDistribution(ns.distribution, tuple(parse_values(ns.distribution_parameters)))
    return sample_band_matrix(BandMatrixParams.from_alpha(ns.N, ns.alpha, ns.periodic, dist, seed))


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "validate":
            cfg = ExperimentConfig.load(ns.config)
            points = validate(cfg)
            print(json.dumps({"kind": cfg.kind, "trials": cfg.trials, "grid": points}, indent=2))
            return 0
        if ns.command in ("sample", "spectrum"):
            m = _single_matrix(ns)
            out = Path(ns.output)
            if ns.command == "sample":
                out.write_bytes(m.to_bytes())
                print(f"wrote {out} (n={m.n}, L={m.L}, W={m.params.W})")
            else:
                ev = spectrum(m, ns.backend).eigenvalues
                out.write_text("eigenvalue\n" + "".join(f"{x!r}\n" for x in ev.tolist()))
                print(f"wrote {out} ({len(ev)} eigenvalues)")
            return 0
        kind = SUBCOMMANDS[ns.command][0]
        cfg = config_from_args(kind, ns)
        validate(cfg)
    except (ConfigurationError, ValueError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run_experiment(cfg, figures=not ns.no_figures)
    except (NumericalError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"master seed: {cfg.master_seed}")
    print(f"wrote {cfg.output}/manifest.json ({len(manifest.files)} files)")
    print(json.dumps(manifest.summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
