"""``rsvdkit`` command line: gen, svd, rsvd, pca and bench subcommands.

Exit codes: 0 success, 1 usage error, 2 I/O or malformed DMAT input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import bench, dmat
from .dense import dense_svd, set_threads
from .errors import DmatError
from .pca import fit_pca
from .rsvd import RsvdConfig, randomized_ksvd, singular_values_only
from .synth import SynthSpec, parse_spectrum, synth_matrix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Gen:
    spec: SynthSpec
    out: str
    threads: int = 1


@dataclass(frozen=True)
class Svd:
    input: str
    out: str
    threads: int = 1


@dataclass(frozen=True)
class Rsvd:
    """``cfg.k`` is a placeholder when ``k_frac`` is set; k is resolved once
    the input shape is known."""

    input: str
    cfg: RsvdConfig
    out: str
    values_only: bool = False
    k_frac: float | None = None
    threads: int = 1


@dataclass(frozen=True)
class Pca:
    input: str
    cfg: RsvdConfig
    out: str
    k_frac: float | None = None
    threads: int = 1


@dataclass(frozen=True)
class Bench:
    preset: str
    csv: str
    seed: int = 0
    repetitions: int = bench.DEFAULT_REPETITIONS
    overrides: dict = field(default_factory=dict)
    threads: int = 1


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer value: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _count(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer value: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _seed(text):
    value = _count(text)
    if value >= 2**64:
        raise argparse.ArgumentTypeError(f"must fit in 64 bits, got {value}")
    return value


def _number(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return value


def _fraction(text):
    value = _number(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {value}")
    return value


def _path(text):
    if not text:
        raise argparse.ArgumentTypeError("path must be non-empty")
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _rank_options(p):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=_positive_int, help="target rank")
    group.add_argument("--k-frac", type=_fraction, help="target rank as ceil(fraction * columns)")
    p.add_argument("--oversample", type=_count, default=10)
    p.add_argument("--power-q", type=_count, default=2)
    p.add_argument("--epsilon", type=_number, default=0.5)
    p.add_argument("--epsilon-mode", action="store_true", help="sketch width ceil(k / epsilon)")
    p.add_argument("--seed", type=_seed, default=0)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=1, help="GEMM kernel threads")

    parser = _Parser(prog="rsvdkit", description="Randomized k-SVD toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic matrix")
    p.add_argument("--rows", type=_positive_int, required=True)
    p.add_argument("--cols", type=_positive_int, required=True)
    p.add_argument("--spectrum", choices=("fast", "sharp", "slow"), required=True)
    p.add_argument("--beta", type=_number, help="sharp-decay breakout (default k + 1)")
    p.add_argument("--k", type=_positive_int, help="places the sharp breakout at k + 1")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=_path, required=True)

    p = sub.add_parser("svd", parents=[common], help="full SVD of a DMAT matrix")
    p.add_argument("input", type=_path)
    p.add_argument("--out", type=_path, required=True, help="output prefix")

    p = sub.add_parser("rsvd", parents=[common], help="randomized k-SVD of a DMAT matrix")
    p.add_argument("input", type=_path)
    _rank_options(p)
    p.add_argument("--values-only", action="store_true", help="singular values only")
    p.add_argument("--out", type=_path, required=True, help="output prefix")

    p = sub.add_parser("pca", parents=[common], help="principal components of DMAT data")
    p.add_argument("input", type=_path)
    _rank_options(p)
    p.add_argument("--out", type=_path, required=True, help="output prefix")

    p = sub.add_parser("bench", parents=[common], help="run a timing preset")
    p.add_argument("preset", choices=sorted(bench.PRESETS))
    p.add_argument("--csv", type=_path, default="-", help="CSV destination, '-' for stdout")
    p.add_argument("--reps", type=_positive_int, default=bench.DEFAULT_REPETITIONS)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--rows", type=_positive_int, help="override m")
    p.add_argument("--cols", type=_positive_int, nargs="+", help="override the n grid")
    p.add_argument("--k-frac", type=_fraction, nargs="+", help="override the k fractions")
    p.add_argument("--oversample", type=_count)
    p.add_argument("--power-q", type=_count)
    p.add_argument("--beta", type=_number)
    p.add_argument("--tolerance", type=_number)
    p.add_argument("--baseline", choices=sorted(bench.BASELINES))
    p.add_argument("--fallback-seeds", type=_count)
    return parser


def _config(ns):
    try:
        return RsvdConfig(
            k=ns.k or 1,
            oversample=ns.oversample,
            power_q=ns.power_q,
            seed=ns.seed,
            epsilon=ns.epsilon,
            epsilon_mode=ns.epsilon_mode,
        )
    except ValueError as exc:
        raise UsageError(f"rsvdkit {ns.command}: {exc}") from None


def parse_args(argv):
    """Parse ``argv`` (without the program name) into a command.

    Raises :class:`UsageError` naming the offending flag.
    """
    ns = build_parser().parse_args(argv)
    if ns.command == "gen":
        beta = ns.beta
        if ns.spectrum == "sharp" and beta is None:
            if ns.k is None:
                raise UsageError("rsvdkit gen: --spectrum sharp needs --beta or --k")
            beta = ns.k + 1
        if ns.rows < ns.cols:
            raise UsageError(f"rsvdkit gen: --rows ({ns.rows}) must be >= --cols ({ns.cols})")
        try:
            kind = parse_spectrum(ns.spectrum, beta)
        except ValueError as exc:
            raise UsageError(f"rsvdkit gen: --beta: {exc}") from None
        return Gen(SynthSpec(ns.rows, ns.cols, kind, ns.seed), ns.out, ns.threads)
    if ns.command == "svd":
        return Svd(ns.input, ns.out, ns.threads)
    if ns.command == "rsvd":
        return Rsvd(ns.input, _config(ns), ns.out, ns.values_only, ns.k_frac, ns.threads)
    if ns.command == "pca":
        return Pca(ns.input, _config(ns), ns.out, ns.k_frac, ns.threads)
    overrides = {
        name: getattr(ns, name)
        for name in ("rows", "cols", "k_frac", "oversample", "power_q", "beta", "tolerance",
                     "baseline", "fallback_seeds")
        if getattr(ns, name) is not None
    }
    return Bench(ns.preset, ns.csv, ns.seed, ns.reps, overrides, ns.threads)


def _resolve_k(cfg, k_frac, shape):
    m, n = shape
    k = bench.k_from_fraction(k_frac, n) if k_frac is not None else cfg.k
    if k > min(m, n):
        raise UsageError(f"k={k} exceeds min(rows, cols) = {min(m, n)} for a {m}x{n} input")
    return replace(cfg, k=k)


def _summary(name, shape, **items):
    text = " ".join(f"{key}={value}" for key, value in items.items())
    print(f"{name}: {shape[0]}x{shape[1]} {text}", file=sys.stderr)


def _write_factors(prefix, u, sigma, v):
    if u is not None:
        dmat.write_dmat(f"{prefix}.u.dmat", u)
    dmat.write_dmat(f"{prefix}.sigma.dmat", np.asarray(sigma).reshape(-1, 1))
    if v is not None:
        dmat.write_dmat(f"{prefix}.v.dmat", v)


def _run_gen(cmd):
    t0 = time.perf_counter()
    a = synth_matrix(cmd.spec)
    dmat.write_dmat(cmd.out, a)
    beta = f" beta={cmd.spec.kind.beta!r}" if cmd.spec.kind.name == "sharp" else ""
    _summary("gen", a.shape, spectrum=cmd.spec.kind.name + beta, seed=cmd.spec.seed,
             time=f"{time.perf_counter() - t0:.3f}s")


def _run_svd(cmd):
    a = dmat.read_dmat(cmd.input)
    t0 = time.perf_counter()
    f = dense_svd(a)
    elapsed = time.perf_counter() - t0
    _write_factors(cmd.out, f.u, f.sigma, f.v)
    _summary("svd", a.shape, k=f.rank, time=f"{elapsed:.3f}s")


def _run_rsvd(cmd):
    a = dmat.read_dmat(cmd.input)
    cfg = _resolve_k(cmd.cfg, cmd.k_frac, a.shape)
    s = cfg.sketch_width(*a.shape)
    t0 = time.perf_counter()
    if cmd.values_only:
        sigma = singular_values_only(a, cfg)
        elapsed = time.perf_counter() - t0
        _write_factors(cmd.out, None, sigma, None)
        residual = "n/a"
    else:
        res = randomized_ksvd(a, cfg)
        elapsed = time.perf_counter() - t0
        _write_factors(cmd.out, res.u, res.sigma, res.v)
        residual = f"{res.residual_fro:.6g}"
    _summary("rsvd", a.shape, k=cfg.k, s=s, q=cfg.power_q, seed=cfg.seed, residual=residual,
             time=f"{elapsed:.3f}s")


def _run_pca(cmd):
    x = dmat.read_dmat(cmd.input)
    cfg = _resolve_k(cmd.cfg, cmd.k_frac, x.shape)
    t0 = time.perf_counter()
    model = fit_pca(x, cfg.k, cfg)
    elapsed = time.perf_counter() - t0
    dmat.write_dmat(f"{cmd.out}.components.dmat", model.components)
    dmat.write_dmat(f"{cmd.out}.mean.dmat", model.mean.reshape(1, -1))
    dmat.write_dmat(f"{cmd.out}.variance.dmat", model.explained_variance.reshape(-1, 1))
    n, d = x.shape
    lines = [f"k {cfg.k}", f"N {n}", f"d {d}", f"seed {cfg.seed}", "explained_variance"]
    lines += [format(v, ".17g") for v in model.explained_variance]
    with open(f"{cmd.out}.pca.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    _summary("pca", x.shape, k=cfg.k, s=cfg.sketch_width(n, d), q=cfg.power_q, seed=cfg.seed,
             time=f"{elapsed:.3f}s")


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _run_bench(cmd):
    preset = bench.PRESETS[cmd.preset]
    o = cmd.overrides
    cfg = bench.preset_config(preset, cmd.seed, o.get("oversample", 10), o.get("power_q"))
    m = o.get("rows", preset.m)
    n_grid = tuple(o.get("cols", preset.n_grid))
    fractions = tuple(o.get("k_frac", preset.k_fractions))
    tolerance = o.get("tolerance", bench.DEFAULT_TOLERANCE)
    if any(n > m for n in n_grid):
        raise UsageError(f"rsvdkit bench: every n must be <= m = {m}, got {list(n_grid)}")
    audit = []

    def log(row, entry):
        flag = " FLAGGED" if entry["flagged"] else ""
        print(f"bench: {row.spectrum} {row.m}x{row.n} k={row.k} ratio={row.ratio:.3g} "
              f"max_rel_err={row.max_rel_err:.3g}{flag}", file=sys.stderr)

    rows = bench.run_grid(preset.spectrum, m, n_grid, fractions, cfg,
                          baseline=o.get("baseline", "jacobi-values"), repetitions=cmd.repetitions,
                          tolerance=tolerance, beta=o.get("beta", preset.beta), audit=audit,
                          fallback_seeds=o.get("fallback_seeds", 20), log=log)
    if cmd.csv == "-":
        bench.write_csv(rows, sys.stdout)
    else:
        with open(cmd.csv, "w", encoding="utf-8", newline="") as fh:
            bench.write_csv(rows, fh)
        meta = {
            "preset": cmd.preset,
            "spectrum": preset.spectrum,
            "m": m,
            "seed": cmd.seed,
            "threads": cmd.threads,
            "kernel_parallel": cmd.threads > 1,
            "oversample": cfg.oversample,
            "power_q": cfg.power_q,
            "repetitions": cmd.repetitions,
            "tolerance": tolerance,
            "rows": audit,
        }
        with open(cmd.csv + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_json_safe(meta), fh, indent=2, sort_keys=True)
            fh.write("\n")
    flagged = sum(e["flagged"] for e in audit)
    print(f"bench: {cmd.preset} rows={len(rows)} flagged={flagged} seed={cmd.seed} "
          f"threads={cmd.threads}", file=sys.stderr)


_DISPATCH = {Gen: _run_gen, Svd: _run_svd, Rsvd: _run_rsvd, Pca: _run_pca, Bench: _run_bench}


def run(cmd):
    """Execute a parsed command and return its exit code."""
    try:
        set_threads(cmd.threads)
        _DISPATCH[type(cmd)](cmd)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DmatError, OSError) as exc:
        print(f"rsvdkit: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArithmeticError as exc:
        print(f"rsvdkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"rsvdkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    return run(cmd)


if __name__ == "__main__":
    sys.exit(main())
