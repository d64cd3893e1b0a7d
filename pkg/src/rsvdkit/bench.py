"""Timing harness: repeated runs, mean/std, speedup ratios and CSV rows.

Each grid point times the full-SVD oracle (the baseline) and the
values-only randomized solver on the same synthetic matrix, then reports

* ``ratio   = mean(baseline) / mean(ours)``
* ``band_lo = (mean(baseline) - std(baseline)) / (mean(ours) + std(ours))``
* ``band_hi = (mean(baseline) + std(baseline)) / (mean(ours) - std(ours))``

``band_hi`` is infinite when ``mean(ours) <= std(ours)`` and is written as an
empty CSV field. Standard deviations use the sample (n - 1) divisor, and
every solver gets one untimed warm-up run.
"""

from __future__ import annotations

import csv
import hashlib
import math
import statistics
import time
from dataclasses import dataclass, field, fields, replace
from decimal import ROUND_CEILING, Decimal

import numpy as np

from .dense import dense_svd, singular_values
from .rsvd import RsvdConfig, randomized_ksvd, singular_values_only
from .synth import SynthSpec, parse_spectrum, synth_matrix

CSV_COLUMNS = (
    "spectrum",
    "m",
    "n",
    "k_fraction",
    "k",
    "competitor",
    "mean_competitor_s",
    "std_competitor_s",
    "mean_ours_s",
    "std_ours_s",
    "ratio",
    "band_lo",
    "band_hi",
    "max_rel_err",
)

DEFAULT_FRACTIONS = (0.01, 0.03, 0.05, 0.10)
DEFAULT_REPETITIONS = 10
DEFAULT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class TimingSample:
    solver_name: str
    wall_seconds: float

    def __post_init__(self):
        if not (math.isfinite(self.wall_seconds) and self.wall_seconds > 0):
            raise ValueError(f"wall time must be finite and positive, got {self.wall_seconds}")


@dataclass(frozen=True)
class BenchStats:
    """Summary of ``n_runs`` timed runs of one solver.

    A failed solver yields a record with ``error`` set, ``n_runs`` equal to
    the runs completed before the failure and NaN statistics.
    """

    solver_name: str
    n_runs: int
    mean_seconds: float
    std_seconds: float
    samples: tuple = ()
    digests: tuple = ()
    error: str | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def deterministic(self):
        """True when every timed run returned byte-identical output."""
        return len(set(self.digests)) <= 1

    @property
    def median_seconds(self):
        if not self.samples:
            return math.nan
        return statistics.median(s.wall_seconds for s in self.samples)

    @classmethod
    def from_samples(cls, samples, digests=()):
        if not samples:
            raise ValueError("need at least one timing sample")
        secs = [s.wall_seconds for s in samples]
        std = statistics.stdev(secs) if len(secs) > 1 else 0.0
        return cls(samples[0].solver_name, len(secs), statistics.fmean(secs), std, tuple(samples), tuple(digests))


@dataclass(frozen=True)
class SpeedupRow:
    spectrum: str
    m: int
    n: int
    k_fraction: float
    k: int
    competitor: str
    mean_competitor_s: float
    std_competitor_s: float
    mean_ours_s: float
    std_ours_s: float
    ratio: float
    band_lo: float
    band_hi: float
    max_rel_err: float

    def within_band(self):
        return self.band_lo <= self.ratio <= self.band_hi

    def violates(self, tolerance=DEFAULT_TOLERANCE):
        """Accuracy flag: worst relative error above ``tolerance`` (or unknown)."""
        return not self.max_rel_err <= tolerance


def _digest(out):
    h = hashlib.sha256()
    parts = out if isinstance(out, tuple) else (out,)
    for part in parts:
        arr = np.ascontiguousarray(part, dtype=np.float64)
        h.update(repr(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


# perf_counter can return equal readings for a task shorter than its tick
_TICK = time.get_clock_info("perf_counter").resolution


def time_solver(task, repetitions=DEFAULT_REPETITIONS, name="solver"):
    """Time ``task()`` over ``repetitions`` runs after one warm-up run.

    Array outputs are hashed per run so determinism can be audited through
    :attr:`BenchStats.deterministic`. Exceptions raised by the task are
    caught and turned into an error record.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    samples, digests = [], []
    try:
        task()
        for _ in range(repetitions):
            t0 = time.perf_counter()
            out = task()
            elapsed = time.perf_counter() - t0
            samples.append(TimingSample(name, max(elapsed, _TICK)))
            if out is not None:
                digests.append(_digest(out))
    except Exception as exc:  # noqa: BLE001 - any solver failure becomes a record
        return BenchStats(name, len(samples), math.nan, math.nan, tuple(samples), tuple(digests),
                          f"{type(exc).__name__}: {exc}")
    return BenchStats.from_samples(samples, digests)


def speedup_ratio(competitor, ours, *, spectrum="", m=0, n=0, k_fraction=math.nan, k=0,
                  max_rel_err=math.nan):
    mc, sc = competitor.mean_seconds, competitor.std_seconds
    mo, so = ours.mean_seconds, ours.std_seconds
    if not mo > 0:
        raise ZeroDivisionError(f"mean time of {ours.solver_name!r} must be positive, got {mo}")
    band_hi = (mc + sc) / (mo - so) if mo > so else math.inf
    return SpeedupRow(
        spectrum=spectrum,
        m=m,
        n=n,
        k_fraction=k_fraction,
        k=k,
        competitor=competitor.solver_name,
        mean_competitor_s=mc,
        std_competitor_s=sc,
        mean_ours_s=mo,
        std_ours_s=so,
        ratio=mc / mo,
        band_lo=(mc - sc) / (mo + so),
        band_hi=band_hi,
        max_rel_err=max_rel_err,
    )


def k_from_fraction(fraction, n):
    """``ceil(fraction * n)`` evaluated on the decimal literal of ``fraction``.

    Binary rounding would otherwise turn 0.07 * 100 into 8.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"k fraction must lie in (0, 1], got {fraction}")
    k = int((Decimal(repr(float(fraction))) * n).to_integral_value(ROUND_CEILING))
    return max(k, 1)


def max_relative_error(values, reference):
    values = np.asarray(values, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)[: values.shape[0]]
    return float(np.max(np.abs(values - reference) / np.abs(reference)))


def expectation_check(a, k, cfg, n_seeds=20, epsilon=0.5, reference=None):
    """Mean over seeds of ``||A - U S V^T||_F^2`` against ``(1 + epsilon) ||A - A_k||_F^2``.

    Seeds run from ``cfg.seed`` upwards. Returns ``(mean_sq, bound, passed)``.
    """
    if reference is None:
        reference = singular_values(a)
    optimal = float(math.fsum(s * s for s in reference[k:]))
    sq = [randomized_ksvd(a, replace(cfg, k=k, seed=cfg.seed + i)).residual_fro ** 2 for i in range(n_seeds)]
    mean_sq = statistics.fmean(sq)
    bound = (1.0 + epsilon) * optimal
    return mean_sq, bound, mean_sq <= bound


BASELINES = {
    "jacobi-values": singular_values,
    "jacobi-svd": lambda a: dense_svd(a).sigma,
}


def run_grid(kind_name, m, n_grid, k_fractions, cfg, baseline="jacobi-values",
             repetitions=DEFAULT_REPETITIONS, tolerance=DEFAULT_TOLERANCE, beta=None,
             audit=None, fallback_seeds=20, log=None):
    """Time the baseline and ``singular_values_only`` over an (n, fraction) grid.

    ``cfg`` supplies oversampling, q and seed; its ``k`` is replaced per row.
    The matrix seed is ``cfg.seed``. For sharp decay without an explicit
    ``beta`` the breakout sits at ``k + 1``, so the matrix changes with k;
    otherwise one matrix and one baseline timing serve every fraction of an n.

    Rows whose error exceeds ``tolerance`` are kept. If ``audit`` is a list,
    it receives one dict per row with the accuracy flag and, for flagged
    rows, the outcome of :func:`expectation_check` over ``fallback_seeds``.
    """
    if baseline not in BASELINES:
        raise ValueError(f"unknown baseline {baseline!r}, expected one of {sorted(BASELINES)}")
    oracle = BASELINES[baseline]
    rows = []
    cache = {}
    for n in n_grid:
        for frac in k_fractions:
            k = k_from_fraction(frac, n)
            if k > min(m, n):
                raise ValueError(f"k={k} from fraction {frac} exceeds min({m}, {n})")
            row_beta = beta if beta is not None else (k + 1 if kind_name == "sharp" else None)
            key = (n, row_beta)
            if key not in cache:
                a = synth_matrix(SynthSpec(m, n, parse_spectrum(kind_name, row_beta), cfg.seed))
                cache.clear()
                cache[key] = (a, time_solver(lambda: oracle(a), repetitions, baseline), singular_values(a))
            a, base_stats, reference = cache[key]
            row_cfg = replace(cfg, k=k)
            ours = time_solver(lambda: singular_values_only(a, row_cfg), repetitions, "rsvd-values")
            entry = {"spectrum": kind_name, "m": m, "n": n, "k": k, "k_fraction": frac, "beta": row_beta}
            context = dict(spectrum=kind_name, m=m, n=n, k_fraction=frac, k=k)
            if base_stats.ok and ours.ok:
                err = max_relative_error(singular_values_only(a, row_cfg), reference)
                row = speedup_ratio(base_stats, ours, max_rel_err=err, **context)
                entry["deterministic"] = base_stats.deterministic and ours.deterministic
                entry["median_competitor_s"] = base_stats.median_seconds
                entry["median_ours_s"] = ours.median_seconds
            else:
                nan = math.nan
                row = SpeedupRow(competitor=baseline, mean_competitor_s=base_stats.mean_seconds,
                                 std_competitor_s=base_stats.std_seconds, mean_ours_s=ours.mean_seconds,
                                 std_ours_s=ours.std_seconds, ratio=nan, band_lo=nan, band_hi=nan,
                                 max_rel_err=nan, **context)
                entry["error"] = base_stats.error or ours.error
            entry["flagged"] = row.violates(tolerance)
            if entry["flagged"] and "error" not in entry and fallback_seeds > 0:
                mean_sq, bound, passed = expectation_check(a, k, row_cfg, fallback_seeds, reference=reference)
                entry["fallback"] = {"mean_sq_residual": mean_sq, "bound": bound, "passed": passed}
            if audit is not None:
                audit.append(entry)
            if log is not None:
                log(row, entry)
            rows.append(row)
    return rows


# --------------------------------------------------------------------------
# CSV


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        return ""
    return format(value, ".17g")


def write_csv(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, name)) for name in CSV_COLUMNS])


_TYPES = {f.name: f.type for f in fields(SpeedupRow)}


def _parse(name, text):
    kind = _TYPES[name]
    if kind == "str":
        return text
    if kind == "int":
        return int(text)
    if text == "":
        return math.inf if name == "band_hi" else math.nan
    return float(text)


def read_csv(stream):
    """Parse rows written by :func:`write_csv`.

    An empty ``band_hi`` reads back as infinity; other empty floats as NaN.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header!r}")
    return [SpeedupRow(**{name: _parse(name, text) for name, text in zip(CSV_COLUMNS, rec)}) for rec in reader]


# --------------------------------------------------------------------------
# Presets


@dataclass(frozen=True)
class Preset:
    spectrum: str
    m: int
    n_grid: tuple
    power_q: int
    k_fractions: tuple = DEFAULT_FRACTIONS
    beta: float | None = None
    notes: str = field(default="", compare=False)


_SMALL = (100, 200, 400)
_LARGE = (250, 500, 1000, 2000)

# fast decay needs far more rounds than q=2 to hold 1e-8 at the 10% fraction
PRESETS = {
    "fast-small": Preset("fast", 500, _SMALL, 12),
    "sharp-small": Preset("sharp", 500, _SMALL, 4),
    "slow-small": Preset("slow", 500, _SMALL, 6),
    "fast": Preset("fast", 2000, _LARGE, 12),
    "sharp": Preset("sharp", 2000, _LARGE, 4),
    "slow": Preset("slow", 2000, _LARGE, 6),
    "perf": Preset("fast", 2000, (2000,), 2, (0.01,)),
}


def preset_config(preset, seed=0, oversample=10, power_q=None):
    q = preset.power_q if power_q is None else power_q
    return RsvdConfig(k=1, oversample=oversample, power_q=q, seed=seed)
