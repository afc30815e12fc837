"""
Experiment runner: studies over an n-grid, CSV tables and SVG convergence charts.

Configuration files are flat ``key = value`` text, one dotted key per line,
``#`` starting a comment::

    dist.kappa = 1
    dist.r = 0.5
    family.kind = cramer
    n_grid = 25, 100, 400, 1600
    x = 3
    estimator = largest_jump
    samples = 1000000
    seed = 20240601
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import dist, theory
from .dist import StretchedExpParams
from .errors import ConfigError
from .mc import ESTIMATORS
from .theory import BoundConfig
from .weights import WeightFamily, default_truncation_tol, limit_sum, load_explicit, realize

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "n", "a_max", "sum_weights", "x", "estimator", "p_hat", "stderr", "log_p_hat",
    "normalized_rate", "predicted_rate", "log_lower_bound", "log_upper_bound",
    "samples", "elapsed_seconds", "seed",
)

_KNOWN_KEYS = {
    "dist.kappa", "dist.r",
    "family.kind", "family.p", "family.rho", "family.window", "family.offset",
    "family.normalizer", "family.weights", "family.path",
    "n_grid", "x", "estimator", "samples", "seed", "truncation_tol", "output_path",
    "timing",
    "bound.epsilon", "bound.quad_rel_tol", "bound.lambda_grid", "bound.lower_epsilon",
    "bound.max_quad_groups",
}


@dataclass(frozen=True)
class ExperimentConfig:
    dist: StretchedExpParams
    family: WeightFamily
    n_grid: tuple
    x: float
    estimator: str = "largest_jump"
    samples: int = 100_000
    seed: int = 0
    bound_config: BoundConfig = field(default_factory=BoundConfig)
    truncation_tol: float | None = None  # None: tied to the regime gap at x
    output_path: str = "study.csv"
    lower_epsilon: float | None = None  # None: eps_n = a_max**(r/2)
    timing: bool = False

    def __post_init__(self):
        if not self.n_grid:
            raise ConfigError("n_grid is empty")
        grid = tuple(int(n) for n in self.n_grid)
        if any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"n_grid must be strictly increasing positive integers: {grid}")
        object.__setattr__(self, "n_grid", grid)
        if self.estimator not in ("naive", "largest_jump", "both"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.x > 0:
            raise ConfigError("x must be positive")
        D = self.limit.D
        if math.isfinite(D) and not self.x > D * dist.mean(self.dist):
            raise ConfigError(
                f"x={self.x} is not in the large-deviation regime: "
                f"D*E[X] = {D * dist.mean(self.dist):.6g}"
            )

    @property
    def limit(self):
        return limit_sum(self.family)

    @property
    def estimators(self):
        return ("naive", "largest_jump") if self.estimator == "both" else (self.estimator,)

    def tolerance(self) -> float:
        if self.truncation_tol is not None:
            return self.truncation_tol
        D = self.limit.D if math.isfinite(self.limit.D) else 0.0
        return default_truncation_tol(self.x, D, dist.mean(self.dist))


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _floats(s):
    return [float(v) for v in s.replace(",", " ").split()]


def config_from_dict(kv: dict, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        params = StretchedExpParams(float(kv.get("dist.kappa", 1.0)), float(kv.get("dist.r", 0.5)))
        kind = kv.get("family.kind", "cramer")
        fam_kw = {}
        for key in ("p",):
            if f"family.{key}" in kv:
                fam_kw[key] = float(kv[f"family.{key}"])
        for key in ("rho", "window", "offset", "normalizer"):
            if f"family.{key}" in kv:
                fam_kw[key] = kv[f"family.{key}"]
        if kind == "explicit":
            if "family.path" in kv:
                path = Path(kv["family.path"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                fam_kw["explicit"] = load_explicit(path)
            elif "family.weights" in kv:
                fam_kw["explicit"] = _floats(kv["family.weights"])
        family = WeightFamily(kind, **fam_kw)

        bound_kw = {}
        if "bound.epsilon" in kv:
            bound_kw["epsilon"] = float(kv["bound.epsilon"])
        if "bound.quad_rel_tol" in kv:
            bound_kw["quad_rel_tol"] = float(kv["bound.quad_rel_tol"])
        if "bound.lambda_grid" in kv:
            bound_kw["lambda_grid"] = tuple(_floats(kv["bound.lambda_grid"]))
        if "bound.max_quad_groups" in kv:
            bound_kw["max_quad_groups"] = int(kv["bound.max_quad_groups"])
        lower_eps = kv.get("bound.lower_epsilon", "auto")
        tol = kv.get("truncation_tol", "auto")
        return ExperimentConfig(
            dist=params,
            family=family,
            n_grid=tuple(int(v) for v in _floats(kv.get("n_grid", ""))),
            x=float(kv["x"]) if "x" in kv else math.nan,
            estimator=kv.get("estimator", "largest_jump"),
            samples=int(float(kv.get("samples", 100_000))),
            seed=int(kv.get("seed", 0)),
            bound_config=BoundConfig(**bound_kw),
            truncation_tol=None if tol == "auto" else float(tol),
            output_path=kv.get("output_path", "study.csv"),
            lower_epsilon=None if lower_eps == "auto" else float(lower_eps),
            timing=kv.get("timing", "false").lower() in ("1", "true", "yes"),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(parse_kv(text), base_dir=path.parent)


def row_seed(seed: int, n: int, estimator: str) -> int:
    """Per-row seed derived from (seed, n, estimator) so rows use unrelated streams."""
    est_id = ("naive", "largest_jump").index(estimator)
    ss = np.random.SeedSequence([int(seed), int(n), est_id])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class StudyReport:
    rows: list
    max_relative_gap: float
    summary: str


def bounds_for(config: ExperimentConfig, wv):
    params = config.dist
    eps = config.lower_epsilon
    if eps is None:
        eps = theory.lower_epsilon_schedule(wv, params)
    lower = theory.certified_lower_bound(wv, config.x, params, eps)
    upper = theory.certified_upper_bound(wv, config.x, params, config.bound_config)
    return lower, upper


def run_study(config: ExperimentConfig, workers: int = 1) -> StudyReport:
    """One row per (n, estimator); see :data:`CSV_COLUMNS`."""
    params = config.dist
    D = config.limit.D
    if not math.isfinite(D):
        raise ConfigError("family has no usable limit sum D")
    rate = theory.rate_function(config.x, params, D)
    tol = config.tolerance()
    rows = []
    for n in config.n_grid:
        wv = realize(config.family, n, tol)
        lower, upper = bounds_for(config, wv)
        for name in config.estimators:
            seed = row_seed(config.seed, n, name)
            est = ESTIMATORS[name](wv, config.x, params, config.samples, seed, workers)
            log.info("n=%d %s p_hat=%.6g rel_err=%.3g (%.1fs)", n, name, est.p_hat,
                     est.relative_error, est.elapsed_seconds)
            rows.append({
                "n": n,
                "a_max": wv.a_max,
                "sum_weights": wv.sum,
                "x": config.x,
                "estimator": name,
                "p_hat": est.p_hat,
                "stderr": est.stderr,
                "log_p_hat": est.log_p_hat,
                "normalized_rate": est.normalized_rate,
                "predicted_rate": -rate,
                "log_lower_bound": lower.log_lower,
                "log_upper_bound": upper.log_upper,
                "samples": est.samples,
                "elapsed_seconds": est.elapsed_seconds if config.timing else 0.0,
                "seed": seed,
            })
    last = [r for r in rows if r["n"] == config.n_grid[-1]]
    gap = max(abs(r["normalized_rate"] - r["predicted_rate"]) / abs(r["predicted_rate"])
              for r in last)
    summary = (f"max |normalized_rate - predicted_rate| / |predicted_rate| at n={config.n_grid[-1]}:"
               f" {gap:.6g}")
    return StudyReport(rows, gap, summary)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return format(v, ".17g")
    return str(v)


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows, path) -> None:
    Path(path).write_text(format_csv(rows))


def read_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k in ("n", "samples", "seed"):
                    row[k] = int(v)
                elif k == "estimator":
                    row[k] = v
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def emit_svg(rows, width: int = 640, height: int = 400) -> str | None:
    """
    Line chart of normalized_rate against n (log axis) with a horizontal
    reference line at predicted_rate. Returns None (with a logged notice)
    when fewer than two rows are given.
    """
    if len(rows) < 2:
        log.warning("SVG skipped: need at least 2 rows, got %d", len(rows))
        return None
    ref = float(rows[0]["predicted_rate"])
    series = {}
    for r in rows:
        if math.isfinite(r["normalized_rate"]):
            series.setdefault(r["estimator"], []).append((r["n"], r["normalized_rate"]))
    ns = [r["n"] for r in rows]
    ys = [y for pts in series.values() for _, y in pts] + [ref]
    lx0, lx1 = math.log10(min(ns)), math.log10(max(ns))
    if lx1 == lx0:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    y0, y1 = min(ys + [0.0]), max(ys + [0.0])
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def px(n):
        return left + (math.log10(n) - lx0) / (lx1 - lx0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    colors = {"largest_jump": "#1f77b4", "naive": "#2ca02c"}
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">n (log scale)</text>',
        f'<text x="14" y="{top + ph / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">a_max^r log p</text>',
    ]
    for n in sorted(set(ns)):
        out.append(f'<text x="{px(n):.2f}" y="{top + ph + 16}" font-size="10" '
                   f'text-anchor="middle">{n}</text>')
    for y in (y0 + pad, ref, y1 - pad):
        out.append(f'<text x="{left - 6}" y="{py(y) + 3:.2f}" font-size="10" '
                   f'text-anchor="end">{y:.3g}</text>')
    for name, pts in series.items():
        coords = " ".join(f"{px(n):.2f},{py(y):.2f}" for n, y in pts)
        out.append(f'<polyline class="data" data-estimator="{escape(name)}" fill="none" '
                   f'stroke="{colors.get(name, "#d62728")}" stroke-width="2" points="{coords}"/>')
    out.append(f'<polyline class="reference" data-value="{_fmt(ref)}" fill="none" '
               f'stroke="#d62728" stroke-dasharray="6 4" '
               f'points="{px(10 ** lx0):.2f},{py(ref):.2f} {px(10 ** lx1):.2f},{py(ref):.2f}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(config, **kw) if kw else config
